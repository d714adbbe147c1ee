//! Ablation tables: fuse configured subsets of the run pools, evaluate each
//! fused run, and mark rows that differ significantly from a baseline row.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use runfuse::eval::{evaluate, paired_t_test, residual_filter, Cutoffs, Evaluation, Qrels};
use runfuse::fusion::{
    hierarchical_fuse, rrf_fuse, weighted_hierarchical_fuse, FusionParams, PoolConfig, RunPool,
};
use runfuse::io::Run;

use crate::pools::build_pools;

const SIGNIFICANCE_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
enum RowMode {
    #[default]
    Flat,
    Hierarchical,
    Weighted,
}

#[derive(Deserialize)]
struct AblateRow {
    name: String,
    /// Pool system names included in this row's fusion.
    systems: Vec<String>,
    #[serde(default)]
    mode: RowMode,
}

#[derive(Deserialize)]
struct CutoffsConfig {
    #[serde(default = "default_ndcg_k")]
    ndcg_k: usize,
    #[serde(default = "default_p_k")]
    precision_k: usize,
    #[serde(default = "default_recall_k")]
    recall_k: usize,
}

fn default_ndcg_k() -> usize {
    20
}
fn default_p_k() -> usize {
    20
}
fn default_recall_k() -> usize {
    1000
}

impl Default for CutoffsConfig {
    fn default() -> Self {
        CutoffsConfig {
            ndcg_k: 20,
            precision_k: 20,
            recall_k: 1000,
        }
    }
}

#[derive(Deserialize)]
struct AblateConfig {
    qrels: String,
    #[serde(default)]
    prior_qrels: Option<String>,
    #[serde(default = "default_k")]
    k: f64,
    #[serde(default)]
    cutoffs: CutoffsConfig,
    /// Name of the row other rows are tested against.
    baseline: String,
    pools: Vec<PoolConfig>,
    rows: Vec<AblateRow>,
}

fn default_k() -> f64 {
    60.0
}

struct RowResult {
    name: String,
    runs_fused: usize,
    evaluation: Evaluation,
}

pub fn run(config_path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(config_path)
        .with_context(|| format!("reading {}", config_path.display()))?;
    let config: AblateConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing ablation config {}", config_path.display()))?;
    let base = config_path.parent().unwrap_or_else(|| Path::new("."));

    let pools = build_pools(&config.pools, base)?;
    let by_name: BTreeMap<&str, &RunPool> =
        pools.iter().map(|p| (p.system_name.as_str(), p)).collect();
    let qrels = load_qrels(base, &config.qrels)?;
    let prior = config
        .prior_qrels
        .as_ref()
        .map(|p| load_qrels(base, p))
        .transpose()?;
    let cutoffs = Cutoffs {
        ndcg_k: config.cutoffs.ndcg_k,
        precision_k: config.cutoffs.precision_k,
        recall_k: config.cutoffs.recall_k,
    };
    let params = FusionParams { k: config.k };

    let mut rows = Vec::with_capacity(config.rows.len());
    for row in &config.rows {
        let subset: Vec<RunPool> = row
            .systems
            .iter()
            .map(|name| {
                by_name
                    .get(name.as_str())
                    .map(|&p| p.clone())
                    .ok_or_else(|| anyhow::anyhow!("row `{}`: unknown system `{name}`", row.name))
            })
            .collect::<Result<_>>()?;
        if subset.is_empty() {
            bail!("row `{}` selects no systems", row.name);
        }
        let (mut fused, runs_fused) = match row.mode {
            RowMode::Flat => {
                let runs: Vec<Run> = subset.iter().flat_map(|p| p.runs.clone()).collect();
                let n = runs.len();
                (rrf_fuse(&runs, &params, &row.name)?, n)
            }
            RowMode::Hierarchical => (
                hierarchical_fuse(&subset, &params, &row.name)?,
                subset.len(),
            ),
            RowMode::Weighted => (
                weighted_hierarchical_fuse(&subset, &params, &row.name)?,
                subset.len(),
            ),
        };
        if let Some(prior) = &prior {
            fused = residual_filter(&fused, prior);
        }
        let evaluation = evaluate(&fused, &qrels, &cutoffs)
            .with_context(|| format!("evaluating row `{}`", row.name))?;
        rows.push(RowResult {
            name: row.name.clone(),
            runs_fused,
            evaluation,
        });
    }

    let baseline = rows
        .iter()
        .position(|r| r.name == config.baseline)
        .ok_or_else(|| anyhow::anyhow!("baseline row `{}` not among the rows", config.baseline))?;

    print!("{}", render_table(&rows, baseline));
    Ok(())
}

fn load_qrels(base: &Path, path: &str) -> Result<Qrels> {
    let full = if Path::new(path).is_absolute() {
        Path::new(path).to_path_buf()
    } else {
        base.join(path)
    };
    let text = std::fs::read_to_string(&full)
        .with_context(|| format!("reading qrels {}", full.display()))?;
    Ok(runfuse::io::parse_qrels(&text)
        .with_context(|| format!("parsing qrels {}", full.display()))?
        .qrels)
}

/// One line per row: metric means at 4 decimals, `*` marking rows that
/// differ from the baseline at p < 0.05 (per metric, paired over the
/// topics both rows cover).
fn render_table(rows: &[RowResult], baseline: usize) -> String {
    let metric_names: Vec<String> = rows[baseline]
        .evaluation
        .results
        .iter()
        .map(|r| r.metric.clone())
        .collect();
    let mut out = String::from("row\truns");
    for name in &metric_names {
        out.push('\t');
        out.push_str(name);
    }
    out.push('\n');

    for (i, row) in rows.iter().enumerate() {
        out.push_str(&format!("{}\t{}", row.name, row.runs_fused));
        for name in &metric_names {
            let result = row
                .evaluation
                .result(name)
                .expect("all rows share the metric set");
            let mut cell = format!("{:.4}", result.mean);
            if i != baseline && significant(row, &rows[baseline], name) {
                cell.push('*');
            }
            out.push('\t');
            out.push_str(&cell);
        }
        out.push('\n');
    }
    out
}

fn significant(row: &RowResult, baseline: &RowResult, metric: &str) -> bool {
    let a = &row.evaluation.result(metric).unwrap().per_topic;
    let b = &baseline.evaluation.result(metric).unwrap().per_topic;
    let common: Vec<u32> = a.keys().filter(|k| b.contains_key(k)).copied().collect();
    if common.len() < 2 {
        return false;
    }
    let a: BTreeMap<u32, f64> = common.iter().map(|&t| (t, a[&t])).collect();
    let b: BTreeMap<u32, f64> = common.iter().map(|&t| (t, b[&t])).collect();
    // Degenerate reports already carry the right p: 1 for identical
    // samples, 0 for a constant nonzero difference.
    match paired_t_test(&a, &b) {
        Ok(report) => report.p_value < SIGNIFICANCE_LEVEL,
        Err(_) => false,
    }
}
