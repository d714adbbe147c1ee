//! Pool-configuration loading: a JSON list of
//! `{system_name, weight?, uses_relevance_judgments, run_files}` entries,
//! where `run_files` holds paths or globs resolved relative to the config
//! file. Omitted weights fall back to the judgment heuristic (2 for pools
//! built with prior relevance judgments, 1 otherwise).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use runfuse::fusion::{default_weight, PoolConfig, RunPool};
use runfuse::io::parse_run;

pub fn load_pools(config_path: &Path) -> Result<Vec<RunPool>> {
    let text = std::fs::read_to_string(config_path)
        .with_context(|| format!("reading {}", config_path.display()))?;
    let configs: Vec<PoolConfig> = serde_json::from_str(&text)
        .with_context(|| format!("parsing pool config {}", config_path.display()))?;
    let base = config_path.parent().unwrap_or_else(|| Path::new("."));
    build_pools(&configs, base)
}

pub fn build_pools(configs: &[PoolConfig], base: &Path) -> Result<Vec<RunPool>> {
    if configs.is_empty() {
        bail!("pool config lists no pools");
    }
    let mut pools = Vec::with_capacity(configs.len());
    for config in configs {
        let mut runs = Vec::new();
        for pattern in &config.run_files {
            for path in resolve(base, pattern)? {
                let text = std::fs::read_to_string(&path)
                    .with_context(|| format!("reading run {}", path.display()))?;
                let run =
                    parse_run(&text).with_context(|| format!("parsing run {}", path.display()))?;
                runs.push(run);
            }
        }
        if runs.is_empty() {
            bail!("pool `{}` matched no run files", config.system_name);
        }
        let weight = config
            .weight
            .unwrap_or_else(|| default_weight(config.uses_relevance_judgments));
        if !(weight.is_finite() && weight > 0.0) {
            bail!(
                "pool `{}` has non-positive weight {weight}",
                config.system_name
            );
        }
        pools.push(RunPool {
            system_name: config.system_name.clone(),
            runs,
            weight,
            uses_relevance_judgments: config.uses_relevance_judgments,
        });
    }
    Ok(pools)
}

/// Expand one path-or-glob against `base`, sorted for determinism.
fn resolve(base: &Path, pattern: &str) -> Result<Vec<PathBuf>> {
    let full = if Path::new(pattern).is_absolute() {
        PathBuf::from(pattern)
    } else {
        base.join(pattern)
    };
    let full_str = full.to_string_lossy().into_owned();
    if !full_str.contains(['*', '?', '[']) {
        if !full.exists() {
            bail!("run file {} does not exist", full.display());
        }
        return Ok(vec![full]);
    }
    let mut paths: Vec<PathBuf> = glob::glob(&full_str)
        .with_context(|| format!("bad glob pattern {full_str}"))?
        .collect::<Result<_, _>>()
        .with_context(|| format!("expanding glob {full_str}"))?;
    paths.sort();
    if paths.is_empty() {
        bail!("glob {full_str} matched nothing");
    }
    Ok(paths)
}
