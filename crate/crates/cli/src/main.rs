//! Command-line pipeline around the runfuse library: build indices, produce
//! lexical / dense / hybrid / feedback retrieval runs, fuse run pools,
//! rescore with a trained linear ranker, and evaluate or ablate the result.
//!
//! Exit codes: 0 on success, 1 on data or compute errors, 2 on usage errors.

mod ablate;
mod pools;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use runfuse::dense::{hybrid_search, DenseStore, HybridParams};
use runfuse::eval::{
    evaluate, metric_per_topic, paired_t_test, residual_filter, Cutoffs, Metric, Qrels,
};
use runfuse::fusion::{
    hierarchical_fuse, rescore_top, rrf_fuse, weighted_hierarchical_fuse, FusionParams,
};
use runfuse::io::{parse_qrels, parse_run, parse_topics, write_run, Run, Topic};
use runfuse::lexical::{
    make_query, pseudo_feedback_expand, relevance_feedback_expand, Bm25Params, FieldSource,
    InvertedIndex, TopicField,
};
use runfuse::ltr::{train_linear, LinearScorer, TrainingExample};

#[derive(Parser)]
#[command(
    name = "runfuse",
    version,
    about = "Retrieval, rank fusion, and evaluation pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an inverted index over one corpus field.
    Index(IndexArgs),
    /// BM25 retrieval over an index, with optional feedback expansion.
    Search(SearchArgs),
    /// Exact dot-product retrieval over a vector file.
    DenseSearch(DenseSearchArgs),
    /// Hybrid dense+BM25 retrieval.
    HybridSearch(HybridSearchArgs),
    /// Fuse a pool configuration into a single run.
    Fuse(FuseArgs),
    /// Re-rank the top of a run with a trained linear scorer.
    Rescore(RescoreArgs),
    /// Train a linear scorer on a feature file.
    LtrTrain(LtrTrainArgs),
    /// Produce a run by scoring a feature file.
    LtrScore(LtrScoreArgs),
    /// Evaluate a run against qrels.
    Eval(EvalArgs),
    /// Evaluate fused pool subsets and test them against a baseline row.
    Ablate(AblateArgs),
    /// Paired t-test between two runs on one metric.
    Ttest(TtestArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum IndexFieldArg {
    Abstract,
    #[value(name = "full-text")]
    FullText,
}

impl From<IndexFieldArg> for FieldSource {
    fn from(value: IndexFieldArg) -> Self {
        match value {
            IndexFieldArg::Abstract => FieldSource::Abstract,
            IndexFieldArg::FullText => FieldSource::FullText,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FieldArg {
    Query,
    Question,
    Narrative,
}

impl From<FieldArg> for TopicField {
    fn from(value: FieldArg) -> Self {
        match value {
            FieldArg::Query => TopicField::Query,
            FieldArg::Question => TopicField::Question,
            FieldArg::Narrative => TopicField::Narrative,
        }
    }
}

#[derive(Args)]
struct IndexArgs {
    /// JSON-Lines corpus file.
    #[arg(long)]
    corpus: PathBuf,
    /// Which document field to index.
    #[arg(long, value_enum)]
    field: IndexFieldArg,
    /// Output index file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Bm25Args {
    /// BM25 term-frequency saturation.
    #[arg(long, default_value_t = 1.2)]
    k1: f64,
    /// BM25 length normalization in [0, 1].
    #[arg(long, default_value_t = 0.75)]
    b: f64,
}

impl Bm25Args {
    fn params(&self) -> Bm25Params {
        Bm25Params {
            k: self.k1,
            b: self.b,
        }
    }
}

/// `pseudo:N_DOCS,N_TERMS` or `rf:N_DOCS,N_TERMS`.
#[derive(Clone, Copy)]
enum ExpandSpec {
    Pseudo { n_docs: usize, n_terms: usize },
    RelevanceFeedback { n_docs: usize, n_terms: usize },
}

fn parse_expand(value: &str) -> Result<ExpandSpec, String> {
    let (kind, counts) = value
        .split_once(':')
        .ok_or_else(|| "expected KIND:N_DOCS,N_TERMS".to_string())?;
    let (docs, terms) = counts
        .split_once(',')
        .ok_or_else(|| "expected KIND:N_DOCS,N_TERMS".to_string())?;
    let n_docs: usize = docs
        .parse()
        .map_err(|_| format!("invalid doc count `{docs}`"))?;
    let n_terms: usize = terms
        .parse()
        .map_err(|_| format!("invalid term count `{terms}`"))?;
    if n_docs == 0 || n_terms == 0 {
        return Err("doc and term counts must be >= 1".to_string());
    }
    match kind {
        "pseudo" => Ok(ExpandSpec::Pseudo { n_docs, n_terms }),
        "rf" => Ok(ExpandSpec::RelevanceFeedback { n_docs, n_terms }),
        other => Err(format!("unknown expansion kind `{other}` (pseudo or rf)")),
    }
}

#[derive(Args)]
struct SearchArgs {
    /// Index file produced by `index`.
    #[arg(long)]
    index: PathBuf,
    /// Topics XML file.
    #[arg(long)]
    topics: PathBuf,
    /// Topic fields forming the query, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', required = true)]
    fields: Vec<FieldArg>,
    #[command(flatten)]
    bm25: Bm25Args,
    /// Results per topic.
    #[arg(long, default_value_t = 1000)]
    top_k: usize,
    /// Run tag written to the output.
    #[arg(long)]
    tag: String,
    /// Query expansion: `pseudo:N_DOCS,N_TERMS` or `rf:N_DOCS,N_TERMS`
    /// (`rf` needs --qrels).
    #[arg(long, value_parser = parse_expand)]
    expand: Option<ExpandSpec>,
    /// Relevance judgments for `rf` expansion.
    #[arg(long)]
    qrels: Option<PathBuf>,
    /// Output run file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DenseSearchArgs {
    /// Vector file with `topic:` and `doc:` records.
    #[arg(long)]
    vectors: PathBuf,
    /// Restrict topics to this topics XML file (default: all topic vectors).
    #[arg(long)]
    topics: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    top_k: usize,
    #[arg(long)]
    tag: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct HybridSearchArgs {
    #[arg(long)]
    vectors: PathBuf,
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    topics: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', required = true)]
    fields: Vec<FieldArg>,
    /// Weight of the dense dot product.
    #[arg(long)]
    lambda: f64,
    #[command(flatten)]
    bm25: Bm25Args,
    #[arg(long, default_value_t = 1000)]
    top_k: usize,
    #[arg(long)]
    tag: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum FuseMode {
    Flat,
    Hierarchical,
    Weighted,
}

#[derive(Args)]
struct FuseArgs {
    /// Pool configuration JSON.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum)]
    mode: FuseMode,
    /// Reciprocal-rank constant.
    #[arg(long, default_value_t = 60.0)]
    k: f64,
    /// Output run tag (default depends on mode: RRF, h-RRF, h_w-RRF).
    #[arg(long)]
    tag: Option<String>,
    /// Truncate each topic to this depth after fusion.
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RescoreArgs {
    /// Input run file.
    #[arg(long)]
    run: PathBuf,
    /// JSON-Lines feature file covering the run's top entries.
    #[arg(long)]
    features: PathBuf,
    /// Scorer JSON produced by `ltr-train`.
    #[arg(long)]
    scorer: PathBuf,
    /// How many top entries per topic to rescore (the rest are dropped).
    #[arg(long, default_value_t = 2000)]
    top: usize,
    /// Output run tag (default: input tag).
    #[arg(long)]
    tag: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LtrTrainArgs {
    #[arg(long)]
    features: PathBuf,
    /// Candidate subset size per step (one positive + subset-size - 1 negatives).
    #[arg(long, default_value_t = 12)]
    subset_size: usize,
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output scorer JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LtrScoreArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    scorer: PathBuf,
    #[arg(long)]
    tag: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    /// Prior-round qrels; judged documents are filtered out before scoring.
    #[arg(long)]
    prior_qrels: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    ndcg_k: usize,
    #[arg(long, default_value_t = 20)]
    p_k: usize,
    #[arg(long, default_value_t = 1000)]
    recall_k: usize,
    /// Emit the report as JSON instead of the tab-separated format.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct AblateArgs {
    /// Ablation configuration JSON.
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct TtestArgs {
    #[arg(long)]
    run_a: PathBuf,
    #[arg(long)]
    run_b: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    #[arg(long)]
    prior_qrels: Option<PathBuf>,
    /// Metric to compare: ndcg@K, p@K, map, or recall@K.
    #[arg(long)]
    metric: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Index(args) => cmd_index(args),
        Command::Search(args) => cmd_search(args),
        Command::DenseSearch(args) => cmd_dense_search(args),
        Command::HybridSearch(args) => cmd_hybrid_search(args),
        Command::Fuse(args) => cmd_fuse(args),
        Command::Rescore(args) => cmd_rescore(args),
        Command::LtrTrain(args) => cmd_ltr_train(args),
        Command::LtrScore(args) => cmd_ltr_score(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Ablate(args) => ablate::run(&args.config),
        Command::Ttest(args) => cmd_ttest(args),
    }
}

fn read(path: &PathBuf) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_topics(path: &PathBuf) -> Result<Vec<Topic>> {
    parse_topics(&read(path)?).with_context(|| format!("parsing topics {}", path.display()))
}

fn load_qrels(path: &PathBuf) -> Result<Qrels> {
    let parsed =
        parse_qrels(&read(path)?).with_context(|| format!("parsing qrels {}", path.display()))?;
    if parsed.dropped_negative > 0 || parsed.duplicates > 0 {
        eprintln!(
            "note: {}: dropped {} negative judgments, {} duplicate keys (last wins)",
            path.display(),
            parsed.dropped_negative,
            parsed.duplicates
        );
    }
    Ok(parsed.qrels)
}

fn load_run(path: &PathBuf) -> Result<Run> {
    parse_run(&read(path)?).with_context(|| format!("parsing run {}", path.display()))
}

fn write_run_file(path: &PathBuf, run: &Run) -> Result<()> {
    std::fs::write(path, write_run(run)).with_context(|| format!("writing {}", path.display()))
}

fn cmd_index(args: IndexArgs) -> Result<()> {
    let corpus = runfuse::io::load_corpus(&read(&args.corpus)?)
        .with_context(|| format!("parsing corpus {}", args.corpus.display()))?;
    let index = InvertedIndex::build(&corpus, args.field.into())?;
    index
        .save(&args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    eprintln!(
        "indexed {} docs, {} terms ({} field) -> {}",
        index.n_docs(),
        index.vocab_size(),
        index.field_source(),
        args.out.display()
    );
    Ok(())
}

fn cmd_search(args: SearchArgs) -> Result<()> {
    if matches!(args.expand, Some(ExpandSpec::RelevanceFeedback { .. })) && args.qrels.is_none() {
        // a missing companion flag is a usage error, exit code 2
        Cli::command()
            .error(
                ErrorKind::MissingRequiredArgument,
                "--expand rf:… requires --qrels",
            )
            .exit();
    }
    let index = InvertedIndex::load(&args.index)
        .with_context(|| format!("loading index {}", args.index.display()))?;
    let topics = load_topics(&args.topics)?;
    let qrels = args.qrels.as_ref().map(load_qrels).transpose()?;
    let params = args.bm25.params();
    let fields: Vec<TopicField> = args.fields.iter().map(|&f| f.into()).collect();

    let mut run = Run::new(args.tag.clone());
    for topic in &topics {
        let query = make_query(topic, &fields)?;
        let query = match args.expand {
            None => query,
            Some(ExpandSpec::Pseudo { n_docs, n_terms }) => {
                pseudo_feedback_expand(&index, &query, &params, n_docs, n_terms)?
            }
            Some(ExpandSpec::RelevanceFeedback { n_docs, n_terms }) => {
                let expansion = relevance_feedback_expand(
                    &index,
                    &query,
                    &params,
                    qrels.as_ref().expect("checked above"),
                    topic.number,
                    n_docs,
                    n_terms,
                )?;
                if expansion.feedback_docs == 0 {
                    eprintln!(
                        "note: topic {}: no judged-relevant documents retrieved; query unexpanded",
                        topic.number
                    );
                }
                expansion.query
            }
        };
        run.set_topic(topic.number, index.search(&query, &params, args.top_k)?);
    }
    write_run_file(&args.out, &run)
}

fn cmd_dense_search(args: DenseSearchArgs) -> Result<()> {
    let store = DenseStore::load(&args.vectors)
        .with_context(|| format!("loading vectors {}", args.vectors.display()))?;
    let topic_numbers: Vec<u32> = match &args.topics {
        Some(path) => load_topics(path)?.iter().map(|t| t.number).collect(),
        None => store.topics().collect(),
    };
    let mut run = Run::new(args.tag.clone());
    for number in topic_numbers {
        run.set_topic(number, store.search(number, args.top_k)?);
    }
    write_run_file(&args.out, &run)
}

fn cmd_hybrid_search(args: HybridSearchArgs) -> Result<()> {
    let store = DenseStore::load(&args.vectors)
        .with_context(|| format!("loading vectors {}", args.vectors.display()))?;
    let index = InvertedIndex::load(&args.index)
        .with_context(|| format!("loading index {}", args.index.display()))?;
    let topics = load_topics(&args.topics)?;
    let fields: Vec<TopicField> = args.fields.iter().map(|&f| f.into()).collect();
    let params = HybridParams {
        lambda: args.lambda,
        bm25: args.bm25.params(),
    };

    let mut run = Run::new(args.tag.clone());
    let mut reported = false;
    for topic in &topics {
        let result = hybrid_search(&store, &index, topic, &fields, &params, args.top_k)?;
        if !reported && (result.store_only > 0 || result.index_only > 0) {
            eprintln!(
                "note: candidate set is the store/index intersection \
                 ({} docs have only a vector, {} only an index entry)",
                result.store_only, result.index_only
            );
            reported = true;
        }
        run.set_topic(topic.number, result.hits);
    }
    write_run_file(&args.out, &run)
}

fn cmd_fuse(args: FuseArgs) -> Result<()> {
    let pools = pools::load_pools(&args.config)?;
    let params = FusionParams { k: args.k };
    let tag = args.tag.unwrap_or_else(|| {
        match args.mode {
            FuseMode::Flat => "RRF",
            FuseMode::Hierarchical => "h-RRF",
            FuseMode::Weighted => "h_w-RRF",
        }
        .to_string()
    });
    let mut fused = match args.mode {
        FuseMode::Flat => {
            let runs: Vec<Run> = pools.into_iter().flat_map(|p| p.runs).collect();
            rrf_fuse(&runs, &params, &tag)?
        }
        FuseMode::Hierarchical => hierarchical_fuse(&pools, &params, &tag)?,
        FuseMode::Weighted => weighted_hierarchical_fuse(&pools, &params, &tag)?,
    };
    if let Some(depth) = args.depth {
        fused.truncate_depth(depth);
    }
    write_run_file(&args.out, &fused)
}

/// Feature rows keyed by (topic, doc), validated against a scorer dimension.
fn feature_map(
    examples: &[TrainingExample],
    expected_dim: Option<usize>,
) -> Result<BTreeMap<(u32, String), Vec<f64>>> {
    let mut map = BTreeMap::new();
    for example in examples {
        for candidate in &example.candidates {
            if let Some(dim) = expected_dim {
                if candidate.features.len() != dim {
                    bail!(
                        "feature dimension {} for topic {} doc {} (scorer expects {dim})",
                        candidate.features.len(),
                        example.topic,
                        candidate.doc_id
                    );
                }
            }
            map.insert(
                (example.topic, candidate.doc_id.clone()),
                candidate.features.clone(),
            );
        }
    }
    Ok(map)
}

fn cmd_rescore(args: RescoreArgs) -> Result<()> {
    let run = load_run(&args.run)?;
    let scorer = LinearScorer::load(&args.scorer)
        .with_context(|| format!("loading scorer {}", args.scorer.display()))?;
    let examples = runfuse::ltr::load_features(&read(&args.features)?)
        .with_context(|| format!("parsing features {}", args.features.display()))?;
    let features = feature_map(&examples, Some(scorer.feature_dim()))?;

    let mut rescored = rescore_top(&run, args.top, |topic, doc| {
        features
            .get(&(topic, doc.to_string()))
            .map(|f| scorer.score(f).expect("feature dims validated"))
    })?;
    if let Some(tag) = args.tag {
        rescored.tag = tag;
    }
    write_run_file(&args.out, &rescored)
}

fn cmd_ltr_train(args: LtrTrainArgs) -> Result<()> {
    let examples = runfuse::ltr::load_features(&read(&args.features)?)
        .with_context(|| format!("parsing features {}", args.features.display()))?;
    let (trainable, skipped): (Vec<TrainingExample>, Vec<TrainingExample>) = examples
        .into_iter()
        .partition(TrainingExample::has_positive);
    if !skipped.is_empty() {
        eprintln!(
            "note: skipped {} topics without a positively labeled candidate",
            skipped.len()
        );
    }
    let scorer = train_linear(
        &trainable,
        args.subset_size,
        args.steps,
        args.learning_rate,
        args.seed,
    )?;
    let initial = runfuse::ltr::mean_loss(&LinearScorer::zeros(scorer.feature_dim()), &trainable)?;
    let trained = runfuse::ltr::mean_loss(&scorer, &trainable)?;
    eprintln!(
        "trained on {} topics, {} steps: mean loss {initial:.6} -> {trained:.6}",
        trainable.len(),
        args.steps
    );
    scorer
        .save(&args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    Ok(())
}

fn cmd_ltr_score(args: LtrScoreArgs) -> Result<()> {
    let scorer = LinearScorer::load(&args.scorer)
        .with_context(|| format!("loading scorer {}", args.scorer.display()))?;
    let examples = runfuse::ltr::load_features(&read(&args.features)?)
        .with_context(|| format!("parsing features {}", args.features.display()))?;
    let mut run = Run::new(args.tag.clone());
    for example in &examples {
        let mut scored: Vec<(String, f64)> = example
            .candidates
            .iter()
            .map(|c| Ok((c.doc_id.clone(), scorer.score(&c.features)?)))
            .collect::<Result<_>>()?;
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        run.set_topic(example.topic, scored);
    }
    write_run_file(&args.out, &run)
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let mut run = load_run(&args.run)?;
    let qrels = load_qrels(&args.qrels)?;
    if let Some(prior) = &args.prior_qrels {
        run = residual_filter(&run, &load_qrels(prior)?);
    }
    let cutoffs = Cutoffs {
        ndcg_k: args.ndcg_k,
        precision_k: args.p_k,
        recall_k: args.recall_k,
    };
    let evaluation = evaluate(&run, &qrels, &cutoffs)?;
    if evaluation.skipped_no_relevant > 0 || evaluation.skipped_unretrieved > 0 {
        eprintln!(
            "note: excluded {} topics without relevant docs, {} judged topics the run missed",
            evaluation.skipped_no_relevant, evaluation.skipped_unretrieved
        );
    }
    if args.json {
        println!("{}", serde_json::to_string_pretty(&evaluation)?);
    } else {
        print!("{}", evaluation.render());
    }
    Ok(())
}

fn cmd_ttest(args: TtestArgs) -> Result<()> {
    let metric: Metric = args.metric.parse().map_err(|e| anyhow::anyhow!("{e}"))?;
    let qrels = load_qrels(&args.qrels)?;
    let prior = args.prior_qrels.as_ref().map(load_qrels).transpose()?;
    let load_side = |path: &PathBuf| -> Result<BTreeMap<u32, f64>> {
        let mut run = load_run(path)?;
        if let Some(prior) = &prior {
            run = residual_filter(&run, prior);
        }
        Ok(metric_per_topic(&run, &qrels, metric)?)
    };
    let a = load_side(&args.run_a)?;
    let b = load_side(&args.run_b)?;
    // pair on the topics both runs can be evaluated over
    let common: Vec<u32> = a.keys().filter(|k| b.contains_key(k)).copied().collect();
    let a: BTreeMap<u32, f64> = common.iter().map(|&t| (t, a[&t])).collect();
    let b: BTreeMap<u32, f64> = common.iter().map(|&t| (t, b[&t])).collect();
    let report = paired_t_test(&a, &b)?;
    println!(
        "metric={} n={} t={:.6} p={:.6} significant(p<0.05)={} degenerate={}",
        metric.name(),
        report.n_pairs,
        report.t_statistic,
        report.p_value,
        if report.p_value < 0.05 { "yes" } else { "no" },
        report.degenerate
    );
    Ok(())
}
