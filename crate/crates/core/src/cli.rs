//! The `pan` command line.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Axis;
use serde_json::{json, Value};

use crate::centrality::{
    degree_centrality, eigenvector_centrality, subgraph_centrality_exact, subgraph_centrality_series, top_fraction,
    Measure,
};
use crate::dataio::{load_dataset, save_dataset, split_dataset, Dataset, SplitSpec, Task};
use crate::error::{PanError, Result};
use crate::graph::{CsrGraph, Label};
use crate::met::{met_matrix, NormMode, SeriesWeights};
use crate::pointpattern::{
    generate_dataset, FeatureMode, GenerateConfig, PatternKind, PointPattern, SizeDistribution, ThresholdGraphConfig,
};
use crate::trainer::{evaluate, load_checkpoint, run_experiment, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(name = "pan", version, about = "Path integral graph networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate HD / Poisson / RSA patterns and write a PANDS1 dataset.
    GeneratePointpattern(GenerateArgs),
    /// Run an experiment from a TOML or JSON config.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset split.
    Evaluate(EvaluateArgs),
    /// Emit node-importance values and top-fraction node sets as JSON.
    Centrality(CentralityArgs),
    /// Print the partition vector, diagonal and row sums of a MET matrix.
    MetInspect(MetInspectArgs),
    /// Finite-difference gradient check of a configured model.
    CheckGrad(CheckGradArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_delimiter = ',', default_value = "hd,poisson,rsa")]
    pub classes: Vec<String>,
    #[arg(long, default_value_t = 0.3)]
    pub phi_rsa: f64,
    #[arg(long, default_value_t = 10)]
    pub per_class: usize,
    /// Node range as MIN..MAX (inclusive).
    #[arg(long, default_value = "100..1000")]
    pub nodes: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub sweeps: usize,
    #[arg(long, value_enum, default_value_t = SizeDist::Uniform)]
    pub size_dist: SizeDist,
    /// `scalar` or `onehot[:CAP]`.
    #[arg(long, default_value = "scalar")]
    pub features: String,
    #[arg(long, default_value_t = 4.0)]
    pub threshold_factor: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SizeDist {
    Uniform,
    SideUniform,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `key=value` pairs applied to the config, e.g. `model.L=1 model.pool=topk_only`.
    #[arg(long = "override", num_args = 1.., action = clap::ArgAction::Append)]
    pub overrides: Vec<String>,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum SplitName {
    Train,
    Val,
    Test,
    All,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitName::Test)]
    pub split: SplitName,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct CentralityArgs {
    /// `DATASET:INDEX` or a builtin graph (`p2`, `p3`, `k3`, `s3`).
    #[arg(long)]
    pub graph_from: String,
    #[arg(long, value_delimiter = ',', default_value = "dc,ec,sc,metdiag,metdiag-unnorm")]
    pub measures: Vec<String>,
    #[arg(long, default_value_t = 0.2)]
    pub top_frac: f64,
    /// Trained model, needed for `hybrid`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long = "L", default_value_t = 4)]
    pub cutoff: usize,
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    #[arg(long, default_value = "sym")]
    pub mode: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetInspectArgs {
    #[arg(long)]
    pub graph_from: String,
    #[arg(long = "L", default_value_t = 2)]
    pub cutoff: usize,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub weights: Option<Vec<f64>>,
    #[arg(long, default_value = "sym")]
    pub mode: String,
}

#[derive(Debug, Args)]
pub struct CheckGradArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,
    /// Number of dataset graphs in the checked loss.
    #[arg(long, default_value_t = 2)]
    pub graphs: usize,
    #[arg(long = "override", num_args = 1.., action = clap::ArgAction::Append)]
    pub overrides: Vec<String>,
}

/// Usage and configuration problems map to exit code 2, everything else to 1.
pub fn exit_code_for(e: &PanError) -> u8 {
    match e {
        PanError::Config(_) | PanError::MissingFile(_) | PanError::InvalidArgument(_) => 2,
        _ => 1,
    }
}

/// Parses `std::env::args` and runs; used by the binary.
pub fn main_entry() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Err(e) = check_thread_env() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

/// `PAN_NUM_THREADS`, when set, must be a positive integer.
pub fn check_thread_env() -> Result<Option<usize>> {
    match std::env::var("PAN_NUM_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(PanError::Config(format!("PAN_NUM_THREADS must be a positive integer, got '{v}'"))),
        },
    }
}

/// Runs one subcommand, returning the process exit code on success.
pub fn run(cmd: Command) -> Result<u8> {
    match cmd {
        Command::GeneratePointpattern(a) => cmd_generate(a),
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Centrality(a) => cmd_centrality(a),
        Command::MetInspect(a) => cmd_met_inspect(a),
        Command::CheckGrad(a) => cmd_check_grad(a),
    }
}

fn parse_range(s: &str) -> Result<(usize, usize)> {
    let bad = || PanError::InvalidArgument(format!("node range must be MIN..MAX, got '{s}'"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let lo = a.trim().parse().map_err(|_| bad())?;
    let hi = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
    Ok((lo, hi))
}

fn parse_feature_mode(s: &str) -> Result<FeatureMode> {
    match s.split_once(':') {
        None if s == "scalar" => Ok(FeatureMode::ScalarDegree),
        None if s == "onehot" => Ok(FeatureMode::OneHotDegree(64)),
        Some(("onehot", cap)) => cap
            .parse()
            .map(FeatureMode::OneHotDegree)
            .map_err(|_| PanError::InvalidArgument(format!("bad one-hot cap '{cap}'"))),
        _ => Err(PanError::InvalidArgument(format!("unknown feature mode '{s}'"))),
    }
}

/// Builds the dataset described by the generate flags.
pub fn generate_from_args(a: &GenerateArgs) -> Result<Dataset> {
    let classes = a.classes.iter().map(|c| PatternKind::parse(c.trim())).collect::<Result<Vec<_>>>()?;
    if classes.is_empty() {
        return Err(PanError::InvalidArgument("no classes requested".into()));
    }
    let cfg = GenerateConfig {
        classes: classes.clone(),
        phi_rsa: a.phi_rsa,
        graphs_per_class: a.per_class,
        node_range: parse_range(&a.nodes)?,
        seed: a.seed,
        mc_sweeps: a.sweeps,
        size_distribution: match a.size_dist {
            SizeDist::Uniform => SizeDistribution::Uniform,
            SizeDist::SideUniform => SizeDistribution::SideUniform,
        },
        graph: ThresholdGraphConfig {
            threshold_factor: a.threshold_factor,
            feature_mode: parse_feature_mode(&a.features)?,
        },
        max_rsa_attempts: 10_000_000,
    };
    let samples = generate_dataset(&cfg)?;
    // labels are fixed per kind; keep them contiguous when a subset of classes is requested
    let mut kinds: Vec<usize> = classes.iter().map(|k| k.label()).collect();
    kinds.sort_unstable();
    kinds.dedup();
    let (graphs, patterns): (Vec<CsrGraph>, Vec<PointPattern>) = samples
        .into_iter()
        .map(|s| {
            let l = s.graph.label().class().expect("class label");
            let remapped = kinds.iter().position(|&k| k == l).expect("known kind");
            (s.graph.with_label(Label::Class(remapped)), s.pattern)
        })
        .unzip();
    Dataset::new("pointpattern", graphs, Task::Classify(kinds.len()))?.with_positions(patterns)
}

fn cmd_generate(a: GenerateArgs) -> Result<u8> {
    if a.phi_rsa == 0.0 && a.classes.iter().any(|c| c.eq_ignore_ascii_case("rsa")) {
        eprintln!("warning: --phi-rsa 0 makes the RSA class a Poisson process");
    }
    let ds = generate_from_args(&a)?;
    save_dataset(&ds, &a.out)?;
    println!(
        "{}",
        json!({
            "path": a.out.display().to_string(),
            "graphs": ds.len(),
            "classes": ds.task.num_outputs(),
            "avg_nodes": ds.avg_nodes(),
            "avg_edges": ds.avg_edges(),
            "feature_dim": ds.feature_dim,
        })
    );
    Ok(0)
}

fn cmd_train(a: TrainArgs) -> Result<u8> {
    let mut overrides = a.overrides.clone();
    if let Some(s) = a.seed {
        overrides.push(format!("optim.seed={s}"));
    }
    let mut cfg = ExperimentConfig::from_file(&a.config, &overrides)?;
    if let Some(dir) = a.out_dir {
        cfg.output.dir = Some(dir);
    }
    let report = run_experiment(&cfg)?;
    println!(
        "{}",
        json!({
            "dataset": report.dataset,
            "metric": report.metric,
            "test_metric": report.test_metric,
            "test_n": report.test_n,
            "best_epoch": report.best_epoch,
            "series_weights": report.series_weights,
            "output_dir": cfg.output.dir.map(|d| d.display().to_string()),
        })
    );
    Ok(0)
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<u8> {
    let ck = load_checkpoint(&a.checkpoint)?;
    let ds = load_dataset(&a.dataset)?;
    if ds.feature_dim != ck.model.feature_dim {
        return Err(PanError::InvalidArgument(format!(
            "checkpoint expects feature dim {}, dataset {} has feature dim {}",
            ck.model.feature_dim,
            a.dataset.display(),
            ds.feature_dim
        )));
    }
    if ds.task != ck.model.task {
        return Err(PanError::InvalidArgument(format!(
            "checkpoint task {:?} does not match dataset task {:?}",
            ck.model.task, ds.task
        )));
    }
    let spec = match ck.split {
        Some(s) => s,
        None => SplitSpec::new(0.8, 0.1, 0.1, 0)?,
    };
    let split = split_dataset(&ds, &spec)?;
    let idx: Vec<usize> = match a.split {
        SplitName::Train => split.train,
        SplitName::Val => split.val,
        SplitName::Test => split.test,
        SplitName::All => (0..ds.len()).collect(),
    };
    let ev = evaluate(&ck.model, &ds, &idx)?;
    let metric_name = match ds.task {
        Task::Classify(_) => "accuracy",
        Task::Regress => "mae",
    };
    if a.json {
        println!("{}", json!({"metric": ev.metric, "n": ev.n, "task": metric_name, "loss": ev.loss}));
    } else {
        println!("{metric_name} {} on {} graphs", ev.metric, ev.n);
    }
    Ok(0)
}

/// A graph plus its point coordinates when the source stores them.
pub struct GraphSource {
    pub graph: CsrGraph,
    pub positions: Option<PointPattern>,
}

/// Resolves `DATASET:INDEX` or one of the builtin names `p2`, `p3`, `k3`, `s3`.
pub fn resolve_graph(spec: &str) -> Result<GraphSource> {
    let builtin = |pairs: &[(usize, usize)], n| -> Result<GraphSource> {
        Ok(GraphSource {
            graph: CsrGraph::from_pairs(pairs, n)?,
            positions: None,
        })
    };
    match spec {
        "p2" => return builtin(&[(0, 1)], 2),
        "p3" => return builtin(&[(0, 1), (1, 2)], 3),
        "k3" => return builtin(&[(0, 1), (1, 2), (0, 2)], 3),
        "s3" | "star3" => return builtin(&[(0, 1), (0, 2), (0, 3)], 4),
        _ => {}
    }
    let (path, idx) = spec
        .rsplit_once(':')
        .ok_or_else(|| PanError::InvalidArgument(format!("graph source '{spec}' is not DATASET:INDEX or a builtin")))?;
    let index: usize = idx
        .parse()
        .map_err(|_| PanError::InvalidArgument(format!("bad graph index '{idx}'")))?;
    let ds = load_dataset(Path::new(path))?;
    if index >= ds.len() {
        return Err(PanError::InvalidArgument(format!("graph index {index} out of range for {} graphs", ds.len())));
    }
    let positions = ds.positions.as_ref().map(|p| p[index].clone());
    Ok(GraphSource {
        graph: ds.graphs[index].clone(),
        positions,
    })
}

fn series_weights(cutoff: usize, weights: &Option<Vec<f64>>) -> Result<SeriesWeights> {
    match weights {
        None => Ok(SeriesWeights::uniform(cutoff)),
        Some(w) => {
            if w.len() != cutoff + 1 {
                return Err(PanError::InvalidArgument(format!(
                    "--weights needs L+1 = {} values, got {}",
                    cutoff + 1,
                    w.len()
                )));
            }
            SeriesWeights::from_weights(w)
        }
    }
}

/// Values of one measure on `g`.
pub fn measure_values(
    g: &CsrGraph,
    m: Measure,
    weights: &SeriesWeights,
    mode: NormMode,
    checkpoint: Option<&Path>,
) -> Result<Vec<f64>> {
    Ok(match m {
        Measure::Degree => degree_centrality(g).values.to_vec(),
        Measure::Eigenvector => eigenvector_centrality(g, 1e-12, 100_000)?.values.to_vec(),
        Measure::SubgraphSeries => subgraph_centrality_series(g, 30).values.to_vec(),
        Measure::SubgraphExact => subgraph_centrality_exact(g)?.values.to_vec(),
        Measure::MetDiag => met_matrix(g.adj(), weights, mode)?.diag.to_vec(),
        Measure::MetDiagUnnorm => met_matrix(g.adj(), weights, NormMode::Unnormalized)?.diag.to_vec(),
        Measure::HybridScore => {
            let path = checkpoint
                .ok_or_else(|| PanError::InvalidArgument("measure 'hybrid' needs --checkpoint".into()))?;
            load_checkpoint(path)?.model.first_pool_scores(g)?
        }
    })
}

fn cmd_centrality(a: CentralityArgs) -> Result<u8> {
    let src = resolve_graph(&a.graph_from)?;
    let weights = series_weights(a.cutoff, &a.weights)?;
    let mode = NormMode::parse(&a.mode)?;
    let measures = a.measures.iter().map(|m| Measure::parse(m.trim())).collect::<Result<Vec<_>>>()?;
    let mut out = serde_json::Map::new();
    for m in measures {
        let values = measure_values(&src.graph, m, &weights, mode, a.checkpoint.as_deref())?;
        let selected = top_fraction(&values, a.top_frac)?;
        out.insert(m.short_name().into(), json!({"values": values, "selected": selected}));
    }
    let doc = json!({
        "graph": a.graph_from,
        "num_nodes": src.graph.node_count(),
        "edges": src.graph.adj().to_edge_list().iter().filter(|e| e.0 < e.1).map(|e| [e.0, e.1]).collect::<Vec<_>>(),
        "top_frac": a.top_frac,
        "positions": src.positions.map(|p| p.points),
        "measures": Value::Object(out),
    });
    let text = serde_json::to_string_pretty(&doc)?;
    match a.out {
        Some(p) => std::fs::write(p, text)?,
        None => println!("{text}"),
    }
    Ok(0)
}

fn cmd_met_inspect(a: MetInspectArgs) -> Result<u8> {
    let src = resolve_graph(&a.graph_from)?;
    let weights = series_weights(a.cutoff, &a.weights)?;
    let mode = NormMode::parse(&a.mode)?;
    let met = met_matrix(src.graph.adj(), &weights, mode)?;
    let row_sums = met.m.sum_axis(Axis(1)).to_vec();
    let mut doc = json!({
        "num_nodes": met.size(),
        "L": met.cutoff,
        "mode": mode,
        "weights": weights.weights(),
        "z": met.z.to_vec(),
        "diag": met.diag.to_vec(),
        "row_sums": row_sums,
        "max_row_sum_error": row_sums.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max),
    });
    if met.size() <= 16 {
        doc["matrix"] = json!(met.m.rows().into_iter().map(|r| r.to_vec()).collect::<Vec<_>>());
    }
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(0)
}

fn cmd_check_grad(a: CheckGradArgs) -> Result<u8> {
    let cfg = ExperimentConfig::from_file(&a.config, &a.overrides)?;
    cfg.validate()?;
    let ds = cfg.dataset.load()?;
    if ds.is_empty() {
        return Err(PanError::InvalidArgument("dataset has no graphs".into()));
    }
    let model = crate::trainer::build_model(&cfg.model, ds.feature_dim, ds.task, cfg.optim.seed)?;
    let graphs: Vec<&CsrGraph> = ds.graphs.iter().take(a.graphs.max(1)).collect();
    let check = model.grad_check(&graphs, a.eps)?;
    let groups: serde_json::Map<String, Value> = model
        .names
        .iter()
        .zip(&check.per_param)
        .map(|(n, e)| (n.clone(), json!(e)))
        .collect();
    let pass = check.max_error() < 1e-4;
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "eps": a.eps,
            "max_error": check.max_error(),
            "pass": pass,
            "groups": groups,
        }))?
    );
    Ok(if pass { 0 } else { 1 })
}
