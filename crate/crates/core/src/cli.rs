//! Command-line front end tying simulation, discovery, and evaluation into
//! reproducible file-based runs.
//!
//! Every command writes exactly one `manifest.json` into its output
//! directory recording the command, full configuration, inputs, outputs,
//! and wall-clock duration; given the same build, the manifest is enough
//! to reproduce the run byte for byte. Exit codes: 0 success (discovery
//! additionally requires an acyclic result), 1 usage, 2 data problem,
//! 3 optimization failure, 4 cyclic result. The environment variable
//! `RKHS_DAGMA_THREADS` caps internal parallelism (0 or unset picks the
//! hardware default).

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::acyclicity::DirectedGraph;
use crate::data::{self, DataError, Standardization};
use crate::kernel::{gram_bundle, KernelConfig, KernelError};
use crate::metrics::{
    self, corpus_accuracy, load_pairs_corpus, orient_pair, pairs_preprocess, Direction,
    MetricsError, PairDecision,
};
use crate::optimizer::{rkhs_dagma, AdamSettings, DagmaConfig, DagmaError};
use crate::representer::{eval_node_at, ModelParams, RepresenterError};
use crate::sem_sim::{simulate_sem, Mechanism, SemSpec, SimError};
use crate::thread_pool;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_OPTIMIZATION: u8 = 3;
const EXIT_CYCLIC: u8 = 4;

#[derive(Parser)]
#[command(
    name = "rkhs-dagma",
    version,
    about = "Nonparametric causal structure discovery with kernel-based score optimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random DAG and sample data from a structural equation model.
    Simulate(SimulateArgs),
    /// Estimate a weighted adjacency and thresholded graph from a data CSV.
    Discover(DiscoverArgs),
    /// Compare an estimated edge list against a ground-truth edge list.
    Evaluate(EvaluateArgs),
    /// Orient every two-variable dataset in a corpus directory.
    Pairs(PairsArgs),
    /// Evaluate a saved two-variable model on a grid for plotting.
    Toyplot(ToyplotArgs),
}

fn parse_mechanism(s: &str) -> Result<Mechanism, String> {
    match s {
        "gp" => Ok(Mechanism::Gp),
        "gp-additive" => Ok(Mechanism::GpAdditive),
        "mlp" => Ok(Mechanism::Mlp),
        "combinatorial" => Ok(Mechanism::Combinatorial),
        other => Err(format!(
            "unknown mechanism {other:?}; expected gp, gp-additive, mlp, or combinatorial"
        )),
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Number of variables.
    #[arg(long)]
    d: usize,
    /// Edge multiplier: the graph has m*d expected edges.
    #[arg(long)]
    m: usize,
    #[arg(long, value_parser = parse_mechanism)]
    mechanism: Mechanism,
    /// Number of samples.
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

/// Optimizer settings shared by `discover` and `pairs`; unset flags keep
/// the defaults.
#[derive(Args)]
struct ConfigArgs {
    /// Initial annealing weight.
    #[arg(long)]
    mu0: Option<f64>,
    /// Geometric annealing decay per round.
    #[arg(long)]
    decay: Option<f64>,
    /// Sparsity weight.
    #[arg(long)]
    tau: Option<f64>,
    /// Function-norm weight.
    #[arg(long)]
    lambda: Option<f64>,
    /// Log-det scale.
    #[arg(long)]
    s: Option<f64>,
    /// Outer rounds before thresholding.
    #[arg(long)]
    rounds: Option<usize>,
    /// Edge threshold.
    #[arg(long)]
    omega: Option<f64>,
    /// Kernel bandwidth; defaults to 0.4 * d.
    #[arg(long)]
    gamma: Option<f64>,
    /// Standardize columns before fitting.
    #[arg(long)]
    standardize: bool,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Gradient steps per outer round.
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    grad_tolerance: Option<f64>,
}

impl ConfigArgs {
    fn to_config(&self) -> DagmaConfig {
        let mut cfg = DagmaConfig::default();
        let mut adam = AdamSettings::default();
        if let Some(v) = self.mu0 {
            cfg.mu0 = v;
        }
        if let Some(v) = self.decay {
            cfg.decay = v;
        }
        if let Some(v) = self.tau {
            cfg.tau = v;
        }
        if let Some(v) = self.lambda {
            cfg.lambda = v;
        }
        if let Some(v) = self.s {
            cfg.s = v;
        }
        if let Some(v) = self.rounds {
            cfg.outer_rounds = v;
        }
        if let Some(v) = self.omega {
            cfg.omega = v;
        }
        cfg.gamma = self.gamma;
        cfg.standardize = self.standardize;
        if let Some(v) = self.learning_rate {
            adam.learning_rate = v;
        }
        if let Some(v) = self.iters {
            adam.max_iters = v;
        }
        if let Some(v) = self.grad_tolerance {
            adam.grad_tolerance = v;
        }
        cfg.adam = adam;
        cfg
    }
}

#[derive(Args)]
struct DiscoverArgs {
    /// Input data CSV with one header row.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    /// Also write model.json with the fitted coefficients.
    #[arg(long)]
    save_model: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Estimated edge-list CSV.
    #[arg(long)]
    graph: PathBuf,
    /// Ground-truth edge-list CSV.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct PairsArgs {
    /// Corpus directory with meta.csv and one CSV per pair.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct ToyplotArgs {
    /// Two-column data CSV the model was fitted on.
    #[arg(long)]
    data: PathBuf,
    /// model.json written by discover --save-model.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

/// Fitted coefficients plus everything needed to evaluate them on raw data.
#[derive(serde::Serialize, serde::Deserialize)]
pub struct SavedModel {
    pub gamma: f64,
    pub standardization: Option<Standardization>,
    pub theta: ModelParams,
}

/// Provenance record written once per run.
#[derive(serde::Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub duration_seconds: f64,
    pub version: String,
}

struct CliFailure {
    code: u8,
    message: String,
}

impl CliFailure {
    fn usage(message: impl Into<String>) -> Self {
        CliFailure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn data(message: impl Into<String>) -> Self {
        CliFailure {
            code: EXIT_DATA,
            message: message.into(),
        }
    }
}

impl From<DataError> for CliFailure {
    fn from(e: DataError) -> Self {
        CliFailure::data(e.to_string())
    }
}

impl From<KernelError> for CliFailure {
    fn from(e: KernelError) -> Self {
        CliFailure::data(e.to_string())
    }
}

impl From<RepresenterError> for CliFailure {
    fn from(e: RepresenterError) -> Self {
        CliFailure::data(e.to_string())
    }
}

impl From<std::io::Error> for CliFailure {
    fn from(e: std::io::Error) -> Self {
        CliFailure::data(e.to_string())
    }
}

impl From<serde_json::Error> for CliFailure {
    fn from(e: serde_json::Error) -> Self {
        CliFailure::data(e.to_string())
    }
}

impl From<DagmaError> for CliFailure {
    fn from(e: DagmaError) -> Self {
        let code = match &e {
            DagmaError::BadConfig(_) => EXIT_USAGE,
            DagmaError::Data(_) | DagmaError::Kernel(_) => EXIT_DATA,
            _ => EXIT_OPTIMIZATION,
        };
        CliFailure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<SimError> for CliFailure {
    fn from(e: SimError) -> Self {
        let code = match &e {
            SimError::BadSpec(_) => EXIT_USAGE,
            SimError::GpFactorization => EXIT_OPTIMIZATION,
        };
        CliFailure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<MetricsError> for CliFailure {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Discovery(inner) => inner.into(),
            other => CliFailure::data(other.to_string()),
        }
    }
}

/// Parses arguments from the process environment and runs one command.
pub fn run() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let ok = e.exit_code() == 0;
            let _ = e.print();
            return if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_USAGE)
            };
        }
    };
    let outcome = match cli.command {
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Discover(args) => cmd_discover(&args),
        Command::Evaluate(args) => cmd_evaluate(&args),
        Command::Pairs(args) => cmd_pairs(&args),
        Command::Toyplot(args) => cmd_toyplot(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn path_string(p: &Path) -> String {
    p.display().to_string()
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliFailure> {
    let file = File::create(path)?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value)?;
    use std::io::Write;
    writeln!(out)?;
    Ok(())
}

fn write_manifest(
    out_dir: &Path,
    command: &str,
    config: serde_json::Value,
    seed: Option<u64>,
    inputs: &[&Path],
    outputs: Vec<PathBuf>,
    start: Instant,
) -> Result<(), CliFailure> {
    let manifest = RunManifest {
        command: command.to_string(),
        config,
        seed,
        inputs: inputs.iter().map(|p| path_string(p)).collect(),
        outputs: outputs.iter().map(|p| path_string(p)).collect(),
        duration_seconds: start.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    write_json(&out_dir.join("manifest.json"), &manifest)
}

/// Edge lists are 1-indexed CSVs with a `src,dst` header row.
fn write_edge_list(path: &Path, graph: &DirectedGraph) -> Result<(), CliFailure> {
    let file = File::create(path)?;
    let mut out = BufWriter::new(file);
    use std::io::Write;
    writeln!(out, "src,dst")?;
    for (u, v) in graph.edges() {
        writeln!(out, "{},{}", u + 1, v + 1)?;
    }
    Ok(())
}

fn read_edge_list(path: &Path) -> Result<Vec<(usize, usize)>, CliFailure> {
    let file = File::open(path)
        .map_err(|e| CliFailure::data(format!("opening {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let mut edges = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2; // header occupies line 1
        let record =
            record.map_err(|e| CliFailure::data(format!("{} line {row}: {e}", path.display())))?;
        if record.len() != 2 {
            return Err(CliFailure::data(format!(
                "{} line {row}: expected two fields, found {}",
                path.display(),
                record.len()
            )));
        }
        let parse = |field: &str| {
            field.parse::<usize>().map_err(|_| {
                CliFailure::data(format!(
                    "{} line {row}: bad node index {field:?}",
                    path.display()
                ))
            })
        };
        let src = parse(&record[0])?;
        let dst = parse(&record[1])?;
        if src == 0 || dst == 0 {
            return Err(CliFailure::data(format!(
                "{} line {row}: node indices are 1-based",
                path.display()
            )));
        }
        if src == dst {
            return Err(CliFailure::data(format!(
                "{} line {row}: self-loop on node {src}",
                path.display()
            )));
        }
        edges.push((src - 1, dst - 1));
    }
    Ok(edges)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<ExitCode, CliFailure> {
    let start = Instant::now();
    let spec = SemSpec {
        d: args.d,
        m: args.m,
        mechanism: args.mechanism,
        n: args.n,
        seed: args.seed,
    };
    let dataset = simulate_sem(&spec)?;
    std::fs::create_dir_all(&args.out_dir)?;
    let data_path = args.out_dir.join("data.csv");
    let truth_path = args.out_dir.join("truth_dag.csv");
    data::write_matrix_csv(&data_path, &dataset.x, &data::default_header(spec.d))?;
    write_edge_list(&truth_path, &dataset.dag)?;
    write_manifest(
        &args.out_dir,
        "simulate",
        serde_json::to_value(spec)?,
        Some(spec.seed),
        &[],
        vec![data_path, truth_path],
        start,
    )?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_discover(args: &DiscoverArgs) -> Result<ExitCode, CliFailure> {
    let start = Instant::now();
    let (x, _header) = data::read_matrix_csv(&args.data)?;
    if x.ncols() < 2 {
        return Err(CliFailure::usage(format!(
            "discovery needs at least two columns, {} has {}",
            args.data.display(),
            x.ncols()
        )));
    }
    if x.nrows() < 2 {
        return Err(CliFailure::data(format!(
            "discovery needs at least two rows, {} has {}",
            args.data.display(),
            x.nrows()
        )));
    }
    let cfg = args.config.to_config();
    let result = rkhs_dagma(&x, &cfg)?;

    std::fs::create_dir_all(&args.out_dir)?;
    let d = x.ncols();
    let header = data::default_header(d);
    let mut outputs = Vec::new();
    let w_raw_path = args.out_dir.join("W_raw.csv");
    data::write_matrix_csv(&w_raw_path, &result.w_raw, &header)?;
    outputs.push(w_raw_path);
    let w_hat_path = args.out_dir.join("W_hat.csv");
    data::write_matrix_csv(&w_hat_path, &result.w_hat, &header)?;
    outputs.push(w_hat_path);
    let graph_path = args.out_dir.join("graph.csv");
    write_edge_list(&graph_path, &result.graph)?;
    outputs.push(graph_path);
    let trace_path = args.out_dir.join("trace.json");
    write_json(&trace_path, &result.trace)?;
    outputs.push(trace_path);
    if args.save_model {
        let model = SavedModel {
            gamma: result.gamma,
            standardization: result.standardization.clone(),
            theta: result.theta.clone(),
        };
        let model_path = args.out_dir.join("model.json");
        write_json(&model_path, &model)?;
        outputs.push(model_path);
    }
    write_manifest(
        &args.out_dir,
        "discover",
        serde_json::to_value(&cfg)?,
        None,
        &[&args.data],
        outputs,
        start,
    )?;
    if result.is_dag {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("thresholded graph contains a cycle");
        Ok(ExitCode::from(EXIT_CYCLIC))
    }
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<ExitCode, CliFailure> {
    let start = Instant::now();
    let estimated = read_edge_list(&args.graph)?;
    let truth = read_edge_list(&args.truth)?;
    let max_node = |edges: &[(usize, usize)]| {
        edges
            .iter()
            .map(|&(u, v)| u.max(v) + 1)
            .max()
            .unwrap_or(0)
    };
    let d = max_node(&estimated).max(max_node(&truth));
    let est = DirectedGraph::from_edges(d, &estimated);
    let tru = DirectedGraph::from_edges(d, &truth);
    let report = metrics::shd(&est, &tru)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    std::fs::create_dir_all(&args.out_dir)?;
    let report_path = args.out_dir.join("report.json");
    write_json(&report_path, &report)?;
    write_manifest(
        &args.out_dir,
        "evaluate",
        serde_json::Value::Null,
        None,
        &[&args.graph, &args.truth],
        vec![report_path],
        start,
    )?;
    Ok(ExitCode::SUCCESS)
}

#[derive(serde::Serialize)]
struct PairRow {
    name: String,
    label: Direction,
    decision: PairDecision,
    tiebreak: bool,
    w_ab: f64,
    w_ba: f64,
    weight: f64,
    correct: bool,
}

#[derive(serde::Serialize)]
struct PairsReport {
    pairs: Vec<PairRow>,
    skipped: Vec<String>,
    evaluated: usize,
    weighted_accuracy: f64,
    accuracy: f64,
}

fn cmd_pairs(args: &PairsArgs) -> Result<ExitCode, CliFailure> {
    let start = Instant::now();
    let corpus = load_pairs_corpus(&args.corpus)?;
    for name in &corpus.skipped {
        eprintln!("notice: skipping multi-dimensional pair {name}");
    }
    if corpus.pairs.is_empty() {
        return Err(CliFailure::data(format!(
            "corpus {} has no usable pairs",
            args.corpus.display()
        )));
    }
    let cfg = args.config.to_config();
    let rows: Vec<PairRow> = thread_pool().install(|| {
        corpus
            .pairs
            .par_iter()
            .map(|cp| -> Result<PairRow, MetricsError> {
                let pre = pairs_preprocess(&cp.pair)?;
                let o = orient_pair(&pre, &cfg)?;
                Ok(PairRow {
                    name: cp.name.clone(),
                    label: cp.pair.label,
                    decision: o.decision,
                    tiebreak: o.tiebreak,
                    w_ab: o.w_ab,
                    w_ba: o.w_ba,
                    weight: cp.pair.weight,
                    correct: o.decision.agrees(cp.pair.label),
                })
            })
            .collect::<Result<_, _>>()
    })?;
    let decisions: Vec<(PairDecision, Direction, f64)> = rows
        .iter()
        .map(|r| (r.decision, r.label, r.weight))
        .collect();
    let (weighted, unweighted) = corpus_accuracy(&decisions);
    let report = PairsReport {
        evaluated: rows.len(),
        pairs: rows,
        skipped: corpus.skipped,
        weighted_accuracy: weighted,
        accuracy: unweighted,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    std::fs::create_dir_all(&args.out_dir)?;
    let report_path = args.out_dir.join("report.json");
    write_json(&report_path, &report)?;
    write_manifest(
        &args.out_dir,
        "pairs",
        serde_json::to_value(&cfg)?,
        None,
        &[&args.corpus],
        vec![report_path],
        start,
    )?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_toyplot(args: &ToyplotArgs) -> Result<ExitCode, CliFailure> {
    let start = Instant::now();
    let (x, _header) = data::read_matrix_csv(&args.data)?;
    if x.ncols() != 2 {
        return Err(CliFailure::data(format!(
            "toyplot needs a two-column dataset, {} has {} columns",
            args.data.display(),
            x.ncols()
        )));
    }
    let model: SavedModel = serde_json::from_reader(BufReader::new(File::open(&args.model)?))?;
    if model.theta.len() != 2 {
        return Err(CliFailure::data(format!(
            "model in {} covers {} nodes, expected 2",
            args.model.display(),
            model.theta.len()
        )));
    }

    // Rebuild the training-space kernel bundle for the second node.
    let train = match &model.standardization {
        Some(st) => {
            let mut t = Array2::zeros(x.raw_dim());
            for i in 0..x.nrows() {
                let row = st.apply_row(&[x[[i, 0]], x[[i, 1]]]);
                t[[i, 0]] = row[0];
                t[[i, 1]] = row[1];
            }
            t
        }
        None => x.clone(),
    };
    let bundle = gram_bundle(&train, 1, &KernelConfig::new(model.gamma))?;

    let col = x.column(0);
    let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let grid = 200;
    let mut out = Array2::zeros((grid, 2));
    for k in 0..grid {
        // Endpoints hit the data min and max exactly.
        let xv = if k == grid - 1 {
            hi
        } else {
            lo + (hi - lo) * k as f64 / (grid - 1) as f64
        };
        let query = match &model.standardization {
            Some(st) => Array1::from(st.apply_row(&[xv, 0.0])),
            None => Array1::from(vec![xv, 0.0]),
        };
        let fitted_std = eval_node_at(&bundle, &model.theta[1], query.view())?;
        let fitted = match &model.standardization {
            Some(st) => st.means[1] + st.sds[1] * fitted_std,
            None => fitted_std,
        };
        out[[k, 0]] = xv;
        out[[k, 1]] = fitted;
    }
    std::fs::create_dir_all(&args.out_dir)?;
    let plot_path = args.out_dir.join("plot.csv");
    data::write_matrix_csv(&plot_path, &out, &["x".to_string(), "fitted".to_string()])?;
    write_manifest(
        &args.out_dir,
        "toyplot",
        serde_json::Value::Null,
        None,
        &[&args.data, &args.model],
        vec![plot_path],
        start,
    )?;
    Ok(ExitCode::SUCCESS)
}
