//! Command-line front end.
//!
//! Results go to standard output or `--out`; diagnostics go to standard error.
//! Exit codes: 0 success, 2 input error, 3 initialization failure, 4 configuration error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{EasError, Result};
use crate::io::{load_dataset, read_weights, save_dataset, write_csv_matrix};
use crate::matstat::RngStream;
use crate::model::{Dataset, ModelIndexSet};
use crate::sampler::{run_chain, ChainConfig, ChainSummary, HEstimator, WeightSpec};
use crate::simstudy::{generate, run_experiment, ExperimentConfig, ExperimentReport, SelectionMethod, SimulationDesign, PRESETS};
use crate::tuning::{tune, EpsilonGrid, ScoreRow, TuningConfig, TuningMethod};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INIT: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "eas", version, about = "Epsilon-admissible subset selection for multivariate regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample models at a fixed epsilon.
    Fit(FitArgs),
    /// Choose epsilon over a grid, then report the chain at the chosen value.
    Tune(TuneArgs),
    /// Generate a synthetic dataset from a design preset.
    Simulate(SimulateArgs),
    /// Run replicated simulation experiments on a design preset.
    Benchmark(BenchmarkArgs),
    /// Render a JSON report written by another subcommand.
    Summarize(SummarizeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightMode {
    Corr,
    Uniform,
    /// Cross-validated group LASSO row norms.
    Lasso,
    File,
}

impl WeightMode {
    fn name(self) -> &'static str {
        match self {
            WeightMode::Corr => "corr",
            WeightMode::Uniform => "uniform",
            WeightMode::Lasso => "lasso",
            WeightMode::File => "file",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Bic,
    Cv,
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Responses, one observation per row (n × q).
    #[arg(long)]
    pub y: PathBuf,
    /// Predictors, one observation per row (n × p).
    #[arg(long)]
    pub x: PathBuf,
    /// Files start with a header row.
    #[arg(long)]
    pub header: bool,
    /// Subtract column means before fitting.
    #[arg(long)]
    pub center: bool,
    #[arg(long, value_enum, default_value_t = WeightMode::Corr)]
    pub weights: WeightMode,
    #[arg(long)]
    pub weights_file: Option<PathBuf>,
    /// Largest model size considered.
    #[arg(long)]
    pub max_size: Option<usize>,
    /// Average h over this many matrix-t draws instead of evaluating it at the estimate.
    #[arg(long)]
    pub mc_draws: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 10_000)]
    pub steps: usize,
    #[arg(long, default_value_t = 5000)]
    pub burnin: usize,
    /// Starting model as comma-separated one-based indices.
    #[arg(long, value_delimiter = ',')]
    pub init: Option<Vec<usize>>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Grid as lo:hi:k.
    #[arg(long, default_value = "0.05:10:24")]
    pub grid: String,
    #[arg(long, value_enum, default_value_t = MethodArg::Bic)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    /// Search chain length (default 5000 for BIC, 500 for CV).
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    /// Final chain length for CV (default 10000).
    #[arg(long)]
    pub final_steps: Option<usize>,
    #[arg(long)]
    pub final_burnin: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub preset: String,
    /// Override the preset sample size.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output directory for y.csv, x.csv, y_test.csv, x_test.csv and truth.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long)]
    pub preset: String,
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::Bic)]
    pub method: MethodArg,
    /// Fixed epsilon instead of tuning.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value = "0.05:10:24")]
    pub grid: String,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long)]
    pub final_steps: Option<usize>,
    #[arg(long)]
    pub final_burnin: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_enum, default_value_t = WeightMode::Lasso)]
    pub weights: WeightMode,
    /// Cap model size at floor(n^a); 1 keeps the n - q - 1 bound.
    #[arg(long, default_value_t = crate::simstudy::SIZE_EXPONENT)]
    pub size_exponent: f64,
    /// Record wall-clock runtimes (output is then no longer reproducible).
    #[arg(long)]
    pub timing: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub indices: ModelIndexSet,
    pub log_mass: f64,
    pub prob: f64,
    pub visit_prob: f64,
    pub visits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainEcho {
    pub epsilon: f64,
    pub steps: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub max_size: usize,
    #[serde(default)]
    pub weights: String,
}

/// JSON shape of a chain: ranked models and one-based inclusion maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub models: Vec<ModelEntry>,
    pub map_model: ModelIndexSet,
    pub inclusion: BTreeMap<usize, f64>,
    pub visit_inclusion: BTreeMap<usize, f64>,
    pub acceptance_rate: f64,
    pub initial_model: ModelIndexSet,
    pub config: ChainEcho,
}

impl ChainReport {
    pub fn new(s: &ChainSummary, config: ChainEcho) -> Self {
        let to_map = |v: &[f64]| v.iter().enumerate().map(|(j, &p)| (j + 1, p)).collect();
        ChainReport {
            models: s
                .models
                .iter()
                .map(|m| ModelEntry {
                    indices: m.model.clone(),
                    log_mass: m.log_mass,
                    prob: m.prob,
                    visit_prob: m.visit_prob,
                    visits: m.visits,
                })
                .collect(),
            map_model: s.map_model.clone(),
            inclusion: to_map(&s.inclusion),
            visit_inclusion: to_map(&s.visit_inclusion),
            acceptance_rate: s.acceptance_rate,
            initial_model: s.initial_model.clone(),
            config,
        }
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "epsilon {}  acceptance {:.4}  MAP {}", self.config.epsilon, self.acceptance_rate, self.map_model);
        let _ = writeln!(out, "{:>4}  {:>10}  {:>10}  {:>14}  model", "rank", "prob", "visit", "log mass");
        for (k, m) in self.models.iter().take(20).enumerate() {
            let _ = writeln!(out, "{:>4}  {:>10.6}  {:>10.6}  {:>14.4}  {}", k + 1, m.prob, m.visit_prob, m.log_mass, m.indices);
        }
        let mut incl: Vec<(&usize, &f64)> = self.inclusion.iter().filter(|(_, p)| **p > 0.0).collect();
        incl.sort_by(|a, b| b.1.total_cmp(a.1).then(a.0.cmp(b.0)));
        let _ = writeln!(out, "{:>9}  {:>10}", "predictor", "inclusion");
        for (j, p) in incl.into_iter().take(30) {
            let _ = writeln!(out, "{j:>9}  {p:>10.6}");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub method: TuningMethod,
    pub chosen_epsilon: f64,
    pub scores: Vec<ScoreRow>,
    pub final_chain: ChainReport,
}

impl TuneReport {
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "method {}  chosen epsilon {}", self.method, self.chosen_epsilon);
        let _ = writeln!(out, "{:>10}  {:>16}  {:>8}  MAP", "epsilon", "score", "failed");
        for r in &self.scores {
            let map = r.map_model.as_ref().map_or("-".to_string(), |m| m.to_string());
            let mark = if r.epsilon == self.chosen_epsilon { " *" } else { "" };
            let _ = writeln!(out, "{:>10.5}  {:>16.6}  {:>8}  {map}{mark}", r.epsilon, r.score, r.failures);
        }
        out.push('\n');
        out.push_str(&self.final_chain.table());
        out
    }
}

#[derive(Debug, Serialize)]
struct TruthFile<'a> {
    preset: &'a str,
    n: usize,
    p: usize,
    q: usize,
    truth: &'a ModelIndexSet,
    /// Coefficients of the true predictors, one row per response.
    coef: Vec<Vec<f64>>,
}

const LASSO_FOLDS: usize = 10;

fn exit_code(e: &EasError) -> i32 {
    match e {
        EasError::Parse { .. } | EasError::Io(_) | EasError::DimensionMismatch(_) | EasError::InvalidModel(_) => {
            EXIT_INPUT
        }
        EasError::InitializationFailed(_) | EasError::AllInadmissible => EXIT_INIT,
        EasError::Config(_) | EasError::CapExceeded { .. } => EXIT_CONFIG,
        _ => EXIT_INPUT,
    }
}

fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| EasError::Io(format!("{}: {e}", p.display()))),
        None => out.write_all(text.as_bytes()).map_err(EasError::from),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable report");
    s.push('\n');
    s
}

fn load(args: &DataArgs) -> Result<Dataset> {
    let data = load_dataset(&args.y, &args.x, args.header)?;
    if args.center {
        data.centered()
    } else {
        Ok(data)
    }
}

fn chain_template(args: &DataArgs, data: &Dataset, epsilon: f64, seed: u64) -> Result<ChainConfig> {
    let mut cfg = ChainConfig::new(epsilon, 1, 0, seed);
    cfg.max_size = args.max_size;
    cfg.weights = match args.weights {
        WeightMode::Corr => WeightSpec::Correlation,
        WeightMode::Uniform => WeightSpec::Uniform,
        WeightMode::Lasso => WeightSpec::Lasso { folds: LASSO_FOLDS },
        WeightMode::File => {
            let path = args
                .weights_file
                .as_ref()
                .ok_or_else(|| EasError::Config("--weights file needs --weights-file".into()))?;
            WeightSpec::Custom(read_weights(path, args.header)?)
        }
    };
    if let Some(d) = args.mc_draws {
        if d == 0 {
            return Err(EasError::Config("--mc-draws must be positive".into()));
        }
        cfg.estimator = HEstimator::MonteCarlo { draws: d };
    }
    if args.weights != WeightMode::Lasso {
        cfg.weights.resolve(data)?;
    }
    cfg.cap(data)?;
    Ok(cfg)
}

fn echo(cfg: &ChainConfig, data: &Dataset, seed: u64, weights: WeightMode) -> Result<ChainEcho> {
    Ok(ChainEcho {
        epsilon: cfg.epsilon(),
        steps: cfg.steps,
        burn_in: cfg.burn_in,
        seed,
        max_size: cfg.cap(data)?,
        weights: weights.name().into(),
    })
}

fn cmd_fit(a: &FitArgs, out: &mut dyn Write) -> Result<()> {
    let data = load(&a.data)?;
    let mut cfg = chain_template(&a.data, &data, a.epsilon, a.common.seed)?;
    cfg.steps = a.steps;
    cfg.burn_in = a.burnin;
    if let Some(init) = &a.init {
        let m = ModelIndexSet::from_one_based(init)?;
        m.check(data.p())?;
        cfg.initial = Some(m);
    }
    cfg.validate()?;
    let summary = run_chain(&data, &cfg)?;
    let report = ChainReport::new(&summary, echo(&cfg, &data, a.common.seed, a.data.weights)?);
    let text = match a.common.format {
        Format::Json => to_json(&report),
        Format::Table => report.table(),
    };
    emit(out, a.common.out.as_deref(), &text)
}

fn tuning_config(
    method: MethodArg,
    grid: &str,
    chain: ChainConfig,
    folds: usize,
    steps: Option<usize>,
    burnin: Option<usize>,
    final_steps: Option<usize>,
    final_burnin: Option<usize>,
) -> Result<(TuningMethod, TuningConfig)> {
    let grid: EpsilonGrid = grid.parse()?;
    let (method, mut cfg) = match method {
        MethodArg::Bic => (TuningMethod::Bic, TuningConfig::bic(grid, chain)),
        MethodArg::Cv => (TuningMethod::Cv, TuningConfig::cv(grid, chain)),
    };
    cfg.folds = folds;
    if let Some(s) = steps {
        cfg.search_steps = s;
    }
    if let Some(b) = burnin {
        cfg.search_burn_in = b;
    }
    if let Some(s) = final_steps {
        cfg.final_steps = s;
    }
    if let Some(b) = final_burnin {
        cfg.final_burn_in = b;
    }
    for (s, b) in [(cfg.search_steps, cfg.search_burn_in), (cfg.final_steps, cfg.final_burn_in)] {
        if b >= s {
            return Err(EasError::Config(format!("burn-in {b} must be smaller than steps {s}")));
        }
    }
    Ok((method, cfg))
}

fn cmd_tune(a: &TuneArgs, out: &mut dyn Write) -> Result<()> {
    let data = load(&a.data)?;
    let chain = chain_template(&a.data, &data, 1.0, a.common.seed)?;
    let (method, cfg) = tuning_config(a.method, &a.grid, chain, a.folds, a.steps, a.burnin, a.final_steps, a.final_burnin)?;
    let result = tune(&data, method, &cfg)?;
    let (steps, burn_in) = match method {
        TuningMethod::Bic => (cfg.search_steps, cfg.search_burn_in),
        TuningMethod::Cv => (cfg.final_steps, cfg.final_burn_in),
    };
    let mut final_cfg = cfg.chain.clone().with_epsilon(result.chosen_epsilon);
    final_cfg.steps = steps;
    final_cfg.burn_in = burn_in;
    let report = TuneReport {
        method,
        chosen_epsilon: result.chosen_epsilon,
        scores: result.scores,
        final_chain: ChainReport::new(&result.final_chain, echo(&final_cfg, &data, a.common.seed, a.data.weights)?),
    };
    let text = match a.common.format {
        Format::Json => to_json(&report),
        Format::Table => report.table(),
    };
    emit(out, a.common.out.as_deref(), &text)
}

fn preset(name: &str, n: Option<usize>) -> Result<SimulationDesign> {
    let d = SimulationDesign::preset(name).ok_or_else(|| {
        EasError::Config(format!("unknown preset `{name}`; expected one of {}", PRESETS.join(", ")))
    })?;
    Ok(match n {
        Some(n) => d.with_n(n),
        None => d,
    })
}

fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let design = preset(&a.preset, a.n)?;
    let sim = generate(&design, RngStream::new(a.seed))?;
    std::fs::create_dir_all(&a.out)?;
    save_dataset(&sim.train, &a.out.join("y.csv"), &a.out.join("x.csv"))?;
    save_dataset(&sim.test, &a.out.join("y_test.csv"), &a.out.join("x_test.csv"))?;
    let block = sim.coef.select_columns(sim.truth.indices());
    write_csv_matrix(&a.out.join("coef.csv"), &block)?;
    let truth = TruthFile {
        preset: &a.preset,
        n: design.n,
        p: design.p,
        q: design.q,
        truth: &sim.truth,
        coef: block.row_iter().map(|r| r.iter().copied().collect()).collect(),
    };
    std::fs::write(a.out.join("truth.json"), to_json(&truth))?;
    emit(out, None, &format!("{}\n", a.out.display()))
}

fn cmd_benchmark(a: &BenchmarkArgs, out: &mut dyn Write) -> Result<()> {
    let design = preset(&a.preset, a.n)?;
    let mut chain = ChainConfig::new(1.0, 1, 0, a.common.seed);
    chain.weights = match a.weights {
        WeightMode::Corr => WeightSpec::Correlation,
        WeightMode::Uniform => WeightSpec::Uniform,
        WeightMode::Lasso => WeightSpec::Lasso { folds: LASSO_FOLDS },
        WeightMode::File => return Err(EasError::Config("benchmark accepts --weights corr, uniform or lasso".into())),
    };
    let (method, tuning) = tuning_config(a.method, &a.grid, chain, a.folds, a.steps, a.burnin, a.final_steps, a.final_burnin)?;
    let selection = match (a.epsilon, method) {
        (Some(eps), _) => {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(EasError::Config("--epsilon must be positive".into()));
            }
            SelectionMethod::Fixed { epsilon: eps }
        }
        (None, TuningMethod::Bic) => SelectionMethod::Bic,
        (None, TuningMethod::Cv) => SelectionMethod::Cv,
    };
    let mut cfg = ExperimentConfig::new(design, a.reps, selection, a.common.seed);
    cfg.tuning = tuning;
    cfg.timing = a.timing;
    cfg.size_exponent = Some(a.size_exponent);
    let report = run_experiment(&cfg)?;
    for f in &report.failures {
        eprintln!("replication {} failed: {}", f.replication, f.error);
    }
    let text = match a.common.format {
        Format::Json => to_json(&report),
        Format::Table => report.table(),
    };
    emit(out, a.common.out.as_deref(), &text)
}

fn cmd_summarize(a: &SummarizeArgs, out: &mut dyn Write) -> Result<()> {
    let raw = std::fs::read_to_string(&a.input).map_err(|e| EasError::Io(format!("{}: {e}", a.input.display())))?;
    let parse_err = |e: serde_json::Error| EasError::Parse {
        path: a.input.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    };
    let value: serde_json::Value = serde_json::from_str(&raw).map_err(parse_err)?;
    let text = if value.get("final_chain").is_some() {
        let r: TuneReport = serde_json::from_value(value).map_err(parse_err)?;
        match a.format {
            Format::Json => to_json(&r),
            Format::Table => r.table(),
        }
    } else if value.get("records").is_some() {
        let r: ExperimentReport = serde_json::from_value(value).map_err(parse_err)?;
        match a.format {
            Format::Json => to_json(&r.aggregate),
            Format::Table => r.table(),
        }
    } else if value.get("models").is_some() {
        let r: ChainReport = serde_json::from_value(value).map_err(parse_err)?;
        match a.format {
            Format::Json => to_json(&r),
            Format::Table => r.table(),
        }
    } else {
        return Err(EasError::Parse {
            path: a.input.display().to_string(),
            line: 0,
            message: "not a fit, tune or benchmark report".into(),
        });
    };
    emit(out, a.out.as_deref(), &text)
}

fn threads(cmd: &Command) -> usize {
    match cmd {
        Command::Fit(a) => a.common.threads,
        Command::Tune(a) => a.common.threads,
        Command::Benchmark(a) => a.common.threads,
        _ => 0,
    }
}

fn dispatch(cmd: &Command, out: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Fit(a) => cmd_fit(a, out),
        Command::Tune(a) => cmd_tune(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Benchmark(a) => cmd_benchmark(a, out),
        Command::Summarize(a) => cmd_summarize(a, out),
    }
}

/// Parse `args` and execute, returning the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let rendered = e.render().to_string();
            if code == EXIT_OK {
                let _ = out.write_all(rendered.as_bytes());
            } else {
                let _ = err.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads(&cli.command)).build();
    let outcome = match pool {
        Ok(pool) => {
            let mut buffer = Vec::new();
            let r = pool.install(|| dispatch(&cli.command, &mut buffer));
            let _ = out.write_all(&buffer);
            r
        }
        Err(e) => Err(EasError::Config(format!("thread pool: {e}"))),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}
