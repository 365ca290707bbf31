//! The `dualbatch` command line.
//!
//! Exit codes: 0 on success or convergence, 2 when a run exhausts its budget
//! (or an ESO check fails), 1 on usage and data errors.

pub mod sweep;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eso::{
    eso_weights, naive_weights, omega, omega_row_count, verify_eso, EsoMode, EsoWeights, SigmaSource, VerifyMode,
    DEFAULT_POWER_MAX_ITERS, DEFAULT_POWER_TOL, DEFAULT_SIGMA_INFLATION,
};
use crate::loss::LossModel;
use crate::sampling::SamplingScheme;
use crate::solver::{solve, CocoaConfig, OutputMode, SolveConfig, Status};
use crate::synthetic::SyntheticSpec;
use crate::theory::{
    cocoa_vs_msdca_report, complexity_estimate, sigma_prime_estimate, sigma_tilde_sq, theorem1_bounds,
    theorem2_bounds, BoundInputs, Regime, Theorem1Bounds, Theorem2Bounds,
};
use sweep::{run_plan, summarize, write_rows, write_summary, ExperimentPlan, SweepCell};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_BUDGET: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "dualbatch", version, about = "Safe mini-batch SDCA with ESO step weights")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one model and write its duality-gap trace.
    Solve(SolveArgs),
    /// Epochs to a target gap over a grid of (scheme, b, C) cells.
    Sweep(SweepArgs),
    /// Print the ESO weights and the data quantities behind them.
    Eso(EsoArgs),
    /// Check the ESO inequality on random (alpha, t) pairs.
    VerifyEso(VerifyArgs),
    /// Evaluate the iteration bounds.
    Predict(PredictArgs),
    /// Compare the mini-batch SDCA and CoCoA+ iteration bounds.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// LIBSVM file.
    #[arg(long, conflicts_with = "synthetic")]
    pub data: Option<PathBuf>,
    /// Synthetic data, e.g. `n=200,d=20,density=0.2,seed=7[,noise=0.1][,identical=1]`.
    #[arg(long, value_parser = parse_synthetic)]
    pub synthetic: Option<SyntheticSpec>,
    /// Feature dimension, when the file does not reach it.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Scale every row to unit norm.
    #[arg(long)]
    pub normalize: bool,
    /// Optional `key=value` per line; flags given on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Hinge,
    Shinge,
    Logistic,
    Square,
}

#[derive(Debug, Args)]
pub struct LossArgs {
    #[arg(long, value_enum, default_value = "hinge")]
    pub loss: LossArg,
    /// Smoothing width of the smoothed hinge.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplingArg {
    Serial,
    Nice,
    Distributed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightsArg {
    Safe,
    Naive,
}

#[derive(Debug, Args)]
pub struct SamplingArgs {
    #[arg(long, value_enum, default_value = "nice")]
    pub sampling: SamplingArg,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub batch: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub machines: u64,
    /// File with one machine id per example.
    #[arg(long)]
    pub partition: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "safe")]
    pub weights: WeightsArg,
    /// serial | standard_dense | standard_sparse | distributed | safe_any_b
    #[arg(long)]
    pub eso_mode: Option<String>,
    /// Use row nonzero counts in the sparse formula (diagnostic, not safe).
    #[arg(long)]
    pub row_sparsity: bool,
    /// Use this sigma^2 instead of estimating it.
    #[arg(long)]
    pub sigma_sq: Option<f64>,
    /// Factor applied to the estimated sigma^2.
    #[arg(long, default_value_t = DEFAULT_SIGMA_INFLATION)]
    pub sigma_inflation: f64,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, default_value_t = 1e-6)]
    pub target_gap: f64,
    #[arg(long, default_value_t = 100.0)]
    pub max_epochs: f64,
    #[arg(long)]
    pub max_iterations: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "DUALBATCH_THREADS", default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: u64,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub loss: LossArgs,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Return the average of iterates T0+1 .. T-1.
    #[arg(long, value_name = "T0")]
    pub average: Option<u64>,
    /// CoCoA+ mode with H local steps per machine.
    #[arg(long, value_name = "H")]
    pub cocoa: Option<usize>,
    /// CoCoA+ subproblem scaling (default: the machine count).
    #[arg(long)]
    pub sigma_prime: Option<f64>,
    /// Iterations between gap checkpoints (default ceil(n/b)).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub checkpoint_every: Option<u64>,
    /// Record wall-clock time in the trace (breaks byte-identical output).
    #[arg(long)]
    pub wall_time: bool,
    /// Directory for trace.csv and summary.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub loss: LossArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Cell `scheme:b[:C][:naive]`; repeat the flag for more cells.
    #[arg(long = "cell", required = true, value_parser = parse_cell)]
    pub cells: Vec<SweepCell>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub repeats: u64,
    /// Directory for sweep.csv and sweep_summary.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EsoArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    /// Also write the weights, one per line, to this file.
    #[arg(long)]
    pub write_weights: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 100)]
    pub pairs: usize,
    /// Monte-Carlo draws per pair instead of exact enumeration.
    #[arg(long)]
    pub monte_carlo: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[arg(long, value_enum, default_value = "hinge")]
    pub loss: LossArg,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub lambda: f64,
    /// Problem size, when no data is given.
    #[arg(long)]
    pub n: Option<usize>,
    /// Largest ESO weight, when no data is given.
    #[arg(long)]
    pub v_max: Option<f64>,
    /// Sum of the ESO weights (default n * v_max).
    #[arg(long)]
    pub v_sum: Option<f64>,
    /// Multiplier in the complexity estimate (default v_max).
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, default_value_t = 1e-3)]
    pub target_gap: f64,
    #[arg(long, default_value_t = 0.1)]
    pub rho: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eps_d0: f64,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 1e-3)]
    pub lambda: f64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub batch: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub machines: u64,
    /// Random-search samples for the sigma' estimate.
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for compare.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_synthetic(s: &str) -> std::result::Result<SyntheticSpec, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_cell(s: &str) -> std::result::Result<SweepCell, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Splices `--config FILE` entries into the argument list right after the
/// subcommand, skipping keys that also appear as flags.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut path = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy().into_owned();
        if s == "--config" {
            path = Some(it.next().ok_or_else(|| Error::Config("--config needs a file".into()))?);
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(OsString::from(p));
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else { return Ok(rest) };
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::Config(format!("--config {}: {e}", PathBuf::from(&path).display())))?;
    let given: Vec<String> = rest
        .iter()
        .filter_map(|a| a.to_str())
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a).to_string())
        .collect();
    let mut extra = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: k + 1,
            msg: format!("config: expected key=value, got '{line}'"),
        })?;
        let (key, value) = (key.trim().trim_start_matches("--"), value.trim());
        if key == "config" {
            return Err(Error::Parse {
                line: k + 1,
                msg: "config files cannot nest".into(),
            });
        }
        if given.iter().any(|g| g == key) {
            continue;
        }
        match value {
            "true" => extra.push(OsString::from(format!("--{key}"))),
            "false" => {}
            _ => {
                extra.push(OsString::from(format!("--{key}")));
                extra.push(OsString::from(value));
            }
        }
    }
    let at = rest.len().min(2);
    rest.splice(at..at, extra);
    Ok(rest)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Solve(a) => run_solve(&a),
        Command::Sweep(a) => run_sweep(&a),
        Command::Eso(a) => run_eso(&a),
        Command::VerifyEso(a) => run_verify(&a),
        Command::Predict(a) => run_predict(&a),
        Command::Compare(a) => run_compare(&a),
    }
}

fn load_data(args: &DataArgs) -> Result<Dataset> {
    let data = match (&args.data, &args.synthetic) {
        (Some(path), _) => Dataset::load(path, args.dim)
            .map_err(|e| Error::Config(format!("--data {}: {e}", path.display())))?,
        (None, Some(spec)) => spec.generate()?,
        (None, None) => return Err(Error::Config("one of --data or --synthetic is required".into())),
    };
    Ok(if args.normalize { data.normalize_rows() } else { data })
}

fn has_data(args: &DataArgs) -> bool {
    args.data.is_some() || args.synthetic.is_some()
}

fn loss_model(loss: LossArg, gamma: Option<f64>) -> Result<LossModel> {
    let name = match loss {
        LossArg::Hinge => "hinge",
        LossArg::Shinge => "shinge",
        LossArg::Logistic => "logistic",
        LossArg::Square => "square",
    };
    LossModel::from_name(name, gamma).map_err(|e| Error::Config(format!("--loss/--gamma: {e}")))
}

fn build_scheme(data: &Dataset, args: &SamplingArgs) -> Result<SamplingScheme> {
    let n = data.n();
    let b = args.batch as usize;
    let c = args.machines as usize;
    let flagged = |e: Error| Error::Config(format!("--sampling/--batch/--machines: {e}"));
    match args.sampling {
        SamplingArg::Serial => {
            if b != 1 {
                return Err(Error::Config("--batch: serial sampling has batch size 1".into()));
            }
            SamplingScheme::serial(n).map_err(flagged)
        }
        SamplingArg::Nice => {
            if c != 1 {
                return Err(Error::Config("--machines needs --sampling distributed".into()));
            }
            SamplingScheme::nice(n, b).map_err(flagged)
        }
        SamplingArg::Distributed => match &args.partition {
            Some(path) => {
                let cells = SamplingScheme::read_assignment(path)
                    .map_err(|e| Error::Config(format!("--partition {}: {e}", path.display())))?;
                if cells.len() != n {
                    return Err(Error::Config(format!(
                        "--partition {}: {} entries for {n} examples",
                        path.display(),
                        cells.len()
                    )));
                }
                SamplingScheme::distributed_from_assignment(b, c, &cells).map_err(flagged)
            }
            None => SamplingScheme::distributed(n, c, b).map_err(flagged),
        },
    }
}

fn sigma_source(args: &SamplingArgs) -> SigmaSource {
    match args.sigma_sq {
        Some(s) => SigmaSource::Given(s),
        None => SigmaSource::Estimate {
            tol: DEFAULT_POWER_TOL,
            max_iters: DEFAULT_POWER_MAX_ITERS,
            inflation: args.sigma_inflation,
        },
    }
}

fn build_weights(data: &Dataset, scheme: &SamplingScheme, args: &SamplingArgs) -> Result<EsoWeights> {
    if args.weights == WeightsArg::Naive {
        return Ok(naive_weights(data));
    }
    let mut mode = match &args.eso_mode {
        Some(m) => EsoMode::from_name(m).map_err(|e| Error::Config(format!("--eso-mode: {e}")))?,
        None => EsoMode::default_for(scheme),
    };
    if args.row_sparsity {
        if mode != EsoMode::StandardSparse {
            return Err(Error::Config("--row-sparsity needs --eso-mode standard_sparse".into()));
        }
        mode = EsoMode::StandardSparseRowCount;
    }
    let w = eso_weights(data, scheme, mode, &sigma_source(args))?;
    if let Some(note) = &w.notice {
        eprintln!("note: {note}");
    }
    Ok(w)
}

/// Prints to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn write_file(dir: &Path, name: &str, write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut buf = Vec::new();
    write(&mut buf)?;
    fs::write(dir.join(name), buf)?;
    Ok(())
}

fn run_solve(args: &SolveArgs) -> Result<i32> {
    let data = load_data(&args.data)?;
    let loss = loss_model(args.loss.loss, args.loss.gamma)?;
    let scheme = build_scheme(&data, &args.sampling)?;
    let machines = scheme.machines();
    let weights = build_weights(&data, &scheme, &args.sampling)?;
    let mut config = SolveConfig::new(loss, args.loss.lambda, scheme, weights);
    config.target_gap = args.run.target_gap;
    config.max_epochs = args.run.max_epochs;
    config.max_iterations = args.run.max_iterations;
    config.seed = args.run.seed;
    config.threads = args.run.threads as usize;
    config.checkpoint_every = args.checkpoint_every;
    config.record_wall_time = args.wall_time;
    if let Some(t0) = args.average {
        config.average_from = Some(t0);
        config.output = OutputMode::Average;
    }
    if let Some(h) = args.cocoa {
        config.cocoa = Some(CocoaConfig {
            local_iters: h,
            sigma_prime: args.sigma_prime.unwrap_or(machines as f64),
        });
    }
    let result = solve(&data, &config)?;
    let summary = result.summary_json();
    if let Some(dir) = &args.out {
        write_file(dir, "trace.csv", |b| result.write_trace(b))?;
        write_file(dir, "summary.json", |b| writeln!(b, "{summary}"))?;
    }
    emit(&summary);
    Ok(match result.status {
        Status::Converged => EXIT_OK,
        Status::NotConverged => EXIT_BUDGET,
    })
}

fn run_sweep(args: &SweepArgs) -> Result<i32> {
    let data = load_data(&args.data)?;
    let plan = ExperimentPlan {
        loss: loss_model(args.loss.loss, args.loss.gamma)?,
        lambda: args.loss.lambda,
        cells: args.cells.clone(),
        repeats: args.repeats as usize,
        base_seed: args.run.seed,
        target_gap: args.run.target_gap,
        max_epochs: args.run.max_epochs,
        threads: args.run.threads as usize,
        sigma: SigmaSource::default(),
    };
    let rows = run_plan(&data, &plan)?;
    let summary = summarize(&rows);
    match &args.out {
        Some(dir) => {
            write_file(dir, "sweep.csv", |b| write_rows(b, &rows))?;
            write_file(dir, "sweep_summary.csv", |b| write_summary(b, &summary))?;
        }
        None => {
            let mut out = std::io::stdout().lock();
            write_rows(&mut out, &rows)?;
            writeln!(out)?;
            write_summary(&mut out, &summary)?;
        }
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct EsoSummary {
    mode: EsoMode,
    sampling: String,
    n: usize,
    b: usize,
    machines: usize,
    sigma_sq: Option<f64>,
    omega: f64,
    omega_row_count: f64,
    beta: Option<f64>,
    v_max: f64,
    v_min: f64,
    v_sum: f64,
    notice: Option<String>,
}

fn run_eso(args: &EsoArgs) -> Result<i32> {
    let data = load_data(&args.data)?;
    let scheme = build_scheme(&data, &args.sampling)?;
    let w = build_weights(&data, &scheme, &args.sampling)?;
    let s = EsoSummary {
        mode: w.mode,
        sampling: scheme.to_string(),
        n: data.n(),
        b: scheme.batch_size(),
        machines: scheme.machines(),
        sigma_sq: w.sigma_sq,
        omega: omega(&data),
        omega_row_count: omega_row_count(&data),
        beta: w.beta,
        v_max: w.max(),
        v_min: w.min(),
        v_sum: w.sum(),
        notice: w.notice.clone(),
    };
    if let Some(path) = &args.write_weights {
        let text: String = w.v.iter().map(|v| format!("{v}\n")).collect();
        fs::write(path, text)?;
    }
    emit(&serde_json::to_string_pretty(&s).expect("serializable"));
    Ok(EXIT_OK)
}

fn run_verify(args: &VerifyArgs) -> Result<i32> {
    let data = load_data(&args.data)?;
    let scheme = build_scheme(&data, &args.sampling)?;
    let w = build_weights(&data, &scheme, &args.sampling)?;
    let mode = match args.monte_carlo {
        Some(draws) => VerifyMode::MonteCarlo { draws },
        None => VerifyMode::Exact,
    };
    let report = verify_eso(&data, &scheme, &w, args.lambda, args.pairs, mode, args.seed)?;
    emit(&serde_json::to_string_pretty(&report).expect("serializable"));
    Ok(if report.passed { EXIT_OK } else { EXIT_BUDGET })
}

#[derive(Serialize)]
struct Prediction {
    inputs: BoundInputs,
    smooth_loss: Option<Theorem1Bounds>,
    lipschitz_loss: Option<Theorem2Bounds>,
    complexity: Option<f64>,
    notes: Vec<String>,
}

fn run_predict(args: &PredictArgs) -> Result<i32> {
    let loss = loss_model(args.loss, args.gamma)?;
    let mut inputs = if has_data(&args.data) {
        let data = load_data(&args.data)?;
        let scheme = build_scheme(&data, &args.sampling)?;
        let w = build_weights(&data, &scheme, &args.sampling)?;
        BoundInputs::for_problem(&loss, &scheme, &w, args.lambda, args.target_gap)
    } else {
        let n = args
            .n
            .ok_or_else(|| Error::Config("--n is required without --data/--synthetic".into()))?;
        let v_max = args.v_max.unwrap_or(1.0);
        let mut i = BoundInputs::new(n, args.sampling.batch as usize, args.lambda, v_max, v_max * n as f64, args.target_gap);
        i.machines = args.sampling.machines as usize;
        i.gamma = loss.is_smooth().then(|| loss.gamma());
        i.lipschitz = loss.lipschitz();
        i.sigma_sq = args.sampling.sigma_sq;
        i
    };
    if let Some(v) = args.v_max {
        inputs.v_max = v;
    }
    if let Some(v) = args.v_sum {
        inputs.v_sum = v;
    }
    inputs.rho = args.rho;
    inputs.eps_d0 = args.eps_d0;
    inputs.validate()?;

    let mut notes = Vec::new();
    let smooth_loss = match theorem1_bounds(&inputs) {
        Ok(t) => Some(t),
        Err(e) => {
            notes.push(format!("smooth-loss bound not applicable: {e}"));
            None
        }
    };
    let lipschitz_loss = match theorem2_bounds(&inputs) {
        Ok(t) => Some(t),
        Err(e) => {
            notes.push(format!("Lipschitz-loss bound not applicable: {e}"));
            None
        }
    };
    let beta = args.beta.unwrap_or(inputs.v_max);
    let regime = match (inputs.gamma, inputs.lipschitz) {
        (Some(gamma), _) => Some(Regime::Smooth { gamma }),
        (None, Some(l)) => Some(Regime::Lipschitz {
            l,
            target_gap: inputs.target_gap,
        }),
        _ => None,
    };
    let complexity = regime.map(|r| complexity_estimate(r, beta, inputs.b, inputs.n, inputs.lambda));
    let p = Prediction {
        inputs,
        smooth_loss,
        lipschitz_loss,
        complexity,
        notes,
    };
    emit(&serde_json::to_string_pretty(&p).expect("serializable"));
    Ok(EXIT_OK)
}

fn run_compare(args: &CompareArgs) -> Result<i32> {
    let data = load_data(&args.data)?;
    let n = data.n();
    let (b, c) = (args.batch as usize, args.machines as usize);
    if b != c && b != n {
        return Err(Error::Config(format!(
            "--batch: the comparison covers b = C or b = n (got b={b}, C={c}, n={n})"
        )));
    }
    let scheme = SamplingScheme::distributed(n, c, b)
        .map_err(|e| Error::Config(format!("--batch/--machines: {e}")))?;
    let partition = scheme.partition().expect("distributed scheme has a partition");
    let s = crate::eso::sigma_sq(&data, DEFAULT_POWER_TOL, DEFAULT_POWER_MAX_ITERS)?;
    let st = sigma_tilde_sq(&data, partition)?;
    let sp = sigma_prime_estimate(&data, partition, args.samples, args.seed);
    let mut inputs = BoundInputs::new(n, b, args.lambda, 1.0, n as f64, 1e-3);
    inputs.machines = c;
    inputs.sigma_sq = Some(s);
    let report = cocoa_vs_msdca_report(&inputs, st, sp)?;
    eprintln!("sigma^2 = {s}, sigma~^2 = {st}, sigma' (estimate, not certified) = {sp}");
    match &args.out {
        Some(dir) => write_file(dir, "compare.csv", |buf| report.write_csv(buf))?,
        None => report.write_csv(std::io::stdout().lock())?,
    }
    Ok(EXIT_OK)
}
