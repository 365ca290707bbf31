//! The mini-batch dual ascent loop.
//!
//! Every iteration draws `S_t`, computes each `δ_i` against the same snapshot
//! of `w`, then applies the deltas in ascending coordinate order. The update
//! computation may run on a thread pool; the ordered application keeps the
//! result independent of the thread count.

mod cocoa;
mod objective;
mod trace;

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eso::EsoWeights;
use crate::loss::LossModel;
use crate::sampling::{iteration_rng, SamplingScheme};

pub use cocoa::cocoa_step;
pub use objective::{dual_value, dual_value_with, duality_gap, h_value, primal_value};
pub use trace::{fmt_real, write_trace_csv, TraceRecord, TRACE_HEADER};

/// Batches smaller than this are computed on the calling thread.
const PARALLEL_MIN_BATCH: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputMode {
    Last,
    Average,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    NotConverged,
}

/// Local solver settings for the CoCoA+ comparison mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CocoaConfig {
    /// Sequential local steps per machine and outer iteration.
    pub local_iters: usize,
    /// Local subproblem scaling; the safe choice is the machine count.
    pub sigma_prime: f64,
}

#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub loss: LossModel,
    pub lambda: f64,
    pub scheme: SamplingScheme,
    pub weights: EsoWeights,
    pub target_gap: f64,
    pub max_epochs: f64,
    /// Hard cap on iterations, on top of the epoch budget.
    pub max_iterations: Option<u64>,
    /// `T₀`; averaging covers iterates `T₀+1 ..= T−1`.
    pub average_from: Option<u64>,
    pub output: OutputMode,
    pub seed: u64,
    pub threads: usize,
    /// Iterations between gap checkpoints; defaults to `⌈n/b⌉`.
    pub checkpoint_every: Option<u64>,
    pub cocoa: Option<CocoaConfig>,
    pub record_wall_time: bool,
}

impl SolveConfig {
    pub fn new(loss: LossModel, lambda: f64, scheme: SamplingScheme, weights: EsoWeights) -> Self {
        SolveConfig {
            loss,
            lambda,
            scheme,
            weights,
            target_gap: 1e-6,
            max_epochs: 100.0,
            max_iterations: None,
            average_from: None,
            output: OutputMode::Last,
            seed: 0,
            threads: 1,
            checkpoint_every: None,
            cocoa: None,
            record_wall_time: false,
        }
    }

    pub fn validate(&self, data: &Dataset) -> Result<()> {
        let n = data.n();
        if self.scheme.n() != n {
            return Err(Error::Dimension {
                expected: n,
                got: self.scheme.n(),
            });
        }
        if self.weights.v.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: self.weights.v.len(),
            });
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.target_gap > 0.0) {
            return Err(Error::Config(format!("target gap must be positive, got {}", self.target_gap)));
        }
        if !(self.max_epochs >= 1.0) {
            return Err(Error::Config(format!("max epochs must be at least 1, got {}", self.max_epochs)));
        }
        if self.threads == 0 {
            return Err(Error::Config("thread count must be at least 1".into()));
        }
        if self.checkpoint_every == Some(0) {
            return Err(Error::Config("checkpoint interval must be at least 1".into()));
        }
        if let Some(v) = self.weights.v.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::Config(format!("ESO weights must be finite and nonnegative, found {v}")));
        }
        if self.output == OutputMode::Average && self.average_from.is_none() {
            return Err(Error::Config("average output needs an averaging start T0".into()));
        }
        if let Some(c) = &self.cocoa {
            if self.scheme.partition().is_none() {
                return Err(Error::ModeMismatch {
                    mode: "cocoa".into(),
                    scheme: self.scheme.kind_name().into(),
                });
            }
            if !(c.sigma_prime > 0.0) {
                return Err(Error::Config(format!("sigma' must be positive, got {}", c.sigma_prime)));
            }
        }
        self.loss.check_labels(data.labels())
    }

    fn checkpoint_interval(&self, n: usize) -> u64 {
        self.checkpoint_every
            .unwrap_or_else(|| n.div_ceil(self.scheme.batch_size()) as u64)
    }

    fn iteration_limit(&self, n: usize) -> u64 {
        let by_epochs = (self.max_epochs * n as f64 / self.scheme.batch_size() as f64).ceil() as u64;
        self.max_iterations.map_or(by_epochs, |m| m.min(by_epochs))
    }

    fn parallel(&self) -> bool {
        self.threads > 1
    }
}

/// Running sum of `α^(t)` over `t ∈ [T₀+1, T−1]`, kept lazily: each
/// coordinate is folded in only when it changes.
#[derive(Debug, Clone)]
struct Averager {
    t0: u64,
    acc: Vec<f64>,
    since: Vec<u64>,
}

impl Averager {
    fn new(t0: u64, n: usize) -> Self {
        Averager {
            t0,
            acc: vec![0.0; n],
            since: vec![0; n],
        }
    }

    /// Coordinate `i` held `old` for iterates `since[i] ..= new_t − 1`.
    fn record(&mut self, i: usize, old: f64, new_t: u64) {
        let start = self.since[i].max(self.t0 + 1);
        if new_t > start && old != 0.0 {
            self.acc[i] += old * (new_t - start) as f64;
        }
        self.since[i] = new_t;
    }

    fn finish(&self, alpha: &[f64], t_end: u64) -> Option<Vec<f64>> {
        if t_end <= self.t0 {
            return None;
        }
        let denom = (t_end - self.t0) as f64;
        Some(
            alpha
                .iter()
                .enumerate()
                .map(|(i, &a)| {
                    let start = self.since[i].max(self.t0 + 1);
                    let held = t_end.saturating_sub(start) as f64;
                    (self.acc[i] + a * held) / denom
                })
                .collect(),
        )
    }
}

#[derive(Debug, Clone)]
pub struct SolverState {
    pub alpha: Vec<f64>,
    /// Incrementally maintained `(1/(λn)) Xᵀα`.
    pub w: Vec<f64>,
    pub t: u64,
    /// Cumulative coordinate updates.
    pub updates: u64,
    /// Largest relative drift `‖w − w_α‖∞/(1+‖w_α‖∞)` seen at a checkpoint.
    pub max_drift: f64,
    avg: Option<Averager>,
}

impl SolverState {
    pub fn new(data: &Dataset) -> Self {
        SolverState {
            alpha: vec![0.0; data.n()],
            w: vec![0.0; data.d()],
            t: 0,
            updates: 0,
            max_drift: 0.0,
            avg: None,
        }
    }

    pub fn with_averaging(data: &Dataset, t0: u64) -> Self {
        let mut s = Self::new(data);
        s.avg = Some(Averager::new(t0, data.n()));
        s
    }

    /// Window average at the current `t`, if the window is nonempty.
    pub fn average(&self) -> Option<Vec<f64>> {
        self.avg.as_ref().and_then(|a| a.finish(&self.alpha, self.t))
    }

    /// Sets `α_i = new` and moves `w` by `(1/(λn))(new − α_i) x_i`.
    fn apply(&mut self, data: &Dataset, inv: f64, i: usize, new: f64) {
        let d = new - self.alpha[i];
        if d == 0.0 {
            return;
        }
        if let Some(avg) = &mut self.avg {
            avg.record(i, self.alpha[i], self.t + 1);
        }
        self.alpha[i] = new;
        for (j, x) in data.row(i).iter() {
            self.w[j] += inv * (d * x);
        }
    }

    /// Replaces `w` by a from-scratch recompute and records the drift.
    pub fn refresh_w(&mut self, data: &Dataset, lambda: f64) -> Result<()> {
        let fresh = data.primal_image(&self.alpha, lambda)?;
        let scale = 1.0 + fresh.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let drift = self
            .w
            .iter()
            .zip(&fresh)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
            / scale;
        self.max_drift = self.max_drift.max(drift);
        self.w = fresh;
        Ok(())
    }
}

/// One iteration of the mini-batch method.
pub fn msdca_step(state: &mut SolverState, data: &Dataset, config: &SolveConfig) -> Result<()> {
    let mut rng = iteration_rng(config.seed, state.t);
    let set = config.scheme.draw(&mut rng);
    let n = data.n();
    let v = &config.weights.v;
    let snapshot = &*state;
    let compute = |&i: &usize| -> Result<(usize, f64)> {
        let y = data.label(i);
        let a = snapshot.alpha[i];
        let margin = data.row_dot(i, &snapshot.w);
        let delta = config.loss.coordinate_update(a, margin, y, v[i], config.lambda, n)?;
        Ok((i, config.loss.project(a + delta, y)))
    };
    let updates: Vec<(usize, f64)> = if config.parallel() && set.len() >= PARALLEL_MIN_BATCH {
        set.par_iter().map(compute).collect::<Result<_>>()?
    } else {
        set.iter().map(compute).collect::<Result<_>>()?
    };
    let inv = 1.0 / (config.lambda * n as f64);
    for (i, new) in updates {
        state.apply(data, inv, i, new);
    }
    state.t += 1;
    state.updates += set.len() as u64;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    pub status: Status,
    pub output: OutputMode,
    /// Returned dual point: last, best checkpointed, or window average.
    pub alpha: Vec<f64>,
    pub w: Vec<f64>,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub iterations: u64,
    pub epochs: f64,
    pub updates: u64,
    pub max_drift: f64,
    pub trace: Vec<TraceRecord>,
    pub note: Option<String>,
}

#[derive(Serialize)]
struct Summary<'a> {
    status: Status,
    iterations: u64,
    epochs: f64,
    final_gap: f64,
    primal: f64,
    dual: f64,
    output_mode: OutputMode,
    updates: u64,
    note: &'a Option<String>,
}

impl SolveResult {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    pub fn summary_json(&self) -> String {
        let s = Summary {
            status: self.status,
            iterations: self.iterations,
            epochs: self.epochs,
            final_gap: self.gap,
            primal: self.primal,
            dual: self.dual,
            output_mode: self.output,
            updates: self.updates,
            note: &self.note,
        };
        serde_json::to_string_pretty(&s).expect("summary is serializable")
    }

    pub fn write_trace<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_trace_csv(out, &self.trace)
    }
}

fn checkpoint(state: &mut SolverState, data: &Dataset, config: &SolveConfig, clock: &Instant) -> Result<TraceRecord> {
    state.refresh_w(data, config.lambda)?;
    let primal = primal_value(data, &config.loss, &state.w, config.lambda)?;
    let dual = dual_value_with(data, &config.loss, &state.alpha, &state.w, config.lambda)?;
    Ok(TraceRecord {
        t: state.t,
        epochs: state.t as f64 * config.scheme.batch_size() as f64 / data.n() as f64,
        primal,
        dual,
        gap: primal - dual,
        updates: state.updates,
        wall_s: if config.record_wall_time {
            clock.elapsed().as_secs_f64()
        } else {
            0.0
        },
    })
}

/// Runs the method until the gap target or the budget is reached.
pub fn solve(data: &Dataset, config: &SolveConfig) -> Result<SolveResult> {
    config.validate(data)?;
    if config.parallel() {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))?;
        pool.install(|| run(data, config))
    } else {
        run(data, config)
    }
}

fn run(data: &Dataset, config: &SolveConfig) -> Result<SolveResult> {
    let clock = Instant::now();
    let n = data.n();
    let every = config.checkpoint_interval(n);
    let limit = config.iteration_limit(n);
    let mut state = match (config.output, config.average_from) {
        (OutputMode::Average, Some(t0)) => SolverState::with_averaging(data, t0),
        _ => SolverState::new(data),
    };

    let mut trace = Vec::new();
    let mut rec = checkpoint(&mut state, data, config, &clock)?;
    let mut best = (rec.gap, state.alpha.clone());
    trace.push(rec.clone());
    let status = loop {
        if rec.gap <= config.target_gap {
            break Status::Converged;
        }
        if state.t >= limit {
            break Status::NotConverged;
        }
        match &config.cocoa {
            Some(c) => cocoa_step(&mut state, data, config, c.local_iters, c.sigma_prime)?,
            None => msdca_step(&mut state, data, config)?,
        }
        if state.t % every == 0 || state.t >= limit {
            rec = checkpoint(&mut state, data, config, &clock)?;
            if config.output == OutputMode::Last && rec.gap < best.0 {
                best = (rec.gap, state.alpha.clone());
            }
            trace.push(rec.clone());
        }
    };

    let mut note = None;
    let (output, alpha) = match config.output {
        OutputMode::Average => match state.average() {
            Some(avg) => (OutputMode::Average, avg),
            None => {
                note = Some(format!(
                    "averaging window is empty (T = {} ≤ T0 = {}); returning the last iterate",
                    state.t,
                    config.average_from.unwrap_or(0)
                ));
                (OutputMode::Last, state.alpha.clone())
            }
        },
        OutputMode::Last if status == Status::NotConverged && best.0 < rec.gap => {
            note = Some(format!("budget exhausted; returning the best checkpoint (gap {})", best.0));
            (OutputMode::Last, best.1)
        }
        OutputMode::Last => (OutputMode::Last, state.alpha.clone()),
    };
    let w = data.primal_image(&alpha, config.lambda)?;
    let primal = primal_value(data, &config.loss, &w, config.lambda)?;
    let dual = dual_value_with(data, &config.loss, &alpha, &w, config.lambda)?;
    Ok(SolveResult {
        status,
        output,
        alpha,
        w,
        primal,
        dual,
        gap: primal - dual,
        iterations: state.t,
        epochs: rec.epochs,
        updates: state.updates,
        max_drift: state.max_drift,
        trace,
        note,
    })
}
