//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Criterion numbers given as arguments restrict the run.

use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use dualbatch::cli::sweep::{run_plan, summarize, ExperimentPlan, SweepCell};
use dualbatch::eso::{
    beta, eso_weights, naive_weights, omega, scaled_weights, sigma_sq, BetaKind, EsoMode, EsoWeights, SigmaSource,
    DEFAULT_POWER_MAX_ITERS, DEFAULT_POWER_TOL,
};
use dualbatch::sampling::iteration_rng;
use dualbatch::solver::{
    cocoa_step, msdca_step, solve, CocoaConfig, OutputMode, SolveConfig, SolveResult, SolverState, TraceRecord,
};
use dualbatch::synthetic::SyntheticSpec;
use dualbatch::theory::{lemma2_check, theorem1_bounds, theorem2_bounds, BoundInputs};
use dualbatch::{Dataset, LossKind, LossModel, SamplingScheme};

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, name: "update oracle equivalence", budget: Duration::from_secs(10), run: c1_update_oracle },
        Criterion { id: 2, name: "serial exactness", budget: Duration::from_secs(10), run: c2_serial_exactness },
        Criterion { id: 3, name: "exact ESO verification", budget: Duration::from_secs(60), run: c3_exact_eso },
        Criterion { id: 4, name: "expected dual increase bound", budget: Duration::from_secs(60), run: c4_lemma2 },
        Criterion { id: 5, name: "smooth-loss bound validity", budget: Duration::from_secs(120), run: c5_smooth_bound },
        Criterion { id: 6, name: "smooth-loss high-probability bound", budget: Duration::from_secs(180), run: c6_high_probability },
        Criterion { id: 7, name: "hinge averaged iterate", budget: Duration::from_secs(120), run: c7_averaged_hinge },
        Criterion { id: 8, name: "distribution is negligible", budget: Duration::from_secs(120), run: c8_distribution },
        Criterion { id: 9, name: "naive overshoot", budget: Duration::from_secs(30), run: c9_naive_overshoot },
        Criterion { id: 10, name: "sigma^2 estimator accuracy", budget: Duration::from_secs(10), run: c10_sigma_accuracy },
        Criterion { id: 11, name: "CoCoA+ equivalence", budget: Duration::from_secs(30), run: c11_cocoa_equivalence },
        Criterion { id: 12, name: "thread-count determinism", budget: Duration::from_secs(60), run: c12_determinism },
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in criteria.iter().filter(|c| only.is_empty() || only.contains(&c.id)) {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let result = match result {
            Ok(detail) if elapsed > c.budget => Err(format!("{detail}; over the {:?} budget", c.budget)),
            r => r,
        };
        let (tag, detail) = match &result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} criterion {:>2} {} ({:.2}s): {detail}", c.id, c.name, elapsed.as_secs_f64());
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

const LOSSES: [LossKind; 4] = [LossKind::Hinge, LossKind::SmoothedHinge, LossKind::Logistic, LossKind::Quadratic];

fn model(kind: LossKind) -> LossModel {
    match kind {
        LossKind::Hinge => LossModel::hinge(),
        LossKind::SmoothedHinge => LossModel::smoothed_hinge(1.0).unwrap(),
        LossKind::Logistic => LossModel::logistic(),
        LossKind::Quadratic => LossModel::quadratic(),
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// A dual-feasible value for label `y`, on the boundary a tenth of the time.
fn feasible_alpha(rng: &mut ChaCha8Rng, kind: LossKind, y: f64) -> f64 {
    if kind == LossKind::Quadratic {
        return 2.0 * gauss(rng);
    }
    let u: f64 = rng.random();
    let t = if u < 0.05 {
        0.0
    } else if u < 0.1 {
        1.0
    } else {
        rng.random()
    };
    y * t
}

// Independent reference computations.

/// Maximizer of a concave `f` on `[lo, hi]` by golden-section search,
/// compared against both endpoints.
fn golden_max(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..400 {
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs() + b.abs()) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    [lo, hi, mid].into_iter().fold(mid, |best, x| if f(x) > f(best) { x } else { best })
}

/// `φ*(−a)` written out per loss, `+∞` off the domain.
fn conj(kind: LossKind, a: f64, y: f64) -> f64 {
    let t = a * y;
    let inside = (0.0..=1.0).contains(&t);
    let xlx = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
    match kind {
        LossKind::Quadratic => 0.5 * a * a - a * y,
        _ if !inside => f64::INFINITY,
        LossKind::Hinge => -t,
        LossKind::SmoothedHinge => -t + 0.5 * t * t,
        LossKind::Logistic => xlx(t) + xlx(1.0 - t),
    }
}

fn dense_dual(x: &[Vec<f64>], y: &[f64], kind: LossKind, alpha: &[f64], lambda: f64) -> f64 {
    let n = x.len() as f64;
    let d = x[0].len();
    let mut w = vec![0.0; d];
    for (row, a) in x.iter().zip(alpha) {
        for j in 0..d {
            w[j] += a * row[j];
        }
    }
    let wn: f64 = w.iter().map(|e| (e / (lambda * n)).powi(2)).sum();
    let c: f64 = alpha.iter().zip(y).map(|(a, yi)| conj(kind, *a, *yi)).sum();
    -c / n - 0.5 * lambda * wn
}

/// Every subset the scheme can draw, each with its probability.
fn support(scheme: &SamplingScheme) -> Vec<(Vec<usize>, f64)> {
    fn subsets(items: &[usize], k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        if items.len() < k {
            return vec![];
        }
        let mut out: Vec<Vec<usize>> = subsets(&items[1..], k - 1)
            .into_iter()
            .map(|mut s| {
                s.insert(0, items[0]);
                s
            })
            .collect();
        out.extend(subsets(&items[1..], k));
        out
    }
    let sets = match scheme {
        SamplingScheme::Serial { n } => (0..*n).map(|i| vec![i]).collect(),
        SamplingScheme::Nice { n, b } => subsets(&(0..*n).collect::<Vec<_>>(), *b),
        SamplingScheme::Distributed { b, partition, .. } => {
            let per = b / partition.len();
            partition.iter().fold(vec![vec![]], |acc: Vec<Vec<usize>>, cell| {
                let local = subsets(cell, per);
                acc.iter()
                    .flat_map(|s| {
                        local.iter().map(move |l| {
                            let mut m = s.clone();
                            m.extend(l);
                            m
                        })
                    })
                    .collect()
            })
        }
    };
    let p = 1.0 / sets.len() as f64;
    sets.into_iter().map(|s| (s, p)).collect()
}

fn synthetic(n: usize, d: usize, density: f64, seed: u64, noise: f64) -> Dataset {
    SyntheticSpec::new(n, d, density, seed).with_noise(noise).generate().unwrap()
}

fn c1_update_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for kind in LOSSES {
        let loss = model(kind);
        for _ in 0..10_000 {
            let y = if kind == LossKind::Quadratic {
                2.0 * gauss(&mut rng)
            } else if rng.random::<bool>() {
                1.0
            } else {
                -1.0
            };
            let alpha = feasible_alpha(&mut rng, kind, y);
            let margin = 2.0 * gauss(&mut rng);
            let v = 10f64.powf(rng.random_range(-1.0..1.5));
            let lambda = 10f64.powf(rng.random_range(-3.0..0.0));
            let n = rng.random_range(1..=1000usize);
            let closed = ok(loss.coordinate_update(alpha, margin, y, v, lambda, n))?;
            let numeric = ok(loss.numeric_update_oracle(alpha, margin, y, v, lambda, n))?;
            let fc = loss.update_objective(alpha, margin, y, v, lambda, n, closed);
            let fo = loss.update_objective(alpha, margin, y, v, lambda, n, numeric);
            let diff = (fc - fo).abs();
            ensure(diff <= 1e-10, || {
                format!("{kind:?}: alpha={alpha} m={margin} y={y} v={v} lambda={lambda} n={n}: |{fc} - {fo}| = {diff:e}")
            })?;
            worst = worst.max(diff);
        }
    }
    Ok(format!("4 x 10^4 states, max |objective difference| {worst:.1e}"))
}

fn c2_serial_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut steps = 0;
    for (k, kind) in LOSSES.into_iter().enumerate() {
        let loss = model(kind);
        let data = synthetic(20, 6, 0.5, 20 + k as u64, 0.1);
        let dense = data.to_dense();
        let labels = data.labels().to_vec();
        let lambda = [0.05, 0.2, 0.01, 0.5][k];
        let scheme = ok(SamplingScheme::serial(data.n()))?;
        let weights = ok(eso_weights(&data, &scheme, EsoMode::Serial, &SigmaSource::default()))?;
        ensure(weights.v == data.row_norms_sq(), || "serial weights are not the squared row norms".into())?;
        let mut config = SolveConfig::new(loss, lambda, scheme.clone(), weights);
        config.seed = 7 + k as u64;
        let mut state = SolverState::new(&data);
        for step in 0..250 {
            if step % 50 == 25 {
                state.alpha = labels.iter().map(|&y| feasible_alpha(&mut rng, kind, y)).collect();
                ok(state.refresh_w(&data, lambda))?;
            }
            let i = scheme.draw(&mut iteration_rng(config.seed, state.t))[0];
            let before = state.alpha.clone();
            ok(msdca_step(&mut state, &data, &config))?;
            let coord = |a: f64| {
                let mut x = before.clone();
                x[i] = a;
                dense_dual(&dense, &labels, kind, &x, lambda)
            };
            let (lo, hi) = if kind == LossKind::Quadratic {
                (before[i] - 50.0, before[i] + 50.0)
            } else {
                (labels[i].min(0.0), labels[i].max(0.0))
            };
            let best = golden_max(&coord, lo, hi);
            let reference = coord(best);
            let got = dense_dual(&dense, &labels, kind, &state.alpha, lambda);
            let diff = (got - reference).abs();
            ensure(diff <= 1e-10, || format!("{kind:?} step {step}: D = {got}, coordinate maximum {reference}"))?;
            worst = worst.max(diff);
            steps += 1;
        }
    }
    Ok(format!("{steps} steps over 4 losses, max |D - D_oracle| {worst:.1e}"))
}

fn c3_exact_eso() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 12;
    let mut schemes = vec![ok(SamplingScheme::serial(n))?];
    for b in [2, 3, 4, 6, 12] {
        schemes.push(ok(SamplingScheme::nice(n, b))?);
    }
    for (c, b) in [(2, 2), (2, 4), (2, 6), (3, 3), (3, 6)] {
        schemes.push(ok(SamplingScheme::distributed(n, c, b))?);
    }
    let modes = [EsoMode::Serial, EsoMode::StandardDense, EsoMode::StandardSparse, EsoMode::Distributed, EsoMode::SafeAnyB];
    let mut worst = f64::NEG_INFINITY;
    let mut checked = 0;
    for inst in 0..3u64 {
        let data = synthetic(n, 6, 0.4, 300 + inst, 0.0);
        let dense = data.to_dense();
        for scheme in &schemes {
            let sup = support(scheme);
            let b = scheme.batch_size() as f64;
            for mode in modes {
                let Ok(weights) = eso_weights(&data, scheme, mode, &SigmaSource::default()) else {
                    continue;
                };
                for _ in 0..100 {
                    let lambda = rng.random_range(0.05..1.0);
                    let scale = 1.0 / (lambda * n as f64);
                    let alpha: Vec<f64> = (0..n).map(|_| gauss(&mut rng)).collect();
                    let t: Vec<f64> = (0..n).map(|_| gauss(&mut rng)).collect();
                    let image = |coef: &dyn Fn(usize) -> f64| -> Vec<f64> {
                        (0..6).map(|j| (0..n).map(|i| coef(i) * dense[i][j]).sum::<f64>() * scale).collect()
                    };
                    let w = image(&|i| alpha[i]);
                    let xt = image(&|i| t[i]);
                    let f0: f64 = w.iter().map(|e| e * e).sum();
                    let grad: f64 = 2.0 * w.iter().zip(&xt).map(|(a, b)| a * b).sum::<f64>();
                    let quad: f64 = (0..n).map(|i| weights.v[i] * (t[i] * scale).powi(2)).sum();
                    let rhs = f0 + b / n as f64 * (grad + quad);
                    let lhs: f64 = sup
                        .iter()
                        .map(|(set, p)| {
                            let ws = image(&|i| if set.contains(&i) { alpha[i] + t[i] } else { alpha[i] });
                            p * ws.iter().map(|e| e * e).sum::<f64>()
                        })
                        .sum();
                    let violation = (lhs - rhs) / rhs.abs().max(1.0);
                    ensure(violation <= 1e-12, || {
                        format!("instance {inst}, {scheme}, mode {mode}: violation {violation:e}")
                    })?;
                    worst = worst.max(violation);
                    checked += 1;
                }
            }
        }
    }
    Ok(format!("{checked} (alpha, t) pairs over 11 schemes, max normalized violation {worst:.1e}"))
}

fn c4_lemma2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = f64::INFINITY;
    for (k, kind) in LOSSES.into_iter().enumerate() {
        let loss = model(kind);
        for trial in 0..100u64 {
            let d = rng.random_range(2..=8);
            let data = synthetic(10, d, 0.5, 4000 + 100 * k as u64 + trial, 0.2);
            let scheme = match rng.random_range(0..4) {
                0 => ok(SamplingScheme::serial(10))?,
                1 => ok(SamplingScheme::nice(10, rng.random_range(2..=10)))?,
                2 => ok(SamplingScheme::distributed(10, 2, 2 * rng.random_range(1..=5)))?,
                _ => ok(SamplingScheme::distributed(10, 5, 5 * rng.random_range(1..=2)))?,
            };
            let mode = if rng.random::<f64>() < 0.25 {
                EsoMode::SafeAnyB
            } else {
                EsoMode::default_for(&scheme)
            };
            let weights = ok(eso_weights(&data, &scheme, mode, &SigmaSource::default()))?;
            let lambda = 10f64.powf(rng.random_range(-2.0..0.0));
            let alpha: Vec<f64> = data.labels().iter().map(|&y| feasible_alpha(&mut rng, kind, y)).collect();
            let lng = lambda * 10.0 * loss.gamma();
            let s = match trial % 3 {
                0 if loss.is_smooth() => lng / (weights.max() + lng),
                0 => 1.0,
                1 if trial == 1 => 0.0,
                _ => rng.random(),
            };
            let r = ok(lemma2_check(&data, &loss, &alpha, &scheme, &weights, s, lambda))?;
            ensure(r.passed && r.slack >= -1e-10, || {
                format!("{kind:?} trial {trial}, {scheme}, s={s}: slack {:e}", r.slack)
            })?;
            worst = worst.min(r.slack);
        }
    }
    Ok(format!("400 tuples, min slack {worst:.3e}"))
}

/// The smooth-loss instance shared by criteria 5 and 6.
fn smooth_instance() -> (Dataset, LossModel, f64, f64) {
    let data = synthetic(500, 50, 0.2, 5, 0.1).normalize_rows();
    (data, LossModel::smoothed_hinge(1.0).unwrap(), 0.01, 1e-3)
}

fn smooth_schemes(n: usize) -> Vec<SamplingScheme> {
    vec![
        SamplingScheme::serial(n).unwrap(),
        SamplingScheme::nice(n, 16).unwrap(),
        SamplingScheme::distributed(n, 4, 16).unwrap(),
    ]
}

/// Runs exactly `iterations` steps and returns the gap of the last iterate.
fn gap_after(data: &Dataset, loss: LossModel, lambda: f64, scheme: &SamplingScheme, weights: &EsoWeights, iterations: u64, seed: u64) -> Result<f64, String> {
    let mut config = SolveConfig::new(loss, lambda, scheme.clone(), weights.clone());
    config.target_gap = f64::MIN_POSITIVE;
    config.max_epochs = 1e12;
    config.max_iterations = Some(iterations);
    config.checkpoint_every = Some(iterations.max(1));
    config.seed = seed;
    let r = ok(solve(data, &config))?;
    let last = r.trace.last().ok_or("empty trace")?;
    ensure(last.t == iterations || last.gap <= f64::MIN_POSITIVE, || {
        format!("stopped at t = {} instead of {iterations}", last.t)
    })?;
    Ok(last.gap)
}

fn c5_smooth_bound() -> Outcome {
    let (data, loss, lambda, eps) = smooth_instance();
    let mut report = Vec::new();
    for scheme in smooth_schemes(data.n()) {
        let weights = ok(eso_weights(&data, &scheme, EsoMode::default_for(&scheme), &SigmaSource::default()))?;
        let bounds = ok(theorem1_bounds(&BoundInputs::for_problem(&loss, &scheme, &weights, lambda, eps)))?;
        let t = bounds.t.iterations;
        let gaps: Vec<f64> = (0..20).map(|s| gap_after(&data, loss, lambda, &scheme, &weights, t, s)).collect::<Result<_, _>>()?;
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        let within = gaps.iter().filter(|g| **g <= 10.0 * eps).count();
        ensure(mean <= 2.0 * eps && within >= 18, || {
            format!("{scheme}: T = {t}, mean gap {mean:e}, {within}/20 within 10 eps")
        })?;
        report.push(format!("{scheme}: T={t} mean gap {mean:.1e} ({within}/20)"));
    }
    Ok(report.join("; "))
}

fn c6_high_probability() -> Outcome {
    let (data, loss, lambda, eps) = smooth_instance();
    let mut report = Vec::new();
    for scheme in smooth_schemes(data.n()) {
        let weights = ok(eso_weights(&data, &scheme, EsoMode::default_for(&scheme), &SigmaSource::default()))?;
        let mut inputs = BoundInputs::for_problem(&loss, &scheme, &weights, lambda, eps);
        inputs.rho = 0.2;
        let t = ok(theorem1_bounds(&inputs))?.t_tilde.iterations;
        let mut reached = 0;
        for s in 0..50 {
            if gap_after(&data, loss, lambda, &scheme, &weights, t, 1000 + s)? <= eps {
                reached += 1;
            }
        }
        ensure(reached >= 35, || format!("{scheme}: only {reached}/50 runs reach {eps} by T~ = {t}"))?;
        report.push(format!("{scheme}: T~={t} {reached}/50"));
    }
    Ok(report.join("; "))
}

fn c7_averaged_hinge() -> Outcome {
    let data = synthetic(400, 40, 0.2, 7, 0.1).normalize_rows();
    let (loss, lambda, eps) = (LossModel::hinge(), 0.02, 0.01);
    let scheme = ok(SamplingScheme::nice(data.n(), 8))?;
    let weights = ok(eso_weights(&data, &scheme, EsoMode::StandardDense, &SigmaSource::default()))?;
    let mut inputs = BoundInputs::for_problem(&loss, &scheme, &weights, lambda, eps);
    inputs.eps_d0 = 1.0;
    let bounds = ok(theorem2_bounds(&inputs))?;
    let (t0, t) = (bounds.t0.iterations, bounds.t.iterations);
    let mut gaps = Vec::new();
    for seed in 0..10 {
        let mut config = SolveConfig::new(loss, lambda, scheme.clone(), weights.clone());
        config.target_gap = f64::MIN_POSITIVE;
        config.max_epochs = 1e12;
        config.max_iterations = Some(t);
        config.checkpoint_every = Some(t);
        config.average_from = Some(t0);
        config.output = OutputMode::Average;
        config.seed = seed;
        let r: SolveResult = ok(solve(&data, &config))?;
        ensure(r.output == OutputMode::Average && r.iterations == t, || {
            format!("seed {seed}: output {:?} after {} iterations", r.output, r.iterations)
        })?;
        gaps.push(r.gap);
    }
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    ensure(mean <= 2.0 * eps, || format!("T0 = {t0}, T = {t}: mean averaged gap {mean:e}"))?;
    Ok(format!("T0={t0} T={t}, mean gap of the average {mean:.2e}"))
}

fn c8_distribution() -> Outcome {
    let data = synthetic(1024, 20, 1.0, 8, 0.1).normalize_rows();
    let cells: Vec<SweepCell> = ["nice:32", "distributed:32:2", "distributed:32:4", "distributed:32:8"]
        .iter()
        .map(|c| c.parse().unwrap())
        .collect();
    let plan = ExperimentPlan {
        loss: LossModel::smoothed_hinge(1.0).unwrap(),
        lambda: 1e-3,
        cells: cells.clone(),
        repeats: 5,
        base_seed: 80,
        target_gap: 1e-4,
        max_epochs: 500.0,
        threads: 1,
        sigma: SigmaSource::default(),
    };
    let rows = ok(run_plan(&data, &plan))?;
    let summary = summarize(&rows);
    let epochs = |cell: &SweepCell| {
        summary
            .iter()
            .find(|s| &s.cell == cell)
            .filter(|s| s.reached == s.runs)
            .and_then(|s| s.median_epochs)
    };
    let base = epochs(&cells[0]).ok_or("C = 1 runs did not all reach the target")?;
    let s = ok(SigmaSource::default().resolve(&data))?;
    let beta_std = ok(beta(BetaKind::Standard, 32, 1, data.n(), s))?;
    let mut report = vec![format!("n sigma^2 = {:.1}, C=1: {base:.1} epochs", s * data.n() as f64)];
    for cell in &cells[1..] {
        let e = epochs(cell).ok_or_else(|| format!("C = {} runs did not all reach the target", cell.machines))?;
        let ratio = e / base;
        let beta_ratio = ok(beta(BetaKind::Distributed, 32, cell.machines, data.n(), s))? / beta_std;
        ensure(ratio <= 1.6 && beta_ratio <= 1.3, || {
            format!("C = {}: epoch ratio {ratio:.3}, beta ratio {beta_ratio:.3}", cell.machines)
        })?;
        report.push(format!("C={}: ratio {ratio:.2}, beta ratio {beta_ratio:.3}", cell.machines));
    }
    Ok(report.join("; "))
}

fn c9_naive_overshoot() -> Outcome {
    let data = ok(Dataset::from_dense(&vec![vec![0.6, 0.8]; 64], vec![1.0; 64]))?;
    let scheme = ok(SamplingScheme::nice(64, 64))?;
    let run = |weights: EsoWeights, target: f64| {
        let mut config = SolveConfig::new(LossModel::hinge(), 0.1, scheme.clone(), weights);
        config.target_gap = target;
        config.max_epochs = 100.0;
        solve(&data, &config)
    };
    let naive = ok(run(naive_weights(&data), 1e-1))?;
    let min_naive = naive.trace.iter().map(|r| r.gap).fold(f64::INFINITY, f64::min);
    ensure(!naive.converged() && min_naive > 1e-1, || format!("naive weights reached gap {min_naive:e}"))?;
    let safe = ok(run(ok(eso_weights(&data, &scheme, EsoMode::StandardDense, &SigmaSource::default()))?, 1e-6))?;
    ensure(safe.converged(), || format!("safe weights stopped at gap {:e}", safe.gap))?;
    Ok(format!(
        "naive: smallest gap {min_naive:.3} over {} epochs; safe: gap {:.1e} after {} iterations",
        naive.epochs, safe.gap, safe.iterations
    ))
}

fn c10_sigma_accuracy() -> Outcome {
    let mut worst = 0.0f64;
    for k in 0..20u64 {
        let density = [0.1, 0.3, 0.6, 1.0][k as usize % 4];
        let data = synthetic(50, 20, density, 1000 + k, 0.0);
        let n = data.n() as f64;
        let s = ok(sigma_sq(&data, DEFAULT_POWER_TOL, DEFAULT_POWER_MAX_ITERS))?;
        let dense = data.to_dense();
        let x = DMatrix::from_fn(50, 20, |i, j| dense[i][j]);
        let gram = &x * x.transpose();
        let normalized = DMatrix::from_fn(50, 50, |i, j| gram[(i, j)] / (gram[(i, i)] * gram[(j, j)]).sqrt());
        let top = SymmetricEigen::new(normalized).eigenvalues.max();
        let reference = top / n;
        let rel = (s - reference).abs() / reference;
        let om = omega(&data);
        ensure(rel <= 1e-6, || format!("matrix {k}: {s} vs eigensolver {reference}"))?;
        ensure(s >= 1.0 / n * (1.0 - 1e-12) && s <= 1.0 + 1e-12, || format!("matrix {k}: sigma^2 = {s} outside [1/n, 1]"))?;
        ensure(s <= om * (1.0 + 1e-12), || format!("matrix {k}: sigma^2 = {s} > omega = {om}"))?;
        worst = worst.max(rel);
    }
    Ok(format!("20 matrices, max relative error {worst:.1e}"))
}

fn same_bits(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

fn same_trace(a: &[TraceRecord], b: &[TraceRecord]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            x.t == y.t
                && x.updates == y.updates
                && same_bits(&[x.epochs, x.primal, x.dual, x.gap], &[y.epochs, y.primal, y.dual, y.gap])
        })
}

fn c11_cocoa_equivalence() -> Outcome {
    let configs = [
        (60, 2, LossKind::Hinge, 0.05),
        (96, 4, LossKind::SmoothedHinge, 0.01),
        (64, 8, LossKind::Logistic, 0.02),
    ];
    let mut report = Vec::new();
    for (k, (n, c, kind, lambda)) in configs.into_iter().enumerate() {
        let data = synthetic(n, 12, 0.4, 110 + k as u64, 0.1);
        let scheme = ok(SamplingScheme::distributed(n, c, c))?;
        let mut m = SolveConfig::new(model(kind), lambda, scheme.clone(), scaled_weights(&data, c as f64));
        m.seed = 11 + k as u64;
        m.max_epochs = 30.0;
        m.target_gap = 1e-9;
        let mut cc = m.clone();
        cc.cocoa = Some(CocoaConfig {
            local_iters: 1,
            sigma_prime: c as f64,
        });

        let mut a = SolverState::new(&data);
        let mut b = SolverState::new(&data);
        for step in 0..500 {
            ok(msdca_step(&mut a, &data, &m))?;
            ok(cocoa_step(&mut b, &data, &cc, 1, c as f64))?;
            ensure(same_bits(&a.alpha, &b.alpha) && same_bits(&a.w, &b.w), || {
                format!("config {k}: states differ after step {step}")
            })?;
        }
        let rm = ok(solve(&data, &m))?;
        let rc = ok(solve(&data, &cc))?;
        ensure(same_trace(&rm.trace, &rc.trace), || format!("config {k}: solve traces differ"))?;
        let (mut tm, mut tc) = (Vec::new(), Vec::new());
        ok(rm.write_trace(&mut tm))?;
        ok(rc.write_trace(&mut tc))?;
        ensure(tm == tc, || format!("config {k}: trace CSVs differ"))?;
        report.push(format!("C={c}: {} checkpoints", rm.trace.len()));
    }
    Ok(format!("500 steps and full traces identical; {}", report.join(", ")))
}

fn c12_determinism() -> Outcome {
    let dir = ok(tempfile::tempdir())?;
    let configs: [&[&str]; 5] = [
        &["--synthetic", "n=512,d=40,density=0.2,seed=1,noise=0.1", "--loss", "shinge", "--lambda", "0.001", "--sampling", "nice", "--batch", "32"],
        &["--synthetic", "n=512,d=30,density=0.3,seed=2,noise=0.1", "--loss", "hinge", "--lambda", "0.01", "--sampling", "distributed", "--machines", "4", "--batch", "64"],
        &["--synthetic", "n=600,d=25,density=0.5,seed=3", "--loss", "logistic", "--lambda", "0.005", "--sampling", "nice", "--batch", "128", "--max-epochs", "20"],
        &["--synthetic", "n=400,d=20,density=0.4,seed=4,noise=0.1", "--loss", "shinge", "--lambda", "0.01", "--sampling", "distributed", "--machines", "4", "--batch", "16", "--cocoa", "4"],
        &["--synthetic", "n=300,d=15,density=0.5,seed=5,noise=0.1", "--loss", "hinge", "--lambda", "0.02", "--sampling", "nice", "--batch", "48", "--average", "100", "--max-epochs", "30", "--target-gap", "1e-3"],
    ];
    for (k, args) in configs.iter().enumerate() {
        let mut traces = Vec::new();
        for threads in ["1", "4"] {
            let out = dir.path().join(format!("c{k}-t{threads}"));
            let status = Command::new(env!("CARGO_BIN_EXE_dualbatch"))
                .arg("solve")
                .args(*args)
                .args(["--seed", "42", "--threads", threads, "--out"])
                .arg(&out)
                .output()
                .map_err(|e| e.to_string())?;
            let code = status.status.code();
            ensure(matches!(code, Some(0) | Some(2)), || {
                format!("config {k}: exit {code:?}: {}", String::from_utf8_lossy(&status.stderr))
            })?;
            traces.push(read(&out.join("trace.csv"))? + &read(&out.join("summary.json"))?);
        }
        ensure(traces[0] == traces[1], || format!("config {k}: outputs differ between 1 and 4 threads"))?;
    }
    Ok("5 configurations, trace.csv and summary.json identical at 1 and 4 threads".into())
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}
