//! Iteration bounds, complexity estimates and the CoCoA+ comparison.
//!
//! Bounds are reported both as reals and as integer iteration counts; the
//! ceiling is taken on the final expression only.

use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eso::{normalized_gram_top_eigen, EsoWeights, DEFAULT_POWER_MAX_ITERS, DEFAULT_POWER_TOL};
use crate::loss::LossModel;
use crate::sampling::SamplingScheme;
use crate::solver::{dual_value, duality_gap, fmt_real};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundInputs {
    pub n: usize,
    pub b: usize,
    pub machines: usize,
    pub lambda: f64,
    /// Smoothness parameter: the loss is `(1/γ)`-smooth.
    pub gamma: Option<f64>,
    pub lipschitz: Option<f64>,
    pub v_max: f64,
    pub v_sum: f64,
    pub sigma_sq: Option<f64>,
    pub target_gap: f64,
    /// Failure probability for the high-probability bound.
    pub rho: f64,
    /// Upper bound on the initial dual suboptimality `D(α*) − D(0)`.
    pub eps_d0: f64,
}

impl BoundInputs {
    pub fn new(n: usize, b: usize, lambda: f64, v_max: f64, v_sum: f64, target_gap: f64) -> Self {
        BoundInputs {
            n,
            b,
            machines: 1,
            lambda,
            gamma: None,
            lipschitz: None,
            v_max,
            v_sum,
            sigma_sq: None,
            target_gap,
            rho: 0.1,
            eps_d0: 1.0,
        }
    }

    /// Inputs for a concrete problem and weight vector.
    pub fn for_problem(loss: &LossModel, scheme: &SamplingScheme, weights: &EsoWeights, lambda: f64, target_gap: f64) -> Self {
        let mut inputs = BoundInputs::new(scheme.n(), scheme.batch_size(), lambda, weights.max(), weights.sum(), target_gap);
        inputs.machines = scheme.machines();
        inputs.gamma = loss.is_smooth().then(|| loss.gamma());
        inputs.lipschitz = loss.lipschitz();
        inputs.sigma_sq = weights.sigma_sq;
        inputs
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.b == 0 || self.b > self.n {
            return Err(Error::Config(format!("need 1 <= b <= n (b={}, n={})", self.b, self.n)));
        }
        for (name, x) in [("lambda", self.lambda), ("target gap", self.target_gap), ("eps_d0", self.eps_d0)] {
            if !(x > 0.0) || !x.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {x}")));
            }
        }
        if !(self.v_max > 0.0) || !(self.v_sum > 0.0) {
            return Err(Error::Config("ESO weights must be positive".into()));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::Config(format!("rho must be in (0, 1), got {}", self.rho)));
        }
        Ok(())
    }
}

/// A bound as a real number and as an iteration count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bound {
    pub value: f64,
    pub iterations: u64,
}

impl Bound {
    fn from_real(value: f64) -> Self {
        let value = value.max(0.0);
        Bound {
            value,
            iterations: value.ceil() as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem1Bounds {
    /// `(‖v‖∞ + λnγ)/(bλγ)`.
    pub k: f64,
    /// Iterations for expected gap `ε_G` at the last iterate.
    pub t: Bound,
    /// Averaging start for the averaged iterate, given `T`.
    pub t0: Option<Bound>,
    /// Iterations for gap `ε_G` with probability `1 − ρ`.
    pub t_tilde: Bound,
    pub notes: Vec<String>,
}

/// `K·log(K/x)`, or `None` when the log argument is at most 1.
fn k_log(k: f64, x: f64) -> Option<f64> {
    let arg = k / x;
    (arg > 1.0).then(|| k * arg.ln())
}

/// Bounds for `(1/γ)`-smooth losses.
pub fn theorem1_bounds(inputs: &BoundInputs) -> Result<Theorem1Bounds> {
    inputs.validate()?;
    let gamma = match inputs.gamma {
        Some(g) if g > 0.0 => g,
        _ => return Err(Error::Config("the smooth-loss bound needs gamma > 0".into())),
    };
    let (n, b, lambda, eps) = (inputs.n as f64, inputs.b as f64, inputs.lambda, inputs.target_gap);
    let k = (inputs.v_max + lambda * n * gamma) / (b * lambda * gamma);
    let mut notes = Vec::new();

    let t = match k_log(k, eps) {
        Some(v) => Bound::from_real(v),
        None => {
            notes.push(format!("target gap {eps} is at or above the break-even K = {k}; T = 0"));
            Bound::from_real(0.0)
        }
    };
    let t_tilde = match k_log(k, eps * inputs.rho) {
        Some(v) => Bound::from_real(v),
        None => {
            notes.push("high-probability log argument is at most 1; T~ = 0".into());
            Bound::from_real(0.0)
        }
    };
    let t0 = if t.iterations == 0 {
        None
    } else {
        let (t0, note) = averaging_start(k, eps, t.iterations as f64);
        notes.extend(note);
        t0.map(Bound::from_real)
    };
    Ok(Theorem1Bounds {
        k,
        t,
        t0,
        t_tilde,
        notes,
    })
}

/// Smallest `T₀` with `T₀ ≥ K·log(K/((T−T₀)ε))`, by damped fixed-point
/// iteration from `T/2`. Falls back to bisection if the iteration does not
/// settle on a sufficient point.
fn averaging_start(k: f64, eps: f64, t: f64) -> (Option<f64>, Option<String>) {
    let f = |x: f64| k_log(k, (t - x) * eps).unwrap_or(0.0);
    let sufficient = |x: f64| x <= t - 1.0 && x.ceil() >= f(x.ceil());
    let mut x = t / 2.0;
    for _ in 0..100 {
        let next = (0.5 * x + 0.5 * f(x)).clamp(0.0, t - 1.0);
        let done = (next - x).abs() < 1.0;
        x = next;
        if done {
            break;
        }
    }
    if sufficient(x) {
        return (Some(x), None);
    }
    // g(x) = f(x) − x is positive left of the first root and negative just
    // right of it; the minimum of g sits at x = T − K.
    let mut lo = 0.0;
    let mut hi = (t - k).clamp(0.0, t - 1.0);
    if f(hi) > hi {
        return (None, Some("no averaging start T0 < T satisfies the bound for this T".into()));
    }
    if f(lo) <= lo {
        return (Some(0.0), None);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > mid {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (Some(hi), Some("T0 fixed-point iteration did not settle; used bisection".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem2Bounds {
    /// `4L²Σv/n`.
    pub g: f64,
    pub t0_small: u64,
    /// Averaging start `T₀`.
    pub t0: Bound,
    pub t: Bound,
}

/// Bounds for `L`-Lipschitz losses, with the averaged output.
pub fn theorem2_bounds(inputs: &BoundInputs) -> Result<Theorem2Bounds> {
    inputs.validate()?;
    let l = inputs
        .lipschitz
        .filter(|l| l.is_finite() && *l > 0.0)
        .ok_or_else(|| Error::Config("the Lipschitz-loss bound needs a finite Lipschitz constant".into()))?;
    let (n, b, lambda, eps) = (inputs.n as f64, inputs.b as f64, inputs.lambda, inputs.target_gap);
    let g = 4.0 * l * l * inputs.v_sum / n;
    let t0_small = ((n / b) * (2.0 * lambda * n * inputs.eps_d0 / g).ln()).ceil().max(0.0);
    let extra = (4.0 * g / (lambda * eps) - 2.0 * n).max(0.0) / b;
    let tail = (n / b).max(g / (b * lambda * eps));
    let t0_iters = t0_small as u64 + extra.ceil() as u64;
    let tail_iters = ((n / b).ceil() as u64).max((g / (b * lambda * eps)).ceil() as u64);
    Ok(Theorem2Bounds {
        g,
        t0_small: t0_small as u64,
        t0: Bound {
            value: t0_small + extra,
            iterations: t0_iters,
        },
        t: Bound {
            value: t0_small + extra + tail,
            iterations: t0_iters + tail_iters,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    Smooth { gamma: f64 },
    Lipschitz { l: f64, target_gap: f64 },
}

/// Log-free iteration complexity `n/b + (β/b)·(1/(λγ))` or
/// `n/b + (β/b)·L²/(λε)`.
pub fn complexity_estimate(regime: Regime, beta: f64, b: usize, n: usize, lambda: f64) -> f64 {
    let (b, n) = (b as f64, n as f64);
    match regime {
        Regime::Smooth { gamma } => n / b + beta / (b * lambda * gamma),
        Regime::Lipschitz { l, target_gap } => n / b + beta / b * l * l / (lambda * target_gap),
    }
}

/// `σ̃²`: the largest per-block normalized Gram eigenvalue, times `C/n`.
pub fn sigma_tilde_sq(data: &Dataset, partition: &[Vec<usize>]) -> Result<f64> {
    if partition.is_empty() {
        return Err(Error::InvalidSampling("partition has no cells".into()));
    }
    let c = partition.len() as f64;
    let mut best = 0.0f64;
    for (k, cell) in partition.iter().enumerate() {
        if cell.is_empty() {
            return Err(Error::InvalidSampling(format!("partition cell {k} is empty")));
        }
        let e = normalized_gram_top_eigen(data, Some(cell), DEFAULT_POWER_TOL, DEFAULT_POWER_MAX_ITERS)?;
        best = best.max(e.value);
    }
    Ok(best * c / data.n() as f64)
}

/// `(1/C)·‖Xᵀα‖² / Σ_c ‖X_cᵀα_c‖²` for one `α`.
fn sigma_prime_ratio(data: &Dataset, partition: &[Vec<usize>], alpha: &[f64]) -> f64 {
    let mut total = vec![0.0; data.d()];
    let mut block = vec![0.0; data.d()];
    let mut denom = 0.0;
    for cell in partition {
        block.iter_mut().for_each(|e| *e = 0.0);
        for &i in cell {
            data.add_row_scaled(i, alpha[i], &mut block);
        }
        denom += block.iter().map(|x| x * x).sum::<f64>();
        total.iter_mut().zip(&block).for_each(|(t, x)| *t += x);
    }
    let num: f64 = total.iter().map(|x| x * x).sum();
    if denom > 0.0 {
        num / denom / partition.len() as f64
    } else {
        0.0
    }
}

/// Random-search estimate of `σ′` (squared convention), refined by
/// shrinking coordinate perturbations. A lower estimate of the true maximum;
/// not a certificate.
pub fn sigma_prime_estimate(data: &Dataset, partition: &[Vec<usize>], samples: usize, seed: u64) -> f64 {
    let n = data.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = || -> f64 { StandardNormal.sample(&mut rng) };
    let mut best_alpha = vec![1.0; n];
    let mut best = sigma_prime_ratio(data, partition, &best_alpha);
    for _ in 0..samples {
        let a: Vec<f64> = (0..n).map(|_| gauss()).collect();
        let r = sigma_prime_ratio(data, partition, &a);
        if r > best {
            best = r;
            best_alpha = a;
        }
    }
    let mut step = 0.5;
    while step > 1e-4 {
        let mut improved = false;
        for i in 0..n {
            for dir in [step, -step] {
                let mut a = best_alpha.clone();
                a[i] += dir;
                let r = sigma_prime_ratio(data, partition, &a);
                if r > best {
                    best = r;
                    best_alpha = a;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub term: String,
    pub msdca: f64,
    pub cocoa: f64,
    /// `cocoa / msdca`; infinite where mSDCA has no such term.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
}

impl CompareReport {
    pub fn row(&self, term: &str) -> Option<&CompareRow> {
        self.rows.iter().find(|r| r.term == term)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "term,msdca,cocoa,ratio")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{}", r.term, fmt_real(r.msdca), fmt_real(r.cocoa), fmt_real(r.ratio))?;
        }
        Ok(())
    }
}

/// Term-by-term comparison of the log-free iteration bounds of mini-batch
/// SDCA and CoCoA+ (1-smooth losses), at `b = C`, `H = 1`, plus the `b = n`
/// extreme.
pub fn cocoa_vs_msdca_report(inputs: &BoundInputs, sigma_tilde_sq: f64, sigma_prime: f64) -> Result<CompareReport> {
    let sigma_sq = inputs
        .sigma_sq
        .ok_or_else(|| Error::Config("the comparison needs sigma^2".into()))?;
    let (n, b, lambda) = (inputs.n as f64, inputs.b as f64, inputs.lambda);
    let row = |term: &str, msdca: f64, cocoa: f64| CompareRow {
        term: term.into(),
        msdca,
        cocoa,
        ratio: if msdca > 0.0 { cocoa / msdca } else { f64::INFINITY },
    };
    let m = [n / b, 1.0 / (b * lambda), sigma_sq / lambda, 0.0];
    let c = [n / b, n * sigma_tilde_sq / (b * lambda), 1.0 / lambda, sigma_tilde_sq / (lambda * lambda)];
    let mut rows = vec![
        row("n_over_b", m[0], c[0]),
        row("second", m[1], c[1]),
        row("third", m[2], c[2]),
        row("fourth", m[3], c[3]),
        row("total", m.iter().sum(), c.iter().sum()),
    ];
    rows.push(row("full_batch", 1.0 + sigma_sq / lambda, 1.0 + sigma_prime * sigma_tilde_sq / lambda));
    Ok(CompareReport { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma2Report {
    /// Exact `E[D(α⁺) − D(α)]` over the sampling support.
    pub expected_increase: f64,
    pub bound: f64,
    pub gap: f64,
    /// `G^t`; undefined at `s = 0`.
    pub g_t: Option<f64>,
    pub slack: f64,
    pub passed: bool,
}

/// Checks the expected dual increase against its lower bound by exact
/// enumeration of the sampling support.
pub fn lemma2_check(
    data: &Dataset,
    loss: &LossModel,
    alpha: &[f64],
    scheme: &SamplingScheme,
    weights: &EsoWeights,
    s: f64,
    lambda: f64,
) -> Result<Lemma2Report> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Config(format!("s must be in [0, 1], got {s}")));
    }
    let n = data.n();
    if alpha.len() != n || scheme.n() != n || weights.v.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: alpha.len(),
        });
    }
    let support = scheme.enumerate_support()?;
    let v = &weights.v;
    let w = data.primal_image(alpha, lambda)?;
    let d0 = dual_value(data, loss, alpha, lambda)?;
    let gap = duality_gap(data, loss, alpha, lambda)?;

    let mut targets = vec![0.0; n];
    for i in 0..n {
        let y = data.label(i);
        let delta = loss.coordinate_update(alpha[i], data.row_dot(i, &w), y, v[i], lambda, n)?;
        targets[i] = loss.project(alpha[i] + delta, y);
    }
    let mut expected = 0.0;
    let mut next = alpha.to_vec();
    for (set, p) in &support {
        for &i in set {
            next[i] = targets[i];
        }
        expected += p * (dual_value(data, loss, &next, lambda)? - d0);
        for &i in set {
            next[i] = alpha[i];
        }
    }

    let nf = n as f64;
    let b = scheme.batch_size() as f64;
    let gamma = loss.gamma();
    let (mut weighted, mut plain) = (0.0, 0.0);
    for i in 0..n {
        let u = loss.dual_point(data.row_dot(i, &w), data.label(i));
        let d = u - alpha[i];
        weighted += v[i] * d * d;
        plain += d * d;
    }
    let bound = b
        * (s / nf * gap - s * s / (2.0 * lambda * nf.powi(3)) * weighted
            + s * (1.0 - s) * gamma / (2.0 * nf * nf) * plain);
    let g_t = (s > 0.0).then(|| (weighted - gamma * lambda * nf * (1.0 - s) / s * plain) / nf);
    let slack = expected - bound;
    Ok(Lemma2Report {
        expected_increase: expected,
        bound,
        gap,
        g_t,
        slack,
        passed: slack >= -1e-10,
    })
}
