//! ESO step-size weights `v` for each sampling, plus the data quantities
//! they depend on (`σ²`, `ω`, `β`) and an exact/Monte-Carlo verifier.
//!
//! The weights certify, for `f(α) = ‖(1/λn) Xᵀα‖²`,
//!
//! ```text
//! E f(α + t_[S]) ≤ f(α) + (b/n) (⟨∇f(α), t⟩ + ‖t/(λn)‖²_v)
//! ```
//!
//! which is what makes the independent per-coordinate updates safe.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::sampling::SamplingScheme;

pub const DEFAULT_POWER_TOL: f64 = 1e-9;
pub const DEFAULT_POWER_MAX_ITERS: usize = 10_000;
pub const DEFAULT_SIGMA_INFLATION: f64 = 1.0 + 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EsoMode {
    Serial,
    StandardDense,
    StandardSparse,
    /// Sparse formula with the row nonzero count in place of the column
    /// counts. Diagnostic only; not a valid ESO in general.
    StandardSparseRowCount,
    Distributed,
    SafeAnyB,
    /// `v_i = ‖x_i‖²` regardless of the sampling. Unsafe for `b > 1`.
    Naive,
    /// `v_i = c·‖x_i‖²` for a caller-chosen `c`.
    Scaled,
}

impl EsoMode {
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "serial" => EsoMode::Serial,
            "standard_dense" | "dense" => EsoMode::StandardDense,
            "standard_sparse" | "sparse" => EsoMode::StandardSparse,
            "distributed" => EsoMode::Distributed,
            "safe_any_b" | "safe" => EsoMode::SafeAnyB,
            other => {
                return Err(Error::Config(format!(
                    "unknown ESO mode '{other}' (expected serial|standard_dense|standard_sparse|distributed|safe_any_b)"
                )))
            }
        })
    }

    /// The mode a scheme uses when none is requested.
    pub fn default_for(scheme: &SamplingScheme) -> Self {
        match scheme {
            SamplingScheme::Serial { .. } => EsoMode::Serial,
            SamplingScheme::Nice { .. } => EsoMode::StandardDense,
            SamplingScheme::Distributed { .. } => EsoMode::Distributed,
        }
    }

    pub fn needs_sigma(&self) -> bool {
        matches!(self, EsoMode::StandardDense | EsoMode::Distributed | EsoMode::SafeAnyB)
    }
}

impl fmt::Display for EsoMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EsoMode::Serial => "serial",
            EsoMode::StandardDense => "standard_dense",
            EsoMode::StandardSparse => "standard_sparse",
            EsoMode::StandardSparseRowCount => "standard_sparse_row_count",
            EsoMode::Distributed => "distributed",
            EsoMode::SafeAnyB => "safe_any_b",
            EsoMode::Naive => "naive",
            EsoMode::Scaled => "scaled",
        };
        f.write_str(s)
    }
}

/// Where `σ²` comes from when a formula needs it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaSource {
    /// Use this value as is.
    Given(f64),
    /// Power iteration, then multiply by `inflation` and clamp to `[1/n, 1]`.
    Estimate {
        tol: f64,
        max_iters: usize,
        inflation: f64,
    },
}

impl Default for SigmaSource {
    fn default() -> Self {
        SigmaSource::Estimate {
            tol: DEFAULT_POWER_TOL,
            max_iters: DEFAULT_POWER_MAX_ITERS,
            inflation: DEFAULT_SIGMA_INFLATION,
        }
    }
}

impl SigmaSource {
    pub fn resolve(&self, data: &Dataset) -> Result<f64> {
        match *self {
            SigmaSource::Given(s) => Ok(s),
            SigmaSource::Estimate {
                tol,
                max_iters,
                inflation,
            } => {
                let est = sigma_sq(data, tol, max_iters)?;
                let n = data.n() as f64;
                Ok((est * inflation).clamp(1.0 / n, 1.0))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EsoWeights {
    pub v: Vec<f64>,
    pub mode: EsoMode,
    pub sigma_sq: Option<f64>,
    pub omega: Option<f64>,
    pub beta: Option<f64>,
    /// Set when the requested formula was replaced by a fallback.
    pub notice: Option<String>,
}

impl EsoWeights {
    pub fn max(&self) -> f64 {
        self.v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.v.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sum(&self) -> f64 {
        self.v.iter().sum()
    }

    fn from_scale(data: &Dataset, mode: EsoMode, scale: f64) -> Self {
        EsoWeights {
            v: data.row_norms_sq().iter().map(|r| scale * r).collect(),
            mode,
            sigma_sq: None,
            omega: None,
            beta: Some(scale),
            notice: None,
        }
    }
}

/// Result of a power iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenEstimate {
    pub value: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Largest eigenvalue of `D^{-1/2} X_R X_Rᵀ D^{-1/2}` for the rows `R`
/// (all rows when `rows` is `None`), where `D` is the diagonal of `X_R X_Rᵀ`.
///
/// Starts from the all-ones vector and stops when the Rayleigh quotient
/// changes by less than `tol` relative.
pub fn normalized_gram_top_eigen(data: &Dataset, rows: Option<&[usize]>, tol: f64, max_iters: usize) -> Result<EigenEstimate> {
    let all: Vec<usize>;
    let rows = match rows {
        Some(r) => r,
        None => {
            all = (0..data.n()).collect();
            &all
        }
    };
    let m = rows.len();
    if m == 0 {
        return Err(Error::InvalidData("empty row set".into()));
    }
    let inv_sqrt: Vec<f64> = rows
        .iter()
        .map(|&i| {
            let r = data.row_norms_sq()[i];
            if r > 0.0 {
                Ok(1.0 / r.sqrt())
            } else {
                Err(Error::InvalidData(format!("row {i} has zero norm")))
            }
        })
        .collect::<Result<_>>()?;

    let mut z = vec![0.0; data.d()];
    let mut apply = |x: &[f64], out: &mut [f64]| {
        z.iter_mut().for_each(|e| *e = 0.0);
        for (k, &i) in rows.iter().enumerate() {
            data.add_row_scaled(i, x[k] * inv_sqrt[k], &mut z);
        }
        for (k, &i) in rows.iter().enumerate() {
            out[k] = data.row_dot(i, &z) * inv_sqrt[k];
        }
    };

    let norm = |x: &[f64]| x.iter().map(|e| e * e).sum::<f64>().sqrt();
    let mut x = vec![1.0 / (m as f64).sqrt(); m];
    let mut y = vec![0.0; m];
    apply(&x, &mut y);
    if norm(&y) <= 1e-300 {
        // All-ones start lies in the null space; use a fixed generic vector.
        x = (0..m).map(|k| 1.0 + 0.5 * ((k + 1) as f64).sin()).collect();
        let s = norm(&x);
        x.iter_mut().for_each(|e| *e /= s);
        apply(&x, &mut y);
    }
    let mut lambda = dot(&x, &y);
    let mut residual = f64::INFINITY;
    for iter in 1..=max_iters {
        let s = norm(&y);
        if s == 0.0 {
            return Ok(EigenEstimate {
                value: 0.0,
                iterations: iter,
                residual: 0.0,
            });
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / s;
        }
        apply(&x, &mut y);
        let next = dot(&x, &y);
        residual = (next - lambda).abs() / next.abs().max(f64::MIN_POSITIVE);
        lambda = next;
        if residual < tol {
            return Ok(EigenEstimate {
                value: lambda,
                iterations: iter,
                residual,
            });
        }
    }
    Err(Error::NonConvergence {
        estimate: lambda,
        residual,
        iterations: max_iters,
    })
}

/// `σ²`: the spectral radius of the row-normalized Gram matrix, over `n`.
pub fn sigma_sq(data: &Dataset, tol: f64, max_iters: usize) -> Result<f64> {
    let e = normalized_gram_top_eigen(data, None, tol, max_iters)?;
    Ok(e.value / data.n() as f64)
}

/// `ω = max_i (1/n) Σ_j ω_j x_ij² / Σ_j x_ij²` with `ω_j` the column
/// nonzero counts. Upper bound on `σ²`.
pub fn omega(data: &Dataset) -> f64 {
    let col = data.col_nnz();
    let n = data.n() as f64;
    (0..data.n())
        .map(|i| {
            let row = data.row(i);
            let num: f64 = row.iter().map(|(j, x)| col[j] as f64 * x * x).sum();
            num / data.row_norms_sq()[i] / n
        })
        .fold(0.0, f64::max)
}

/// `ω` with the row nonzero count `‖x_i‖₀` in place of the column counts,
/// which reduces to `max_i ‖x_i‖₀ / n`. Diagnostic only.
pub fn omega_row_count(data: &Dataset) -> f64 {
    let n = data.n() as f64;
    data.row_nnz().iter().map(|&k| k as f64 / n).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaKind {
    Serial,
    Standard,
    Distributed,
}

/// The scalar `β` relating mini-batch weights to serial ones.
///
/// For distributed sampling with `b = C` this is `1 + bσ²`, and for
/// `C < b < 2C` the safe bound `2(1 + bσ²)`.
pub fn beta(kind: BetaKind, b: usize, machines: usize, n: usize, sigma_sq: f64) -> Result<f64> {
    let (bf, cf, nf) = (b as f64, machines as f64, n as f64);
    match kind {
        BetaKind::Serial => Ok(1.0),
        BetaKind::Standard => {
            if b == 0 {
                return Err(Error::Config("batch size must be positive".into()));
            }
            Ok(1.0 + (bf - 1.0) * (nf * sigma_sq - 1.0) / (nf - 1.0).max(1.0))
        }
        BetaKind::Distributed => {
            if machines == 0 || b < machines {
                return Err(Error::Config(format!(
                    "distributed beta needs b >= C >= 1 (b={b}, C={machines})"
                )));
            }
            if b == machines {
                Ok(1.0 + bf * sigma_sq)
            } else if b >= 2 * machines {
                Ok(bf / (bf - cf) * (1.0 + (bf - cf) * (nf * sigma_sq - 1.0) / cf.max(nf - cf)))
            } else {
                Ok(2.0 * (1.0 + bf * sigma_sq))
            }
        }
    }
}

/// Serial weights used with any sampling.
pub fn naive_weights(data: &Dataset) -> EsoWeights {
    EsoWeights::from_scale(data, EsoMode::Naive, 1.0)
}

/// `v_i = scale·‖x_i‖²`.
pub fn scaled_weights(data: &Dataset, scale: f64) -> EsoWeights {
    EsoWeights::from_scale(data, EsoMode::Scaled, scale)
}

/// ESO weights for `scheme` under `mode`.
pub fn eso_weights(data: &Dataset, scheme: &SamplingScheme, mode: EsoMode, sigma: &SigmaSource) -> Result<EsoWeights> {
    if scheme.n() != data.n() {
        return Err(Error::Dimension {
            expected: data.n(),
            got: scheme.n(),
        });
    }
    let n = data.n();
    let b = scheme.batch_size();
    let machines = scheme.machines();
    let mismatch = || Error::ModeMismatch {
        mode: mode.to_string(),
        scheme: scheme.kind_name().to_string(),
    };
    match mode {
        EsoMode::Serial => {
            if b != 1 {
                return Err(mismatch());
            }
            Ok(EsoWeights::from_scale(data, EsoMode::Serial, 1.0))
        }
        EsoMode::StandardDense => {
            if machines != 1 {
                return Err(mismatch());
            }
            let s = sigma.resolve(data)?;
            let beta = beta(BetaKind::Standard, b, 1, n, s)?;
            let mut w = EsoWeights::from_scale(data, mode, beta);
            w.sigma_sq = Some(s);
            Ok(w)
        }
        EsoMode::StandardSparse | EsoMode::StandardSparseRowCount => {
            if machines != 1 {
                return Err(mismatch());
            }
            let denom = (n as f64 - 1.0).max(1.0);
            let bm1 = b as f64 - 1.0;
            let col = data.col_nnz();
            let v = (0..n)
                .map(|i| {
                    let row = data.row(i);
                    let sparse = |count: f64| 1.0 + bm1 * (count - 1.0) / denom;
                    if mode == EsoMode::StandardSparse {
                        row.iter().map(|(j, x)| x * x * sparse(col[j] as f64)).sum()
                    } else {
                        data.row_norms_sq()[i] * sparse(data.row_nnz()[i] as f64)
                    }
                })
                .collect();
            let om = if mode == EsoMode::StandardSparse {
                omega(data)
            } else {
                omega_row_count(data)
            };
            Ok(EsoWeights {
                v,
                mode,
                sigma_sq: None,
                omega: Some(om),
                beta: None,
                notice: None,
            })
        }
        EsoMode::Distributed => {
            if !matches!(scheme, SamplingScheme::Distributed { .. }) {
                return Err(mismatch());
            }
            let s = sigma.resolve(data)?;
            let beta = beta(BetaKind::Distributed, b, machines, n, s)?;
            let safe = b > machines && b < 2 * machines;
            let mut w = EsoWeights::from_scale(data, if safe { EsoMode::SafeAnyB } else { mode }, beta);
            w.sigma_sq = Some(s);
            if safe {
                w.notice = Some(format!(
                    "C < b < 2C (C={machines}, b={b}): using the safe bound 2(1 + b sigma^2)"
                ));
            }
            Ok(w)
        }
        EsoMode::SafeAnyB => {
            let s = sigma.resolve(data)?;
            let mut w = EsoWeights::from_scale(data, mode, 2.0 * (1.0 + b as f64 * s));
            w.sigma_sq = Some(s);
            Ok(w)
        }
        EsoMode::Naive | EsoMode::Scaled => Err(mismatch()),
    }
}

/// Left and right side of the ESO inequality for one `(α, t)` pair, exact
/// over a support.
pub fn eso_sides(data: &Dataset, support: &[(Vec<usize>, f64)], v: &[f64], lambda: f64, alpha: &[f64], t: &[f64]) -> Result<(f64, f64)> {
    let n = data.n();
    let scale = 1.0 / (lambda * n as f64);
    let w = data.primal_image(alpha, lambda)?;
    let f0: f64 = w.iter().map(|x| x * x).sum();
    let xt = data.primal_image(t, lambda)?;
    // ⟨∇f(α), t⟩ = 2 wᵀ (1/λn) Xᵀ t
    let grad_t = 2.0 * dot(&w, &xt);
    let quad: f64 = (0..n).map(|i| v[i] * (t[i] * scale).powi(2)).sum();
    let b: f64 = support.iter().map(|(s, p)| s.len() as f64 * p).sum();
    let rhs = f0 + b / n as f64 * (grad_t + quad);

    // Work with increments over f(α) so that t = 0 gives both sides exactly.
    let mut lhs_inc = 0.0;
    let mut delta = vec![0.0; data.d()];
    for (set, p) in support {
        delta.iter_mut().for_each(|e| *e = 0.0);
        for &i in set {
            data.add_row_scaled(i, t[i] * scale, &mut delta);
        }
        let inc: f64 = w.iter().zip(&delta).map(|(wj, dj)| (2.0 * wj + dj) * dj).sum();
        lhs_inc += p * inc;
    }
    Ok((f0 + lhs_inc, rhs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyMode {
    Exact,
    MonteCarlo { draws: usize },
}

#[derive(Debug, Clone, Serialize)]
pub struct EsoReport {
    pub mode: String,
    pub pairs: usize,
    /// Largest `(lhs − rhs) / max(1, |rhs|)` over the tested pairs.
    pub max_violation: f64,
    /// Monte-Carlo only: the largest violation measured in standard errors.
    pub max_violation_se: Option<f64>,
    pub passed: bool,
}

/// Checks the ESO inequality on `pairs` random `(α, t)` pairs drawn from a
/// standard normal.
pub fn verify_eso(
    data: &Dataset,
    scheme: &SamplingScheme,
    weights: &EsoWeights,
    lambda: f64,
    pairs: usize,
    mode: VerifyMode,
    seed: u64,
) -> Result<EsoReport> {
    let n = data.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = |len: usize| -> Vec<f64> { (0..len).map(|_| StandardNormal.sample(&mut rng)).collect() };
    let trials: Vec<(Vec<f64>, Vec<f64>)> = (0..pairs).map(|_| (gauss(n), gauss(n))).collect();
    match mode {
        VerifyMode::Exact => {
            let support = scheme.enumerate_support()?;
            let mut worst = f64::NEG_INFINITY;
            for (alpha, t) in &trials {
                let (lhs, rhs) = eso_sides(data, &support, &weights.v, lambda, alpha, t)?;
                worst = worst.max((lhs - rhs) / rhs.abs().max(1.0));
            }
            Ok(EsoReport {
                mode: "exact".into(),
                pairs,
                max_violation: worst,
                max_violation_se: None,
                passed: worst <= 1e-12,
            })
        }
        VerifyMode::MonteCarlo { draws } => {
            if draws < 2 {
                return Err(Error::Config("Monte Carlo verification needs at least 2 draws".into()));
            }
            let mut draw_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
            let mut worst = f64::NEG_INFINITY;
            let mut worst_se = f64::NEG_INFINITY;
            for (alpha, t) in &trials {
                let sets: Vec<(Vec<usize>, f64)> = (0..draws).map(|_| (scheme.draw(&mut draw_rng), 1.0)).collect();
                // Per-draw values, for the standard error.
                let mut vals = Vec::with_capacity(draws);
                let mut rhs = 0.0;
                for s in &sets {
                    let (l, r) = eso_sides(data, std::slice::from_ref(s), &weights.v, lambda, alpha, t)?;
                    vals.push(l);
                    rhs = r;
                }
                // eso_sides infers b from the single set; all draws have |S| = b.
                let mean = vals.iter().sum::<f64>() / draws as f64;
                let var = vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws as f64 - 1.0);
                let se = (var / draws as f64).sqrt();
                worst = worst.max((mean - rhs) / rhs.abs().max(1.0));
                if se > 0.0 {
                    worst_se = worst_se.max((mean - rhs) / se);
                } else if mean > rhs {
                    worst_se = f64::INFINITY;
                }
            }
            Ok(EsoReport {
                mode: format!("monte_carlo({draws})"),
                pairs,
                max_violation: worst,
                max_violation_se: Some(worst_se),
                passed: worst_se <= 3.0,
            })
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
