//! Loss families, their convex conjugates and the per-coordinate dual update.
//!
//! Every loss is written as `φ_i(z) = φ(y_i z)` (quadratic: `½(z − y_i)²`).
//! The conjugate is always reported as `φ_i*(−a)`, the form the dual uses.
//! Classification losses have the dual domain `a·y ∈ [0, 1]`.

use std::fmt;

use crate::error::{Error, Result};

/// Slack allowed on the dual domain boundary before a value counts as
/// infeasible. Values inside the slack are clamped onto the domain.
pub const DUAL_TOL: f64 = 1e-12;

const LOGISTIC_EDGE: f64 = 1e-14;
const LOGISTIC_GRAD_TOL: f64 = 1e-12;
const GOLDEN_WIDTH: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    Hinge,
    SmoothedHinge,
    Logistic,
    Quadratic,
}

/// A loss family together with its smoothness parameter `γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossModel {
    kind: LossKind,
    gamma: f64,
}

impl fmt::Display for LossModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LossKind::SmoothedHinge => write!(f, "shinge(gamma={})", self.gamma),
            _ => f.write_str(self.name()),
        }
    }
}

impl LossModel {
    pub fn hinge() -> Self {
        LossModel {
            kind: LossKind::Hinge,
            gamma: 0.0,
        }
    }

    pub fn smoothed_hinge(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Config(format!("smoothed hinge needs gamma > 0, got {gamma}")));
        }
        Ok(LossModel {
            kind: LossKind::SmoothedHinge,
            gamma,
        })
    }

    pub fn logistic() -> Self {
        LossModel {
            kind: LossKind::Logistic,
            gamma: 4.0,
        }
    }

    pub fn quadratic() -> Self {
        LossModel {
            kind: LossKind::Quadratic,
            gamma: 1.0,
        }
    }

    /// Parses `hinge|shinge|logistic|square`. `gamma` is only read for the
    /// smoothed hinge (default 1).
    pub fn from_name(name: &str, gamma: Option<f64>) -> Result<Self> {
        match name {
            "hinge" => Ok(Self::hinge()),
            "shinge" | "smoothed_hinge" => Self::smoothed_hinge(gamma.unwrap_or(1.0)),
            "logistic" => Ok(Self::logistic()),
            "square" | "quadratic" => Ok(Self::quadratic()),
            other => Err(Error::Config(format!(
                "unknown loss '{other}' (expected hinge|shinge|logistic|square)"
            ))),
        }
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            LossKind::Hinge => "hinge",
            LossKind::SmoothedHinge => "shinge",
            LossKind::Logistic => "logistic",
            LossKind::Quadratic => "square",
        }
    }

    /// `γ` such that the loss is `(1/γ)`-smooth; 0 for the hinge.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Lipschitz constant, or `None` for the quadratic loss.
    pub fn lipschitz(&self) -> Option<f64> {
        match self.kind {
            LossKind::Quadratic => None,
            _ => Some(1.0),
        }
    }

    pub fn is_smooth(&self) -> bool {
        self.gamma > 0.0
    }

    pub fn is_classification(&self) -> bool {
        self.kind != LossKind::Quadratic
    }

    pub fn check_label(&self, index: usize, y: f64) -> Result<()> {
        if self.is_classification() && y != 1.0 && y != -1.0 {
            return Err(Error::InvalidLabel { index, label: y });
        }
        Ok(())
    }

    pub fn check_labels(&self, labels: &[f64]) -> Result<()> {
        labels.iter().enumerate().try_for_each(|(i, &y)| self.check_label(i, y))
    }

    /// `φ(z)` for label `y`. Labels are assumed to be validated.
    pub fn value(&self, z: f64, y: f64) -> f64 {
        match self.kind {
            LossKind::Hinge => (1.0 - y * z).max(0.0),
            LossKind::SmoothedHinge => {
                let t = y * z;
                if t >= 1.0 {
                    0.0
                } else if t <= 1.0 - self.gamma {
                    1.0 - t - 0.5 * self.gamma
                } else {
                    (1.0 - t) * (1.0 - t) / (2.0 * self.gamma)
                }
            }
            LossKind::Logistic => softplus(-y * z),
            LossKind::Quadratic => 0.5 * (z - y) * (z - y),
        }
    }

    /// `φ(z)` with label validation.
    pub fn checked_value(&self, z: f64, y: f64) -> Result<f64> {
        self.check_label(0, y)?;
        Ok(self.value(z, y))
    }

    /// `φ'(z)`; for the hinge the minimum-norm subgradient (0 at the kink).
    pub fn derivative(&self, z: f64, y: f64) -> f64 {
        match self.kind {
            LossKind::Hinge => {
                if y * z < 1.0 {
                    -y
                } else {
                    0.0
                }
            }
            LossKind::SmoothedHinge => {
                let t = y * z;
                if t >= 1.0 {
                    0.0
                } else if t <= 1.0 - self.gamma {
                    -y
                } else {
                    -y * (1.0 - t) / self.gamma
                }
            }
            LossKind::Logistic => -y * sigmoid(-y * z),
            LossKind::Quadratic => z - y,
        }
    }

    /// The dual point `u` with `−u ∈ ∂φ(z)`, using the deterministic
    /// subgradient choice of [`LossModel::derivative`].
    pub fn dual_point(&self, z: f64, y: f64) -> f64 {
        -self.derivative(z, y)
    }

    /// Whether `a` lies in the dual domain (up to [`DUAL_TOL`]).
    pub fn is_feasible(&self, a: f64, y: f64) -> bool {
        if !a.is_finite() {
            return false;
        }
        match self.kind {
            LossKind::Quadratic => true,
            _ => {
                let t = a * y;
                (-DUAL_TOL..=1.0 + DUAL_TOL).contains(&t)
            }
        }
    }

    /// Clamps `a` onto the dual domain.
    pub fn project(&self, a: f64, y: f64) -> f64 {
        match self.kind {
            LossKind::Quadratic => a,
            _ => y * (a * y).clamp(0.0, 1.0),
        }
    }

    /// `φ*(−a)`; `+∞` outside the dual domain.
    pub fn conjugate(&self, a: f64, y: f64) -> f64 {
        if !self.is_feasible(a, y) {
            return f64::INFINITY;
        }
        match self.kind {
            LossKind::Hinge => {
                let t = (a * y).clamp(0.0, 1.0);
                -t
            }
            LossKind::SmoothedHinge => {
                let t = (a * y).clamp(0.0, 1.0);
                -t + 0.5 * self.gamma * t * t
            }
            LossKind::Logistic => {
                let t = (a * y).clamp(0.0, 1.0);
                xlogx(t) + xlogx(1.0 - t)
            }
            LossKind::Quadratic => 0.5 * a * a - a * y,
        }
    }

    fn check_update_inputs(&self, alpha: f64, y: f64, v: f64, lambda: f64, n: usize) -> Result<()> {
        if !self.is_feasible(alpha, y) {
            return Err(Error::Infeasible {
                loss: self.name(),
                alpha,
                label: y,
            });
        }
        if !(v > 0.0) || !(lambda > 0.0) || n == 0 {
            return Err(Error::Config(format!(
                "coordinate update needs v > 0, lambda > 0, n > 0 (got v={v}, lambda={lambda}, n={n})"
            )));
        }
        Ok(())
    }

    /// The 1-D relaxed dual objective
    /// `−φ*(−(α+δ)) − v/(2λn)·δ² − m·δ`.
    pub fn update_objective(&self, alpha: f64, margin: f64, y: f64, v: f64, lambda: f64, n: usize, delta: f64) -> f64 {
        let q = lambda * n as f64;
        -self.conjugate(alpha + delta, y) - v / (2.0 * q) * delta * delta - margin * delta
    }

    /// Maximizer of [`LossModel::update_objective`], keeping `α + δ` in the
    /// dual domain.
    pub fn coordinate_update(&self, alpha: f64, margin: f64, y: f64, v: f64, lambda: f64, n: usize) -> Result<f64> {
        self.check_update_inputs(alpha, y, v, lambda, n)?;
        let q = lambda * n as f64;
        let ya = (alpha * y).clamp(0.0, 1.0);
        let delta = match self.kind {
            LossKind::Hinge => {
                let t = ((1.0 - y * margin) * q / v + ya).clamp(0.0, 1.0);
                y * t - alpha
            }
            LossKind::SmoothedHinge => {
                let g = self.gamma;
                let t = ((1.0 - y * margin - g * ya) * q / (v + q * g) + ya).clamp(0.0, 1.0);
                y * t - alpha
            }
            LossKind::Quadratic => q * (y - margin - alpha) / (q + v),
            LossKind::Logistic => y * logistic_root(ya, y * margin, v / q) - alpha,
        };
        Ok(delta)
    }

    /// Independent maximizer of the same 1-D objective by bracketing and
    /// golden-section search. Never uses the closed forms.
    pub fn numeric_update_oracle(&self, alpha: f64, margin: f64, y: f64, v: f64, lambda: f64, n: usize) -> Result<f64> {
        self.check_update_inputs(alpha, y, v, lambda, n)?;
        let f = |d: f64| self.update_objective(alpha, margin, y, v, lambda, n, d);
        // F(x1) - F(x2), evaluated without cancellation where the objective
        // is piecewise polynomial.
        let q = lambda * n as f64;
        let diff = |x1: f64, x2: f64| -> f64 {
            let h = x1 - x2;
            let s = x1 + x2;
            let quad = h * (-v / (2.0 * q) * s - margin);
            match self.kind {
                LossKind::Hinge => quad + y * h,
                LossKind::SmoothedHinge => quad + h * (y - 0.5 * self.gamma * (2.0 * alpha + s)),
                LossKind::Quadratic => quad + h * (y - 0.5 * (2.0 * alpha + s)),
                LossKind::Logistic => f(x1) - f(x2),
            }
        };
        let (lo, hi) = match self.kind {
            LossKind::Quadratic => bracket_max(&diff, 1.0 + alpha.abs() + margin.abs()),
            _ => {
                let (a, b) = (-alpha, y - alpha);
                (a.min(b), a.max(b))
            }
        };
        let mid = golden_section_max(&diff, lo, hi);
        let mut best = mid;
        if self.is_classification() {
            for edge in [lo, hi] {
                if diff(edge, best) >= 0.0 {
                    best = edge;
                }
            }
        }
        Ok(best)
    }
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn xlogx(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        t * t.ln()
    }
}

fn logit(b: f64) -> f64 {
    b.ln() - (-b).ln_1p()
}

/// Root in `b = y(α+δ)` of `−logit(b) − κ(b − b₀) − ym`, decreasing in `b`.
fn logistic_root(b0: f64, ym: f64, kappa: f64) -> f64 {
    let g = |b: f64| -logit(b) - kappa * (b - b0) - ym;
    let (mut lo, mut hi) = (LOGISTIC_EDGE, 1.0 - LOGISTIC_EDGE);
    if g(lo) <= 0.0 {
        return lo;
    }
    if g(hi) >= 0.0 {
        return hi;
    }
    let mut b = b0.clamp(lo, hi);
    for _ in 0..200 {
        let gb = g(b);
        if gb.abs() <= LOGISTIC_GRAD_TOL {
            break;
        }
        if gb > 0.0 {
            lo = b;
        } else {
            hi = b;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
        let slope = -1.0 / (b * (1.0 - b)) - kappa;
        let newton = b - gb / slope;
        b = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    b
}

/// Finds an interval containing the maximizer of a concave function given
/// only through pairwise differences.
fn bracket_max<D: Fn(f64, f64) -> f64>(diff: &D, step: f64) -> (f64, f64) {
    let (mut a, mut b) = (0.0, step);
    if diff(b, a) < 0.0 {
        // Going the other way.
        b = -step;
        if diff(b, a) < 0.0 {
            return (-step, step);
        }
    }
    loop {
        let c = b + 1.618_033_988_749_895 * (b - a);
        if diff(c, b) < 0.0 {
            return (a.min(c), a.max(c));
        }
        a = b;
        b = c;
        if !b.is_finite() {
            return (a.min(b), a.max(b));
        }
    }
}

fn golden_section_max<D: Fn(f64, f64) -> f64>(diff: &D, mut a: f64, mut b: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    for _ in 0..400 {
        if b - a <= GOLDEN_WIDTH {
            break;
        }
        if diff(c, d) >= 0.0 {
            b = d;
            d = c;
            c = b - INV_PHI * (b - a);
        } else {
            a = c;
            c = d;
            d = a + INV_PHI * (b - a);
        }
        if !(c > a && d < b) {
            break;
        }
    }
    0.5 * (a + b)
}
