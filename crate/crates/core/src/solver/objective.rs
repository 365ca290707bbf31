//! Primal, dual, duality gap and the separable surrogate `H(t, α)`.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eso::dot;
use crate::loss::LossModel;

/// `P(w) = (1/n) Σ φ_i(x_iᵀw) + (λ/2)‖w‖²`.
pub fn primal_value(data: &Dataset, loss: &LossModel, w: &[f64], lambda: f64) -> Result<f64> {
    let margins = data.margins(w)?;
    let n = data.n() as f64;
    let loss_sum: f64 = margins
        .iter()
        .zip(data.labels())
        .map(|(&z, &y)| loss.value(z, y))
        .sum();
    Ok(loss_sum / n + 0.5 * lambda * dot(w, w))
}

fn conjugate_sum(data: &Dataset, loss: &LossModel, alpha: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for (i, (&a, &y)) in alpha.iter().zip(data.labels()).enumerate() {
        let c = loss.conjugate(a, y);
        if !c.is_finite() {
            return Err(Error::Infeasible {
                loss: loss.name(),
                alpha: alpha[i],
                label: y,
            });
        }
        s += c;
    }
    Ok(s)
}

/// `D(α)` given a precomputed `w = w_α`.
pub fn dual_value_with(data: &Dataset, loss: &LossModel, alpha: &[f64], w: &[f64], lambda: f64) -> Result<f64> {
    let n = data.n() as f64;
    Ok(0.0 - conjugate_sum(data, loss, alpha)? / n - 0.5 * lambda * dot(w, w))
}

/// `D(α) = −(1/n) Σ φ_i*(−α_i) − (λ/2)‖w_α‖²`.
pub fn dual_value(data: &Dataset, loss: &LossModel, alpha: &[f64], lambda: f64) -> Result<f64> {
    let w = data.primal_image(alpha, lambda)?;
    dual_value_with(data, loss, alpha, &w, lambda)
}

/// `G(α) = P(w_α) − D(α)` with `w_α` recomputed from scratch.
pub fn duality_gap(data: &Dataset, loss: &LossModel, alpha: &[f64], lambda: f64) -> Result<f64> {
    let w = data.primal_image(alpha, lambda)?;
    let d = dual_value_with(data, loss, alpha, &w, lambda)?;
    Ok(primal_value(data, loss, &w, lambda)? - d)
}

/// `H(t, α) = −(1/n) Σ φ_i*(−(α_i+t_i)) − (λ/2)‖w_α‖² − (λ/2)‖t/(λn)‖²_v − (1/n) tᵀX w_α`.
pub fn h_value(data: &Dataset, loss: &LossModel, alpha: &[f64], t: &[f64], lambda: f64, v: &[f64]) -> Result<f64> {
    let n = data.n();
    if t.len() != n || v.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: t.len().min(v.len()),
        });
    }
    let w = data.primal_image(alpha, lambda)?;
    let shifted: Vec<f64> = alpha.iter().zip(t).map(|(a, ti)| a + ti).collect();
    let nf = n as f64;
    let q = lambda * nf;
    let conj = conjugate_sum(data, loss, &shifted)?;
    let weighted: f64 = (0..n).map(|i| v[i] * (t[i] / q).powi(2)).sum();
    let cross: f64 = (0..n).map(|i| t[i] * data.row_dot(i, &w)).sum();
    Ok(-conj / nf - 0.5 * lambda * dot(&w, &w) - 0.5 * lambda * weighted - cross / nf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small() -> Dataset {
        let x = vec![
            vec![0.5, 0.0, -1.0],
            vec![0.0, 1.5, 0.25],
            vec![1.0, -0.5, 0.0],
            vec![0.2, 0.2, 0.2],
        ];
        Dataset::from_dense(&x, vec![1.0, -1.0, -1.0, 1.0]).unwrap()
    }

    fn dense_primal(x: &[Vec<f64>], y: &[f64], loss: &LossModel, w: &[f64], lambda: f64) -> f64 {
        let n = x.len() as f64;
        let l: f64 = x
            .iter()
            .zip(y)
            .map(|(r, &yi)| loss.value(r.iter().zip(w).map(|(a, b)| a * b).sum(), yi))
            .sum();
        l / n + 0.5 * lambda * w.iter().map(|e| e * e).sum::<f64>()
    }

    fn dense_dual(x: &[Vec<f64>], y: &[f64], loss: &LossModel, alpha: &[f64], lambda: f64) -> f64 {
        let n = x.len() as f64;
        let d = x[0].len();
        let w: Vec<f64> = (0..d)
            .map(|j| x.iter().zip(alpha).map(|(r, a)| r[j] * a).sum::<f64>() / (lambda * n))
            .collect();
        let c: f64 = alpha.iter().zip(y).map(|(&a, &yi)| loss.conjugate(a, yi)).sum();
        -c / n - 0.5 * lambda * w.iter().map(|e| e * e).sum::<f64>()
    }

    #[test]
    fn values_at_zero() {
        let ds = small();
        let w0 = vec![0.0; 3];
        assert_eq!(primal_value(&ds, &LossModel::hinge(), &w0, 0.1).unwrap(), 1.0);
        assert_eq!(primal_value(&ds, &LossModel::quadratic(), &w0, 0.1).unwrap(), 0.5);
        let a0 = vec![0.0; 4];
        for loss in [LossModel::hinge(), LossModel::smoothed_hinge(0.5).unwrap(), LossModel::logistic()] {
            assert_eq!(dual_value(&ds, &loss, &a0, 0.1).unwrap(), 0.0);
        }
        assert_eq!(duality_gap(&ds, &LossModel::hinge(), &a0, 0.1).unwrap(), 1.0);
    }

    #[test]
    fn matches_dense_oracle() {
        let ds = small();
        let x = ds.to_dense();
        let y = ds.labels().to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for loss in [LossModel::hinge(), LossModel::smoothed_hinge(0.7).unwrap(), LossModel::logistic(), LossModel::quadratic()] {
            for _ in 0..50 {
                let lambda = rng.random_range(0.01..1.0);
                let w: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
                let p = primal_value(&ds, &loss, &w, lambda).unwrap();
                assert!((p - dense_primal(&x, &y, &loss, &w, lambda)).abs() < 1e-12);
                let alpha: Vec<f64> = y.iter().map(|&yi| yi * rng.random_range(0.0..=1.0)).collect();
                let d = dual_value(&ds, &loss, &alpha, lambda).unwrap();
                assert!((d - dense_dual(&x, &y, &loss, &alpha, lambda)).abs() < 1e-12);
                assert!(duality_gap(&ds, &loss, &alpha, lambda).unwrap() >= -1e-12);
            }
        }
    }

    #[test]
    fn infeasible_dual_is_an_error() {
        let ds = small();
        let err = dual_value(&ds, &LossModel::hinge(), &[2.0, 0.0, 0.0, 0.0], 0.1);
        assert!(matches!(err, Err(Error::Infeasible { .. })));
    }

    #[test]
    fn h_at_zero_is_dual() {
        let ds = small();
        let loss = LossModel::smoothed_hinge(1.0).unwrap();
        let alpha = [0.3, -0.2, -0.9, 0.5];
        let v = [1.0, 2.0, 3.0, 4.0];
        let h = h_value(&ds, &loss, &alpha, &[0.0; 4], 0.2, &v).unwrap();
        let d = dual_value(&ds, &loss, &alpha, 0.2).unwrap();
        assert!((h - d).abs() < 1e-15);
    }

    #[test]
    fn h_expansion_identity() {
        // H(t,α) = D(α+t) + (λ/2)‖Xᵀt/(λn)‖² + ... expanded by hand:
        // D(α+t) = −(1/n)Σφ*(−(α+t)) − (λ/2)‖w_α + Xᵀt/(λn)‖², so
        // H − D(α+t) = (λ/2)‖Xᵀt/(λn)‖² − (λ/2)‖t/(λn)‖²_v.
        let ds = small();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let loss = LossModel::quadratic();
        for _ in 0..200 {
            let lambda = rng.random_range(0.05..1.0);
            let alpha: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let t: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..4).map(|_| rng.random_range(0.1..3.0)).collect();
            let h = h_value(&ds, &loss, &alpha, &t, lambda, &v).unwrap();
            let at: Vec<f64> = alpha.iter().zip(&t).map(|(a, b)| a + b).collect();
            let d = dual_value(&ds, &loss, &at, lambda).unwrap();
            let q = lambda * 4.0;
            let xt = ds.primal_image(&t, lambda).unwrap();
            let rhs = d + 0.5 * lambda * dot(&xt, &xt) - 0.5 * lambda * (0..4).map(|i| v[i] * (t[i] / q).powi(2)).sum::<f64>();
            assert!((h - rhs).abs() < 1e-12, "{h} vs {rhs}");
        }
    }
}
