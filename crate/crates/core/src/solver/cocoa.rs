//! CoCoA+ with SDCA as the local solver, simulated in one process.
//!
//! Each machine takes its `b/C` sampled coordinates, visits them `H` times in
//! a random cyclic order against the `σ′`-scaled local subproblem, and the
//! per-machine changes are added up afterwards.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::{SolveConfig, SolverState};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::sampling::iteration_rng;

struct LocalResult {
    /// `(i, new α_i)`, ascending in `i`.
    alpha: Vec<(usize, f64)>,
    /// `u_c = Σ Δα_i x_i`, dense over features.
    u: Vec<f64>,
    /// Features touched by `u_c`, ascending.
    touched: Vec<usize>,
}

fn local_solve(
    data: &Dataset,
    config: &SolveConfig,
    state: &SolverState,
    coords: &[usize],
    order: &[usize],
    h: usize,
    sigma_prime: f64,
) -> Result<LocalResult> {
    let n = data.n();
    let lambda = config.lambda;
    let scale = sigma_prime / (lambda * n as f64);
    let mut local: Vec<f64> = coords.iter().map(|&i| state.alpha[i]).collect();
    let mut u = vec![0.0; data.d()];
    let mut mark = vec![false; data.d()];
    let mut touched = Vec::new();
    let mut dirty = false;
    for k in 0..h {
        let pos = order[k % order.len()];
        let i = coords[pos];
        let y = data.label(i);
        let mut margin = data.row_dot(i, &state.w);
        if dirty {
            margin += scale * data.row_dot(i, &u);
        }
        let v = sigma_prime * data.row_norms_sq()[i];
        let delta = config.loss.coordinate_update(local[pos], margin, y, v, lambda, n)?;
        let new = config.loss.project(local[pos] + delta, y);
        let d = new - local[pos];
        if d == 0.0 {
            continue;
        }
        local[pos] = new;
        for (j, x) in data.row(i).iter() {
            u[j] += d * x;
            if !mark[j] {
                mark[j] = true;
                touched.push(j);
            }
        }
        dirty = true;
    }
    touched.sort_unstable();
    let mut alpha: Vec<(usize, f64)> = coords.iter().copied().zip(local).collect();
    alpha.sort_unstable_by_key(|p| p.0);
    Ok(LocalResult { alpha, u, touched })
}

/// One outer CoCoA+ round with `h` local steps per machine.
pub fn cocoa_step(state: &mut SolverState, data: &Dataset, config: &SolveConfig, h: usize, sigma_prime: f64) -> Result<()> {
    let partition = config.scheme.partition().ok_or_else(|| Error::ModeMismatch {
        mode: "cocoa".into(),
        scheme: config.scheme.kind_name().into(),
    })?;
    let mut rng = iteration_rng(config.seed, state.t);
    let set = config.scheme.draw(&mut rng);
    if h == 0 {
        state.t += 1;
        return Ok(());
    }
    let mut jobs = Vec::with_capacity(partition.len());
    for cell in partition {
        let coords: Vec<usize> = set.iter().copied().filter(|i| cell.binary_search(i).is_ok()).collect();
        let mut order: Vec<usize> = (0..coords.len()).collect();
        order.shuffle(&mut rng);
        jobs.push((coords, order));
    }
    let snapshot = &*state;
    let run = |(coords, order): &(Vec<usize>, Vec<usize>)| -> Result<LocalResult> {
        local_solve(data, config, snapshot, coords, order, h, sigma_prime)
    };
    let results: Vec<LocalResult> = if config.parallel() && jobs.len() > 1 {
        jobs.par_iter().map(run).collect::<Result<_>>()?
    } else {
        jobs.iter().map(run).collect::<Result<_>>()?
    };
    let inv = 1.0 / (config.lambda * data.n() as f64);
    let t_next = state.t + 1;
    for r in results {
        for (i, new) in r.alpha {
            if new != state.alpha[i] {
                if let Some(avg) = &mut state.avg {
                    avg.record(i, state.alpha[i], t_next);
                }
                state.alpha[i] = new;
            }
        }
        for j in r.touched {
            state.w[j] += inv * r.u[j];
        }
    }
    state.t = t_next;
    state.updates += (h * partition.len()) as u64;
    Ok(())
}
