//! Fastest-mixing chain: minimise `‖P − Π*‖₂` over feasible chains.
//!
//! The spectral norm is replaced by its log-sum-exp smoothing
//! `f_μ(M) = μ log Σ_i (e^{σ_i/μ} + e^{−σ_i/μ})`, which is within `μ log 2n`
//! of `‖M‖₂` and has a `2/μ`-Lipschitz gradient `Σ_i c_i u_i v_iᵀ`.
//! Accelerated projected gradient runs on `f_μ` while `μ` shrinks
//! geometrically, warm-started from the Metropolis-Hastings chain. The best
//! iterate under the true norm is kept throughout.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::projection::FeasibleSet;
use super::{mh_matrix, spectral_objective, target_distribution, DesignMethod, DesignResult, Residuals};
use crate::error::{Error, Result};
use crate::graph::MobilityGraph;
use crate::markov::{self, TransitionMatrix};
use crate::tolerances;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Initial smoothing as a fraction of the warm start's objective.
    pub step_scale: f64,
    /// Stop once the best objective improved by less than `stall_tolerance`
    /// over this many iterations at the finest smoothing level.
    pub stall_window: usize,
    pub stall_tolerance: f64,
    pub max_projection_sweeps: usize,
    /// Finest smoothing, relative to the warm start's objective.
    pub min_smoothing: f64,
    /// Smoothing is divided by this factor between stages.
    pub smoothing_decay: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iterations: 5000,
            step_scale: 0.5,
            stall_window: 200,
            stall_tolerance: 1e-8,
            max_projection_sweeps: 1000,
            min_smoothing: 1e-6,
            smoothing_decay: 4.0,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(format!("solver option {what}")));
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive");
        }
        if !(self.step_scale > 0.0) || !(self.min_smoothing > 0.0) {
            return bad("step_scale and min_smoothing must be positive");
        }
        if !(self.smoothing_decay > 1.0) {
            return bad("smoothing_decay must exceed 1");
        }
        if self.stall_window == 0 || self.max_projection_sweeps == 0 {
            return bad("stall_window and max_projection_sweeps must be positive");
        }
        Ok(())
    }
}

/// Value and gradient of the smoothed spectral norm at `m`.
fn smoothed(m: DMatrix<f64>, mu: f64) -> Result<(f64, DMatrix<f64>)> {
    let (rows, cols) = m.shape();
    let svd = nalgebra::linalg::SVD::try_new(m, true, true, f64::EPSILON, 10_000)
        .ok_or(Error::Numerical("SVD did not converge".into()))?;
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested Vᵀ");
    let s = &svd.singular_values;
    let top = s.max();
    let mut total = 0.0;
    let coef: Vec<f64> = s
        .iter()
        .map(|&si| {
            let up = ((si - top) / mu).exp();
            let down = ((-si - top) / mu).exp();
            total += up + down;
            up - down
        })
        .collect();
    let value = top + mu * total.ln();
    let mut grad = DMatrix::zeros(rows, cols);
    for (k, c) in coef.iter().enumerate() {
        let c = c / total;
        if c.abs() < 1e-14 {
            continue;
        }
        grad += c * u.column(k) * v_t.row(k);
    }
    Ok((value, grad))
}

/// Fastest-mixing chain with stationary distribution `π*` on `g`.
///
/// Never returns something worse than the Metropolis-Hastings chain. If the
/// iteration budget runs out first, the best feasible iterate comes back
/// with `converged = false`.
pub fn build_fastest_mixing(g: &MobilityGraph, opts: &SolverOptions) -> Result<DesignResult> {
    opts.validate()?;
    let target = target_distribution(g.weights())?;
    let pi_mat = markov::stationary_projector(&target);
    let mh = mh_matrix(g, &target)?;
    let mh_objective = spectral_objective(&mh, &target);
    let set = FeasibleSet::new(g, &target)?;
    let tol = tolerances::FEASIBILITY;

    let mut iterations = 0;
    let mut converged = true;
    let mut best_x = set.to_vector(&mh);
    let mut best_obj = mh_objective;

    if mh_objective > 0.0 {
        converged = false;
        let mut mu = opts.step_scale * mh_objective;
        let mu_floor = opts.min_smoothing * mh_objective;
        let mut x = best_x.clone();
        let mut history: Vec<f64> = Vec::new();

        'stages: loop {
            let step = mu / 2.0;
            let mut y = x.clone();
            let mut momentum = 1.0_f64;
            let stage_start = history.len();
            let mut smoothed_trace: Vec<f64> = Vec::new();
            loop {
                if iterations >= opts.max_iterations {
                    break 'stages;
                }
                iterations += 1;
                let (fy, grad) = smoothed(set.to_matrix(&y) - &pi_mat, mu)?;
                smoothed_trace.push(fy);
                let trial: Vec<f64> = set
                    .cells()
                    .iter()
                    .zip(&y)
                    .map(|(&(i, j), v)| v - step * grad[(i, j)])
                    .collect();
                let projected =
                    set.project(&trial, opts.max_projection_sweeps, tol * 1e-2);
                let x_new = projected.x;

                let objective = if projected.residual <= tol {
                    spectral_objective(&set.to_matrix(&x_new), &target)
                } else {
                    f64::INFINITY
                };
                if objective < best_obj {
                    best_obj = objective;
                    best_x = x_new.clone();
                }
                history.push(best_obj);

                // gradient-based restart keeps the momentum from overshooting
                let restart = y
                    .iter()
                    .zip(&x_new)
                    .zip(&x)
                    .map(|((yk, xn), xo)| (yk - xn) * (xn - xo))
                    .sum::<f64>()
                    > 0.0;
                let next = if restart {
                    1.0
                } else {
                    (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt()) / 2.0
                };
                let beta = if restart { 0.0 } else { (momentum - 1.0) / next };
                y = x_new
                    .iter()
                    .zip(&x)
                    .map(|(xn, xo)| xn + beta * (xn - xo))
                    .collect();
                momentum = next;
                x = x_new;

                let final_stage = mu <= mu_floor;
                let stage_len = history.len() - stage_start;
                if final_stage && stage_len > opts.stall_window {
                    let past = history[history.len() - 1 - opts.stall_window];
                    if past - best_obj < opts.stall_tolerance {
                        converged = true;
                        break 'stages;
                    }
                }
                if !final_stage && stage_settled(&smoothed_trace, mu, opts.stall_window) {
                    break;
                }
                if best_obj <= f64::EPSILON {
                    converged = true;
                    break 'stages;
                }
            }
            tracing::debug!(mu, iterations = history.len() - stage_start, best_obj, "smoothing stage done");
            mu = (mu / opts.smoothing_decay).max(mu_floor);
            // restart each stage from the best point seen so far
            x = best_x.clone();
        }
    }

    finish(g, &set, &target, &mh, mh_objective, best_x, iterations, converged)
}

/// A stage ends when the smoothed objective has stopped moving on the scale
/// of its own smoothing, or after a bounded number of iterations.
fn stage_settled(trace: &[f64], mu: f64, cap: usize) -> bool {
    const LOOKBACK: usize = 20;
    if trace.len() >= cap {
        return true;
    }
    if trace.len() <= LOOKBACK {
        return false;
    }
    let now = trace[trace.len() - 1];
    let before = trace[trace.len() - 1 - LOOKBACK];
    before - now < 1e-3 * mu
}

#[allow(clippy::too_many_arguments)]
fn finish(
    g: &MobilityGraph,
    set: &FeasibleSet,
    target: &[f64],
    mh: &DMatrix<f64>,
    mh_objective: f64,
    best_x: Vec<f64>,
    iterations: usize,
    converged: bool,
) -> Result<DesignResult> {
    let mut p = set.to_matrix(&set.polish(&best_x, tolerances::ROW_SUM * 1e-2)?);
    if !markov::support_strongly_connected(&p) {
        tracing::debug!("optimised chain is reducible; blending in the warm start");
        let eps = 1e-3;
        let blended = (1.0 - eps) * &p + eps * mh;
        p = set.to_matrix(&set.polish(&set.to_vector(&blended), tolerances::ROW_SUM * 1e-2)?);
    }
    let mut objective = spectral_objective(&p, target);
    if objective > mh_objective || !markov::support_strongly_connected(&p) {
        p = mh.clone();
        objective = mh_objective;
    }
    let residuals = Residuals::of(&p, g, target);
    if residuals.max() > tolerances::FEASIBILITY {
        return Err(Error::ProjectionFailed {
            tolerance: tolerances::FEASIBILITY,
            residual: residuals.max(),
        });
    }
    if !converged {
        tracing::warn!(iterations, objective, "fastest-mixing solver did not converge");
    }
    Ok(DesignResult {
        method: DesignMethod::FastestMixing,
        matrix: TransitionMatrix::new(p)?,
        target_pi: target.to_vec(),
        objective: Some(objective),
        iterations,
        converged,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph;

    #[test]
    fn complete_graph_reaches_iid() {
        for n in [2, 3, 5] {
            let d = build_fastest_mixing(&graph::complete(n).unwrap(), &SolverOptions::default())
                .unwrap();
            assert!(d.objective.unwrap() <= 1e-6, "n={n}: {:?}", d.objective);
        }
    }

    #[test]
    fn smoothing_is_close_to_norm() {
        let m = DMatrix::from_row_slice(2, 2, &[0.5, -0.5, 0.25, 0.1]);
        let norm = m.singular_values().max();
        let mu = 1e-3;
        let (v, _) = smoothed(m, mu).unwrap();
        assert!(v >= norm && v <= norm + mu * 4f64.ln() + 1e-12);
    }
}
