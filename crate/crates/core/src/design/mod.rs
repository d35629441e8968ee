//! Randomized trajectory design.
//!
//! Any chain whose stationary distribution is proportional to `√w` is peak
//! age optimal, so every design here targets that distribution:
//! [`build_mh`] through a Metropolis-Hastings filter on the simple random
//! walk, [`build_fastest_mixing`] by minimising `‖P − Π*‖₂` over all feasible
//! chains.

mod fastest;
mod projection;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::MobilityGraph;
use crate::markov::{self, TransitionMatrix};
use crate::tolerances;

pub use fastest::{build_fastest_mixing, SolverOptions};
pub use projection::FeasibleSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignMethod {
    MetropolisHastings,
    FastestMixing,
}

/// Constraint residuals of a design against its graph and target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `max_i |Σ_j P_ij − 1|`
    pub row_sum: f64,
    /// `‖π*P − π*‖∞`
    pub stationarity: f64,
    /// `max(0, −min P_ij)`
    pub nonnegativity: f64,
    /// largest probability on a non-edge
    pub support: f64,
}

impl Residuals {
    pub fn of(p: &DMatrix<f64>, g: &MobilityGraph, target: &[f64]) -> Self {
        let n = p.nrows();
        let row_sum = (0..n)
            .map(|i| (p.row(i).sum() - 1.0).abs())
            .fold(0.0, f64::max);
        let nonnegativity = (-p.min()).max(0.0);
        let mut support: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j && !g.has_edge(i, j) {
                    support = support.max(p[(i, j)].abs());
                }
            }
        }
        Residuals {
            row_sum,
            stationarity: markov::balance_residual(p, target),
            nonnegativity,
            support,
        }
    }

    pub fn max(&self) -> f64 {
        self.row_sum
            .max(self.stationarity)
            .max(self.nonnegativity)
            .max(self.support)
    }
}

/// A designed trajectory together with how it was obtained.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignResult {
    pub method: DesignMethod,
    pub matrix: TransitionMatrix,
    pub target_pi: Vec<f64>,
    /// `‖P − Π*‖₂`; only reported by the solver.
    pub objective: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub residuals: Residuals,
}

/// Peak-age optimal stationary distribution `π*_i = √w_i / Σ_j √w_j`.
pub fn target_distribution(weights: &[f64]) -> Result<Vec<f64>> {
    if weights.is_empty() {
        return Err(Error::InvalidParameter("no weights given".into()));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "weight must be positive, got {w}"
        )));
    }
    let roots: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let total: f64 = roots.iter().sum();
    Ok(roots.into_iter().map(|r| r / total).collect())
}

/// Metropolis-Hastings chain targeting `π*` with the simple random walk as
/// proposal: an edge `(i, j)` is proposed with probability `1/d_i` and
/// accepted with probability `min(1, π*_j P^rw_ji / (π*_i P^rw_ij))`; the
/// diagonal keeps the rejected mass.
pub fn build_mh(g: &MobilityGraph) -> Result<DesignResult> {
    let target = target_distribution(g.weights())?;
    let p = mh_matrix(g, &target)?;
    let matrix = TransitionMatrix::new(p)?;
    if !matrix.is_irreducible() {
        return Err(Error::Reducible);
    }
    let residuals = Residuals::of(matrix.matrix(), g, &target);
    if residuals.stationarity > tolerances::DESIGN_BALANCE {
        return Err(Error::Numerical(format!(
            "Metropolis-Hastings chain misses its target (residual {:e})",
            residuals.stationarity
        )));
    }
    Ok(DesignResult {
        method: DesignMethod::MetropolisHastings,
        matrix,
        target_pi: target,
        objective: None,
        iterations: 0,
        converged: true,
        residuals,
    })
}

pub(crate) fn mh_matrix(g: &MobilityGraph, target: &[f64]) -> Result<DMatrix<f64>> {
    let n = g.n();
    let mut p = DMatrix::zeros(n, n);
    for i in 0..n {
        let d_i = g.out_degree(i);
        if d_i == 0 {
            return Err(Error::InvalidGraph(format!("terminal {i} has no out-edges")));
        }
        let proposal = 1.0 / d_i as f64;
        let mut moved = 0.0;
        for &j in g.neighbors(i) {
            let reverse = if g.has_edge(j, i) {
                1.0 / g.out_degree(j) as f64
            } else {
                0.0
            };
            let accept = (target[j] * reverse / (target[i] * proposal)).min(1.0);
            p[(i, j)] = proposal * accept;
            moved += p[(i, j)];
        }
        p[(i, i)] = (1.0 - moved).max(0.0);
    }
    Ok(p)
}

/// `‖P − Π‖₂` with every row of `Π` equal to `target`.
pub fn spectral_objective(p: &DMatrix<f64>, target: &[f64]) -> f64 {
    let m = p - markov::stationary_projector(target);
    m.singular_values().max()
}

/// One line of a [`DesignReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub constraint: String,
    pub passed: bool,
    pub residual: f64,
    /// Entries responsible for a failure, where that is meaningful.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub offending: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub checks: Vec<ConstraintCheck>,
}

impl DesignReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, constraint: &str) -> Option<&ConstraintCheck> {
        self.checks.iter().find(|c| c.constraint == constraint)
    }
}

/// Checks each constraint of the fastest-mixing program (plus
/// irreducibility) for an arbitrary square matrix.
pub fn validate_design(p: &DMatrix<f64>, g: &MobilityGraph, target: &[f64]) -> DesignReport {
    let tol = tolerances::FEASIBILITY;
    let n = g.n();
    if p.nrows() != n || p.ncols() != n || target.len() != n {
        return DesignReport {
            checks: vec![ConstraintCheck {
                constraint: "dimensions".into(),
                passed: false,
                residual: f64::INFINITY,
                offending: Vec::new(),
            }],
        };
    }
    let r = Residuals::of(p, g, target);
    let negatives: Vec<_> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| p[(i, j)] < 0.0)
        .collect();
    let off_edge: Vec<_> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j && !g.has_edge(i, j) && p[(i, j)] != 0.0)
        .collect();
    let irreducible = markov::support_strongly_connected(p);
    DesignReport {
        checks: vec![
            ConstraintCheck {
                constraint: "nonnegative".into(),
                passed: r.nonnegativity <= tol,
                residual: r.nonnegativity,
                offending: negatives,
            },
            ConstraintCheck {
                constraint: "row_stochastic".into(),
                passed: r.row_sum <= tol,
                residual: r.row_sum,
                offending: Vec::new(),
            },
            ConstraintCheck {
                constraint: "stationary".into(),
                passed: r.stationarity <= tol,
                residual: r.stationarity,
                offending: Vec::new(),
            },
            ConstraintCheck {
                constraint: "support".into(),
                passed: off_edge.is_empty(),
                residual: r.support,
                offending: off_edge,
            },
            ConstraintCheck {
                constraint: "irreducible".into(),
                passed: irreducible,
                residual: if irreducible { 0.0 } else { 1.0 },
                offending: Vec::new(),
            },
        ],
    }
}
