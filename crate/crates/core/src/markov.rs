//! Markov-chain analytics for randomized trajectories.
//!
//! Everything is dense: the chains of interest have at most a few hundred
//! states, and dense solves keep the numbers easy to audit.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::MobilityGraph;
use crate::tolerances;

/// Row-stochastic matrix of a randomized trajectory.
///
/// Serialises as a row-major array of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct TransitionMatrix {
    p: DMatrix<f64>,
}

impl TransitionMatrix {
    /// Wraps `p` after checking it is square, non-negative and row-stochastic.
    pub fn new(p: DMatrix<f64>) -> Result<Self> {
        if p.nrows() != p.ncols() || p.nrows() == 0 {
            return Err(Error::InvalidMatrix(format!(
                "expected a non-empty square matrix, got {}x{}",
                p.nrows(),
                p.ncols()
            )));
        }
        for i in 0..p.nrows() {
            let row = p.row(i);
            if let Some(j) = row.iter().position(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::InvalidMatrix(format!(
                    "entry ({i},{j}) = {} is negative or not finite",
                    p[(i, j)]
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > tolerances::ROW_SUM {
                return Err(Error::InvalidMatrix(format!(
                    "row {i} sums to {sum}, not 1"
                )));
            }
        }
        Ok(TransitionMatrix { p })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidMatrix("rows have inconsistent lengths".into()));
        }
        TransitionMatrix::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn identity(n: usize) -> Self {
        TransitionMatrix {
            p: DMatrix::identity(n, n),
        }
    }

    /// The matrix with every row equal to `pi`.
    pub fn iid(pi: &[f64]) -> Result<Self> {
        let n = pi.len();
        TransitionMatrix::new(DMatrix::from_fn(n, n, |_, j| pi[j]))
    }

    /// Deterministic rotation `i → i + 1 (mod n)`.
    pub fn cycle(n: usize) -> Self {
        TransitionMatrix {
            p: DMatrix::from_fn(n, n, |i, j| if j == (i + 1) % n { 1.0 } else { 0.0 }),
        }
    }

    pub fn n(&self) -> usize {
        self.p.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n())
            .map(|i| self.p.row(i).iter().copied().collect())
            .collect()
    }

    /// Positive off-diagonal entries that are not edges of `g`.
    pub fn support_violations(&self, g: &MobilityGraph) -> Vec<(usize, usize)> {
        let mut bad = Vec::new();
        for i in 0..self.n() {
            for j in 0..self.n() {
                if i != j && self.p[(i, j)] > 0.0 && !g.has_edge(i, j) {
                    bad.push((i, j));
                }
            }
        }
        bad
    }

    /// Fails unless the dimensions agree with `g` and every move is an edge.
    pub fn check_support(&self, g: &MobilityGraph) -> Result<()> {
        if self.n() != g.n() {
            return Err(Error::InvalidMatrix(format!(
                "matrix has {} states but graph has {} terminals",
                self.n(),
                g.n()
            )));
        }
        match self.support_violations(g).first() {
            None => Ok(()),
            Some((i, j)) => Err(Error::InvalidMatrix(format!(
                "positive probability on non-edge ({i},{j})"
            ))),
        }
    }

    pub fn is_irreducible(&self) -> bool {
        check_irreducible(self)
    }
}

impl TryFrom<Vec<Vec<f64>>> for TransitionMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        TransitionMatrix::from_rows(&rows)
    }
}

impl From<TransitionMatrix> for Vec<Vec<f64>> {
    fn from(m: TransitionMatrix) -> Self {
        m.to_rows()
    }
}

/// True when the directed support graph of `p` is strongly connected.
pub fn check_irreducible(p: &TransitionMatrix) -> bool {
    support_strongly_connected(p.matrix())
}

pub(crate) fn support_strongly_connected(p: &DMatrix<f64>) -> bool {
    let n = p.nrows();
    let search = |transpose: bool| {
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut queue = VecDeque::from([0usize]);
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                let w = if transpose { p[(j, i)] } else { p[(i, j)] };
                if w > 0.0 && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    n > 0 && search(false) && search(true)
}

/// Unique stationary distribution of an irreducible chain.
///
/// Solves `(Pᵀ − I)π = 0` with the last equation replaced by `Σπ = 1`.
pub fn stationary_distribution(p: &TransitionMatrix) -> Result<Vec<f64>> {
    if !check_irreducible(p) {
        return Err(Error::Reducible);
    }
    let n = p.n();
    let mut a = p.matrix().transpose() - DMatrix::identity(n, n);
    a.row_mut(n - 1).fill(1.0);
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let solved = a.lu().solve(&b).ok_or(Error::Singular {
        context: "stationary distribution",
        residual: f64::INFINITY,
    })?;
    let total: f64 = solved.iter().sum();
    let pi: Vec<f64> = solved.iter().map(|x| x / total).collect();
    let residual = balance_residual(p.matrix(), &pi);
    if !residual.is_finite() || residual > tolerances::STATIONARY_RESIDUAL {
        return Err(Error::Singular {
            context: "stationary distribution",
            residual,
        });
    }
    if let Some(i) = pi.iter().position(|&x| x <= 0.0) {
        return Err(Error::Numerical(format!(
            "stationary probability of state {i} is {} (expected > 0)",
            pi[i]
        )));
    }
    Ok(pi)
}

/// `‖πP − π‖∞`.
pub fn balance_residual(p: &DMatrix<f64>, pi: &[f64]) -> f64 {
    let n = p.nrows();
    (0..n)
        .map(|j| {
            let flow: f64 = (0..n).map(|i| pi[i] * p[(i, j)]).sum();
            (flow - pi[j]).abs()
        })
        .fold(0.0, f64::max)
}

/// The matrix whose rows all equal `pi`.
pub fn stationary_projector(pi: &[f64]) -> DMatrix<f64> {
    let n = pi.len();
    DMatrix::from_fn(n, n, |_, j| pi[j])
}

/// Fundamental matrix `Z = (I − P + Π)⁻¹`.
pub fn fundamental_matrix(p: &TransitionMatrix, pi: &[f64]) -> Result<DMatrix<f64>> {
    let n = p.n();
    if pi.len() != n {
        return Err(Error::InvalidParameter(format!(
            "distribution has {} entries for a {n}-state chain",
            pi.len()
        )));
    }
    let residual = balance_residual(p.matrix(), pi);
    if residual > tolerances::STATIONARY_BALANCE {
        return Err(Error::Numerical(format!(
            "pi is not stationary for P (residual {residual:e})"
        )));
    }
    let m = DMatrix::identity(n, n) - p.matrix() + stationary_projector(pi);
    let z = m.clone().lu().try_inverse().ok_or(Error::Singular {
        context: "fundamental matrix",
        residual: f64::INFINITY,
    })?;
    let condition = one_norm(&m) * one_norm(&z);
    if !condition.is_finite() || condition > tolerances::CONDITION_LIMIT {
        return Err(Error::IllConditioned {
            context: "fundamental matrix",
            condition,
        });
    }
    let residual = (&m * &z - DMatrix::identity(n, n)).amax();
    if residual > tolerances::FUNDAMENTAL_RESIDUAL {
        return Err(Error::Singular {
            context: "fundamental matrix",
            residual,
        });
    }
    Ok(z)
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Second-largest eigenvalue modulus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slem {
    pub value: f64,
    /// Set when another eigenvalue sits on the unit circle, i.e. the chain is
    /// periodic and spectral mixing diagnostics are meaningless.
    pub periodic: bool,
}

/// SLEM of `p` from a full (real Schur) eigendecomposition.
pub fn slem(p: &TransitionMatrix) -> Result<Slem> {
    let n = p.n();
    if n == 1 {
        return Ok(Slem {
            value: 0.0,
            periodic: false,
        });
    }
    let schur = nalgebra::linalg::Schur::try_new(
        p.matrix().clone(),
        f64::EPSILON,
        tolerances::EIGEN_MAX_ITERATIONS,
    )
    .ok_or(Error::EigenNotConverged(tolerances::EIGEN_MAX_ITERATIONS))?;
    let eigen = schur.complex_eigenvalues();
    // drop the Perron root, i.e. the eigenvalue closest to 1
    let perron = eigen
        .iter()
        .enumerate()
        .min_by(|a, b| {
            let da = (a.1 - nalgebra::Complex::new(1.0, 0.0)).norm();
            let db = (b.1 - nalgebra::Complex::new(1.0, 0.0)).norm();
            da.total_cmp(&db)
        })
        .map(|(k, _)| k)
        .unwrap_or(0);
    let value = eigen
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != perron)
        .map(|(_, z)| z.norm())
        .fold(0.0, f64::max);
    let periodic = value >= 1.0 - tolerances::PERIODICITY;
    if periodic {
        tracing::warn!(slem = value, "chain is periodic; SLEM is not a mixing measure");
    }
    Ok(Slem { value, periodic })
}

/// Derived quantities of an irreducible transition matrix.
#[derive(Debug, Clone, Serialize)]
pub struct ChainAnalysis {
    pi: Vec<f64>,
    #[serde(serialize_with = "serialize_rows")]
    z: DMatrix<f64>,
    z_diag: Vec<f64>,
    discrepancy: f64,
    slem: Slem,
}

fn serialize_rows<S: serde::Serializer>(
    m: &DMatrix<f64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect();
    rows.serialize(s)
}

impl ChainAnalysis {
    pub fn new(p: &TransitionMatrix) -> Result<Self> {
        let pi = stationary_distribution(p)?;
        let sum: f64 = pi.iter().sum();
        if (sum - 1.0).abs() > tolerances::STATIONARY_SUM {
            return Err(Error::Numerical(format!("stationary mass sums to {sum}")));
        }
        let z = fundamental_matrix(p, &pi)?;
        let z_diag = z.diagonal().iter().copied().collect();
        let discrepancy = discrepancy_of(&z, &pi);
        let slem = slem(p)?;
        Ok(ChainAnalysis {
            pi,
            z,
            z_diag,
            discrepancy,
            slem,
        })
    }

    pub fn n(&self) -> usize {
        self.pi.len()
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn z_diag(&self) -> &[f64] {
        &self.z_diag
    }

    pub fn discrepancy(&self) -> f64 {
        self.discrepancy
    }

    pub fn slem(&self) -> Slem {
        self.slem
    }

    /// Mean and second moment of the return time to `i`.
    pub fn return_time_moments(&self, i: usize) -> (f64, f64) {
        return_time_moments(self, i)
    }
}

/// `(E[H_i], E[H_i²]) = (1/π_i, −1/π_i + 2 z_ii / π_i²)`.
pub fn return_time_moments(analysis: &ChainAnalysis, i: usize) -> (f64, f64) {
    let pi = analysis.pi[i];
    let z = analysis.z_diag[i];
    (1.0 / pi, -1.0 / pi + 2.0 * z / (pi * pi))
}

/// Discrepancy `max_i Σ_j |z_ij − π_j|`.
pub fn discrepancy(analysis: &ChainAnalysis) -> f64 {
    discrepancy_of(&analysis.z, &analysis.pi)
}

fn discrepancy_of(z: &DMatrix<f64>, pi: &[f64]) -> f64 {
    (0..z.nrows())
        .map(|i| (0..z.ncols()).map(|j| (z[(i, j)] - pi[j]).abs()).sum::<f64>())
        .fold(0.0, f64::max)
}
