//! Euclidean projection onto the set of chains that respect a graph and
//! keep a given distribution stationary.
//!
//! A chain is stored as the vector of its entries on the support (graph
//! edges plus the diagonal). The set is the intersection of an affine
//! subspace (row sums, balance) with the non-negative orthant; Dykstra's
//! method alternates between the two. The affine projection is exact, using
//! a Cholesky factor of the `(2n−1)`-square Gram matrix of the constraints
//! (one balance equation is implied by the others and is dropped).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::MobilityGraph;

#[derive(Debug, Clone)]
pub struct FeasibleSet {
    n: usize,
    cells: Vec<(usize, usize)>,
    target: Vec<f64>,
    gram: GramSolver,
}

#[derive(Debug, Clone)]
enum GramSolver {
    Cholesky(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Pseudo(DMatrix<f64>),
}

impl GramSolver {
    fn new(gram: DMatrix<f64>) -> Self {
        match gram.clone().cholesky() {
            Some(c) => GramSolver::Cholesky(c),
            None => {
                // rank deficient once variables are pinned to zero
                let svd = gram.svd(true, true);
                let eps = 1e-12 * svd.singular_values.max().max(1.0);
                let pinv = svd
                    .pseudo_inverse(eps)
                    .expect("SVD computed with both factors");
                GramSolver::Pseudo(pinv)
            }
        }
    }

    fn solve(&self, r: &DVector<f64>) -> DVector<f64> {
        match self {
            GramSolver::Cholesky(c) => c.solve(r),
            GramSolver::Pseudo(p) => p * r,
        }
    }
}

/// Outcome of an approximate projection.
#[derive(Debug, Clone)]
pub struct Projected {
    pub x: Vec<f64>,
    pub sweeps: usize,
    /// `‖Ax − b‖∞` of the returned (non-negative) point.
    pub residual: f64,
}

impl FeasibleSet {
    pub fn new(g: &MobilityGraph, target: &[f64]) -> Result<Self> {
        let n = g.n();
        if target.len() != n {
            return Err(Error::InvalidParameter(format!(
                "target has {} entries for {n} terminals",
                target.len()
            )));
        }
        let mut cells = Vec::new();
        for i in 0..n {
            let mut row: Vec<usize> = g.neighbors(i).to_vec();
            row.push(i);
            row.sort_unstable();
            row.dedup();
            cells.extend(row.into_iter().map(|j| (i, j)));
        }
        let free = vec![true; cells.len()];
        let gram = GramSolver::new(Self::gram_for(n, &cells, target, &free));
        Ok(FeasibleSet {
            n,
            cells,
            target: target.to_vec(),
            gram,
        })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[(usize, usize)] {
        &self.cells
    }

    fn constraint_count(&self) -> usize {
        2 * self.n - 1
    }

    fn gram_for(n: usize, cells: &[(usize, usize)], target: &[f64], free: &[bool]) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(2 * n - 1, 2 * n - 1);
        for (&(i, j), _) in cells.iter().zip(free).filter(|(_, f)| **f) {
            g[(i, i)] += 1.0;
            if j < n - 1 {
                let c = n + j;
                g[(c, c)] += target[i] * target[i];
                g[(i, c)] += target[i];
                g[(c, i)] += target[i];
            }
        }
        g
    }

    pub fn to_vector(&self, p: &DMatrix<f64>) -> Vec<f64> {
        self.cells.iter().map(|&(i, j)| p[(i, j)]).collect()
    }

    pub fn to_matrix(&self, x: &[f64]) -> DMatrix<f64> {
        let mut p = DMatrix::zeros(self.n, self.n);
        for (&(i, j), v) in self.cells.iter().zip(x) {
            p[(i, j)] = *v;
        }
        p
    }

    /// `Ax − b`.
    fn constraint_gap(&self, x: &[f64]) -> DVector<f64> {
        let n = self.n;
        let mut r = DVector::zeros(self.constraint_count());
        for (&(i, j), v) in self.cells.iter().zip(x) {
            r[i] += v;
            if j < n - 1 {
                r[n + j] += self.target[i] * v;
            }
        }
        for i in 0..n {
            r[i] -= 1.0;
        }
        for j in 0..n - 1 {
            r[n + j] -= self.target[j];
        }
        r
    }

    pub fn affine_residual(&self, x: &[f64]) -> f64 {
        self.constraint_gap(x).amax()
    }

    /// Subtracts `Aᵀv` from the entries selected by `free`.
    fn correct(&self, x: &mut [f64], v: &DVector<f64>, free: Option<&[bool]>) {
        let n = self.n;
        for (k, (&(i, j), xk)) in self.cells.iter().zip(x.iter_mut()).enumerate() {
            if free.is_some_and(|f| !f[k]) {
                continue;
            }
            let mut d = v[i];
            if j < n - 1 {
                d += self.target[i] * v[n + j];
            }
            *xk -= d;
        }
    }

    fn affine_project(&self, x: &mut [f64]) {
        let v = self.gram.solve(&self.constraint_gap(x));
        self.correct(x, &v, None);
    }

    /// Dykstra's alternating projections from `y`, stopping once the
    /// non-negative iterate is within `tol` of the affine constraints.
    pub fn project(&self, y: &[f64], max_sweeps: usize, tol: f64) -> Projected {
        let mut x = y.to_vec();
        let mut increment = vec![0.0; x.len()];
        let mut residual = f64::INFINITY;
        for sweep in 1..=max_sweeps {
            // the affine step needs no Dykstra correction: its increments lie
            // in the row space of A and are annihilated by the projector
            self.affine_project(&mut x);
            for (xk, qk) in x.iter_mut().zip(increment.iter_mut()) {
                let z = *xk + *qk;
                *xk = z.max(0.0);
                *qk = z - *xk;
            }
            residual = self.affine_residual(&x);
            if residual <= tol {
                return Projected { x, sweeps: sweep, residual };
            }
        }
        Projected {
            x,
            sweeps: max_sweeps,
            residual,
        }
    }

    /// Makes a nearly feasible `x` feasible to rounding error: entries at
    /// zero stay there and the rest are projected exactly onto the affine
    /// constraints, repeating while that creates negative entries.
    pub fn polish(&self, x: &[f64], tol: f64) -> Result<Vec<f64>> {
        let mut x: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
        for _ in 0..50 {
            let free: Vec<bool> = x.iter().map(|v| *v > 0.0).collect();
            let gram = GramSolver::new(Self::gram_for(self.n, &self.cells, &self.target, &free));
            let v = gram.solve(&self.constraint_gap(&x));
            self.correct(&mut x, &v, Some(&free));
            if x.iter().all(|v| *v >= 0.0) {
                break;
            }
            x.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        let residual = self.affine_residual(&x);
        if x.iter().any(|v| *v < 0.0) || !(residual <= tol) {
            return Err(Error::ProjectionFailed {
                tolerance: tol,
                residual,
            });
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{mh_matrix, target_distribution};
    use crate::graph;

    #[test]
    fn feasible_points_are_fixed() {
        let g = graph::grid_with_diagonals(3).unwrap();
        let t = target_distribution(g.weights()).unwrap();
        let set = FeasibleSet::new(&g, &t).unwrap();
        let x = set.to_vector(&mh_matrix(&g, &t).unwrap());
        assert!(set.affine_residual(&x) < 1e-14);
        let p = set.project(&x, 10, 1e-12);
        assert_eq!(p.sweeps, 1);
        for (a, b) in p.x.iter().zip(&x) {
            assert_close!(*a, *b, 1e-14);
        }
    }

    #[test]
    fn projection_restores_feasibility() {
        let g = graph::ring(6, 1).unwrap();
        let w = vec![1.0, 2.0, 1.5, 1.2, 1.9, 1.1];
        let g = g.with_weight_vector(w).unwrap();
        let t = target_distribution(g.weights()).unwrap();
        let set = FeasibleSet::new(&g, &t).unwrap();
        let y: Vec<f64> = (0..set.len()).map(|k| ((k * 7919) % 13) as f64 / 13.0 - 0.3).collect();
        let p = set.project(&y, 1000, 1e-10);
        assert!(p.residual <= 1e-10);
        let x = set.polish(&p.x, 1e-12).unwrap();
        let m = set.to_matrix(&x);
        assert!(m.min() >= 0.0);
        for i in 0..6 {
            assert_close!(m.row(i).sum(), 1.0, 1e-12);
        }
        assert!(crate::markov::balance_residual(&m, &t) < 1e-12);
    }
}
