//! D-optimal sampling designs over a set of paths, restricted to the span
//! of their incidence rows.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{PathId, Topology};

/// Stop once the G-criterion is within this factor of the rank.
pub const G_SLACK: f64 = 1.05;
pub const MAX_DESIGN_ITERS: usize = 10_000;
const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignWeights {
    pub support: Vec<PathId>,
    pub lambda: Vec<f64>,
    /// Dimension of the span of the support's incidence rows.
    pub rank: usize,
    /// `max_k x(k)^T A(lambda)^+ x(k)` at the returned weights.
    pub g_value: f64,
    pub iterations: usize,
}

/// Moore-Penrose inverse of a symmetric PSD matrix, dropping eigenvalues
/// below a relative tolerance.
pub fn pinv_sym(a: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let eig = a.clone().symmetric_eigen();
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let tol = top * RANK_TOL * a.nrows() as f64;
    let mut out = DMatrix::zeros(a.nrows(), a.ncols());
    let mut rank = 0;
    for (i, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev > tol {
            rank += 1;
            let v = eig.eigenvectors.column(i);
            out += (v * v.transpose()) / ev;
        }
    }
    (out, rank)
}

/// `sum_k lambda_k x(k) x(k)^T`.
pub fn information_matrix(rows: &[DVector<f64>], lambda: &[f64]) -> DMatrix<f64> {
    let dim = rows.first().map_or(0, |r| r.len());
    let mut a = DMatrix::zeros(dim, dim);
    for (x, &w) in rows.iter().zip(lambda) {
        if w > 0.0 {
            a += (x * x.transpose()) * w;
        }
    }
    a
}

fn g_values(rows: &[DVector<f64>], a_pinv: &DMatrix<f64>) -> Vec<f64> {
    rows.iter().map(|x| (x.transpose() * a_pinv * x)[(0, 0)]).collect()
}

/// Frank-Wolfe (Fedorov-Wynn step) on `log det A(lambda)` from uniform
/// weights until the G-criterion drops to `G_SLACK * rank`.
pub fn optimal_design(topology: &Topology, subset: &[PathId]) -> Result<DesignWeights> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    let rows: Vec<DVector<f64>> = subset.iter().map(|&k| topology.incidence_row(k)).collect();
    let mut lambda = vec![1.0 / subset.len() as f64; subset.len()];
    let mut iterations = 0;
    loop {
        let (a_pinv, rank) = pinv_sym(&information_matrix(&rows, &lambda));
        let g = g_values(&rows, &a_pinv);
        let (best, g_max) = g.iter().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
        );
        let d = rank as f64;
        if g_max <= G_SLACK * d || iterations >= MAX_DESIGN_ITERS || g_max <= 1.0 {
            return Ok(DesignWeights {
                support: subset.to_vec(),
                lambda,
                rank,
                g_value: g_max,
                iterations,
            });
        }
        let step = (g_max / d - 1.0) / (g_max - 1.0);
        for w in lambda.iter_mut() {
            *w *= 1.0 - step;
        }
        lambda[best] += step;
        iterations += 1;
    }
}
