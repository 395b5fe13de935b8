use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::weights::WeightVector;

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 100_000;
const RESIDUAL_BOUND: f64 = 1e-8;

/// Eigenpairs of a symmetric matrix ordered by decreasing eigenvalue.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    /// Column `m` is the unit eigenvector of `values[m]`.
    pub vectors: DMatrix<f64>,
}

pub fn symmetric_eigen(m: &DMatrix<f64>) -> Result<EigenPairs> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::validation("eigen-decomposition needs a non-empty square matrix"));
    }
    let eig = SymmetricEigen::try_new(m.clone(), EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or(Error::NonConvergence { what: "symmetric eigensolver", iterations: EIGEN_MAX_ITER })?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    // Stable sort keeps the solver's order on exact ties.
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |i, c| eig.eigenvectors[(i, order[c])]);
    Ok(EigenPairs { values, vectors })
}

/// Flip `v` so its entries sum to a non-negative value; an exactly zero sum
/// is resolved by making the first non-zero entry positive.
pub(crate) fn fix_sign(v: &mut DVector<f64>) {
    let s: f64 = v.iter().sum();
    let flip = if s != 0.0 { s < 0.0 } else { v.iter().find(|x| **x != 0.0).is_some_and(|x| *x < 0.0) };
    if flip {
        v.neg_mut();
    }
}

/// Largest eigenvalue and its sign-fixed unit eigenvector.
pub fn leading_eigenvector(c: &CorrelationMatrix) -> Result<(f64, WeightVector)> {
    let m = &c.values;
    for i in 0..m.nrows() {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 {
                return Err(Error::validation("leading eigenvector needs a symmetric matrix"));
            }
        }
    }
    let pairs = symmetric_eigen(m)?;
    let lambda = pairs.values[0];
    let mut v: DVector<f64> = pairs.vectors.column(0).into_owned();
    v /= v.norm();
    fix_sign(&mut v);
    let residual = (m * &v - &v * lambda).amax();
    if residual > RESIDUAL_BOUND {
        return Err(Error::NonConvergence { what: "leading eigenvector (residual bound)", iterations: EIGEN_MAX_ITER });
    }
    Ok((lambda, WeightVector::eigen(v.iter().copied().collect())))
}
