//! Reference backend: symmetric eigendecomposition turned into an SVD.

use alloc::vec::Vec;

use super::{check_rank, check_symmetric, SingularTriplets};
use crate::error::Result;
use crate::linalg::{scale, Matrix, SymmetricEigen};

/// Top-`rank` triplets of a symmetric matrix: `sigma = |lambda|`,
/// `v = nu`, `u = sign(lambda) nu`, ordered by `sigma`.
pub fn exact_symmetric_svd(a: &Matrix, rank: usize) -> Result<SingularTriplets> {
    check_symmetric(a)?;
    check_rank(a, rank)?;
    from_eigen(SymmetricEigen::largest_magnitude(a, rank)?)
}

/// Same as [`exact_symmetric_svd`], reusing `a` as the reduction workspace.
pub fn exact_symmetric_svd_owned(a: Matrix, rank: usize) -> Result<SingularTriplets> {
    check_symmetric(&a)?;
    check_rank(&a, rank)?;
    from_eigen(SymmetricEigen::largest_magnitude_owned(a, rank)?)
}

fn from_eigen(eig: SymmetricEigen) -> Result<SingularTriplets> {
    let values: Vec<f64> = eig.values.iter().map(|l| l.abs()).collect();
    let right = eig.vectors;
    let mut left = right.clone();
    for (j, &l) in eig.values.iter().enumerate() {
        if l < 0.0 {
            scale(left.col_mut(j), -1.0);
        }
    }
    Ok(SingularTriplets::assemble(values, left, right, None, 0, true))
}
