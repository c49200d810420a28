//! Double-centering of geodesic distances.

use alloc::vec::Vec;

use crate::error::Result;
use crate::linalg::{pairwise_sum, Matrix};
use crate::patchgraph::GeodesicMatrix;

/// Symmetric matrix whose rows and columns sum to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GramianMatrix {
    g: Matrix,
}

impl GramianMatrix {
    pub fn n(&self) -> usize {
        self.g.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.g
    }

    pub fn into_matrix(self) -> Matrix {
        self.g
    }
}

/// `g[i,j] = -(d[i,j] - mu_i - mu_j + mu) / 2` with row, column and grand
/// means of `d` itself (not of its elementwise square). The distance
/// buffer is reused for the output.
pub fn gramian_from_distances(d: GeodesicMatrix) -> Result<GramianMatrix> {
    Ok(GramianMatrix {
        g: double_center(d.into_matrix()),
    })
}

/// Validating entry point for matrices that did not come out of
/// [`crate::patchgraph::geodesic_distances`].
pub fn gramian_from_matrix(d: Matrix) -> Result<GramianMatrix> {
    gramian_from_distances(GeodesicMatrix::new(d)?)
}

fn double_center(mut d: Matrix) -> Matrix {
    let n = d.rows();
    if n == 0 {
        return d;
    }
    let nf = n as f64;
    // `d` is symmetric, so row means equal column means; sharing them (and
    // adding `mu_i + mu_j` in a commutative way) keeps `g` exactly symmetric.
    let means: Vec<f64> = d.columns().map(|c| pairwise_sum(c) / nf).collect();
    let grand = pairwise_sum(&means) / nf;
    for j in 0..n {
        let mj = means[j];
        for (x, mi) in d.col_mut(j).iter_mut().zip(&means) {
            *x = -0.5 * ((*x - (mi + mj)) + grand);
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;
    use proptest::prelude::*;

    fn random_distances(n: usize, seed: u64) -> Matrix {
        let mut s = Stream::new(seed);
        let mut d = Matrix::zeros(n, n);
        for j in 0..n {
            for i in j + 1..n {
                let x = 1.0 + 10.0 * s.uniform();
                d[(i, j)] = x;
                d[(j, i)] = x;
            }
        }
        d
    }

    #[test]
    fn zero_distances() {
        let g = gramian_from_matrix(Matrix::zeros(2, 2)).unwrap();
        assert_eq!(g.matrix(), &Matrix::zeros(2, 2));
    }

    #[test]
    fn two_points() {
        let d = Matrix::from_rows(&[&[0.0, 2.0], &[2.0, 0.0]]);
        let g = gramian_from_matrix(d).unwrap();
        let want = Matrix::from_rows(&[&[0.5, -0.5], &[-0.5, 0.5]]);
        assert_eq!(g.matrix(), &want);
    }

    #[test]
    fn rejects_invalid_input() {
        let asym = Matrix::from_rows(&[&[0.0, 2.0], &[1.0, 0.0]]);
        assert!(gramian_from_matrix(asym).is_err());
        let diag = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 0.0]]);
        assert!(gramian_from_matrix(diag).is_err());
        let inf = Matrix::from_rows(&[&[0.0, f64::INFINITY], &[f64::INFINITY, 0.0]]);
        assert!(gramian_from_matrix(inf).is_err());
        assert!(gramian_from_matrix(Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn rows_sum_to_zero() {
        let g = gramian_from_matrix(random_distances(20, 3)).unwrap();
        let m = g.matrix();
        for j in 0..20 {
            assert!(m.col(j).iter().sum::<f64>().abs() < 1e-10);
            assert!((0..20).map(|i| m[(j, i)]).sum::<f64>().abs() < 1e-10);
        }
        assert_eq!(m.asymmetry(), 0.0);
    }

    proptest! {
        #[test]
        fn centering_kills_constants(n in 2usize..25, seed in 0u64..500, c in 0.0f64..100.0) {
            let d = random_distances(n, seed);
            // The shifted matrix has a non-zero diagonal, so bypass validation.
            let g = double_center(d.clone());
            let full = Matrix::from_fn(n, n, |i, j| d[(i, j)] + c);
            let g_full = double_center(full);
            prop_assert!(g.sub(&g_full).max_abs() <= 1e-10 * (1.0 + c));
            let norm = g.frobenius_norm();
            for j in 0..n {
                prop_assert!(g.col(j).iter().sum::<f64>().abs() <= 1e-9 * norm.max(1e-300) + 1e-12);
            }
        }
    }
}
