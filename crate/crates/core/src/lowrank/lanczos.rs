//! Lanczos bidiagonalization with full reorthogonalization.
//!
//! For an `m x n` matrix `A` the factorization keeps
//!
//! ```text
//! A P  = Q B
//! AᵀQ  = P Bᵀ + r e_kᵀ,   Pᵀ r = 0
//! ```
//!
//! with `P` (`n x k`) and `Q` (`m x k`) column-orthonormal and `B` upper
//! triangular. Plain extension keeps `B` bidiagonal; after an augmented
//! restart its leading block is dense, but its last row always holds only
//! the diagonal entry, which is what extension relies on.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{axpy, norm2, orthogonalize_against, scale, Matrix};
use crate::rng::Stream;

/// Breakdown threshold relative to `||A||_F`.
const BREAKDOWN: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct LanczosFactorization {
    pub p: Matrix,
    pub q: Matrix,
    pub b: Matrix,
    pub r: Vec<f64>,
    tiny: f64,
}

impl LanczosFactorization {
    /// One step from the unit vector `p1`.
    pub fn start(a: &Matrix, p1: &[f64], stream: &mut Stream) -> Result<Self> {
        if p1.len() != a.cols() {
            return Err(Error::DimensionMismatch {
                expected: (a.cols(), 1),
                found: (p1.len(), 1),
            });
        }
        if (norm2(p1) - 1.0).abs() > 1e-10 {
            return Err(Error::param("p1", "must be a unit vector"));
        }
        let tiny = BREAKDOWN * a.frobenius_norm();
        let p = Matrix::from_col_major(a.cols(), 1, p1.to_vec());
        let mut fac = Self {
            p,
            q: Matrix::zeros(a.rows(), 0),
            b: Matrix::zeros(1, 1),
            r: Vec::new(),
            tiny,
        };
        let q = a.matvec(p1);
        let alpha = fac.push_q(q, stream);
        fac.b[(0, 0)] = alpha;
        fac.r = fac.next_residual(a, alpha);
        Ok(fac)
    }

    /// Restart data; `q`, `b` and `r` are completed by the caller, which
    /// guarantees the two relations in the module docs.
    pub(crate) fn from_parts(p: Matrix, q: Matrix, b: Matrix, r: Vec<f64>, tiny: f64) -> Self {
        Self { p, q, b, r, tiny }
    }

    pub fn len(&self) -> usize {
        self.p.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.p.cols() == 0
    }

    pub(crate) fn tiny(&self) -> f64 {
        self.tiny
    }

    /// Extends to `steps` columns.
    pub fn extend_to(&mut self, a: &Matrix, steps: usize, stream: &mut Stream) {
        assert!(steps <= a.rows().min(a.cols()), "more Lanczos steps than the smaller dimension");
        while self.len() < steps {
            let k = self.len();
            let r = core::mem::take(&mut self.r);
            let beta_raw = norm2(&r);
            let (p, beta) = if beta_raw > self.tiny {
                let mut p = r;
                scale(&mut p, 1.0 / beta_raw);
                (p, beta_raw)
            } else {
                (random_orthogonal(&self.p, stream), 0.0)
            };
            self.p.push_column(&p);

            let mut q = a.matvec(&p);
            axpy(&mut q, -beta, self.q.col(k - 1));
            let alpha = self.push_q(q, stream);

            let mut b = Matrix::zeros(k + 1, k + 1);
            for j in 0..k {
                b.col_mut(j)[..k].copy_from_slice(self.b.col(j));
            }
            b[(k - 1, k)] = beta;
            b[(k, k)] = alpha;
            self.b = b;
            self.r = self.next_residual(a, alpha);
        }
    }

    /// Orthogonalizes `q` against `Q`, normalizes and appends it. Returns its
    /// norm, or zero after substituting a random direction on breakdown.
    pub(crate) fn push_q(&mut self, mut q: Vec<f64>, stream: &mut Stream) -> f64 {
        let alpha = orthogonalize_against(&mut q, &self.q);
        if alpha > self.tiny {
            scale(&mut q, 1.0 / alpha);
            self.q.push_column(&q);
            alpha
        } else {
            let q = random_orthogonal(&self.q, stream);
            self.q.push_column(&q);
            0.0
        }
    }

    /// `r = Aᵀ q_k - alpha p_k`, orthogonalized against `P`.
    pub(crate) fn next_residual(&self, a: &Matrix, alpha: f64) -> Vec<f64> {
        let k = self.len();
        let mut r = a.tr_matvec(self.q.col(k - 1));
        axpy(&mut r, -alpha, self.p.col(k - 1));
        orthogonalize_against(&mut r, &self.p);
        r
    }

    /// `max(||AP - QB||_max, ||AᵀQ - PBᵀ - r e_kᵀ||_max)`.
    pub fn residual(&self, a: &Matrix) -> f64 {
        let k = self.len();
        let left = a.mul(&self.p).sub(&self.q.mul(&self.b));
        let mut right = a.tr_mul(&self.q).sub(&self.p.mul(&self.b.transpose()));
        axpy(right.col_mut(k - 1), -1.0, &self.r);
        left.max_abs().max(right.max_abs())
    }
}

/// Random unit vector orthogonal to the columns of `basis`.
pub(crate) fn random_orthogonal(basis: &Matrix, stream: &mut Stream) -> Vec<f64> {
    let m = basis.rows();
    assert!(basis.cols() < m, "no room for another orthogonal direction");
    loop {
        let mut v = stream.gaussian_vec(m);
        let norm = orthogonalize_against(&mut v, basis);
        if norm > 1e-8 {
            scale(&mut v, 1.0 / norm);
            return v;
        }
    }
}

/// `steps` steps of Lanczos bidiagonalization from `p1`. Breakdowns are
/// resolved with random directions drawn from a fixed internal seed.
pub fn lanczos_bidiagonalization(a: &Matrix, p1: &[f64], steps: usize) -> Result<LanczosFactorization> {
    let min_dim = a.rows().min(a.cols());
    if steps == 0 || steps > min_dim {
        return Err(Error::param("steps", alloc::format!("must lie in 1..={min_dim}")));
    }
    let mut stream = Stream::new(0x1a9c_2b3d);
    let mut fac = LanczosFactorization::start(a, p1, &mut stream)?;
    fac.extend_to(a, steps, &mut stream);
    Ok(fac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lowrank::testutil::{random_matrix, unit};

    #[test]
    fn single_step_on_diagonal() {
        let a = Matrix::diagonal(&[-3.0, 2.0, 1.0]);
        let fac = lanczos_bidiagonalization(&a, &[1.0, 0.0, 0.0], 1).unwrap();
        assert_eq!(fac.b[(0, 0)], 3.0);
        assert_eq!(fac.q.col(0), &[-1.0, 0.0, 0.0]);
        assert!(norm2(&fac.r) == 0.0);
    }

    #[test]
    fn full_factorization_relations() {
        let a = random_matrix(12, 9, 4);
        let fac = lanczos_bidiagonalization(&a, &unit(9, 1), 9).unwrap();
        assert!(fac.residual(&a) < 1e-10 * a.frobenius_norm());
        assert!(fac.p.orthonormality_error() < 1e-10);
        assert!(fac.q.orthonormality_error() < 1e-10);
        for j in 0..9 {
            for i in 0..9 {
                if i != j && i + 1 != j {
                    assert_eq!(fac.b[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn orthogonality_at_partial_length() {
        let a = random_matrix(30, 30, 7);
        let fac = lanczos_bidiagonalization(&a, &unit(30, 2), 15).unwrap();
        assert!(fac.p.orthonormality_error() < 1e-10);
        assert!(fac.q.orthonormality_error() < 1e-10);
        assert!(crate::linalg::norm2(&fac.p.tr_matvec(&fac.r)) < 1e-10 * a.frobenius_norm());
        assert!(fac.residual(&a) < 1e-10 * a.frobenius_norm());
    }

    #[test]
    fn breakdown_on_low_rank_input() {
        // Rank 2: the Krylov space is exhausted after two steps.
        let x = [1.0, 2.0, 0.0, -1.0, 0.5, 3.0];
        let y = [0.0, 1.0, 1.0, 2.0, -1.0, 1.0];
        let a = Matrix::from_fn(6, 6, |i, j| x[i] * y[j] + y[i] * x[j]);
        let fac = lanczos_bidiagonalization(&a, &unit(6, 3), 5).unwrap();
        assert!(fac.residual(&a) < 1e-10 * a.frobenius_norm());
        assert!(fac.p.orthonormality_error() < 1e-10);
        assert!(fac.q.orthonormality_error() < 1e-10);
    }

    #[test]
    fn rejects_bad_arguments() {
        let a = Matrix::identity(3);
        assert!(lanczos_bidiagonalization(&a, &[1.0, 0.0, 0.0], 0).is_err());
        assert!(lanczos_bidiagonalization(&a, &[1.0, 0.0, 0.0], 4).is_err());
        assert!(lanczos_bidiagonalization(&a, &[1.0, 1.0, 0.0], 2).is_err());
        assert!(lanczos_bidiagonalization(&a, &[1.0, 0.0], 2).is_err());
    }
}
