use alloc::vec::Vec;

use super::{axpy, dot, norm2, scale, Matrix};
use crate::rng::Stream;

/// Removes the components of `v` along the (orthonormal) columns of `basis`,
/// with a second classical Gram-Schmidt pass when the first one cancels more
/// than `1 - 1/sqrt(2)` of the norm. Returns the final norm of `v`.
pub fn orthogonalize_against(v: &mut [f64], basis: &Matrix) -> f64 {
    let before = norm2(v);
    if basis.cols() == 0 {
        return before;
    }
    let coeffs = basis.tr_matvec(v);
    for (j, c) in coeffs.iter().enumerate() {
        axpy(v, -c, basis.col(j));
    }
    let mut after = norm2(v);
    if after < core::f64::consts::FRAC_1_SQRT_2 * before {
        let coeffs = basis.tr_matvec(v);
        for (j, c) in coeffs.iter().enumerate() {
            axpy(v, -c, basis.col(j));
        }
        after = norm2(v);
    }
    after
}

/// Modified Gram-Schmidt (with one re-orthogonalization) over the columns of
/// `cols`, in order. Columns whose remaining norm falls below
/// `drop_tol * (their original norm)` are dropped as dependent.
pub fn orthonormal_basis(cols: &Matrix, drop_tol: f64) -> Matrix {
    let m = cols.rows();
    let mut basis = Matrix::zeros(m, 0);
    for j in 0..cols.cols() {
        let mut v = cols.col(j).to_vec();
        let original = norm2(&v);
        if original == 0.0 {
            continue;
        }
        for _pass in 0..2 {
            for b in basis.columns() {
                let c = dot(b, &v);
                axpy(&mut v, -c, b);
            }
        }
        let remaining = norm2(&v);
        if remaining > drop_tol * original {
            scale(&mut v, 1.0 / remaining);
            basis.push_column(&v);
        }
    }
    basis
}

/// Appends random unit vectors orthogonal to the existing columns until
/// `basis` has `target` columns.
pub fn complete_orthonormal(basis: &mut Matrix, target: usize, stream: &mut Stream) {
    let m = basis.rows();
    assert!(target <= m, "cannot hold {target} orthonormal columns in R^{m}");
    while basis.cols() < target {
        let mut v = stream.gaussian_vec(m);
        let norm = orthogonalize_against(&mut v, basis);
        if norm > 1e-8 {
            scale(&mut v, 1.0 / norm);
            basis.push_column(&v);
        }
    }
}

/// Thin Householder QR of an `m x k` matrix with `m >= k`.
pub struct ThinQr {
    pub q: Matrix,
    pub r: Matrix,
}

impl ThinQr {
    /// Smallest `|r_jj|`.
    pub fn min_diagonal(&self) -> f64 {
        (0..self.r.cols()).fold(f64::INFINITY, |m, j| m.min(self.r[(j, j)].abs()))
    }
}

pub fn thin_qr(y: &Matrix) -> ThinQr {
    let (m, k) = y.shape();
    assert!(m >= k, "thin QR needs at least as many rows as columns");
    let mut a = y.clone();
    let mut taus = Vec::with_capacity(k);
    for j in 0..k {
        let col = &mut a.col_mut(j)[j..];
        let alpha = col[0];
        let sigma = norm2(&col[1..]);
        if sigma == 0.0 {
            taus.push(0.0);
            continue;
        }
        let norm = libm::hypot(alpha, sigma);
        let beta = if alpha <= 0.0 { norm } else { -norm };
        let v0 = alpha - beta;
        let tau = (beta - alpha) / beta;
        col[0] = beta;
        scale(&mut col[1..], 1.0 / v0);
        taus.push(tau);
        // Apply H = I - tau v vᵀ (v = [1; col[1..]]) to the trailing columns.
        let v_tail = a.col(j)[j + 1..].to_vec();
        for c in j + 1..k {
            let target = &mut a.col_mut(c)[j..];
            let w = target[0] + dot(&v_tail, &target[1..]);
            let f = tau * w;
            target[0] -= f;
            axpy(&mut target[1..], -f, &v_tail);
        }
    }
    let r = Matrix::from_fn(k, k, |i, j| if i <= j { a[(i, j)] } else { 0.0 });
    let mut q = Matrix::zeros(m, k);
    for j in 0..k {
        q[(j, j)] = 1.0;
    }
    for j in (0..k).rev() {
        let tau = taus[j];
        if tau == 0.0 {
            continue;
        }
        let v_tail = a.col(j)[j + 1..].to_vec();
        for c in j..k {
            let target = &mut q.col_mut(c)[j..];
            let w = target[0] + dot(&v_tail, &target[1..]);
            let f = tau * w;
            target[0] -= f;
            axpy(&mut target[1..], -f, &v_tail);
        }
    }
    ThinQr { q, r }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random(m: usize, k: usize, seed: u64) -> Matrix {
        let mut s = Stream::new(seed);
        Matrix::from_col_major(m, k, s.gaussian_vec(m * k))
    }

    #[test]
    fn thin_qr_reconstructs() {
        let y = random(40, 7, 1);
        let qr = thin_qr(&y);
        assert!(qr.q.orthonormality_error() < 1e-13);
        assert!(qr.q.mul(&qr.r).sub(&y).max_abs() < 1e-12);
    }

    #[test]
    fn thin_qr_flags_rank_deficiency() {
        let mut y = random(20, 3, 2);
        let c0 = y.col(0).to_vec();
        y.col_mut(2).copy_from_slice(&c0);
        let qr = thin_qr(&y);
        assert!(qr.min_diagonal() < 1e-12);
    }

    #[test]
    fn basis_drops_dependent_columns() {
        let mut y = random(10, 4, 3);
        let c: Vec<f64> = y.col(0).iter().zip(y.col(1)).map(|(a, b)| 2.0 * a - b).collect();
        y.col_mut(3).copy_from_slice(&c);
        let b = orthonormal_basis(&y, 1e-10);
        assert_eq!(b.cols(), 3);
        assert!(b.orthonormality_error() < 1e-14);
    }

    #[test]
    fn completion_fills_space() {
        let mut b = orthonormal_basis(&random(6, 2, 4), 1e-10);
        complete_orthonormal(&mut b, 6, &mut Stream::new(5));
        assert!(b.orthonormality_error() < 1e-13);
    }
}
