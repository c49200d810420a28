use alloc::vec::Vec;

use super::{complete_orthonormal, dot, norm2, scale, thin_qr, Matrix};
use crate::error::{Error, Result};
use crate::rng::Stream;

/// Thin SVD `m = u diag(s) vᵀ` with `k = min(rows, cols)` triplets,
/// `s` non-increasing.
#[derive(Debug, Clone)]
pub struct DenseSvd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

/// Dense SVD for the small matrices produced inside the iterative backends.
///
/// The tall factor is reduced by Householder QR and the square triangle is
/// diagonalized by one-sided (Hestenes) Jacobi rotations, which keep
/// normalized columns orthogonal to working precision even for tiny singular
/// values. Columns that collapse to roundoff get left vectors from an
/// orthonormal completion.
pub fn dense_svd(m: &Matrix) -> Result<DenseSvd> {
    if m.rows() < m.cols() {
        let t = dense_svd(&m.transpose())?;
        return Ok(DenseSvd {
            u: t.v,
            s: t.s,
            v: t.u,
        });
    }
    let k = m.cols();
    if k == 0 {
        return Ok(DenseSvd {
            u: Matrix::zeros(m.rows(), 0),
            s: Vec::new(),
            v: Matrix::zeros(0, 0),
        });
    }
    let qr = thin_qr(m);
    let mut w = qr.r.clone();
    let mut v = Matrix::identity(k);
    let max_sweeps = 60;
    // Columns below eps * ||R||_F only carry roundoff; rotating them
    // against each other can cycle without improving anything.
    let floor = {
        let f = f64::EPSILON * w.frobenius_norm();
        f * f
    };
    let mut converged = false;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for i in 0..k {
            for j in i + 1..k {
                let alpha = dot(w.col(i), w.col(i));
                let beta = dot(w.col(j), w.col(j));
                let gamma = dot(w.col(i), w.col(j));
                if gamma == 0.0
                    || gamma.abs() <= f64::EPSILON * libm::sqrt(alpha * beta)
                    || alpha.min(beta) <= floor
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta));
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                rotate_pair(&mut w, i, j, c, s);
                rotate_pair(&mut v, i, j, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            what: "one-sided Jacobi SVD",
            iterations: max_sweeps,
        });
    }

    let norms: Vec<f64> = w.columns().map(norm2).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    let sigma_max = norms[order[0]];
    let tol = k as f64 * f64::EPSILON * sigma_max;

    let mut s = Vec::with_capacity(k);
    let mut ur = Matrix::zeros(k, 0);
    let mut vs = Matrix::zeros(k, 0);
    let mut deficient = false;
    for &j in &order {
        let sigma = norms[j];
        if sigma > tol && !deficient {
            let mut col = w.col(j).to_vec();
            scale(&mut col, 1.0 / sigma);
            ur.push_column(&col);
        } else {
            deficient = true;
        }
        s.push(sigma);
        vs.push_column(v.col(j));
    }
    if deficient {
        complete_orthonormal(&mut ur, k, &mut Stream::new(0x05bd_c0de));
    }
    Ok(DenseSvd {
        u: qr.q.mul(&ur),
        s,
        v: vs,
    })
}

fn rotate_pair(m: &mut Matrix, i: usize, j: usize, c: f64, s: f64) {
    let rows = m.rows();
    let data = m.as_mut_slice();
    let (left, right) = data.split_at_mut(j * rows);
    let ci = &mut left[i * rows..(i + 1) * rows];
    let cj = &mut right[..rows];
    for (a, b) in ci.iter_mut().zip(cj.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}
