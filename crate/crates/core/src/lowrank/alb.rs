//! Augmented Lanczos bidiagonalization.
//!
//! Each cycle builds an `h`-step factorization, takes the SVD of the small
//! `B`, and either accepts the top `L` Ritz triplets or restarts from an
//! `(L + 1)`-column factorization that keeps them. The restart uses Ritz
//! vectors, or harmonic Ritz vectors when requested and `B` is well enough
//! conditioned to be inverted.

use alloc::vec::Vec;

use super::lanczos::LanczosFactorization;
use super::{check_rank, Backend, BackendOptions, SingularTriplets};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dense_svd, norm2, scale, thin_qr, DenseSvd, Matrix};
use crate::rng::Stream;

/// Top-`rank` triplets of `a` by restarted Lanczos bidiagonalization.
pub fn alb(a: &Matrix, rank: usize, opts: &BackendOptions) -> Result<SingularTriplets> {
    alb_observed(a, rank, opts, |_| {})
}

/// [`alb`], calling `observe` on every factorization it builds: the initial
/// one, each restarted `(L + 1)`-column one, and each re-extended one.
pub fn alb_observed(
    a: &Matrix,
    rank: usize,
    opts: &BackendOptions,
    mut observe: impl FnMut(&LanczosFactorization),
) -> Result<SingularTriplets> {
    opts.validate()?;
    check_rank(a, rank)?;
    let min_dim = a.rows().min(a.cols());
    let h = opts.lanczos_steps_for(rank, min_dim);
    if rank >= h {
        return Err(Error::param(
            "lanczos_steps",
            alloc::format!("need rank < h <= {min_dim}, got rank {rank} and h {h}"),
        ));
    }
    let tol = opts.tolerance_for(Backend::Alb);
    let max_restarts = opts.max_iterations_for(Backend::Alb);

    let mut stream = Stream::new(opts.seed);
    let mut p1 = stream.gaussian_vec(a.cols());
    let norm = norm2(&p1);
    scale(&mut p1, 1.0 / norm);
    let mut fac = LanczosFactorization::start(a, &p1, &mut stream)?;
    fac.extend_to(a, h, &mut stream);
    observe(&fac);

    let mut restarts = 0;
    loop {
        let svd = dense_svd(&fac.b)?;
        let beta = norm2(&fac.r);
        let sigma1 = svd.s[0];
        let residuals: Vec<f64> = (0..rank).map(|l| beta * svd.u[(h - 1, l)].abs()).collect();
        let converged = residuals.iter().all(|&r| r <= tol * sigma1);
        if converged || restarts == max_restarts {
            let left = fac.q.mul(&svd.u.leading_columns(rank));
            let right = fac.p.mul(&svd.v.leading_columns(rank));
            let values = svd.s[..rank].to_vec();
            return Ok(SingularTriplets::assemble(
                values,
                left,
                right,
                Some(residuals),
                restarts,
                converged,
            ));
        }
        restarts += 1;
        let smallest = svd.s[h - 1];
        let well_conditioned = smallest > 0.0 && sigma1 / smallest <= 1.0 / libm::sqrt(f64::EPSILON);
        fac = if opts.harmonic && well_conditioned {
            harmonic_restart(a, &fac, rank, &mut stream)?
        } else {
            ritz_restart(a, &fac, &svd, rank, &mut stream)
        };
        observe(&fac);
        fac.extend_to(a, h, &mut stream);
        observe(&fac);
    }
}

/// Keeps the top `rank` Ritz vectors plus the normalized residual:
///
/// ```text
/// P~ = [P v_1 .. P v_L, r/|r|],  Q~ = [Q u_1 .. Q u_L, q~]
/// B~ = [[diag(sigma), rho], [0, alpha~]],  rho_l = |r| e_hᵀ u_l
/// ```
fn ritz_restart(
    a: &Matrix,
    fac: &LanczosFactorization,
    svd: &DenseSvd,
    rank: usize,
    stream: &mut Stream,
) -> LanczosFactorization {
    let h = fac.len();
    let beta = norm2(&fac.r);
    let mut p = fac.p.mul(&svd.v.leading_columns(rank));
    let q = fac.q.mul(&svd.u.leading_columns(rank));
    let mut next = fac.r.clone();
    scale(&mut next, 1.0 / beta);
    p.push_column(&next);

    let rho: Vec<f64> = (0..rank).map(|l| beta * svd.u[(h - 1, l)]).collect();
    let mut y = a.matvec(&next);
    for (l, &c) in rho.iter().enumerate() {
        axpy(&mut y, -c, q.col(l));
    }

    let mut b = Matrix::zeros(rank + 1, rank + 1);
    for l in 0..rank {
        b[(l, l)] = svd.s[l];
        b[(l, rank)] = rho[l];
    }
    finish_restart(a, p, q, b, y, fac.tiny(), stream)
}

/// Restart from the `rank` largest singular triplets of `[B, beta e_h]`,
/// reorganized through a QR factorization so `B` stays upper triangular.
fn harmonic_restart(
    a: &Matrix,
    fac: &LanczosFactorization,
    rank: usize,
    stream: &mut Stream,
) -> Result<LanczosFactorization> {
    let h = fac.len();
    let beta = norm2(&fac.r);
    let mut wide = Matrix::zeros(h, h + 1);
    for j in 0..h {
        wide.col_mut(j).copy_from_slice(fac.b.col(j));
    }
    wide[(h - 1, h)] = beta;
    let svd = dense_svd(&wide)?;

    // M = [[B⁻¹ U' Σ', -beta B⁻¹ e_h], [0, 1]]
    let mut m = Matrix::zeros(h + 1, rank + 1);
    for l in 0..rank {
        let mut x = svd.u.col(l).to_vec();
        scale(&mut x, svd.s[l]);
        solve_upper(&fac.b, &mut x)?;
        m.col_mut(l)[..h].copy_from_slice(&x);
    }
    let mut e = alloc::vec![0.0; h];
    e[h - 1] = -beta;
    solve_upper(&fac.b, &mut e)?;
    m.col_mut(rank)[..h].copy_from_slice(&e);
    m[(h, rank)] = 1.0;

    let qr = thin_qr(&m);
    let rmax = qr.r.max_abs();
    if !(qr.min_diagonal() > f64::EPSILON * rmax * (rank + 1) as f64) {
        return Err(Error::SingularMatrix("harmonic restart QR factor"));
    }

    let mut extended = fac.p.clone();
    let mut next = fac.r.clone();
    scale(&mut next, 1.0 / beta);
    extended.push_column(&next);
    let p = extended.mul(&qr.q);
    let q = fac.q.mul(&svd.u.leading_columns(rank));

    // y = A p_{h+1} - beta q_h splits into its Q̂ part (gamma) and the rest.
    let mut y = a.matvec(&next);
    axpy(&mut y, -beta, fac.q.col(h - 1));
    let gamma = q.tr_matvec(&y);
    for (l, &c) in gamma.iter().enumerate() {
        axpy(&mut y, -c, q.col(l));
    }

    // B̂ = [[Σ', gamma], [0, alpha]] R'⁻¹; alpha is set once q̂ is known.
    let mut middle = Matrix::zeros(rank + 1, rank + 1);
    for l in 0..rank {
        middle[(l, l)] = svd.s[l];
        middle[(l, rank)] = gamma[l];
    }
    let r_inv = invert_upper(&qr.r)?;
    Ok(finish_harmonic(a, p, q, middle, r_inv, y, fac.tiny(), stream))
}

/// Appends `q~ = y / |y|` (after reorthogonalization) and the new residual.
fn finish_restart(
    a: &Matrix,
    p: Matrix,
    q: Matrix,
    mut b: Matrix,
    y: Vec<f64>,
    tiny: f64,
    stream: &mut Stream,
) -> LanczosFactorization {
    let k = p.cols();
    let mut fac = LanczosFactorization::from_parts(p, q, Matrix::zeros(0, 0), Vec::new(), tiny);
    let alpha = fac.push_q(y, stream);
    b[(k - 1, k - 1)] = alpha;
    fac.b = b;
    fac.r = fac.next_residual(a, alpha);
    fac
}

#[allow(clippy::too_many_arguments)]
fn finish_harmonic(
    a: &Matrix,
    p: Matrix,
    q: Matrix,
    mut middle: Matrix,
    r_inv: Matrix,
    y: Vec<f64>,
    tiny: f64,
    stream: &mut Stream,
) -> LanczosFactorization {
    let k = p.cols();
    let mut fac = LanczosFactorization::from_parts(p, q, Matrix::zeros(0, 0), Vec::new(), tiny);
    let alpha = fac.push_q(y, stream);
    middle[(k - 1, k - 1)] = alpha;
    let b = middle.mul(&r_inv);
    let corner = b[(k - 1, k - 1)];
    fac.b = b;
    fac.r = fac.next_residual(a, corner);
    fac
}

/// In-place back substitution for upper triangular `u`.
fn solve_upper(u: &Matrix, x: &mut [f64]) -> Result<()> {
    let n = u.rows();
    let scale_ref = u.max_abs();
    for i in (0..n).rev() {
        let d = u[(i, i)];
        if !(d.abs() > f64::EPSILON * scale_ref) {
            return Err(Error::SingularMatrix("bidiagonal block"));
        }
        x[i] /= d;
        let xi = x[i];
        for (k, xk) in x[..i].iter_mut().enumerate() {
            *xk -= u[(k, i)] * xi;
        }
    }
    Ok(())
}

fn invert_upper(u: &Matrix) -> Result<Matrix> {
    let n = u.rows();
    let mut inv = Matrix::identity(n);
    for j in 0..n {
        solve_upper(u, inv.col_mut(j))?;
    }
    // Entries below the diagonal are exact zeros already; keep them so.
    for j in 0..n {
        for i in j + 1..n {
            inv[(i, j)] = 0.0;
        }
    }
    Ok(inv)
}
