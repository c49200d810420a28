//! Two-stage block Rayleigh-Ritz solver.
//!
//! Stage 1 iterates on `C = AᵀA`, which converges fast but cannot resolve a
//! residual below roughly `eps ||A||^2 / sigma`. If it stalls before meeting
//! the tolerance, stage 2 continues on the augmented operator
//! `[[0, Aᵀ], [A, 0]]` (applied implicitly) whose eigenpairs are
//! `(±sigma, [v; ±u] / sqrt 2)`.
//!
//! A triplet is accepted when
//! `sqrt(||A v - sigma u||^2 + ||Aᵀu - sigma v||^2) < ||A|| delta`, with
//! `||A||` estimated by the largest Ritz value.

use alloc::vec::Vec;

use super::{check_rank, check_symmetric, Backend, BackendOptions, SingularTriplets};
use crate::error::Result;
use crate::linalg::{axpy, complete_orthonormal, norm2, scale, thin_qr, Matrix, SymmetricEigen};
use crate::rng::Stream;

/// Sweeps without a 2x residual improvement before stage 1 counts as stalled.
const STALL_WINDOW: usize = 8;

/// Top-`rank` triplets of a symmetric matrix.
pub fn pime(a: &Matrix, rank: usize, opts: &BackendOptions) -> Result<SingularTriplets> {
    opts.validate()?;
    check_symmetric(a)?;
    check_rank(a, rank)?;
    let n = a.rows();
    let delta = opts.tolerance_for(Backend::Pime);
    let budget = opts.max_iterations_for(Backend::Pime);
    let block = (rank + rank.min(10)).min(n);
    let mut stream = Stream::new(opts.seed);

    let start = Matrix::from_fn(n, block, |_, _| stream.gaussian());
    let mut x = thin_qr(&start).q;
    let mut sweeps = 0;
    let mut best_worst = f64::INFINITY;
    let mut since_best = 0;
    let mut stage1;
    loop {
        sweeps += 1;
        let ax = a.mul(&x);
        let cx = a.tr_mul(&ax);
        let h = symmetrize(x.tr_mul(&cx));
        let eig = SymmetricEigen::largest_magnitude(&h, block)?;
        let s = &eig.vectors;
        let ritz = x.mul(s);
        let c_ritz = cx.mul(s);
        let a_ritz = ax.mul(s);

        stage1 = extract_stage1(&ritz, &a_ritz, &eig.values, rank, &mut stream);
        let anorm = stage1.values[0];
        // ||C x - lambda x|| < sqrt(|lambda| ||C||) delta, i.e. the same
        // bound as the triplet residual scaled by sigma.
        let mut worst = 0.0_f64;
        for l in 0..rank {
            let mut r = c_ritz.col(l).to_vec();
            axpy(&mut r, -eig.values[l], ritz.col(l));
            let bound = libm::sqrt(eig.values[l].abs() * anorm * anorm) * delta;
            let ratio = if bound > 0.0 { norm2(&r) / bound } else { norm2(&r) / f64::MIN_POSITIVE };
            worst = worst.max(ratio);
        }
        if worst < 1.0 || sweeps >= budget {
            break;
        }
        if worst < 0.5 * best_worst {
            best_worst = worst;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= STALL_WINDOW {
                break;
            }
        }
        x = thin_qr(&c_ritz).q;
    }

    let residuals = triplet_residuals(a, &stage1);
    let anorm = stage1.values[0];
    if meets(&residuals, anorm, delta) {
        return Ok(finish(stage1, residuals, sweeps, true));
    }
    if sweeps >= budget {
        return Ok(finish(stage1, residuals, sweeps, false));
    }

    // Stage 2 on the augmented operator, seeded by [v; ±u] / sqrt 2 of the
    // whole stage-1 block.
    let inv_sqrt2 = core::f64::consts::FRAC_1_SQRT_2;
    let (v_block, u_block) = (&stage1.right_block, &stage1.left_block);
    let b = v_block.cols();
    let mut y = Matrix::zeros(2 * n, 2 * b);
    for j in 0..b {
        for i in 0..n {
            y[(i, j)] = inv_sqrt2 * v_block[(i, j)];
            y[(n + i, j)] = inv_sqrt2 * u_block[(i, j)];
            y[(i, b + j)] = inv_sqrt2 * v_block[(i, j)];
            y[(n + i, b + j)] = -inv_sqrt2 * u_block[(i, j)];
        }
    }
    let mut y = thin_qr(&y).q;
    let mut current = stage1;
    let mut current_res = residuals;
    let mut converged = false;
    while sweeps < budget {
        sweeps += 1;
        let by = apply_augmented(a, &y);
        let h = symmetrize(y.tr_mul(&by));
        let eig = SymmetricEigen::decompose(&h)?;
        // Largest positive Ritz values give the triplets, in descending order.
        let order: Vec<usize> = (0..eig.values.len()).rev().collect();
        let s = eig.vectors.select_columns(&order);
        let values: Vec<f64> = order.iter().map(|&i| eig.values[i]).collect();
        let ritz = y.mul(&s);
        let b_ritz = by.mul(&s);
        current = extract_stage2(&ritz, &b_ritz, &values, rank, n);
        current_res = stage2_residuals(&current);
        if meets(&current_res, current.values[0], delta) {
            converged = true;
            break;
        }
        y = thin_qr(&b_ritz).q;
    }
    Ok(finish(current, current_res, sweeps, converged))
}

/// Triplets plus the images `A v_l`, `Aᵀu_l` needed for residuals.
struct Extracted {
    values: Vec<f64>,
    left: Matrix,
    right: Matrix,
    av: Matrix,
    atu: Option<Matrix>,
    /// Whole-block vectors for seeding stage 2.
    right_block: Matrix,
    left_block: Matrix,
}

fn extract_stage1(ritz: &Matrix, a_ritz: &Matrix, lambdas: &[f64], rank: usize, stream: &mut Stream) -> Extracted {
    let b = ritz.cols();
    let mut left_block = Matrix::zeros(ritz.rows(), 0);
    let mut values = Vec::with_capacity(b);
    for j in 0..b {
        let sigma = libm::sqrt(lambdas[j].abs());
        values.push(sigma);
        let mut u = a_ritz.col(j).to_vec();
        if sigma > 0.0 {
            scale(&mut u, 1.0 / sigma);
        } else {
            // Null-space triplet: any unit vector orthogonal to the others.
            let k = left_block.cols();
            let mut tmp = left_block.clone();
            complete_orthonormal(&mut tmp, k + 1, stream);
            u.copy_from_slice(tmp.col(k));
        }
        left_block.push_column(&u);
    }
    Extracted {
        values: values[..rank].to_vec(),
        left: left_block.leading_columns(rank),
        right: ritz.leading_columns(rank),
        av: a_ritz.leading_columns(rank),
        atu: None,
        right_block: ritz.clone(),
        left_block,
    }
}

fn extract_stage2(ritz: &Matrix, b_ritz: &Matrix, lambdas: &[f64], rank: usize, n: usize) -> Extracted {
    let mut right = Matrix::zeros(n, rank);
    let mut left = Matrix::zeros(n, rank);
    let mut av = Matrix::zeros(n, rank);
    let mut atu = Matrix::zeros(n, rank);
    let mut values = Vec::with_capacity(rank);
    for l in 0..rank {
        let (top, bottom) = ritz.col(l).split_at(n);
        let (btop, bbottom) = b_ritz.col(l).split_at(n);
        let (nv, nu) = (norm2(top), norm2(bottom));
        values.push(lambdas[l].abs());
        for i in 0..n {
            right[(i, l)] = top[i] / nv;
            left[(i, l)] = bottom[i] / nu;
            // B [v; u] = [Aᵀu; A v].
            atu[(i, l)] = btop[i] / nu;
            av[(i, l)] = bbottom[i] / nv;
        }
    }
    Extracted {
        values,
        right_block: right.clone(),
        left_block: left.clone(),
        left,
        right,
        av,
        atu: Some(atu),
    }
}

fn apply_augmented(a: &Matrix, y: &Matrix) -> Matrix {
    let n = a.rows();
    let k = y.cols();
    let top = Matrix::from_fn(n, k, |i, j| y[(i, j)]);
    let bottom = Matrix::from_fn(n, k, |i, j| y[(n + i, j)]);
    let atb = a.tr_mul(&bottom);
    let at = a.mul(&top);
    Matrix::from_fn(2 * n, k, |i, j| if i < n { atb[(i, j)] } else { at[(i - n, j)] })
}

fn triplet_residuals(a: &Matrix, t: &Extracted) -> Vec<f64> {
    let atu = a.tr_mul(&t.left);
    residual_norms(t, &atu)
}

fn stage2_residuals(t: &Extracted) -> Vec<f64> {
    residual_norms(t, t.atu.as_ref().expect("stage 2 keeps Aᵀu"))
}

fn residual_norms(t: &Extracted, atu: &Matrix) -> Vec<f64> {
    (0..t.values.len())
        .map(|l| {
            let s = t.values[l];
            let mut r1 = t.av.col(l).to_vec();
            axpy(&mut r1, -s, t.left.col(l));
            let mut r2 = atu.col(l).to_vec();
            axpy(&mut r2, -s, t.right.col(l));
            libm::hypot(norm2(&r1), norm2(&r2))
        })
        .collect()
}

fn meets(residuals: &[f64], anorm: f64, delta: f64) -> bool {
    residuals.iter().all(|&r| r <= anorm * delta)
}

fn symmetrize(h: Matrix) -> Matrix {
    let n = h.rows();
    Matrix::from_fn(n, n, |i, j| 0.5 * (h[(i, j)] + h[(j, i)]))
}

fn finish(t: Extracted, residuals: Vec<f64>, sweeps: usize, converged: bool) -> SingularTriplets {
    // Ritz values arrive sorted; re-sort defensively against ties after abs().
    let mut order: Vec<usize> = (0..t.values.len()).collect();
    order.sort_by(|&i, &j| t.values[j].total_cmp(&t.values[i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| t.values[i]).collect();
    let residuals = order.iter().map(|&i| residuals[i]).collect();
    SingularTriplets::assemble(
        values,
        t.left.select_columns(&order),
        t.right.select_columns(&order),
        Some(residuals),
        sweeps,
        converged,
    )
}
