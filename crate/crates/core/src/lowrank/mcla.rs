//! Monte Carlo low-rank approximation.
//!
//! Keeps an orthonormal `m x L` basis `X` of sampled column space. Each
//! iteration appends `L'` freshly drawn columns of `A`, orthonormalizes the
//! union into `W`, and keeps the best rank-`L` approximation of `A` whose
//! column space lies in `span(W)`:
//!
//! ```text
//! Z = AᵀW,  C = ZᵀZ = Y Λ Yᵀ,  X <- W Y_L,  B = X Xᵀ A
//! ```
//!
//! so `||B||_F^2 = sum(Λ_L)` can only grow from one iteration to the next.

use alloc::vec::Vec;

use super::{check_rank, exact_symmetric_svd, Backend, BackendOptions, SingularTriplets};
use crate::error::{Error, Result};
use crate::linalg::{orthonormal_basis, scale, Matrix};
use crate::rng::Stream;

const DROP_TOL: f64 = 1e-10;
const REDRAWS: usize = 10;

pub fn mcla(a: &Matrix, rank: usize, opts: &BackendOptions) -> Result<SingularTriplets> {
    mcla_traced(a, rank, opts).map(|(t, _)| t)
}

/// [`mcla`] plus `||B^(t)||_F` for `t = 0, 1, ...` (the first entry is the
/// initial basis).
pub fn mcla_traced(a: &Matrix, rank: usize, opts: &BackendOptions) -> Result<(SingularTriplets, Vec<f64>)> {
    opts.validate()?;
    check_rank(a, rank)?;
    let eta = opts.tolerance_for(Backend::Mcla);
    let max_iter = opts.max_iterations_for(Backend::Mcla);
    let batch = opts.mcla_batch_for(rank).min(a.cols());
    let mut stream = Stream::new(opts.seed);

    let mut x = initial_basis(a, rank, &mut stream)?;
    let mut m = a.tr_mul(&x);
    let mut norms = alloc::vec![m.frobenius_norm()];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        let drawn = a.select_columns(&stream.distinct(a.cols(), batch));
        let mut union = x.clone();
        for c in drawn.columns() {
            union.push_column(c);
        }
        let w = orthonormal_basis(&union, DROP_TOL);
        let z = a.tr_mul(&w);
        let c = z.tr_mul(&z);
        let y = exact_symmetric_svd(&c, rank)?.right;
        x = w.mul(&y);
        m = z.mul(&y);

        let prev = *norms.last().expect("initial norm recorded");
        let now = m.frobenius_norm();
        norms.push(now);
        if now == 0.0 || prev / now > 1.0 - eta {
            converged = true;
            break;
        }
    }

    // σ_l = ||Aᵀx_l||, v_l = Aᵀx_l / σ_l; the columns of M are orthogonal.
    let mut order: Vec<usize> = (0..rank).collect();
    let col_norms: Vec<f64> = m.columns().map(crate::linalg::norm2).collect();
    order.sort_by(|&i, &j| col_norms[j].total_cmp(&col_norms[i]).then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&i| col_norms[i]).collect();
    let left = x.select_columns(&order);
    let mut right = m.select_columns(&order);
    let mut fill = Stream::new(opts.seed ^ 0x6d63_6c61);
    let mut complete = Matrix::zeros(right.rows(), 0);
    let mut zero_cols = Vec::new();
    for (j, &s) in values.iter().enumerate() {
        if s > 0.0 {
            scale(right.col_mut(j), 1.0 / s);
            complete.push_column(right.col(j));
        } else {
            zero_cols.push(j);
        }
    }
    if !zero_cols.is_empty() {
        let have = complete.cols();
        crate::linalg::complete_orthonormal(&mut complete, have + zero_cols.len(), &mut fill);
        for (k, &j) in zero_cols.iter().enumerate() {
            right.col_mut(j).copy_from_slice(complete.col(have + k));
        }
    }
    let t = SingularTriplets::assemble(values, left, right, None, iterations, converged);
    Ok((t, norms))
}

/// Orthonormal basis of `rank` distinct random columns, redrawn until the
/// columns are independent.
fn initial_basis(a: &Matrix, rank: usize, stream: &mut Stream) -> Result<Matrix> {
    for _ in 0..=REDRAWS {
        let cols = a.select_columns(&stream.distinct(a.cols(), rank));
        let basis = orthonormal_basis(&cols, DROP_TOL);
        if basis.cols() == rank {
            return Ok(basis);
        }
    }
    Err(Error::DegenerateBasis {
        wanted: rank,
        attempts: REDRAWS + 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lowrank::testutil::*;

    #[test]
    fn exact_rank_recovered() {
        let mut ev = alloc::vec![0.0; 30];
        ev[..3].copy_from_slice(&[9.0, -4.0, 1.5]);
        let a = symmetric_with_spectrum(&ev, 6);
        let opts = BackendOptions {
            max_iterations: Some(50),
            ..BackendOptions::with_seed(3)
        };
        let t = mcla(&a, 3, &opts).unwrap();
        let e = exact_symmetric_svd(&a, 3).unwrap();
        assert!(relative_gap(&e.values, &t.values) < 1e-6, "{:?}", t.values);
        assert_contract(&t, 1e-10);
    }

    #[test]
    fn isotropic_spectrum() {
        let a = Matrix::from_fn(12, 12, |i, j| if i == j { 2.5 } else { 0.0 });
        let t = mcla(&a, 4, &BackendOptions::with_seed(9)).unwrap();
        for &s in &t.values {
            assert!((s - 2.5).abs() < 1e-12);
        }
        assert_contract(&t, 1e-12);
    }

    #[test]
    fn norm_never_decreases() {
        for seed in 0..5 {
            let a = random_symmetric(40, seed);
            let opts = BackendOptions {
                tolerance: Some(1e-12),
                max_iterations: Some(25),
                mcla_batch: Some(3),
                ..BackendOptions::with_seed(seed)
            };
            let (_, norms) = mcla_traced(&a, 5, &opts).unwrap();
            assert!(norms.len() > 2);
            for w in norms.windows(2) {
                assert!(w[1] >= w[0] * (1.0 - 1e-12), "{} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn bounded_by_exact_truncation() {
        let a = random_symmetric(25, 4);
        let (t, norms) = mcla_traced(&a, 4, &BackendOptions::with_seed(1)).unwrap();
        let e = exact_symmetric_svd(&a, 4).unwrap();
        let best = libm::sqrt(e.values.iter().map(|s| s * s).sum::<f64>());
        assert!(*norms.last().unwrap() <= best * (1.0 + 1e-12));
        for (x, y) in t.values.iter().zip(&e.values) {
            assert!(*x <= y * (1.0 + 1e-12));
        }
    }

    #[test]
    fn deterministic() {
        let a = random_symmetric(20, 2);
        let opts = BackendOptions::with_seed(123);
        assert_eq!(mcla(&a, 3, &opts).unwrap(), mcla(&a, 3, &opts).unwrap());
    }

    #[test]
    fn degenerate_columns_fail() {
        // Only one non-zero column: no independent pair can ever be drawn.
        let a = Matrix::from_fn(5, 5, |i, j| if j == 0 { (i + 1) as f64 } else { 0.0 });
        assert!(matches!(
            mcla(&a, 2, &BackendOptions::with_seed(0)),
            Err(Error::DegenerateBasis { wanted: 2, .. })
        ));
    }
}
