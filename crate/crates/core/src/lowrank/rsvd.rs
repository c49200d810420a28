//! Randomized SVD: Gaussian range finder followed by a small dense SVD.

use alloc::vec::Vec;

use super::{check_rank, BackendOptions, SingularTriplets};
use crate::error::{Error, Result};
use crate::linalg::{complete_orthonormal, dense_svd, thin_qr, Matrix};
use crate::rng::Stream;

/// `R` diagonal entries below this fraction of `||Y||_F` mark a rank-deficient
/// sample.
const RANK_TOL: f64 = 1e-14;

pub fn rsvd(a: &Matrix, rank: usize, opts: &BackendOptions) -> Result<SingularTriplets> {
    opts.validate()?;
    check_rank(a, rank)?;
    let (m, n) = a.shape();
    let k = rank + opts.oversampling;
    if k > m.min(n) {
        return Err(Error::param(
            "oversampling",
            alloc::format!("rank + oversampling = {k} exceeds the smaller dimension {}", m.min(n)),
        ));
    }
    let mut stream = Stream::new(opts.seed);

    let mut attempt = 0;
    let (q, full_rank) = loop {
        attempt += 1;
        let omega = Matrix::from_fn(n, k, |_, _| stream.gaussian());
        let mut y = a.mul(&omega);
        for _ in 0..opts.power_iterations {
            let q = thin_qr(&y).q;
            let z = thin_qr(&a.tr_mul(&q)).q;
            y = a.mul(&z);
        }
        let qr = thin_qr(&y);
        let threshold = RANK_TOL * y.frobenius_norm();
        let keep: Vec<usize> = (0..k).filter(|&j| qr.r[(j, j)].abs() > threshold).collect();
        if keep.len() == k {
            break (qr.q, true);
        }
        if attempt == 2 {
            break (qr.q.select_columns(&keep), false);
        }
    };

    // B = QᵀA; its SVD is computed through Bᵀ = AᵀQ = V Σ Wᵀ.
    let bt = a.tr_mul(&q);
    let svd = dense_svd(&bt)?;
    let found = q.cols().min(rank);
    let mut values = svd.s[..found].to_vec();
    let mut left = q.mul(&svd.v.leading_columns(found));
    let mut right = svd.u.leading_columns(found);
    if found < rank {
        let mut fill = Stream::new(opts.seed ^ 0x7273_7664);
        complete_orthonormal(&mut left, rank, &mut fill);
        complete_orthonormal(&mut right, rank, &mut fill);
        values.resize(rank, 0.0);
    }
    Ok(SingularTriplets::assemble(
        values,
        left,
        right,
        None,
        opts.power_iterations,
        full_rank,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lowrank::exact_symmetric_svd;
    use crate::lowrank::testutil::*;

    #[test]
    fn exact_low_rank_is_reproduced() {
        let mut ev = alloc::vec![0.0; 20];
        ev[..3].copy_from_slice(&[5.0, -2.0, 0.7]);
        let a = symmetric_with_spectrum(&ev, 8);
        for rank in [3, 5] {
            let t = rsvd(&a, rank, &BackendOptions::with_seed(4)).unwrap();
            assert!(t.reconstruct().sub(&a).max_abs() < 1e-8);
            assert_contract(&t, 1e-10);
        }
    }

    #[test]
    fn deterministic() {
        let a = random_symmetric(30, 5);
        let opts = BackendOptions {
            oversampling: 3,
            power_iterations: 1,
            ..BackendOptions::with_seed(11)
        };
        assert_eq!(rsvd(&a, 4, &opts).unwrap(), rsvd(&a, 4, &opts).unwrap());
    }

    #[test]
    fn fast_decay_with_oversampling_and_power() {
        let ev: Vec<f64> = (0..50).map(|k| libm::pow(0.3, k as f64) * if k % 3 == 1 { -1.0 } else { 1.0 }).collect();
        let a = symmetric_with_spectrum(&ev, 12);
        let opts = BackendOptions {
            oversampling: 5,
            power_iterations: 1,
            ..BackendOptions::with_seed(3)
        };
        let t = rsvd(&a, 10, &opts).unwrap();
        let e = exact_symmetric_svd(&a, 10).unwrap();
        assert!(t.converged);
        assert!(relative_gap(&e.values, &t.values) < 1e-3);
    }

    #[test]
    fn projector_never_beats_truncation() {
        for seed in 0..5 {
            let a = random_symmetric(30, seed);
            let t = rsvd(&a, 5, &BackendOptions::with_seed(seed)).unwrap();
            let e = exact_symmetric_svd(&a, 5).unwrap();
            let residual = a.sub(&t.left.mul(&t.left.tr_mul(&a))).frobenius_norm();
            let best = a.sub(&e.reconstruct()).frobenius_norm();
            assert!(residual >= best - 1e-10);
        }
    }

    #[test]
    fn oversampling_must_fit() {
        let a = random_symmetric(6, 1);
        let opts = BackendOptions {
            oversampling: 3,
            ..BackendOptions::default()
        };
        assert!(rsvd(&a, 4, &opts).is_err());
    }
}
