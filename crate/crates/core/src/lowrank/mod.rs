//! Top-L singular triplets behind one contract.
//!
//! | backend | method |
//! |---|---|
//! | [`Backend::Exact`] | Householder tridiagonalization + implicit QL on the symmetric input |
//! | [`Backend::Mcla`] | Monte Carlo low-rank approximation from random column batches |
//! | [`Backend::Alb`] | augmented (restarted) Lanczos bidiagonalization, Ritz or harmonic Ritz |
//! | [`Backend::Pime`] | two-stage block Rayleigh-Ritz: on `AᵀA`, then on `[[0, Aᵀ], [A, 0]]` |
//! | [`Backend::Rsvd`] | Gaussian range finder + small dense SVD |
//!
//! Every backend returns its triplets sorted by singular value with the
//! sign convention of [`crate::linalg::normalize_signs`].

pub mod alb;
pub mod exact;
pub mod lanczos;
pub mod mcla;
pub mod pime;
pub mod rsvd;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{normalize_signs, Matrix};

pub use alb::{alb, alb_observed};
pub use exact::{exact_symmetric_svd, exact_symmetric_svd_owned};
pub use lanczos::{lanczos_bidiagonalization, LanczosFactorization};
pub use mcla::{mcla, mcla_traced};
pub use pime::pime;
pub use rsvd::rsvd;

#[derive(Debug, Clone, PartialEq)]
pub struct SingularTriplets {
    /// Non-increasing, non-negative.
    pub values: Vec<f64>,
    /// `u_l` as columns.
    pub left: Matrix,
    /// `v_l` as columns.
    pub right: Matrix,
    pub residuals: Option<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
}

impl SingularTriplets {
    /// Applies the sign convention and checks shapes.
    pub(crate) fn assemble(
        values: Vec<f64>,
        mut left: Matrix,
        mut right: Matrix,
        residuals: Option<Vec<f64>>,
        iterations: usize,
        converged: bool,
    ) -> Self {
        debug_assert_eq!(values.len(), left.cols());
        debug_assert_eq!(values.len(), right.cols());
        debug_assert!(values.windows(2).all(|w| w[0] >= w[1]));
        normalize_signs(&mut left, &mut right);
        Self {
            values,
            left,
            right,
            residuals,
            iterations,
            converged,
        }
    }

    pub fn rank(&self) -> usize {
        self.values.len()
    }

    /// `sum_l sigma_l u_l v_lᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.left.clone();
        for (j, &s) in self.values.iter().enumerate() {
            crate::linalg::scale(us.col_mut(j), s);
        }
        us.mul(&self.right.transpose())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Backend {
    Exact,
    Mcla,
    Alb,
    Pime,
    Rsvd,
}

impl Backend {
    pub const ALL: [Backend; 5] = [
        Backend::Exact,
        Backend::Mcla,
        Backend::Alb,
        Backend::Pime,
        Backend::Rsvd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Backend::Exact => "exact",
            Backend::Mcla => "mcla",
            Backend::Alb => "alb",
            Backend::Pime => "pime",
            Backend::Rsvd => "rsvd",
        }
    }

    pub fn is_randomized(self) -> bool {
        !matches!(self, Backend::Exact)
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Backend::ALL
            .into_iter()
            .find(|b| b.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::param(
                    "backend",
                    alloc::format!("unknown backend `{s}` (expected exact, mcla, alb, pime or rsvd)"),
                )
            })
    }
}

/// Tuning knobs shared by the backends. `None` fields take the per-backend
/// defaults listed on the accessor methods.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BackendOptions {
    /// MCLA `eta`, ALB and PIME `delta`.
    pub tolerance: Option<f64>,
    /// MCLA iterations, ALB restarts, PIME sweeps (both stages together).
    pub max_iterations: Option<usize>,
    pub seed: u64,
    /// ALB Krylov dimension `h`.
    pub lanczos_steps: Option<usize>,
    pub harmonic: bool,
    pub oversampling: usize,
    pub power_iterations: usize,
    /// MCLA columns drawn per iteration (`L'`).
    pub mcla_batch: Option<usize>,
}

impl BackendOptions {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    /// MCLA 1e-4, ALB 1e-8, PIME 1e-8.
    pub fn tolerance_for(&self, backend: Backend) -> f64 {
        self.tolerance.unwrap_or(match backend {
            Backend::Mcla => 1e-4,
            _ => 1e-8,
        })
    }

    /// MCLA 500, ALB 500, PIME 2000.
    pub fn max_iterations_for(&self, backend: Backend) -> usize {
        self.max_iterations.unwrap_or(match backend {
            Backend::Pime => 2000,
            _ => 500,
        })
    }

    /// `max(2L + 1, 20)`, capped at the smaller matrix dimension.
    pub fn lanczos_steps_for(&self, rank: usize, min_dim: usize) -> usize {
        self.lanczos_steps
            .unwrap_or_else(|| (2 * rank + 1).max(20))
            .min(min_dim)
    }

    /// `L' = L` unless set.
    pub fn mcla_batch_for(&self, rank: usize) -> usize {
        self.mcla_batch.unwrap_or(rank)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.tolerance {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::param("tolerance", "must lie in (0, 1)"));
            }
        }
        if self.max_iterations == Some(0) {
            return Err(Error::param("max_iterations", "must be positive"));
        }
        if self.mcla_batch == Some(0) {
            return Err(Error::param("mcla_batch", "must be positive"));
        }
        if self.lanczos_steps == Some(0) {
            return Err(Error::param("lanczos_steps", "must be positive"));
        }
        Ok(())
    }
}

pub(crate) fn check_rank(a: &Matrix, rank: usize) -> Result<()> {
    let min_dim = a.rows().min(a.cols());
    if rank == 0 || rank > min_dim {
        return Err(Error::param(
            "rank",
            alloc::format!("must lie in 1..={min_dim} for a {}x{} matrix, got {rank}", a.rows(), a.cols()),
        ));
    }
    Ok(())
}

pub(crate) fn check_symmetric(a: &Matrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: (a.rows(), a.rows()),
            found: a.shape(),
        });
    }
    let asym = a.asymmetry();
    if asym > 1e-10 * a.max_abs().max(f64::MIN_POSITIVE) {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    Ok(())
}

/// Top-`rank` triplets of `a` with the chosen backend.
pub fn compute(a: &Matrix, rank: usize, backend: Backend, opts: &BackendOptions) -> Result<SingularTriplets> {
    opts.validate()?;
    match backend {
        Backend::Exact => exact_symmetric_svd(a, rank),
        Backend::Mcla => mcla(a, rank, opts),
        Backend::Alb => alb(a, rank, opts),
        Backend::Pime => pime(a, rank, opts),
        Backend::Rsvd => rsvd(a, rank, opts),
    }
}

/// Like [`compute`] but lets the exact backend reuse `a` as workspace.
pub fn compute_owned(a: Matrix, rank: usize, backend: Backend, opts: &BackendOptions) -> Result<SingularTriplets> {
    match backend {
        Backend::Exact => {
            opts.validate()?;
            exact_symmetric_svd_owned(a, rank)
        }
        other => compute(&a, rank, other, opts),
    }
}

/// Human-readable one-line summary, used in CLI warnings.
pub fn describe(t: &SingularTriplets) -> String {
    alloc::format!(
        "rank {} after {} iterations ({})",
        t.rank(),
        t.iterations,
        if t.converged { "converged" } else { "not converged" }
    )
}
