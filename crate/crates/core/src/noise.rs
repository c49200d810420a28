//! Additive Gaussian noise and relative-noise calibration.

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::rng::Stream;

/// Upper end of the sigma bracket searched by [`calibrate_sigma`].
pub const MAX_SIGMA: f64 = 512.0;
const BISECTION_STEPS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub mu: f64,
    pub seed: u64,
}

impl NoiseSpec {
    /// Zero-mean noise.
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::param("sigma", "must be finite and non-negative"));
        }
        Ok(Self { sigma, mu: 0.0, seed })
    }
}

/// `clamp(image + N)` with `N` i.i.d. normal, drawn in row-major order from
/// a stream seeded by `spec.seed`.
pub fn contaminate(image: &GrayImage, spec: &NoiseSpec) -> GrayImage {
    if spec.sigma == 0.0 && spec.mu == 0.0 {
        return image.clone();
    }
    let mut stream = Stream::new(spec.seed);
    let pixels = image
        .pixels()
        .iter()
        .map(|p| (p + spec.mu + spec.sigma * stream.gaussian()).clamp(0.0, 255.0))
        .collect();
    GrayImage::new(image.rows(), image.cols(), pixels).expect("noisy pixels stay finite")
}

/// `100 * ||noisy - reference||_F / ||reference||_F`.
pub fn relative_noise(reference: &GrayImage, noisy: &GrayImage) -> Result<f64> {
    Ok(100.0 * crate::metrics::re(reference, noisy)?)
}

/// Bisection on sigma over `[0, MAX_SIGMA]` for the sigma whose (clamped)
/// relative noise is within `tolerance` of `target_zeta`. Every evaluation
/// uses the same `seed`, so the objective is deterministic.
pub fn calibrate_sigma(
    image: &GrayImage,
    target_zeta: f64,
    tolerance: f64,
    seed: u64,
) -> Result<NoiseSpec> {
    if !(target_zeta > 0.0 && target_zeta < 100.0) {
        return Err(Error::param("zeta", "target must lie strictly between 0 and 100"));
    }
    if !(tolerance > 0.0 && tolerance.is_finite()) {
        return Err(Error::param("tolerance", "must be positive"));
    }
    let zeta_at = |sigma: f64| -> Result<f64> {
        let spec = NoiseSpec::new(sigma, seed)?;
        relative_noise(image, &contaminate(image, &spec))
    };

    let (mut lo, mut hi) = (0.0, MAX_SIGMA);
    let (mut z_lo, mut z_hi) = (zeta_at(lo)?, zeta_at(hi)?);
    let unreachable = |reached: f64| Error::CalibrationFailed {
        target: target_zeta,
        reached,
        max_sigma: MAX_SIGMA,
    };
    if z_hi < target_zeta - tolerance {
        return Err(unreachable(z_hi));
    }
    let mut best = (f64::INFINITY, hi);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let z = zeta_at(mid)?;
        if z < z_lo || z > z_hi {
            // The objective must be monotone on the bracket.
            return Err(unreachable(z));
        }
        let miss = (z - target_zeta).abs();
        if miss < best.0 {
            best = (miss, mid);
        }
        if miss <= tolerance {
            return NoiseSpec::new(mid, seed);
        }
        if z < target_zeta {
            lo = mid;
            z_lo = z;
        } else {
            hi = mid;
            z_hi = z;
        }
    }
    Err(unreachable(zeta_at(best.1)?))
}
