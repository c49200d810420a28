//! Reconstruction quality: relative error, PSNR and global SSIM.

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::linalg::{dot, norm2};

pub const PEAK: f64 = 255.0;
pub const C1: f64 = (0.01 * PEAK) * (0.01 * PEAK);
pub const C2: f64 = (0.03 * PEAK) * (0.03 * PEAK);
pub const C3: f64 = C2 / 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub re: f64,
    /// `f64::INFINITY` for identical images.
    pub psnr: f64,
    pub ssim: f64,
}

impl MetricReport {
    pub fn compute(reference: &GrayImage, test: &GrayImage) -> Result<Self> {
        Ok(Self {
            re: re(reference, test)?,
            psnr: psnr(reference, test)?,
            ssim: ssim(reference, test)?,
        })
    }
}

fn difference(reference: &GrayImage, test: &GrayImage) -> Result<alloc::vec::Vec<f64>> {
    reference.same_shape(test)?;
    Ok(reference
        .pixels()
        .iter()
        .zip(test.pixels())
        .map(|(a, b)| a - b)
        .collect())
}

/// `||reference - test||_F / ||reference||_F`.
pub fn re(reference: &GrayImage, test: &GrayImage) -> Result<f64> {
    let diff = difference(reference, test)?;
    let denom = norm2(reference.pixels());
    if denom == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok(norm2(&diff) / denom)
}

/// `20 log10(255 / RMSE)`; `+inf` when the images are identical.
pub fn psnr(reference: &GrayImage, test: &GrayImage) -> Result<f64> {
    let diff = difference(reference, test)?;
    let rmse = norm2(&diff) / libm::sqrt(diff.len() as f64);
    if rmse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * libm::log10(PEAK / rmse))
}

/// Single-window SSIM over the whole image: luminance, contrast and
/// structure factors from population (divisor N) moments.
pub fn ssim(reference: &GrayImage, test: &GrayImage) -> Result<f64> {
    reference.same_shape(test)?;
    let n = reference.len();
    if n < 2 {
        return Err(Error::InvalidImage("SSIM needs at least two pixels".into()));
    }
    let x = reference.pixels();
    let y = test.pixels();
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let xc: alloc::vec::Vec<f64> = x.iter().map(|v| v - mx).collect();
    let yc: alloc::vec::Vec<f64> = y.iter().map(|v| v - my).collect();
    let vx = dot(&xc, &xc) / nf;
    let vy = dot(&yc, &yc) / nf;
    let cov = dot(&xc, &yc) / nf;
    let (sx, sy) = (libm::sqrt(vx), libm::sqrt(vy));

    let luminance = (2.0 * mx * my + C1) / (mx * mx + my * my + C1);
    let contrast = (2.0 * sx * sy + C2) / (vx + vy + C2);
    let structure = (cov + C3) / (sx * sy + C3);
    Ok(luminance * contrast * structure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn img(rows: usize, cols: usize, px: Vec<f64>) -> GrayImage {
        GrayImage::new(rows, cols, px).unwrap()
    }

    fn pattern() -> GrayImage {
        GrayImage::from_fn(6, 7, |i, j| ((i * 37 + j * 91) % 200) as f64 + 20.0).unwrap()
    }

    #[test]
    fn trivial_cases() {
        let a = pattern();
        assert_eq!(re(&a, &a).unwrap(), 0.0);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
        let zero = GrayImage::filled(6, 7, 0.0).unwrap();
        assert_eq!(re(&a, &zero).unwrap(), 1.0);

        let black = GrayImage::filled(4, 4, 0.0).unwrap();
        let white = GrayImage::filled(4, 4, 255.0).unwrap();
        assert_eq!(psnr(&black, &white).unwrap(), 0.0);
        let shifted = GrayImage::filled(4, 4, 25.5).unwrap();
        assert!((psnr(&black, &shifted).unwrap() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let a = pattern();
        let b = GrayImage::filled(7, 6, 1.0).unwrap();
        assert!(matches!(re(&a, &b), Err(Error::DimensionMismatch { .. })));
        assert!(psnr(&a, &b).is_err());
        assert!(ssim(&a, &b).is_err());
        let zero = GrayImage::filled(6, 7, 0.0).unwrap();
        assert_eq!(re(&zero, &a), Err(Error::ZeroReference));
        let single = GrayImage::filled(1, 1, 3.0).unwrap();
        assert!(ssim(&single, &single).is_err());
    }

    #[test]
    fn anticorrelated_pair_has_negative_ssim() {
        // x and 255 - x share the same variance; covariance is -var.
        let x = img(2, 4, alloc::vec![100.0, 140.0, 120.0, 160.0, 80.0, 130.0, 110.0, 150.0]);
        let y = img(2, 4, x.pixels().iter().map(|v| 255.0 - v).collect());
        let s = ssim(&x, &y).unwrap();
        let mx = x.pixels().iter().sum::<f64>() / 8.0;
        let my = 255.0 - mx;
        let var = x.pixels().iter().map(|v| (v - mx) * (v - mx)).sum::<f64>() / 8.0;
        let want = (2.0 * mx * my + C1) / (mx * mx + my * my + C1)
            * ((2.0 * var + C2) / (2.0 * var + C2))
            * ((-var + C3) / (var + C3));
        assert!(s < 0.0);
        assert!((s - want).abs() < 1e-14);
    }

    /// Single-pass moment accumulation, independent of the two-pass code.
    fn ssim_one_pass(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (a, b) in x.iter().zip(y) {
            sx += a;
            sy += b;
            sxx += a * a;
            syy += b * b;
            sxy += a * b;
        }
        let (mx, my) = (sx / n, sy / n);
        let vx = sxx / n - mx * mx;
        let vy = syy / n - my * my;
        let cov = sxy / n - mx * my;
        let (dx, dy) = (vx.max(0.0).sqrt(), vy.max(0.0).sqrt());
        (2.0 * mx * my + C1) / (mx * mx + my * my + C1)
            * (2.0 * dx * dy + C2)
            / (vx + vy + C2)
            * (cov + C3)
            / (dx * dy + C3)
    }

    fn pair() -> impl Strategy<Value = (GrayImage, GrayImage)> {
        (2usize..9, 2usize..9).prop_flat_map(|(r, c)| {
            let px = move || proptest::collection::vec(0.0f64..255.0, r * c);
            (px(), px()).prop_map(move |(a, b)| (img(r, c, a), img(r, c, b)))
        })
    }

    proptest! {
        #[test]
        fn ssim_matches_one_pass_oracle((a, b) in pair()) {
            let s = ssim(&a, &b).unwrap();
            prop_assert!((s - ssim_one_pass(a.pixels(), b.pixels())).abs() < 1e-10);
            prop_assert!((-1.0..=1.0).contains(&s));
        }

        #[test]
        fn re_equals_relative_noise_fraction((a, b) in pair()) {
            prop_assume!(norm2(a.pixels()) > 0.0);
            let r = re(&a, &b).unwrap();
            let z = crate::noise::relative_noise(&a, &b).unwrap();
            prop_assert!((r - z / 100.0).abs() <= 1e-15 * (1.0 + r));
        }

        #[test]
        fn error_sign_does_not_matter((a, b) in pair()) {
            prop_assume!(norm2(a.pixels()) > 0.0);
            let mirrored = img(a.rows(), a.cols(),
                a.pixels().iter().zip(b.pixels()).map(|(x, y)| 2.0 * x - y).collect());
            let (r1, r2) = (re(&a, &b).unwrap(), re(&a, &mirrored).unwrap());
            prop_assert!((r1 - r2).abs() <= 1e-12 * (1.0 + r1));
            let (p1, p2) = (psnr(&a, &b).unwrap(), psnr(&a, &mirrored).unwrap());
            prop_assert!(p1 == p2 || (p1 - p2).abs() <= 1e-9);
        }

        #[test]
        fn re_and_psnr_move_inversely((a, b) in pair(), t in 0.05f64..0.95) {
            prop_assume!(norm2(a.pixels()) > 0.0 && a != b);
            // Shrinking the error by t lowers RE and raises PSNR.
            let closer = img(a.rows(), a.cols(),
                a.pixels().iter().zip(b.pixels()).map(|(x, y)| x + t * (y - x)).collect());
            prop_assert!(re(&a, &closer).unwrap() < re(&a, &b).unwrap());
            prop_assert!(psnr(&a, &closer).unwrap() > psnr(&a, &b).unwrap());
        }

        #[test]
        fn ssim_of_self_is_one((a, _) in pair()) {
            prop_assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
