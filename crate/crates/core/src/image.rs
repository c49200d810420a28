//! Grayscale image container.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Row-major grid of real intensities, nominally in `[0, 255]`.
///
/// Pixels are kept as `f64` so intermediate results (noisy or merged images)
/// keep sub-integer precision; quantization happens when writing files.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    rows: usize,
    cols: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    /// Fails if a dimension is zero, the buffer length is wrong or a pixel
    /// is not finite.
    pub fn new(rows: usize, cols: usize, pixels: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if pixels.len() != rows * cols {
            return Err(Error::InvalidImage(format!(
                "{rows}x{cols} image needs {} pixels, got {}",
                rows * cols,
                pixels.len()
            )));
        }
        if let Some(k) = pixels.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidImage(format!(
                "pixel {k} is not finite ({})",
                pixels[k]
            )));
        }
        Ok(Self { rows, cols, pixels })
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Result<Self> {
        Self::new(rows, cols, alloc::vec![value; rows * cols])
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut pixels = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                pixels.push(f(i, j));
            }
        }
        Self::new(rows, cols, pixels)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    /// Always false; images have at least one pixel.
    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pixels[i * self.cols + j]
    }

    pub fn same_shape(&self, other: &GrayImage) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: (self.rows, self.cols),
                found: (other.rows, other.cols),
            });
        }
        Ok(())
    }

    /// Every pixel mapped to `min(255, max(0, p))`.
    pub fn clamp_to_range(&self) -> GrayImage {
        GrayImage {
            rows: self.rows,
            cols: self.cols,
            pixels: self.pixels.iter().map(|p| p.clamp(0.0, 255.0)).collect(),
        }
    }

    /// Pixel-wise mean of three equally sized channels.
    pub fn from_rgb_average(r: &GrayImage, g: &GrayImage, b: &GrayImage) -> Result<GrayImage> {
        r.same_shape(g)?;
        r.same_shape(b)?;
        let pixels = r
            .pixels
            .iter()
            .zip(&g.pixels)
            .zip(&b.pixels)
            .map(|((x, y), z)| (x + y + z) / 3.0)
            .collect();
        Ok(GrayImage {
            rows: r.rows,
            cols: r.cols,
            pixels,
        })
    }

    /// The `height x width` window whose top-left corner is `(top, left)`.
    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<GrayImage> {
        if height == 0 || width == 0 || top + height > self.rows || left + width > self.cols {
            return Err(Error::InvalidImage(format!(
                "crop {height}x{width} at ({top}, {left}) does not fit in a {}x{} image",
                self.rows, self.cols
            )));
        }
        GrayImage::from_fn(height, width, |i, j| self.get(top + i, left + j))
    }

    /// Centered `height x width` crop (offsets rounded down).
    pub fn crop_center(&self, height: usize, width: usize) -> Result<GrayImage> {
        if height > self.rows || width > self.cols {
            return Err(Error::InvalidImage(format!(
                "cannot crop {height}x{width} from a {}x{} image",
                self.rows, self.cols
            )));
        }
        self.crop((self.rows - height) / 2, (self.cols - width) / 2, height, width)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_buffers() {
        assert!(GrayImage::new(0, 3, vec![]).is_err());
        assert!(GrayImage::new(2, 2, vec![1.0; 3]).is_err());
        assert!(GrayImage::new(1, 2, vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn clamp_examples() {
        let img = GrayImage::new(1, 4, vec![-5.0, 0.0, 100.0, 300.0]).unwrap();
        assert_eq!(img.clamp_to_range().pixels(), &[0.0, 0.0, 100.0, 255.0]);
        let inside = GrayImage::new(1, 3, vec![0.0, 12.5, 255.0]).unwrap();
        assert_eq!(inside.clamp_to_range(), inside);
    }

    #[test]
    fn rgb_average_examples() {
        let r = GrayImage::new(1, 1, vec![0.0]).unwrap();
        let g = GrayImage::new(1, 1, vec![255.0]).unwrap();
        assert_eq!(GrayImage::from_rgb_average(&r, &g, &r).unwrap().pixels(), &[85.0]);
        let x = GrayImage::new(1, 2, vec![7.0, 9.5]).unwrap();
        assert_eq!(GrayImage::from_rgb_average(&x, &x, &x).unwrap(), x);
        let wrong = GrayImage::new(2, 1, vec![0.0, 0.0]).unwrap();
        assert!(GrayImage::from_rgb_average(&x, &x, &wrong).is_err());
    }

    #[test]
    fn center_crop() {
        let img = GrayImage::from_fn(5, 6, |i, j| (10 * i + j) as f64).unwrap();
        let c = img.crop_center(3, 2).unwrap();
        assert_eq!(c.pixels(), &[12.0, 13.0, 22.0, 23.0, 32.0, 33.0]);
        assert!(img.crop_center(6, 2).is_err());
    }

    fn image_strategy() -> impl Strategy<Value = GrayImage> {
        (1usize..6, 1usize..6).prop_flat_map(|(r, c)| {
            proptest::collection::vec(-100.0f64..400.0, r * c)
                .prop_map(move |px| GrayImage::new(r, c, px).unwrap())
        })
    }

    proptest! {
        #[test]
        fn clamp_idempotent_and_monotone(img in image_strategy(), shift in 0.0f64..50.0) {
            let once = img.clamp_to_range();
            prop_assert_eq!(once.clamp_to_range(), once.clone());
            prop_assert!(once.pixels().iter().all(|p| (0.0..=255.0).contains(p)));
            let raised = GrayImage::new(img.rows(), img.cols(),
                img.pixels().iter().map(|p| p + shift).collect()).unwrap();
            for (a, b) in once.pixels().iter().zip(raised.clamp_to_range().pixels()) {
                prop_assert!(a <= b);
            }
        }

        #[test]
        fn rgb_average_matches_per_pixel_mean(
            (r, g, b) in (1usize..5, 1usize..5).prop_flat_map(|(h, w)| {
                let ch = move || proptest::collection::vec(0.0f64..255.0, h * w)
                    .prop_map(move |px| GrayImage::new(h, w, px).unwrap());
                (ch(), ch(), ch())
            })
        ) {
            let avg = GrayImage::from_rgb_average(&r, &g, &b).unwrap();
            for i in 0..r.rows() {
                for j in 0..r.cols() {
                    let want = (r.get(i, j) + g.get(i, j) + b.get(i, j)) / 3.0;
                    prop_assert!((avg.get(i, j) - want).abs() < 1e-12);
                }
            }
            // In-range channels: averaging commutes with clamping.
            let clamped = GrayImage::from_rgb_average(
                &r.clamp_to_range(), &g.clamp_to_range(), &b.clamp_to_range()).unwrap();
            prop_assert_eq!(clamped, avg.clamp_to_range());
        }
    }
}
