//! Netpbm grayscale IO.
//!
//! Reads P2/P5 (8- or 16-bit) and P3/P6 (converted to gray by channel
//! averaging); samples are rescaled to `[0, 255]`. Writes 8-bit P5.

use std::fs;
use std::path::Path;

use ggd_core::GrayImage;

use crate::error::{GgdError, Result};

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| GgdError::io(path, e))?;
    parse_pgm(&bytes)
}

pub fn write_pgm(path: impl AsRef<Path>, image: &GrayImage) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(image)).map_err(|e| GgdError::io(path, e))
}

/// P5 bytes; pixels are rounded to the nearest integer and clamped.
pub fn encode_pgm(image: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.cols(), image.rows()).into_bytes();
    out.extend(image.pixels().iter().map(|&p| to_byte(p)));
    out
}

/// The image exactly as [`write_pgm`] would store it.
pub fn quantize(image: &GrayImage) -> GrayImage {
    let pixels = image.pixels().iter().map(|&p| f64::from(to_byte(p))).collect();
    GrayImage::new(image.rows(), image.cols(), pixels).expect("same shape")
}

fn to_byte(p: f64) -> u8 {
    p.round().clamp(0.0, 255.0) as u8
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space(&mut self) {
        while let Some(&b) = self.data.get(self.pos) {
            if b == b'#' {
                while self.data.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.data.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.data[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| GgdError::Format(format!("expected {what} at byte {start}")))
    }
}

pub fn parse_pgm(data: &[u8]) -> Result<GrayImage> {
    let magic = data.get(..2).ok_or_else(|| GgdError::Format("file too short".into()))?;
    let (channels, binary) = match magic {
        b"P2" => (1, false),
        b"P5" => (1, true),
        b"P3" => (3, false),
        b"P6" => (3, true),
        _ => return Err(GgdError::Format("unsupported magic number (expected P2, P3, P5 or P6)".into())),
    };
    let mut cur = Cursor { data, pos: 2 };
    let cols = cur.number("width")?;
    let rows = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if !(1..=65535).contains(&maxval) {
        return Err(GgdError::Format(format!("maxval {maxval} outside 1..=65535")));
    }
    if rows == 0 || cols == 0 {
        return Err(GgdError::Format("empty image".into()));
    }
    let count = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| GgdError::Format("image dimensions overflow".into()))?;

    let samples: Vec<usize> = if binary {
        // Exactly one whitespace byte separates the header from the raster.
        if !data.get(cur.pos).is_some_and(u8::is_ascii_whitespace) {
            return Err(GgdError::Format("missing whitespace after maxval".into()));
        }
        let raster = &data[cur.pos + 1..];
        let width = if maxval > 255 { 2 } else { 1 };
        if raster.len() < count * width {
            return Err(GgdError::Format(format!(
                "raster holds {} bytes, expected {}",
                raster.len(),
                count * width
            )));
        }
        if width == 1 {
            raster[..count].iter().map(|&b| b as usize).collect()
        } else {
            raster[..2 * count]
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]) as usize)
                .collect()
        }
    } else {
        (0..count).map(|_| cur.number("sample")).collect::<Result<_>>()?
    };
    if let Some(&bad) = samples.iter().find(|&&s| s > maxval) {
        return Err(GgdError::Format(format!("sample {bad} exceeds maxval {maxval}")));
    }

    let scale = 255.0 / maxval as f64;
    let pixels: Vec<f64> = if channels == 1 {
        samples.iter().map(|&s| s as f64 * scale).collect()
    } else {
        samples
            .chunks_exact(3)
            .map(|c| (c[0] + c[1] + c[2]) as f64 / 3.0 * scale)
            .collect()
    };
    Ok(GrayImage::new(rows, cols, pixels)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascii_with_comments() {
        let img = parse_pgm(b"P2\n# comment\n3 2\n# another\n255\n0 1 2\n253 254 255\n").unwrap();
        assert_eq!((img.rows(), img.cols()), (2, 3));
        assert_eq!(img.pixels(), &[0.0, 1.0, 2.0, 253.0, 254.0, 255.0]);
    }

    #[test]
    fn rescales_maxval() {
        let img = parse_pgm(b"P2 2 1 15 0 15").unwrap();
        assert_eq!(img.pixels(), &[0.0, 255.0]);
        let mut wide = b"P5 2 1 65535\n".to_vec();
        wide.extend([0xff, 0xff, 0x00, 0x00]);
        assert_eq!(parse_pgm(&wide).unwrap().pixels(), &[255.0, 0.0]);
    }

    #[test]
    fn color_is_averaged() {
        let mut data = b"P6\n1 1\n255\n".to_vec();
        data.extend([30, 60, 90]);
        assert_eq!(parse_pgm(&data).unwrap().pixels(), &[60.0]);
        assert_eq!(parse_pgm(b"P3 1 1 255 3 6 9").unwrap().pixels(), &[6.0]);
    }

    #[test]
    fn binary_round_trip() {
        let img = GrayImage::from_fn(4, 5, |i, j| (i * 50 + j * 7) as f64).unwrap();
        assert_eq!(parse_pgm(&encode_pgm(&img)).unwrap(), img);
    }

    #[test]
    fn encoding_rounds_and_clamps() {
        let img = GrayImage::new(1, 3, vec![-4.0, 12.5, 300.0]).unwrap();
        let bytes = encode_pgm(&img);
        assert_eq!(&bytes[bytes.len() - 3..], &[0, 13, 255]);
    }

    #[test]
    fn malformed_inputs() {
        for bad in [
            &b""[..],
            b"P7 1 1 255 0",
            b"P2 2 2 255 1 2 3",
            b"P2 1 1 10 11",
            b"P5 2 2 255\n\x01",
            b"P2 0 3 255",
            b"P2 1 1 0 0",
            b"P5 1 1 255\x00",
        ] {
            assert!(matches!(parse_pgm(bad), Err(GgdError::Format(_))), "{:?}", bad);
        }
    }
}
