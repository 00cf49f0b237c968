//! 8-bit grayscale images and the per-image transforms.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Row-major 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

/// Row-major grayscale image with up to 16 bits per pixel, as produced by
/// scientific cameras.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gray16Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u16>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(Error::ImageSize(format!(
                "{width}x{height} image with {} pixels",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: u8) {
        self.pixels[row * self.width + col] = v;
    }

    pub fn is_square(&self) -> bool {
        self.width == self.height
    }

    /// `[height, width, 1]` tensor with values scaled to `[0, 1]`.
    pub fn to_tensor<T: Scalar>(&self) -> Tensor<T> {
        let scale = T::from_f64(1.0 / 255.0);
        let data = self
            .pixels
            .iter()
            .map(|&p| T::from_f64(p as f64) * scale)
            .collect();
        Tensor::from_vec(&[self.height, self.width, 1], data).expect("non-empty image")
    }
}

fn round_half_up(v: f64) -> f64 {
    libm::floor(v + 0.5)
}

/// Linear min-max rescale of a high bit-depth image to `[0, 255]`, rounding
/// half up. A constant image maps to all zeros.
pub fn to_8bit(raw: &Gray16Image) -> Result<GrayImage> {
    if raw.pixels.is_empty() {
        return Err(Error::ImageSize("empty image".into()));
    }
    let lo = *raw.pixels.iter().min().expect("non-empty") as u64;
    let hi = *raw.pixels.iter().max().expect("non-empty") as u64;
    let range = hi - lo;
    let pixels = raw
        .pixels
        .iter()
        .map(|&v| {
            if range == 0 {
                0
            } else {
                // floor((v - lo) * 255 / range + 1/2) in exact integer arithmetic
                ((2 * (v as u64 - lo) * 255 + range) / (2 * range)) as u8
            }
        })
        .collect();
    GrayImage::new(raw.width, raw.height, pixels)
}

/// Zero-pads to a centred square (any odd padding pixel goes right/bottom),
/// then resamples bilinearly to `target x target` using pixel-centre
/// alignment. An image already at `target x target` is returned unchanged.
pub fn resize_square(img: &GrayImage, target: usize) -> Result<GrayImage> {
    if target == 0 {
        return Err(Error::ImageSize("target size must be positive".into()));
    }
    let side = img.width.max(img.height);
    let padded = if img.is_square() {
        img.clone()
    } else {
        let (left, top) = ((side - img.width) / 2, (side - img.height) / 2);
        let mut out = GrayImage::filled(side, side, 0)?;
        for r in 0..img.height {
            let dst = (r + top) * side + left;
            out.pixels[dst..dst + img.width]
                .copy_from_slice(&img.pixels[r * img.width..(r + 1) * img.width]);
        }
        out
    };
    if side == target {
        return Ok(padded);
    }
    let scale = side as f64 / target as f64;
    let max = (side - 1) as f64;
    let coord = |d: usize| -> (usize, usize, f64) {
        let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, max);
        let i0 = libm::floor(s) as usize;
        let i1 = (i0 + 1).min(side - 1);
        (i0, i1, s - i0 as f64)
    };
    let cols: Vec<_> = (0..target).map(coord).collect();
    let mut out = vec![0u8; target * target];
    for r in 0..target {
        let (r0, r1, fr) = coord(r);
        for (c, &(c0, c1, fc)) in cols.iter().enumerate() {
            let p = |rr: usize, cc: usize| padded.pixels[rr * side + cc] as f64;
            let top = p(r0, c0) * (1.0 - fc) + p(r0, c1) * fc;
            let bottom = p(r1, c0) * (1.0 - fc) + p(r1, c1) * fc;
            let v = top * (1.0 - fr) + bottom * fr;
            out[r * target + c] = round_half_up(v).clamp(0.0, 255.0) as u8;
        }
    }
    GrayImage::new(target, target, out)
}

/// 3x3 sharpening filter: centre 32, neighbours -2, divisor 16, offset 0.
/// Results are rounded half up and clamped; the one-pixel border is copied.
pub fn sharpen(img: &GrayImage) -> Result<GrayImage> {
    const CENTER: i32 = 32;
    const NEIGHBOR: i32 = -2;
    const DIVISOR: i32 = 16;
    if img.width < 3 || img.height < 3 {
        return Err(Error::ImageSize(format!(
            "sharpening needs at least 3x3, got {}x{}",
            img.width, img.height
        )));
    }
    let mut out = img.clone();
    let w = img.width;
    for r in 1..img.height - 1 {
        for c in 1..w - 1 {
            let mut acc = 0i32;
            for dr in 0..3 {
                for dc in 0..3 {
                    let v = img.pixels[(r + dr - 1) * w + (c + dc - 1)] as i32;
                    acc += if dr == 1 && dc == 1 {
                        CENTER * v
                    } else {
                        NEIGHBOR * v
                    };
                }
            }
            // floor(acc / 16 + 1/2)
            let v = (acc + DIVISOR / 2).div_euclid(DIVISOR);
            out.pixels[r * w + c] = v.clamp(0, 255) as u8;
        }
    }
    Ok(out)
}

/// Lossless clockwise rotation by `quarter_turns * 90` degrees; each turn maps
/// `out[r][c] = in[n - 1 - c][r]`.
pub fn rotate90(img: &GrayImage, quarter_turns: u8) -> Result<GrayImage> {
    if !img.is_square() {
        return Err(Error::ImageSize(format!(
            "rotation needs a square image, got {}x{}",
            img.width, img.height
        )));
    }
    let n = img.width;
    let mut cur = img.clone();
    for _ in 0..quarter_turns % 4 {
        let mut next = vec![0u8; n * n];
        for r in 0..n {
            for c in 0..n {
                next[r * n + c] = cur.pixels[(n - 1 - c) * n + r];
            }
        }
        cur.pixels = next;
    }
    Ok(cur)
}
