//! Synthetic microtubule-like textures standing in for real micrographs.
//!
//! * `C0`: many thin, nearly straight filaments radiating from a centre.
//! * `C01`: fewer filaments, curved and grouped into small bundles.
//! * `C1`: a handful of thick, bright, strongly curled bundles.
//!
//! Each image gets a faint cell body, a 5-tap binomial blur and Gaussian
//! noise. Output depends only on `(class, seed, size)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use super::image::GrayImage;
use super::sample::{Class, Rotation, Sample};
use crate::error::{Error, Result};
use crate::rng::{Prng, Stream};

struct Canvas {
    size: usize,
    px: Vec<f64>,
}

impl Canvas {
    fn stamp(&mut self, x: f64, y: f64, radius: f64, value: f64) {
        let reach = radius + 1.0;
        let (x0, x1) = (
            (x - reach).max(0.0) as usize,
            ((x + reach) as usize).min(self.size - 1),
        );
        let (y0, y1) = (
            (y - reach).max(0.0) as usize,
            ((y + reach) as usize).min(self.size - 1),
        );
        if x < -reach || y < -reach {
            return;
        }
        for r in y0..=y1 {
            for c in x0..=x1 {
                let d = libm::hypot(c as f64 - x, r as f64 - y);
                let cover = (radius + 0.5 - d).clamp(0.0, 1.0);
                let p = &mut self.px[r * self.size + c];
                *p = p.max(value * cover);
            }
        }
    }

    fn blur(&mut self) {
        const TAPS: [f64; 5] = [1.0, 4.0, 6.0, 4.0, 1.0];
        let n = self.size;
        let at = |i: isize| i.clamp(0, n as isize - 1) as usize;
        let mut tmp = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                tmp[r * n + c] = TAPS
                    .iter()
                    .enumerate()
                    .map(|(k, w)| w * self.px[r * n + at(c as isize + k as isize - 2)])
                    .sum::<f64>()
                    / 16.0;
            }
        }
        for r in 0..n {
            for c in 0..n {
                self.px[r * n + c] = TAPS
                    .iter()
                    .enumerate()
                    .map(|(k, w)| w * tmp[at(r as isize + k as isize - 2) * n + c])
                    .sum::<f64>()
                    / 16.0;
            }
        }
    }
}

struct Motif {
    strands: (usize, usize),
    bundle: usize,
    bundle_spread: f64,
    radius: f64,
    intensity: (f64, f64),
    /// Per-step standard deviation of the heading change.
    wiggle: f64,
    /// Largest constant turning rate per step.
    curl: f64,
    length: (f64, f64),
}

fn motif(class: Class) -> Motif {
    match class {
        Class::C0 => Motif {
            strands: (32, 44),
            bundle: 1,
            bundle_spread: 0.0,
            radius: 0.6,
            intensity: (120.0, 160.0),
            wiggle: 0.01,
            curl: 0.002,
            length: (0.35, 0.48),
        },
        Class::C01 => Motif {
            strands: (8, 11),
            bundle: 3,
            bundle_spread: 0.06,
            radius: 0.9,
            intensity: (140.0, 180.0),
            wiggle: 0.05,
            curl: 0.02,
            length: (0.3, 0.45),
        },
        Class::C1 => Motif {
            strands: (5, 8),
            bundle: 1,
            bundle_spread: 0.0,
            radius: 2.0,
            intensity: (190.0, 235.0),
            wiggle: 0.12,
            curl: 0.05,
            length: (0.5, 0.8),
        },
    }
}

/// Generates one labelled synthetic cell image of `size x size` pixels.
pub fn synth_generate(class: Class, seed: u64, size: usize) -> Result<Sample> {
    if size < 64 {
        return Err(Error::ImageSize(format!(
            "synthetic images need at least 64 pixels, got {size}"
        )));
    }
    let mut rng = Prng::substream(seed, Stream::Synth, class.index() as u64);
    let s = size as f64;
    let m = motif(class);
    let mut canvas = Canvas {
        size,
        px: vec![0.0; size * size],
    };

    let cx = s / 2.0 + rng.normal(0.0, s * 0.05);
    let cy = s / 2.0 + rng.normal(0.0, s * 0.05);
    let body = s * (0.36 + 0.06 * rng.next_f64());
    for r in 0..size {
        for c in 0..size {
            let d = libm::hypot(c as f64 - cx, r as f64 - cy) / body;
            canvas.px[r * size + c] = 25.0 * (1.0 - d * d).max(0.0);
        }
    }

    let strands = rng.int_inclusive(m.strands.0, m.strands.1);
    for _ in 0..strands {
        let heading0 = rng.next_f64() * 2.0 * PI;
        let turn = rng.normal(0.0, m.curl);
        let len = s * (m.length.0 + (m.length.1 - m.length.0) * rng.next_f64());
        let value = m.intensity.0 + (m.intensity.1 - m.intensity.0) * rng.next_f64();
        for b in 0..m.bundle {
            let offset = (b as f64 - (m.bundle as f64 - 1.0) / 2.0) * m.bundle_spread;
            let mut heading = heading0 + offset;
            let start = 2.0 + rng.next_f64() * 3.0;
            let (mut x, mut y) = (
                cx + start * libm::cos(heading),
                cy + start * libm::sin(heading),
            );
            let mut travelled = 0.0;
            while travelled < len {
                canvas.stamp(x, y, m.radius, value);
                heading += turn + rng.normal(0.0, m.wiggle);
                x += 0.7 * libm::cos(heading);
                y += 0.7 * libm::sin(heading);
                travelled += 0.7;
                if x < -3.0 || y < -3.0 || x > s + 3.0 || y > s + 3.0 {
                    break;
                }
            }
        }
    }

    canvas.blur();
    let pixels = canvas
        .px
        .iter()
        .map(|v| libm::round(v + 12.0 + rng.normal(0.0, 6.0)).clamp(0.0, 255.0) as u8)
        .collect();
    Ok(Sample {
        image: GrayImage::new(size, size, pixels)?,
        label: class,
        group_id: format!("synth-{}-{seed}", class.label()),
        rotation: Rotation::R0,
        sharpened: false,
    })
}
