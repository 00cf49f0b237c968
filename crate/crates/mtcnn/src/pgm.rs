//! Binary portable graymap (`P5`) decoding and encoding.

use std::fs;
use std::path::Path;

use mtcnn_core::data::{to_8bit, Gray16Image, GrayImage};

use crate::error::{Error, PgmError, Result};

/// A decoded graymap; 16-bit files keep their full range until
/// [`Pgm::into_8bit`].
#[derive(Debug, Clone, PartialEq)]
pub enum Pgm {
    Gray8(GrayImage),
    Gray16(Gray16Image),
}

impl Pgm {
    pub fn is_16bit(&self) -> bool {
        matches!(self, Pgm::Gray16(_))
    }

    pub fn into_8bit(self) -> Result<GrayImage> {
        match self {
            Pgm::Gray8(img) => Ok(img),
            Pgm::Gray16(raw) => Ok(to_8bit(&raw)?),
        }
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize, PgmError> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(PgmError::CorruptHeader(format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| PgmError::CorruptHeader(format!("{what} out of range")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Pgm, PgmError> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(PgmError::BadMagic);
    }
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(PgmError::CorruptHeader(format!(
            "empty image {width}x{height}"
        )));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(PgmError::CorruptHeader(format!(
            "maxval {maxval} not in 1..=65535"
        )));
    }
    match bytes.get(h.pos) {
        Some(b) if b.is_ascii_whitespace() => h.pos += 1,
        _ => return Err(PgmError::CorruptHeader("no whitespace after maxval".into())),
    }
    let data = &bytes[h.pos..];
    let n = width
        .checked_mul(height)
        .ok_or_else(|| PgmError::CorruptHeader("dimensions overflow".into()))?;
    let wide = maxval > 255;
    let expected = if wide { n * 2 } else { n };
    if data.len() < expected {
        return Err(PgmError::Truncated {
            expected,
            found: data.len(),
        });
    }
    let corrupt = |e: mtcnn_core::Error| PgmError::CorruptHeader(e.to_string());
    if wide {
        let pixels = data[..expected]
            .chunks_exact(2)
            .map(|p| u16::from_be_bytes([p[0], p[1]]))
            .collect();
        Ok(Pgm::Gray16(Gray16Image {
            width,
            height,
            pixels,
        }))
    } else {
        Ok(Pgm::Gray8(
            GrayImage::new(width, height, data[..n].to_vec()).map_err(corrupt)?,
        ))
    }
}

pub fn encode(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.pixels());
    out
}

pub fn encode16(img: &Gray16Image) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", img.width, img.height).into_bytes();
    for p in &img.pixels {
        out.extend_from_slice(&p.to_be_bytes());
    }
    out
}

/// Reads a graymap and reduces 16-bit files to 8 bits.
pub fn load_image(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let pgm = decode(&bytes).map_err(|source| Error::Pgm {
        path: path.into(),
        source,
    })?;
    pgm.into_8bit()
}

pub fn save_image(path: &Path, img: &GrayImage) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, encode(img)).map_err(|e| Error::io(path, e))
}
