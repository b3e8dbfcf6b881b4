//! Grayscale image container and on-disk formats.
//!
//! Frames are exchanged as binary PGM (P5, 8-bit). Internal real-valued
//! images can also be dumped to a raw little-endian format (`u32` width,
//! `u32` height, then `f64` values row-major) for debugging.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{CoreError, Result};

/// A 2-D nonnegative intensity field stored row-major.
///
/// Values ingested from 8-bit files live on the 0.0–255.0 scale but are
/// kept as `f64` so downstream likelihoods need no quantization handling.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl GrayImage {
    /// Builds an image from row-major values, validating shape and sign.
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(CoreError::invalid(
                "image dimensions",
                format!("{width}x{height}; both must be >= 1"),
            ));
        }
        if values.len() != width * height {
            return Err(CoreError::invalid(
                "image buffer",
                format!(
                    "expected {} values for {width}x{height}, got {}",
                    width * height,
                    values.len()
                ),
            ));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(CoreError::invalid(
                "image intensity",
                format!("{v}; intensities must be finite and >= 0"),
            ));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    /// Constructor for buffers whose validity is guaranteed by
    /// construction (morphology outputs of valid inputs, etc.); skips the
    /// per-pixel scan.
    pub(crate) fn from_raw_unchecked(width: usize, height: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), width * height);
        Self {
            width,
            height,
            values,
        }
    }

    /// All-zero image.
    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![0.0; width * height])
    }

    /// Constant-intensity image.
    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of pixels.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        debug_assert!(x < self.width && y < self.height);
        self.values[y * self.width + x]
    }

    /// Consumes the image, returning the raw buffer.
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Rounds to the 8-bit grid and clamps to [0, 255], i.e. exactly what a
    /// PGM round trip would do to the values.
    pub fn quantize_u8(&self) -> Vec<u8> {
        self.values
            .iter()
            .map(|&v| v.round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    /// Writes binary PGM (P5, maxval 255). Values are rounded and clamped.
    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| CoreError::io(path, e))?;
        let mut w = BufWriter::new(file);
        let header = format!("P5\n{} {}\n255\n", self.width, self.height);
        w.write_all(header.as_bytes())
            .and_then(|_| w.write_all(&self.quantize_u8()))
            .and_then(|_| w.flush())
            .map_err(|e| CoreError::io(path, e))
    }

    /// Reads binary PGM (P5, 8-bit only).
    pub fn read_pgm(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| CoreError::io(path, e))?;
        let mut bytes = Vec::new();
        BufReader::new(file)
            .read_to_end(&mut bytes)
            .map_err(|e| CoreError::io(path, e))?;
        let fmt = |reason: &str| CoreError::Format {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        };

        let mut pos = 0usize;
        let mut token = |bytes: &[u8]| -> Option<String> {
            // Skip whitespace and `#` comments between header tokens.
            loop {
                while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                    pos += 1;
                }
                if pos < bytes.len() && bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                } else {
                    break;
                }
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos > start {
                Some(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
            } else {
                None
            }
        };

        let magic = token(&bytes).ok_or_else(|| fmt("missing magic"))?;
        if magic != "P5" {
            return Err(fmt(&format!("unsupported magic `{magic}`, want P5")));
        }
        let width: usize = token(&bytes)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| fmt("bad width"))?;
        let height: usize = token(&bytes)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| fmt("bad height"))?;
        let maxval: usize = token(&bytes)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| fmt("bad maxval"))?;
        if maxval != 255 {
            return Err(fmt(&format!("maxval {maxval} unsupported, want 255")));
        }
        // Exactly one whitespace byte separates the header from the raster.
        pos += 1;
        let need = width.checked_mul(height).ok_or_else(|| fmt("size overflow"))?;
        if bytes.len() < pos + need {
            return Err(fmt(&format!(
                "raster truncated: need {need} bytes, have {}",
                bytes.len().saturating_sub(pos)
            )));
        }
        let values = bytes[pos..pos + need].iter().map(|&b| b as f64).collect();
        GrayImage::new(width, height, values)
    }

    /// Writes the raw debug format: `u32` width, `u32` height, `f64`
    /// values, all little-endian.
    pub fn write_raw(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| CoreError::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut run = || -> std::io::Result<()> {
            w.write_all(&(self.width as u32).to_le_bytes())?;
            w.write_all(&(self.height as u32).to_le_bytes())?;
            for v in &self.values {
                w.write_all(&v.to_le_bytes())?;
            }
            w.flush()
        };
        run().map_err(|e| CoreError::io(path, e))
    }

    /// Reads the raw debug format written by [`GrayImage::write_raw`].
    pub fn read_raw(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| CoreError::io(path, e))?;
        let mut r = BufReader::new(file);
        let mut u32_buf = [0u8; 4];
        let mut f64_buf = [0u8; 8];
        let mut run = || -> std::io::Result<(usize, usize, Vec<f64>)> {
            r.read_exact(&mut u32_buf)?;
            let width = u32::from_le_bytes(u32_buf) as usize;
            r.read_exact(&mut u32_buf)?;
            let height = u32::from_le_bytes(u32_buf) as usize;
            let mut values = Vec::with_capacity(width * height);
            for _ in 0..width * height {
                r.read_exact(&mut f64_buf)?;
                values.push(f64::from_le_bytes(f64_buf));
            }
            Ok((width, height, values))
        };
        let (width, height, values) = run().map_err(|e| CoreError::io(path, e))?;
        GrayImage::new(width, height, values)
    }
}
