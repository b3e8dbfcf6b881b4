//! Grayscale morphology: dilation, erosion, and the bottom-hat transform
//! that feeds the temporal filter's measurement model.
//!
//! Neighborhoods are clipped to the image — no padding value is invented —
//! so the bottom-hat output is nonnegative everywhere and closing stays
//! idempotent, including at the borders.

use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::image::GrayImage;

/// A set of integer pixel displacements containing the origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuringElement {
    offsets: Vec<(i32, i32)>,
}

impl StructuringElement {
    /// Builds an element from offsets. Duplicates are removed; the origin
    /// must be present.
    pub fn from_offsets(offsets: impl IntoIterator<Item = (i32, i32)>) -> Result<Self> {
        let mut offsets: Vec<(i32, i32)> = offsets.into_iter().collect();
        offsets.sort_unstable();
        offsets.dedup();
        if offsets.is_empty() {
            return Err(CoreError::invalid("structuring element", "no offsets"));
        }
        if !offsets.contains(&(0, 0)) {
            return Err(CoreError::invalid(
                "structuring element",
                "must contain the origin (0, 0)",
            ));
        }
        Ok(Self { offsets })
    }

    /// Centered square of odd side length (e.g. 3 for the default 3x3).
    pub fn square(side: u32) -> Result<Self> {
        if side == 0 || side % 2 == 0 {
            return Err(CoreError::invalid(
                "structuring element side",
                format!("{side}; must be odd and >= 1"),
            ));
        }
        let r = (side / 2) as i32;
        Self::from_offsets((-r..=r).flat_map(|dy| (-r..=r).map(move |dx| (dx, dy))))
    }

    pub fn offsets(&self) -> &[(i32, i32)] {
        &self.offsets
    }

    /// The element reflected through the origin.
    pub fn reflect(&self) -> Self {
        let mut offsets: Vec<(i32, i32)> = self.offsets.iter().map(|&(x, y)| (-x, -y)).collect();
        offsets.sort_unstable();
        Self { offsets }
    }

    pub fn is_symmetric(&self) -> bool {
        self.reflect().offsets == self.offsets
    }

    /// If the offsets form a full axis-aligned rectangle, its bounds
    /// `(dx0, dx1, dy0, dy1)`. Rectangles get a separable two-pass
    /// implementation.
    fn as_full_rect(&self) -> Option<(i32, i32, i32, i32)> {
        let (mut dx0, mut dx1, mut dy0, mut dy1) = (i32::MAX, i32::MIN, i32::MAX, i32::MIN);
        for &(dx, dy) in &self.offsets {
            dx0 = dx0.min(dx);
            dx1 = dx1.max(dx);
            dy0 = dy0.min(dy);
            dy1 = dy1.max(dy);
        }
        let w = (dx1 - dx0 + 1) as usize;
        let h = (dy1 - dy0 + 1) as usize;
        (w * h == self.offsets.len()).then_some((dx0, dx1, dy0, dy1))
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Extreme {
    Max,
    Min,
}

impl Extreme {
    #[inline]
    fn fold(self, acc: f64, v: f64) -> f64 {
        match self {
            Extreme::Max => acc.max(v),
            Extreme::Min => acc.min(v),
        }
    }

    fn seed(self) -> f64 {
        match self {
            Extreme::Max => f64::NEG_INFINITY,
            Extreme::Min => f64::INFINITY,
        }
    }
}

/// `sign = -1` samples `p - s` (dilation reach), `sign = +1` samples
/// `p + s` (erosion reach).
fn morph_generic(img: &GrayImage, se: &StructuringElement, ext: Extreme, sign: i32) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let src = img.values();
    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let y = y as i32;
        for (x, slot) in row.iter_mut().enumerate() {
            let x = x as i32;
            let mut acc = ext.seed();
            for &(dx, dy) in se.offsets() {
                let qx = x + sign * dx;
                let qy = y + sign * dy;
                if qx >= 0 && qx < w as i32 && qy >= 0 && qy < h as i32 {
                    acc = ext.fold(acc, src[qy as usize * w + qx as usize]);
                }
            }
            // The origin is always in range, so acc is always a pixel value.
            *slot = acc;
        }
    });
    out
}

/// Separable pass over one axis for full-rectangle elements. The fold is
/// monomorphized, the vertical pass works row-against-row, and the
/// common three-tap horizontal window gets an unrolled loop; all three
/// shapes vectorize.
fn morph_axis_pass(
    src: &[f64],
    w: usize,
    h: usize,
    ext: Extreme,
    horizontal: bool,
    lo: i32,
    hi: i32,
) -> Vec<f64> {
    match ext {
        Extreme::Max => morph_axis_fold(src, w, h, horizontal, lo, hi, f64::max),
        Extreme::Min => morph_axis_fold(src, w, h, horizontal, lo, hi, f64::min),
    }
}

fn morph_axis_fold<F>(
    src: &[f64],
    w: usize,
    h: usize,
    horizontal: bool,
    lo: i32,
    hi: i32,
    fold: F,
) -> Vec<f64>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let mut out = vec![0.0; w * h];
    if horizontal {
        out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
            let src_row = &src[y * w..(y + 1) * w];
            if lo == -1 && hi == 1 && w >= 2 {
                row[0] = fold(src_row[0], src_row[1]);
                for x in 1..w - 1 {
                    row[x] = fold(fold(src_row[x - 1], src_row[x]), src_row[x + 1]);
                }
                row[w - 1] = fold(src_row[w - 2], src_row[w - 1]);
            } else {
                for (x, slot) in row.iter_mut().enumerate() {
                    let a = (x as i32 + lo).max(0) as usize;
                    let b = ((x as i32 + hi).min(w as i32 - 1)) as usize;
                    let mut acc = src_row[a];
                    for &v in &src_row[a + 1..=b] {
                        acc = fold(acc, v);
                    }
                    *slot = acc;
                }
            }
        });
    } else {
        out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
            let a = (y as i32 + lo).max(0) as usize;
            let b = ((y as i32 + hi).min(h as i32 - 1)) as usize;
            row.copy_from_slice(&src[a * w..(a + 1) * w]);
            for q in a + 1..=b {
                let src_row = &src[q * w..(q + 1) * w];
                for (slot, &v) in row.iter_mut().zip(src_row) {
                    *slot = fold(*slot, v);
                }
            }
        });
    }
    out
}

fn morph(img: &GrayImage, se: &StructuringElement, ext: Extreme, sign: i32) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let values = match se.as_full_rect() {
        Some((dx0, dx1, dy0, dy1)) => {
            // For a rectangle R = H (+) V the reach max/min factors into a
            // horizontal then a vertical pass; sampling p + sign*s flips
            // the interval when sign is negative.
            let (xl, xh) = if sign > 0 { (dx0, dx1) } else { (-dx1, -dx0) };
            let (yl, yh) = if sign > 0 { (dy0, dy1) } else { (-dy1, -dy0) };
            let tmp = morph_axis_pass(img.values(), w, h, ext, true, xl, xh);
            morph_axis_pass(&tmp, w, h, ext, false, yl, yh)
        }
        None => morph_generic(img, se, ext, sign),
    };
    GrayImage::from_raw_unchecked(w, h, values)
}

/// Grayscale dilation: `out(p) = max img(p - s)` over in-image samples.
pub fn dilate(img: &GrayImage, se: &StructuringElement) -> GrayImage {
    morph(img, se, Extreme::Max, -1)
}

/// Grayscale erosion: `out(p) = min img(p + s)` over in-image samples.
pub fn erode(img: &GrayImage, se: &StructuringElement) -> GrayImage {
    morph(img, se, Extreme::Min, 1)
}

/// Morphological closing: erosion of the dilation.
pub fn close(img: &GrayImage, se: &StructuringElement) -> GrayImage {
    erode(&dilate(img, se), se)
}

/// Bottom-hat transform: closing minus the original image.
///
/// Nonnegative everywhere; large exactly where a small dark feature was
/// filled in by the closing.
pub fn bottom_hat(img: &GrayImage, se: &StructuringElement) -> GrayImage {
    let closed = close(img, se);
    let values: Vec<f64> = closed
        .values()
        .iter()
        .zip(img.values())
        .map(|(c, v)| {
            debug_assert!(c >= v, "closing must dominate the image");
            c - v
        })
        .collect();
    GrayImage::from_raw_unchecked(img.width(), img.height(), values)
}
