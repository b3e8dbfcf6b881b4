//! Naive reference implementations used as independent oracles by the
//! test suites. Deliberately written as direct double loops with none of
//! the production shortcuts; not part of the public API.
#![doc(hidden)]

use crate::hmm::{BeliefState, TransitionModel};
use crate::image::GrayImage;
use crate::morphology::StructuringElement;

/// Per-pixel dilation by explicit offset scan.
pub fn naive_dilate(img: &GrayImage, se: &StructuringElement) -> GrayImage {
    let (w, h) = (img.width() as i32, img.height() as i32);
    let mut out = Vec::with_capacity(img.len());
    for y in 0..h {
        for x in 0..w {
            let mut best = f64::NEG_INFINITY;
            for &(dx, dy) in se.offsets() {
                let (qx, qy) = (x - dx, y - dy);
                if qx >= 0 && qx < w && qy >= 0 && qy < h {
                    best = best.max(img.get(qx as usize, qy as usize));
                }
            }
            out.push(best);
        }
    }
    GrayImage::new(img.width(), img.height(), out).unwrap()
}

/// Per-pixel erosion by explicit offset scan.
pub fn naive_erode(img: &GrayImage, se: &StructuringElement) -> GrayImage {
    let (w, h) = (img.width() as i32, img.height() as i32);
    let mut out = Vec::with_capacity(img.len());
    for y in 0..h {
        for x in 0..w {
            let mut best = f64::INFINITY;
            for &(dx, dy) in se.offsets() {
                let (qx, qy) = (x + dx, y + dy);
                if qx >= 0 && qx < w && qy >= 0 && qy < h {
                    best = best.min(img.get(qx as usize, qy as usize));
                }
            }
            out.push(best);
        }
    }
    GrayImage::new(img.width(), img.height(), out).unwrap()
}

/// Assembles the full transition matrix column by column from first
/// principles: collect in-image patch destinations, renormalize the column
/// by its own sum, then splice in the death and birth mass.
///
/// Row-major `(n+1) x (n+1)`, entry `[dest * dim + src]`.
pub fn naive_transition_matrix(tm: &TransitionModel, width: usize, height: usize) -> Vec<f64> {
    let n = width * height;
    let dim = n + 1;
    let mut a = vec![0.0; dim * dim];
    for sy in 0..height {
        for sx in 0..width {
            let src = sy * width + sx;
            let mut dests: Vec<(usize, f64)> = Vec::new();
            let mut total = 0.0;
            for (&(dx, dy), &wgt) in TransitionModel::PATCH_OFFSETS.iter().zip(tm.patch_weights())
            {
                let (qx, qy) = (sx as i64 + dx as i64, sy as i64 + dy as i64);
                if qx >= 0 && qx < width as i64 && qy >= 0 && qy < height as i64 {
                    dests.push(((qy as usize) * width + qx as usize, wgt));
                    total += wgt;
                }
            }
            if total > 0.0 {
                for (dest, wgt) in dests {
                    a[dest * dim + src] += wgt / total * (1.0 - tm.p_death());
                }
            } else {
                a[src * dim + src] += 1.0 - tm.p_death();
            }
            a[n * dim + src] += tm.p_death();
        }
    }
    for dest in 0..n {
        a[dest * dim + n] = tm.p_birth() / n as f64;
    }
    a[n * dim + n] = 1.0 - tm.p_birth();
    a
}

/// Dense matrix-vector prediction against [`naive_transition_matrix`].
pub fn naive_predict(belief: &BeliefState, tm: &TransitionModel) -> Vec<f64> {
    let a = naive_transition_matrix(tm, belief.width(), belief.height());
    let dim = belief.probs().len();
    let mut out = vec![0.0; dim];
    for dest in 0..dim {
        for src in 0..dim {
            out[dest] += a[dest * dim + src] * belief.probs()[src];
        }
    }
    out
}

/// Brute-force 8-neighbor correlation of the pixel field with the
/// center-positive kernel, zero padded.
pub fn naive_zeta(belief: &BeliefState) -> Vec<f64> {
    let (w, h) = (belief.width() as i32, belief.height() as i32);
    let field = belief.pixel_probs();
    let mut out = Vec::with_capacity((w * h) as usize);
    for y in 0..h {
        for x in 0..w {
            let mut v = field[(y * w + x) as usize];
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (qx, qy) = (x + dx, y + dy);
                    if qx >= 0 && qx < w && qy >= 0 && qy < h {
                        v -= field[(qy * w + qx) as usize];
                    }
                }
            }
            out.push(v);
        }
    }
    out
}
