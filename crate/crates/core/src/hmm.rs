//! Temporal filtering: a hidden Markov model over the N pixel states plus
//! one out-of-image state.
//!
//! The chain's transition structure is a sparse motion patch — a target
//! may stay, move one pixel sideways, or one pixel into the row above —
//! plus a birth transition that lets a target emerge from the out-of-image
//! state anywhere in the frame. Measurements couple in through per-pixel
//! likelihoods `bottom_hat + 1` (and exactly 1 for the out-of-image
//! state), so a featureless frame is a no-op measurement.
//!
//! The posterior is carried in plain linear-domain probabilities with
//! per-step normalization; likelihoods are bounded below by 1, so the
//! normalizer never degenerates.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::image::GrayImage;
use crate::morphology::{bottom_hat, StructuringElement};

/// Posterior over N pixel states (row-major) plus the trailing
/// out-of-image state.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    width: usize,
    height: usize,
    probs: Vec<f64>,
}

impl BeliefState {
    /// Uniform initial belief: every state gets `1 / (N + 1)`.
    pub fn uniform(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(CoreError::invalid(
                "belief dimensions",
                format!("{width}x{height}; both must be >= 1"),
            ));
        }
        let n = width * height;
        Ok(Self {
            width,
            height,
            probs: vec![1.0 / (n as f64 + 1.0); n + 1],
        })
    }

    /// Builds a belief from explicit probabilities (length N + 1).
    pub fn from_probs(width: usize, height: usize, probs: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(CoreError::invalid(
                "belief dimensions",
                format!("{width}x{height}; both must be >= 1"),
            ));
        }
        let state = Self {
            width,
            height,
            probs,
        };
        state.validate()?;
        Ok(state)
    }

    /// Checks the probability-vector invariants: correct length,
    /// nonnegative entries, total within 1e-9 of one.
    pub fn validate(&self) -> Result<()> {
        let n = self.width * self.height;
        if self.probs.len() != n + 1 {
            return Err(CoreError::invalid(
                "belief vector",
                format!("expected {} entries, got {}", n + 1, self.probs.len()),
            ));
        }
        if self.probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(CoreError::invalid(
                "belief vector",
                "entries must be finite and >= 0",
            ));
        }
        let sum: f64 = self.probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CoreError::invalid(
                "belief vector",
                format!("entries sum to {sum}, expected 1 within 1e-9"),
            ));
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of pixel states N.
    pub fn n_pixels(&self) -> usize {
        self.width * self.height
    }

    /// All N + 1 probabilities.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// The N pixel probabilities, row-major.
    pub fn pixel_probs(&self) -> &[f64] {
        &self.probs[..self.width * self.height]
    }

    /// Probability of the out-of-image state.
    pub fn out_of_image(&self) -> f64 {
        self.probs[self.width * self.height]
    }

    /// Writes a snapshot: `u32` width, `u32` height, then the N + 1
    /// probabilities, all little-endian, with a sidecar `<path>.json`
    /// header recording dimensions and frame index.
    pub fn write_snapshot(&self, path: &Path, frame_index: u64) -> Result<()> {
        let file = File::create(path).map_err(|e| CoreError::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut run = || -> std::io::Result<()> {
            w.write_all(&(self.width as u32).to_le_bytes())?;
            w.write_all(&(self.height as u32).to_le_bytes())?;
            for p in &self.probs {
                w.write_all(&p.to_le_bytes())?;
            }
            w.flush()
        };
        run().map_err(|e| CoreError::io(path, e))?;

        let header = BeliefSnapshotHeader {
            schema_version: 1,
            width: self.width,
            height: self.height,
            frame_index,
        };
        let header_path = sidecar_path(path);
        std::fs::write(
            &header_path,
            serde_json::to_string_pretty(&header).map_err(CoreError::Json)?,
        )
        .map_err(|e| CoreError::io(header_path, e))
    }

    /// Reads a snapshot written by [`BeliefState::write_snapshot`].
    pub fn read_snapshot(path: &Path) -> Result<(Self, BeliefSnapshotHeader)> {
        let header_path = sidecar_path(path);
        let header: BeliefSnapshotHeader = serde_json::from_str(
            &std::fs::read_to_string(&header_path).map_err(|e| CoreError::io(&header_path, e))?,
        )?;
        let file = File::open(path).map_err(|e| CoreError::io(path, e))?;
        let mut r = BufReader::new(file);
        let mut u32_buf = [0u8; 4];
        let mut f64_buf = [0u8; 8];
        let mut run = || -> std::io::Result<(usize, usize, Vec<f64>)> {
            r.read_exact(&mut u32_buf)?;
            let width = u32::from_le_bytes(u32_buf) as usize;
            r.read_exact(&mut u32_buf)?;
            let height = u32::from_le_bytes(u32_buf) as usize;
            let mut probs = Vec::with_capacity(width * height + 1);
            for _ in 0..width * height + 1 {
                r.read_exact(&mut f64_buf)?;
                probs.push(f64::from_le_bytes(f64_buf));
            }
            Ok((width, height, probs))
        };
        let (width, height, probs) = run().map_err(|e| CoreError::io(path, e))?;
        Ok((Self::from_probs(width, height, probs)?, header))
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".json");
    PathBuf::from(os)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BeliefSnapshotHeader {
    pub schema_version: u32,
    pub width: usize,
    pub height: usize,
    pub frame_index: u64,
}

/// Sparse column-stochastic transition structure.
///
/// Pixel columns disperse their mass over the in-image destinations of the
/// motion patch (renormalized at the borders so no mass leaks off-frame),
/// with `p_death` flowing to the out-of-image state. The out-of-image
/// column spreads `p_birth` uniformly over all pixels and self-loops on
/// the remainder.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionModel {
    weights: [f64; 6],
    p_birth: f64,
    p_death: f64,
}

impl TransitionModel {
    /// Destination offsets a target may take in one frame: stay, step
    /// sideways, or step into the row above (dy = -1 is up).
    pub const PATCH_OFFSETS: [(i32, i32); 6] =
        [(0, 0), (-1, 0), (1, 0), (-1, -1), (0, -1), (1, -1)];

    /// Builds a model from relative patch weights (normalized internally
    /// to sum to `1 - p_death`).
    pub fn new(relative_weights: [f64; 6], p_birth: f64, p_death: f64) -> Result<Self> {
        if relative_weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(CoreError::invalid(
                "patch weights",
                "must be finite and >= 0",
            ));
        }
        let total: f64 = relative_weights.iter().sum();
        if total <= 0.0 {
            return Err(CoreError::invalid("patch weights", "must not all be zero"));
        }
        if !(0.0..=1.0).contains(&p_birth) {
            return Err(CoreError::invalid(
                "p_birth",
                format!("{p_birth}; must be in [0, 1]"),
            ));
        }
        if !(0.0..1.0).contains(&p_death) {
            return Err(CoreError::invalid(
                "p_death",
                format!("{p_death}; must be in [0, 1)"),
            ));
        }
        let scale = (1.0 - p_death) / total;
        let mut weights = relative_weights;
        for w in &mut weights {
            *w *= scale;
        }
        Ok(Self {
            weights,
            p_birth,
            p_death,
        })
    }

    /// Uniform weight on each of the six patch offsets.
    pub fn uniform(p_birth: f64, p_death: f64) -> Result<Self> {
        Self::new([1.0; 6], p_birth, p_death)
    }

    /// Absolute patch weights; they sum to `1 - p_death`.
    pub fn patch_weights(&self) -> &[f64; 6] {
        &self.weights
    }

    pub fn p_birth(&self) -> f64 {
        self.p_birth
    }

    pub fn p_death(&self) -> f64 {
        self.p_death
    }

    /// Column renormalization factors by border class. `xc`: 0 interior,
    /// 1 left edge, 2 right edge, 3 single-column image; `yc`: 0 below the
    /// top row, 1 top row.
    fn scale_table(&self) -> [[f64; 2]; 4] {
        let mut table = [[0.0; 2]; 4];
        for (xc, row) in table.iter_mut().enumerate() {
            for (yc, slot) in row.iter_mut().enumerate() {
                let mut in_sum = 0.0;
                for (&(dx, dy), &w) in Self::PATCH_OFFSETS.iter().zip(&self.weights) {
                    let blocked_x = (dx < 0 && (xc == 1 || xc == 3))
                        || (dx > 0 && (xc == 2 || xc == 3));
                    let blocked_y = dy < 0 && yc == 1;
                    if !blocked_x && !blocked_y {
                        in_sum += w;
                    }
                }
                *slot = if in_sum > 0.0 {
                    (1.0 - self.p_death) / in_sum
                } else {
                    // Degenerate column (zero self weight on a border where
                    // every other offset leaves): keep the mass in place.
                    0.0
                };
            }
        }
        table
    }

    /// Explicit dense transition matrix, row-major `(N+1) x (N+1)` with
    /// entry `[dest * (N+1) + src]`. Intended for the small instances the
    /// dynamic-programming oracle works on.
    pub fn dense_matrix(&self, width: usize, height: usize) -> Vec<f64> {
        let n = width * height;
        let dim = n + 1;
        let table = self.scale_table();
        let mut a = vec![0.0; dim * dim];
        for sy in 0..height {
            for sx in 0..width {
                let src = sy * width + sx;
                let scale = table[x_class(sx, width)][y_class(sy)];
                if scale == 0.0 {
                    a[src * dim + src] += 1.0 - self.p_death;
                } else {
                    for (&(dx, dy), &w) in Self::PATCH_OFFSETS.iter().zip(&self.weights) {
                        let (qx, qy) = (sx as i64 + dx as i64, sy as i64 + dy as i64);
                        if qx >= 0 && qx < width as i64 && qy >= 0 && qy < height as i64 {
                            let dest = qy as usize * width + qx as usize;
                            a[dest * dim + src] += w * scale;
                        }
                    }
                }
                a[n * dim + src] += self.p_death;
            }
        }
        if n > 0 {
            for dest in 0..n {
                a[dest * dim + n] = self.p_birth / n as f64;
            }
        }
        a[n * dim + n] = 1.0 - self.p_birth;
        a
    }
}

impl Default for TransitionModel {
    fn default() -> Self {
        Self::uniform(0.05, 0.0).expect("default parameters are valid")
    }
}

#[inline]
fn x_class(x: usize, width: usize) -> usize {
    ((x == 0) as usize) | (((x == width - 1) as usize) << 1)
}

#[inline]
fn y_class(y: usize) -> usize {
    (y == 0) as usize
}

/// One prediction step: the transition matrix applied to the belief,
/// computed sparsely through the motion patch.
///
/// Pixels whose six source pixels are all interior (no boundary
/// renormalization anywhere in reach) take a branch-free six-tap path;
/// the border takes the general gather.
pub fn predict(belief: &BeliefState, tm: &TransitionModel) -> BeliefState {
    let (w, h) = (belief.width(), belief.height());
    let n = w * h;
    let bel = belief.probs();
    let table = tm.scale_table();
    let weights = tm.patch_weights();
    let birth_per_pixel = tm.p_birth() / n as f64;
    let birth_in = birth_per_pixel * bel[n];

    // Interior sources all scale by the same factor.
    let interior = table[0][0];
    let eff: [f64; 6] = std::array::from_fn(|k| weights[k] * interior);

    let general = |x: i64, y: i64| -> f64 {
        let mut acc = birth_in;
        for (&(dx, dy), &wgt) in TransitionModel::PATCH_OFFSETS.iter().zip(weights) {
            // Source that reaches this pixel through the offset.
            let (qx, qy) = (x - dx as i64, y - dy as i64);
            if qx >= 0 && qx < w as i64 && qy >= 0 && qy < h as i64 {
                let scale = table[x_class(qx as usize, w)][y_class(qy as usize)];
                if scale > 0.0 || (dx == 0 && dy == 0) {
                    let f = if scale > 0.0 {
                        wgt * scale
                    } else {
                        // Degenerate column keeps its mass in place.
                        1.0 - tm.p_death()
                    };
                    acc += f * bel[qy as usize * w + qx as usize];
                }
            }
        }
        acc
    };

    let mut probs = vec![0.0; n + 1];
    probs[..n]
        .par_chunks_mut(w)
        .enumerate()
        .for_each(|(y, row)| {
            // Sources sit at rows y and y + 1 and columns x - 1 ..= x + 1;
            // all are interior when 1 <= y < h - 1 and 2 <= x < w - 2.
            if w >= 5 && y >= 1 && y + 1 < h {
                let base = y * w;
                let above = (y + 1) * w;
                for x in 0..2.min(w) {
                    row[x] = general(x as i64, y as i64);
                }
                for x in 2..w - 2 {
                    row[x] = birth_in
                        + eff[0] * bel[base + x]
                        + eff[1] * bel[base + x + 1]
                        + eff[2] * bel[base + x - 1]
                        + eff[3] * bel[above + x + 1]
                        + eff[4] * bel[above + x]
                        + eff[5] * bel[above + x - 1];
                }
                for x in w - 2..w {
                    row[x] = general(x as i64, y as i64);
                }
            } else {
                for (x, slot) in row.iter_mut().enumerate() {
                    *slot = general(x as i64, y as i64);
                }
            }
        });

    let pixel_mass: f64 = bel[..n].iter().sum();
    probs[n] = (1.0 - tm.p_birth()) * bel[n] + tm.p_death() * pixel_mass;

    BeliefState {
        width: w,
        height: h,
        probs,
    }
}

/// Diagonal of the measurement likelihood matrix: `bottom_hat + 1` per
/// pixel and exactly 1 for the out-of-image state.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodVector {
    values: Vec<f64>,
}

impl LikelihoodVector {
    /// Builds the vector from a bottom-hat output image.
    pub fn from_morphology(morph: &GrayImage) -> Self {
        let mut values: Vec<f64> = morph.values().iter().map(|v| v + 1.0).collect();
        values.push(1.0);
        Self { values }
    }

    /// Builds from raw positive values (used by the oracle's discrete
    /// observation model, where likelihoods are proper emission columns).
    pub fn from_raw(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(CoreError::invalid(
                "likelihood vector",
                "entries must be finite and >= 0",
            ));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn is_all_ones(&self) -> bool {
        self.values.iter().all(|&v| v == 1.0)
    }
}

/// Measurement update. Returns the posterior and the scalar normalization
/// factor `N_k = 1 / <1, B(y) A X>`.
///
/// An all-ones likelihood (constant frame) makes the measurement matrix
/// the identity, so the update is skipped entirely and `N_k` is exactly 1.
///
/// Panics if the normalizer is not positive, which the invariants
/// (likelihoods >= 1, belief summing to 1) rule out.
pub fn update(predicted: &BeliefState, lik: &LikelihoodVector) -> Result<(BeliefState, f64)> {
    if lik.values().len() != predicted.probs().len() {
        return Err(CoreError::invalid(
            "likelihood vector",
            format!(
                "length {} does not match belief length {}",
                lik.values().len(),
                predicted.probs().len()
            ),
        ));
    }
    if lik.is_all_ones() {
        return Ok((predicted.clone(), 1.0));
    }
    let mut numerators: Vec<f64> = predicted
        .probs()
        .iter()
        .zip(lik.values())
        .map(|(p, l)| p * l)
        .collect();
    let z: f64 = numerators.iter().sum();
    assert!(
        z > 0.0 && z.is_finite(),
        "normalizer must be positive and finite, got {z}"
    );
    for v in &mut numerators {
        *v /= z;
    }
    Ok((
        BeliefState {
            width: predicted.width(),
            height: predicted.height(),
            probs: numerators,
        },
        1.0 / z,
    ))
}

/// Per-step summary emitted by [`filter_step`].
#[derive(Debug, Clone, Copy)]
pub struct StepStats {
    /// The scalar normalization factor `N_k`.
    pub normalizer: f64,
    /// Largest pixel-state posterior.
    pub max_pixel_posterior: f64,
    /// Posterior of the out-of-image state.
    pub out_of_image: f64,
}

/// One full pipeline step: bottom-hat the frame, form likelihoods,
/// predict, then update.
pub fn filter_step(
    belief: &BeliefState,
    frame: &GrayImage,
    tm: &TransitionModel,
    se: &StructuringElement,
) -> Result<(BeliefState, StepStats)> {
    if frame.width() != belief.width() || frame.height() != belief.height() {
        return Err(CoreError::DimensionMismatch {
            expected_width: belief.width(),
            expected_height: belief.height(),
            width: frame.width(),
            height: frame.height(),
            context: "frame vs belief".to_string(),
        });
    }
    let morph = bottom_hat(frame, se);
    let lik = LikelihoodVector::from_morphology(&morph);
    let predicted = predict(belief, tm);
    let (posterior, normalizer) = update(&predicted, &lik)?;
    let max_pixel_posterior = posterior
        .pixel_probs()
        .iter()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let stats = StepStats {
        normalizer,
        max_pixel_posterior,
        out_of_image: posterior.out_of_image(),
    };
    Ok((posterior, stats))
}
