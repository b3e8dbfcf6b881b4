//! Seeded synthetic near-collision encounters.
//!
//! Each scenario renders a textured cloud background (multi-octave value
//! noise), optional transient dark cloud blobs a few pixels across — the
//! engineered false-alarm source — and, after an onset frame, a dim dark
//! target that emerges at sub-pixel scale and grows while it drifts
//! sideways and upward. Per-frame ground truth and a linear frame-to-range
//! mapping come with every sequence.
//!
//! Rendering is a pure function of `(scenario, frame index)`: regenerating
//! a suite from the same master seed is bit-identical.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::image::GrayImage;

/// Difficulty class of a scenario, used to group results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioCategory {
    /// Little or no texture, no blob clutter.
    Clear,
    /// Cloud texture without compact blobs.
    Textured,
    /// Cloud texture plus transient compact dark blobs.
    BlobClutter,
    /// No target; used for false-alarm measurement.
    TargetFree,
}

/// A transient compact dark feature (cloud artefact).
///
/// Unlike the target's point profile, a blob is a flat-topped patch: the
/// full contrast applies across the whole core, so several adjacent
/// pixels respond equally and no single pixel can win the posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudBlob {
    pub x: f64,
    pub y: f64,
    /// Radius of the flat core in pixels.
    pub core_radius: f64,
    /// Gaussian falloff scale outside the core.
    pub edge_sigma: f64,
    /// Intensity subtracted across the core.
    pub contrast: f64,
    /// First frame the blob is visible.
    pub start_frame: u32,
    /// First frame the blob is gone again.
    pub end_frame: u32,
}

/// Cloud texture parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClutterParams {
    /// Number of value-noise octaves.
    pub octaves: u32,
    /// Peak-to-peak-ish amplitude of the summed octaves.
    pub amplitude: f64,
    /// Spatial scale in pixels of the base octave.
    pub scale: f64,
    /// Texture drift in pixels per frame (clouds move; a downward
    /// component keeps texture features from imitating a stationary
    /// target, since the motion patch never transitions downward).
    #[serde(default)]
    pub drift: (f64, f64),
    /// Texture amplitude fades to zero within this many pixels of the
    /// frame border. Border pixels lose patch offsets to clipping, which
    /// makes them sticky under the motion model; persistent dark texture
    /// there would accumulate posterior that no rule can reject. High
    /// clean sky at the frame edges is also what the encounter geometry
    /// gives.
    #[serde(default)]
    pub border_fade_px: f64,
    pub blobs: Vec<CloudBlob>,
}

impl ClutterParams {
    pub fn none() -> Self {
        Self {
            octaves: 1,
            amplitude: 0.0,
            scale: 8.0,
            drift: (0.0, 0.0),
            border_fade_px: 0.0,
            blobs: Vec::new(),
        }
    }
}

/// The target's visual track through a sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetTrack {
    /// First frame the target is rendered.
    pub onset_frame: u32,
    /// Sub-pixel center position per frame (length = frame count).
    pub trajectory: Vec<(f64, f64)>,
    /// Dark-contrast depth per frame; monotone non-decreasing after onset.
    pub contrast: Vec<f64>,
    /// Gaussian sigma per frame, growing from sub-pixel scale.
    pub radius: Vec<f64>,
}

/// Full generative description of one synthetic encounter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncounterScenario {
    pub schema_version: u32,
    pub name: String,
    pub category: ScenarioCategory,
    pub width: usize,
    pub height: usize,
    pub frame_count: u32,
    pub base_luminance: f64,
    pub noise_sigma: f64,
    pub clutter: ClutterParams,
    pub target: Option<TargetTrack>,
    pub initial_range_m: f64,
    pub closing_speed_m_per_frame: f64,
    pub seed: u64,
}

impl EncounterScenario {
    /// Checks every structural invariant of the scenario.
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Err(CoreError::invalid("scenario", reason));
        if self.width == 0 || self.height == 0 {
            return fail(format!("dimensions {}x{}", self.width, self.height));
        }
        if self.frame_count == 0 {
            return fail("frame_count must be >= 1".into());
        }
        if !(self.base_luminance.is_finite() && self.base_luminance >= 0.0) {
            return fail(format!("base_luminance {}", self.base_luminance));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return fail(format!("noise_sigma {}", self.noise_sigma));
        }
        if self.clutter.amplitude < 0.0 || self.clutter.scale <= 0.0 || self.clutter.octaves == 0 {
            return fail("clutter octaves must be >= 1, amplitude >= 0, scale > 0".into());
        }
        for (i, b) in self.clutter.blobs.iter().enumerate() {
            if b.core_radius <= 0.0
                || b.edge_sigma <= 0.0
                || b.contrast < 0.0
                || b.start_frame >= b.end_frame
            {
                return fail(format!("blob {i} has invalid shape or frame window"));
            }
        }
        if !(self.initial_range_m > 0.0 && self.closing_speed_m_per_frame > 0.0) {
            return fail("range mapping requires positive initial range and closing speed".into());
        }
        let final_range = self.initial_range_m
            - (self.frame_count as f64 - 1.0) * self.closing_speed_m_per_frame;
        if final_range <= 0.0 {
            return fail(format!(
                "range becomes nonpositive ({final_range} m) before the sequence ends"
            ));
        }
        if let Some(t) = &self.target {
            if t.onset_frame >= self.frame_count {
                return fail(format!(
                    "onset_frame {} not below frame_count {}",
                    t.onset_frame, self.frame_count
                ));
            }
            let n = self.frame_count as usize;
            if t.trajectory.len() != n || t.contrast.len() != n || t.radius.len() != n {
                return fail("trajectory, contrast and radius must have frame_count entries".into());
            }
            for (k, &(x, y)) in t.trajectory.iter().enumerate() {
                if !(x.is_finite() && y.is_finite())
                    || x < 0.0
                    || y < 0.0
                    || x > (self.width - 1) as f64
                    || y > (self.height - 1) as f64
                {
                    return fail(format!("trajectory point {k} ({x}, {y}) leaves the image"));
                }
                if k > 0 {
                    let (px, py) = t.trajectory[k - 1];
                    let (dx, dy) = (x - px, y - py);
                    if dx.abs() > 1.0 || dy > 0.0 || dy < -1.0 {
                        return fail(format!(
                            "trajectory step {k} moves ({dx}, {dy}); allowed |dx| <= 1, -1 <= dy <= 0"
                        ));
                    }
                }
            }
            for k in t.onset_frame as usize..n {
                if t.contrast[k] < 0.0 || t.radius[k] <= 0.0 {
                    return fail(format!("contrast/radius invalid at frame {k}"));
                }
                if k > t.onset_frame as usize && t.contrast[k] < t.contrast[k - 1] {
                    return fail(format!("contrast decreases at frame {k}"));
                }
            }
        }
        Ok(())
    }

    /// Camera-to-target range at a frame: linear closing model.
    pub fn range_at_frame(&self, k: u32) -> Result<f64> {
        if k >= self.frame_count {
            return Err(CoreError::invalid(
                "frame index",
                format!("{k} out of range 0..{}", self.frame_count),
            ));
        }
        Ok(self.initial_range_m - k as f64 * self.closing_speed_m_per_frame)
    }

    /// Renders one frame. Pure in `(self, k)`.
    pub fn render_frame(&self, k: u32) -> Result<GrayImage> {
        if k >= self.frame_count {
            return Err(CoreError::invalid(
                "frame index",
                format!("{k} out of range 0..{}", self.frame_count),
            ));
        }
        let (w, h) = (self.width, self.height);
        let mut values = vec![self.base_luminance; w * h];

        if self.clutter.amplitude > 0.0 {
            let clutter = &self.clutter;
            let seed = self.seed;
            let ox = clutter.drift.0 * k as f64;
            let oy = clutter.drift.1 * k as f64;
            values.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
                for (x, v) in row.iter_mut().enumerate() {
                    let fade = border_fade(x, y, w, h, clutter.border_fade_px);
                    if fade > 0.0 {
                        *v += fade * texture_at(seed, clutter, x as f64 + ox, y as f64 + oy);
                    }
                }
            });
        }

        for blob in &self.clutter.blobs {
            if k >= blob.start_frame && k < blob.end_frame {
                subtract_plateau(&mut values, w, h, blob);
            }
        }

        if let Some(t) = &self.target {
            if k >= t.onset_frame {
                let (cx, cy) = t.trajectory[k as usize];
                subtract_spot(
                    &mut values,
                    w,
                    h,
                    cx,
                    cy,
                    t.radius[k as usize],
                    t.contrast[k as usize],
                );
            }
        }

        if self.noise_sigma > 0.0 {
            let mut rng = frame_rng(self.seed, k);
            let normal = Normal::new(0.0, self.noise_sigma)
                .map_err(|e| CoreError::invalid("noise_sigma", e.to_string()))?;
            for v in &mut values {
                *v += normal.sample(&mut rng);
            }
        }

        for v in &mut values {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        GrayImage::new(w, h, values)
    }

    /// Renders every frame and derives the per-frame ground truth.
    pub fn generate_sequence(&self) -> Result<(Vec<GrayImage>, GroundTruth)> {
        self.validate()?;
        let frames: Result<Vec<GrayImage>> = (0..self.frame_count)
            .into_par_iter()
            .map(|k| self.render_frame(k))
            .collect();
        Ok((frames?, self.ground_truth()))
    }

    /// Ground truth labels without rendering.
    pub fn ground_truth(&self) -> GroundTruth {
        let mut target_pixel = Vec::with_capacity(self.frame_count as usize);
        let mut range_m = Vec::with_capacity(self.frame_count as usize);
        for k in 0..self.frame_count {
            range_m.push(self.initial_range_m - k as f64 * self.closing_speed_m_per_frame);
            let label = self.target.as_ref().and_then(|t| {
                (k >= t.onset_frame).then(|| {
                    let (x, y) = t.trajectory[k as usize];
                    let px = (x.round() as usize).min(self.width - 1);
                    let py = (y.round() as usize).min(self.height - 1);
                    py * self.width + px
                })
            });
            target_pixel.push(label);
        }
        GroundTruth {
            width: self.width,
            target_pixel,
            range_m,
        }
    }

    /// First frame the target is rendered, if the scenario has one.
    pub fn onset_frame(&self) -> Option<u32> {
        self.target.as_ref().map(|t| t.onset_frame)
    }
}

/// Per-frame labels for a generated sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    width: usize,
    /// Row-major target pixel per frame; `None` before onset or for
    /// target-free scenarios.
    pub target_pixel: Vec<Option<usize>>,
    /// Range in meters per frame.
    pub range_m: Vec<f64>,
}

impl GroundTruth {
    pub fn pixel_xy(&self, frame: usize) -> Option<(usize, usize)> {
        self.target_pixel
            .get(frame)
            .copied()
            .flatten()
            .map(|p| (p % self.width, p / self.width))
    }

    /// Writes `frame,x,y,range_m` with empty coordinates when no target
    /// is present.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| CoreError::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let mut run = || -> std::io::Result<()> {
            writeln!(w, "frame,x,y,range_m")?;
            for (k, range) in self.range_m.iter().enumerate() {
                match self.pixel_xy(k) {
                    Some((x, y)) => writeln!(w, "{k},{x},{y},{range}")?,
                    None => writeln!(w, "{k},,,{range}")?,
                }
            }
            w.flush()
        };
        run().map_err(|e| CoreError::io(path, e))
    }
}

fn frame_rng(seed: u64, frame: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Stream 0 is reserved for scenario construction.
    rng.set_stream(frame as u64 + 1);
    rng
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Deterministic lattice value in [0, 1).
fn lattice_value(seed: u64, octave: u32, ix: i64, iy: i64) -> f64 {
    let mixed = seed
        .wrapping_add((octave as u64 + 1).wrapping_mul(0xD6E8FEB86659FD93))
        .wrapping_add((ix as u64).wrapping_mul(0xC2B2AE3D27D4EB4F))
        .wrapping_add((iy as u64).wrapping_mul(0x165667B19E3779F9));
    splitmix64(mixed) as f64 / (u64::MAX as f64 + 1.0)
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Smoothed value noise in [-1, 1] at one octave.
fn value_noise(seed: u64, octave: u32, u: f64, v: f64) -> f64 {
    let (iu, iv) = (u.floor(), v.floor());
    let (fu, fv) = (u - iu, v - iv);
    let (iu, iv) = (iu as i64, iv as i64);
    let a = lattice_value(seed, octave, iu, iv);
    let b = lattice_value(seed, octave, iu + 1, iv);
    let c = lattice_value(seed, octave, iu, iv + 1);
    let d = lattice_value(seed, octave, iu + 1, iv + 1);
    let (su, sv) = (smoothstep(fu), smoothstep(fv));
    let top = a + (b - a) * su;
    let bottom = c + (d - c) * su;
    2.0 * (top + (bottom - top) * sv) - 1.0
}

/// Smoothstep from 0 at the border to 1 at `fade_px` inward.
fn border_fade(x: usize, y: usize, width: usize, height: usize, fade_px: f64) -> f64 {
    if fade_px <= 0.0 {
        return 1.0;
    }
    let d = x
        .min(width - 1 - x)
        .min(y)
        .min(height - 1 - y) as f64;
    let t = (d / fade_px).min(1.0);
    t * t * (3.0 - 2.0 * t)
}

fn texture_at(seed: u64, clutter: &ClutterParams, x: f64, y: f64) -> f64 {
    let mut acc = 0.0;
    let mut amp = clutter.amplitude;
    let mut freq = 1.0 / clutter.scale;
    for octave in 0..clutter.octaves {
        acc += amp * value_noise(seed, octave, x * freq, y * freq);
        amp *= 0.5;
        freq *= 2.0;
    }
    acc
}

/// Mean of the unit-interval integral of a peak-one Gaussian over the
/// footprint of a pixel at distance `d` from the center.
fn pixel_coverage(d: f64, sigma: f64) -> f64 {
    let s = sigma * std::f64::consts::SQRT_2;
    let lo = (d - 0.5) / s;
    let hi = (d + 0.5) / s;
    sigma * (std::f64::consts::PI / 2.0).sqrt() * (libm::erf(hi) - libm::erf(lo))
}

/// Subtracts an area-weighted dark Gaussian spot, clamping at zero later.
/// Sub-pixel sigmas deposit less than `contrast` on any single pixel, so
/// emergence genuinely starts below one pixel of contrast mass.
fn subtract_spot(
    values: &mut [f64],
    width: usize,
    height: usize,
    cx: f64,
    cy: f64,
    sigma: f64,
    contrast: f64,
) {
    let reach = (4.0 * sigma).ceil() as i64 + 1;
    let x0 = ((cx.round() as i64) - reach).max(0) as usize;
    let x1 = ((cx.round() as i64) + reach).min(width as i64 - 1) as usize;
    let y0 = ((cy.round() as i64) - reach).max(0) as usize;
    let y1 = ((cy.round() as i64) + reach).min(height as i64 - 1) as usize;
    for py in y0..=y1 {
        let wy = pixel_coverage(py as f64 - cy, sigma);
        for px in x0..=x1 {
            let wx = pixel_coverage(px as f64 - cx, sigma);
            values[py * width + px] -= contrast * wx * wy;
        }
    }
}

/// Subtracts a flat-topped dark patch: full contrast inside the core,
/// Gaussian rolloff outside. Sampled at pixel centers; blobs span several
/// pixels, so footprint averaging does not matter the way it does for the
/// sub-pixel target.
fn subtract_plateau(values: &mut [f64], width: usize, height: usize, blob: &CloudBlob) {
    let reach = (blob.core_radius + 4.0 * blob.edge_sigma).ceil() as i64 + 1;
    let x0 = ((blob.x.round() as i64) - reach).max(0) as usize;
    let x1 = ((blob.x.round() as i64) + reach).min(width as i64 - 1) as usize;
    let y0 = ((blob.y.round() as i64) - reach).max(0) as usize;
    let y1 = ((blob.y.round() as i64) + reach).min(height as i64 - 1) as usize;
    for py in y0..=y1 {
        for px in x0..=x1 {
            let d = ((px as f64 - blob.x).powi(2) + (py as f64 - blob.y).powi(2)).sqrt();
            let profile = if d <= blob.core_radius {
                1.0
            } else {
                let t = (d - blob.core_radius) / blob.edge_sigma;
                (-0.5 * t * t).exp()
            };
            values[py * width + px] -= blob.contrast * profile;
        }
    }
}

// ---------------------------------------------------------------------
// Standard evaluation suite
// ---------------------------------------------------------------------

const SUITE_WIDTH: usize = 64;
const SUITE_HEIGHT: usize = 48;
const SUITE_FRAMES: u32 = 120;
const SUITE_INITIAL_RANGE_M: f64 = 4000.0;
const SUITE_CLOSING_M_PER_FRAME: f64 = 15.0;

struct CaseSpec {
    category: ScenarioCategory,
    amplitude: f64,
    octaves: u32,
    scale: f64,
    noise_sigma: f64,
    blob_count: usize,
    max_contrast: f64,
    onset: u32,
}

const CASE_SPECS: [CaseSpec; 15] = [
    CaseSpec { category: ScenarioCategory::Clear, amplitude: 0.0, octaves: 1, scale: 16.0, noise_sigma: 0.10, blob_count: 0, max_contrast: 18.0, onset: 55 },
    CaseSpec { category: ScenarioCategory::Clear, amplitude: 0.0, octaves: 1, scale: 16.0, noise_sigma: 0.15, blob_count: 0, max_contrast: 20.0, onset: 60 },
    CaseSpec { category: ScenarioCategory::Clear, amplitude: 2.0, octaves: 2, scale: 16.0, noise_sigma: 0.10, blob_count: 0, max_contrast: 18.0, onset: 58 },
    CaseSpec { category: ScenarioCategory::Clear, amplitude: 4.0, octaves: 2, scale: 14.0, noise_sigma: 0.15, blob_count: 0, max_contrast: 19.0, onset: 62 },
    CaseSpec { category: ScenarioCategory::Clear, amplitude: 5.0, octaves: 3, scale: 12.0, noise_sigma: 0.20, blob_count: 0, max_contrast: 17.0, onset: 56 },
    CaseSpec { category: ScenarioCategory::Textured, amplitude: 8.0, octaves: 3, scale: 12.0, noise_sigma: 0.20, blob_count: 0, max_contrast: 18.0, onset: 60 },
    CaseSpec { category: ScenarioCategory::Textured, amplitude: 10.0, octaves: 3, scale: 12.0, noise_sigma: 0.25, blob_count: 0, max_contrast: 17.0, onset: 64 },
    CaseSpec { category: ScenarioCategory::Textured, amplitude: 12.0, octaves: 3, scale: 10.0, noise_sigma: 0.20, blob_count: 0, max_contrast: 19.0, onset: 57 },
    CaseSpec { category: ScenarioCategory::Textured, amplitude: 14.0, octaves: 4, scale: 12.0, noise_sigma: 0.25, blob_count: 0, max_contrast: 18.0, onset: 61 },
    CaseSpec { category: ScenarioCategory::Textured, amplitude: 16.0, octaves: 4, scale: 10.0, noise_sigma: 0.30, blob_count: 0, max_contrast: 17.0, onset: 65 },
    CaseSpec { category: ScenarioCategory::BlobClutter, amplitude: 12.0, octaves: 3, scale: 12.0, noise_sigma: 0.20, blob_count: 4, max_contrast: 18.0, onset: 60 },
    CaseSpec { category: ScenarioCategory::BlobClutter, amplitude: 14.0, octaves: 3, scale: 10.0, noise_sigma: 0.25, blob_count: 5, max_contrast: 17.0, onset: 63 },
    CaseSpec { category: ScenarioCategory::BlobClutter, amplitude: 16.0, octaves: 4, scale: 12.0, noise_sigma: 0.20, blob_count: 4, max_contrast: 19.0, onset: 58 },
    CaseSpec { category: ScenarioCategory::TargetFree, amplitude: 14.0, octaves: 3, scale: 12.0, noise_sigma: 0.25, blob_count: 4, max_contrast: 0.0, onset: 0 },
    CaseSpec { category: ScenarioCategory::TargetFree, amplitude: 10.0, octaves: 3, scale: 12.0, noise_sigma: 0.20, blob_count: 0, max_contrast: 0.0, onset: 0 },
];

/// The 15-case evaluation suite: five near-clear cases, five textured
/// cases, three blob-clutter cases (the regime separating the two greedy
/// rules) and two target-free cases for false-alarm measurement.
pub fn standard_suite(master_seed: u64) -> Vec<EncounterScenario> {
    CASE_SPECS
        .iter()
        .enumerate()
        .map(|(idx, spec)| build_case(master_seed, idx, spec))
        .collect()
}

fn build_case(master_seed: u64, idx: usize, spec: &CaseSpec) -> EncounterScenario {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(
        master_seed ^ (idx as u64).wrapping_mul(0xA24BAED4963EE407),
    ));
    let (w, h) = (SUITE_WIDTH, SUITE_HEIGHT);

    let target = (spec.category != ScenarioCategory::TargetFree).then(|| {
        let onset = spec.onset;
        let n = SUITE_FRAMES as usize;
        // Anchor the at-onset position near a pixel center: a distant
        // head-on target drifts a small fraction of a pixel per frame, so
        // during the emergence window its energy lands mostly in one
        // pixel. The invisible pre-onset path is walked backward from the
        // anchor (downward in reverse, so forward motion never descends).
        let anchor_x = rng.gen_range(14..w - 14) as f64 + rng.gen_range(-0.12..0.12);
        let anchor_y = rng.gen_range(h / 2..h - 10) as f64 + rng.gen_range(-0.02..0.18);
        let mut trajectory = vec![(0.0, 0.0); n];
        trajectory[onset as usize] = (anchor_x, anchor_y);
        let (mut x, mut y) = (anchor_x, anchor_y);
        for k in (onset as usize + 1)..n {
            x = (x + rng.gen_range(-0.03..0.03)).clamp(3.0, w as f64 - 4.0);
            y = (y - rng.gen_range(0.004..0.012)).max(3.0);
            trajectory[k] = (x, y);
        }
        let (mut x, mut y) = (anchor_x, anchor_y);
        for k in (0..onset as usize).rev() {
            x = (x + rng.gen_range(-0.3..0.3)).clamp(3.0, w as f64 - 4.0);
            y = (y + rng.gen_range(0.02..0.2)).min(h as f64 - 4.0);
            trajectory[k] = (x, y);
        }
        let ramp_frames = 12.0;
        let contrast = (0..n)
            .map(|k| {
                if (k as u32) < onset {
                    0.0
                } else {
                    let t = (k as f64 - onset as f64 + 1.0) / ramp_frames;
                    spec.max_contrast * t.min(1.0)
                }
            })
            .collect();
        // The spot stays essentially single-pixel over the evaluation
        // window; blob clutter is what spans several pixels.
        let radius = (0..n)
            .map(|k| {
                if (k as u32) < onset {
                    0.35
                } else {
                    (0.35 + 0.012 * (k as f64 - onset as f64)).min(0.85)
                }
            })
            .collect();
        TargetTrack {
            onset_frame: onset,
            trajectory,
            contrast,
            radius,
        }
    });

    // Blob windows end well before the onset so clutter peaks are
    // strictly pre-onset (or anywhere in target-free cases).
    let window_end = target
        .as_ref()
        .map(|t| t.onset_frame.saturating_sub(14))
        .unwrap_or(SUITE_FRAMES - 20);
    let blobs = (0..spec.blob_count)
        .map(|_| {
            let duration = rng.gen_range(12..18u32);
            let latest_start = window_end.saturating_sub(duration).max(11);
            let start = rng.gen_range(10..latest_start);
            CloudBlob {
                x: rng.gen_range(12.0..w as f64 - 13.0),
                y: rng.gen_range(14.0..h as f64 - 11.0),
                // Wide enough that the bottom-hat response spans several
                // adjacent pixels, which is what the kernel rule rejects.
                core_radius: rng.gen_range(1.5..2.2),
                edge_sigma: rng.gen_range(0.5..0.8),
                contrast: rng.gen_range(8.0..11.0),
                start_frame: start,
                end_frame: start + duration,
            }
        })
        .collect();

    EncounterScenario {
        schema_version: 1,
        name: format!("case-{idx:02}"),
        category: spec.category,
        width: w,
        height: h,
        frame_count: SUITE_FRAMES,
        base_luminance: 170.0,
        noise_sigma: spec.noise_sigma,
        clutter: ClutterParams {
            octaves: spec.octaves,
            amplitude: spec.amplitude,
            scale: spec.scale,
            drift: (0.2, 0.15),
            border_fade_px: 12.0,
            blobs,
        },
        target,
        initial_range_m: SUITE_INITIAL_RANGE_M,
        closing_speed_m_per_frame: SUITE_CLOSING_M_PER_FRAME,
        seed: splitmix64(master_seed.wrapping_add(0x51AF_EE75).wrapping_add(idx as u64)),
    }
}

// ---------------------------------------------------------------------
// Suite directory layout
// ---------------------------------------------------------------------

/// Manifest written at the root of a suite directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteManifest {
    pub schema_version: u32,
    pub master_seed: u64,
    pub cases: Vec<String>,
}

/// Writes one scenario directory: `scenario.json`, `ground_truth.csv` and
/// `frames/frame_NNNN.pgm`.
pub fn save_case(dir: &Path, scenario: &EncounterScenario) -> Result<()> {
    scenario.validate()?;
    let frames_dir = dir.join("frames");
    std::fs::create_dir_all(&frames_dir).map_err(|e| CoreError::io(&frames_dir, e))?;
    let scenario_path = dir.join("scenario.json");
    std::fs::write(
        &scenario_path,
        serde_json::to_string_pretty(scenario).map_err(CoreError::Json)?,
    )
    .map_err(|e| CoreError::io(&scenario_path, e))?;
    let (frames, truth) = scenario.generate_sequence()?;
    truth.write_csv(&dir.join("ground_truth.csv"))?;
    for (k, frame) in frames.iter().enumerate() {
        frame.write_pgm(&frames_dir.join(format!("frame_{k:04}.pgm")))?;
    }
    Ok(())
}

/// Writes a full suite under `dir` and returns the manifest.
pub fn save_suite(
    dir: &Path,
    master_seed: u64,
    scenarios: &[EncounterScenario],
) -> Result<SuiteManifest> {
    std::fs::create_dir_all(dir).map_err(|e| CoreError::io(dir, e))?;
    for scenario in scenarios {
        save_case(&dir.join(&scenario.name), scenario)?;
    }
    let manifest = SuiteManifest {
        schema_version: 1,
        master_seed,
        cases: scenarios.iter().map(|s| s.name.clone()).collect(),
    };
    let path = dir.join("suite.json");
    std::fs::write(
        &path,
        serde_json::to_string_pretty(&manifest).map_err(CoreError::Json)?,
    )
    .map_err(|e| CoreError::io(&path, e))?;
    Ok(manifest)
}

/// A case loaded back from disk: the scenario plus its 8-bit frames.
#[derive(Debug, Clone)]
pub struct LoadedCase {
    pub scenario: EncounterScenario,
    pub frames: Vec<GrayImage>,
}

/// Reads a scenario directory written by [`save_case`]. Frames come back
/// 8-bit quantized, exactly as any downstream consumer of the PGM files
/// sees them.
pub fn load_case(dir: &Path) -> Result<LoadedCase> {
    let scenario_path = dir.join("scenario.json");
    let scenario: EncounterScenario = serde_json::from_str(
        &std::fs::read_to_string(&scenario_path).map_err(|e| CoreError::io(&scenario_path, e))?,
    )?;
    scenario.validate()?;
    let frames_dir = dir.join("frames");
    let mut paths = list_pgm_files(&frames_dir)?;
    paths.sort();
    if paths.len() != scenario.frame_count as usize {
        return Err(CoreError::Format {
            path: frames_dir,
            reason: format!(
                "expected {} frames, found {}",
                scenario.frame_count,
                paths.len()
            ),
        });
    }
    let frames = paths
        .iter()
        .map(|p| GrayImage::read_pgm(p))
        .collect::<Result<Vec<_>>>()?;
    Ok(LoadedCase { scenario, frames })
}

/// Reads a suite manifest and all its cases.
pub fn load_suite(dir: &Path) -> Result<(SuiteManifest, Vec<LoadedCase>)> {
    let manifest_path = dir.join("suite.json");
    let manifest: SuiteManifest = serde_json::from_str(
        &std::fs::read_to_string(&manifest_path).map_err(|e| CoreError::io(&manifest_path, e))?,
    )?;
    let cases = manifest
        .cases
        .iter()
        .map(|name| load_case(&dir.join(name)))
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, cases))
}

/// Lexicographically sorted `.pgm` paths in a directory.
pub fn list_pgm_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CoreError::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|e| e == "pgm").unwrap_or(false))
        .collect();
    paths.sort();
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet_scenario(target: bool) -> EncounterScenario {
        let frame_count = 20u32;
        let n = frame_count as usize;
        EncounterScenario {
            schema_version: 1,
            name: "test".into(),
            category: if target {
                ScenarioCategory::Clear
            } else {
                ScenarioCategory::TargetFree
            },
            width: 24,
            height: 20,
            frame_count,
            base_luminance: 100.0,
            noise_sigma: 0.0,
            clutter: ClutterParams::none(),
            target: target.then(|| TargetTrack {
                onset_frame: 8,
                trajectory: vec![(12.0, 10.0); n],
                contrast: (0..n).map(|k| if k < 8 { 0.0 } else { 10.0 }).collect(),
                radius: vec![1.0; n],
            }),
            initial_range_m: 2000.0,
            closing_speed_m_per_frame: 10.0,
            seed: 99,
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let mut sc = quiet_scenario(true);
        sc.noise_sigma = 0.4;
        sc.clutter = ClutterParams {
            octaves: 3,
            amplitude: 10.0,
            scale: 8.0,
            drift: (0.2, 0.15),
            border_fade_px: 0.0,
            blobs: vec![CloudBlob {
                x: 5.0,
                y: 5.0,
                core_radius: 1.2,
                edge_sigma: 0.6,
                contrast: 6.0,
                start_frame: 2,
                end_frame: 6,
            }],
        };
        for k in [0, 3, 9, 19] {
            assert_eq!(sc.render_frame(k).unwrap(), sc.render_frame(k).unwrap());
        }
        assert!(sc.render_frame(20).is_err());
    }

    #[test]
    fn frames_before_onset_are_target_free() {
        let mut with_target = quiet_scenario(true);
        with_target.noise_sigma = 0.3;
        let mut without = with_target.clone();
        without.target = None;
        without.category = ScenarioCategory::TargetFree;
        for k in 0..8 {
            assert_eq!(
                with_target.render_frame(k).unwrap(),
                without.render_frame(k).unwrap(),
                "frame {k} differs before onset"
            );
        }
        assert_ne!(
            with_target.render_frame(8).unwrap(),
            without.render_frame(8).unwrap()
        );
    }

    #[test]
    fn target_depth_tracks_contrast() {
        let sc = quiet_scenario(true);
        let frame = sc.render_frame(10).unwrap();
        let depth = 100.0 - frame.get(12, 10);
        // Pixel-centered sigma-1 spot: the core keeps ~85% of the nominal
        // contrast once the footprint average is taken.
        let coverage = pixel_coverage(0.0, 1.0);
        let expected = 10.0 * coverage * coverage;
        assert!(
            (depth - expected).abs() < 1e-9,
            "depth {depth}, expected {expected}"
        );
        assert!(depth > 8.0 && depth <= 10.0);
        // Neighbors inside the spot stay brighter than the core.
        assert!(frame.get(11, 10) > frame.get(12, 10));
    }

    #[test]
    fn ground_truth_labels_follow_onset() {
        let sc = quiet_scenario(true);
        let (frames, truth) = sc.generate_sequence().unwrap();
        assert_eq!(frames.len(), 20);
        assert_eq!(truth.target_pixel.iter().filter(|p| p.is_some()).count(), 12);
        for k in 0..8 {
            assert!(truth.target_pixel[k].is_none());
        }
        assert_eq!(truth.pixel_xy(10), Some((12, 10)));
    }

    #[test]
    fn range_mapping_is_linear_and_validated() {
        let mut sc = quiet_scenario(false);
        sc.initial_range_m = 4000.0;
        sc.closing_speed_m_per_frame = 10.0;
        sc.frame_count = 151;
        assert_eq!(sc.range_at_frame(150).unwrap(), 2500.0);
        assert_eq!(sc.range_at_frame(0).unwrap(), 4000.0);
        let mut last = f64::INFINITY;
        for k in 0..sc.frame_count {
            let r = sc.range_at_frame(k).unwrap();
            assert!(r < last);
            last = r;
        }
        sc.frame_count = 500;
        assert!(sc.validate().is_err());
    }

    #[test]
    fn trajectory_deltas_must_stay_in_the_patch() {
        let mut sc = quiet_scenario(true);
        let t = sc.target.as_mut().unwrap();
        t.trajectory[5] = (14.0, 10.0);
        t.trajectory[6] = (12.0, 10.0); // 2 px jump left
        assert!(sc.validate().is_err());

        let mut sc = quiet_scenario(true);
        let t = sc.target.as_mut().unwrap();
        t.trajectory[6] = (12.0, 11.5); // downward motion
        assert!(sc.validate().is_err());
    }

    #[test]
    fn standard_suite_shape_and_determinism() {
        let a = standard_suite(7);
        let b = standard_suite(7);
        assert_eq!(a, b);
        assert_eq!(a.len(), 15);
        let target_free = a
            .iter()
            .filter(|s| s.category == ScenarioCategory::TargetFree)
            .count();
        assert_eq!(target_free, 2);
        let blobby = a
            .iter()
            .filter(|s| {
                s.category == ScenarioCategory::BlobClutter && !s.clutter.blobs.is_empty()
            })
            .count();
        assert!(blobby >= 3);
        for sc in &a {
            sc.validate().unwrap();
            for blob in &sc.clutter.blobs {
                assert!(blob.core_radius >= 1.5 && blob.core_radius <= 2.2);
                if let Some(t) = &sc.target {
                    assert!(blob.end_frame + 10 <= t.onset_frame);
                }
            }
        }
        let c = standard_suite(8);
        assert_ne!(a, c);
    }

    #[test]
    fn suite_save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut sc = quiet_scenario(true);
        sc.noise_sigma = 0.2;
        sc.name = "case-00".into();
        save_suite(dir.path(), 7, std::slice::from_ref(&sc)).unwrap();
        let (manifest, cases) = load_suite(dir.path()).unwrap();
        assert_eq!(manifest.cases, vec!["case-00".to_string()]);
        assert_eq!(cases.len(), 1);
        assert_eq!(cases[0].scenario, sc);
        assert_eq!(cases[0].frames.len(), 20);
        // Loaded frames are the quantized renders.
        let rendered = sc.render_frame(3).unwrap();
        let quantized: Vec<f64> = rendered.quantize_u8().iter().map(|&b| b as f64).collect();
        assert_eq!(cases[0].frames[3].values(), quantized.as_slice());
    }
}
