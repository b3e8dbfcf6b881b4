//! Detection logic: threshold statistics on the filter posterior, the
//! cost model behind them, and the detector loop with stopping-time
//! semantics.
//!
//! Three rules are provided:
//!
//! - **ISD** — the baseline statistic `1 - posterior(out-of-image)`, the
//!   total probability that a target is somewhere in the frame.
//! - **G1** — the largest single-pixel posterior.
//! - **G2** — the largest value of the posterior field correlated with a
//!   center-positive, neighbor-negative 3x3 kernel. Mass spread over
//!   several adjacent pixels (cloud artefacts) cancels itself; a
//!   single-pixel emergence does not.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::hmm::{filter_step, BeliefState, TransitionModel};
use crate::image::GrayImage;
use crate::morphology::StructuringElement;

/// Detection rule identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Isd,
    G1,
    G2,
}

impl Rule {
    pub const ALL: [Rule; 3] = [Rule::Isd, Rule::G1, Rule::G2];

    pub fn as_str(&self) -> &'static str {
        match self {
            Rule::Isd => "isd",
            Rule::G1 => "g1",
            Rule::G2 => "g2",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Rule {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "isd" => Ok(Rule::Isd),
            "g1" => Ok(Rule::G1),
            "g2" => Ok(Rule::G2),
            other => Err(CoreError::invalid(
                "rule",
                format!("`{other}`; expected isd, g1 or g2"),
            )),
        }
    }
}

/// Costs for the stopping problem: a per-pixel delay penalty, a false
/// alarm penalty on the out-of-image state, and an artefact penalty
/// placed uniformly on the 8-neighborhood of each candidate location.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    width: usize,
    height: usize,
    /// Delay penalty per pixel state (the out-of-image entry is 0).
    delays: Vec<f64>,
    false_alarm: f64,
    artefact_weight: f64,
}

impl CostModel {
    /// Uniform delay penalty on every pixel.
    pub fn uniform(
        width: usize,
        height: usize,
        delay: f64,
        false_alarm: f64,
        artefact_weight: f64,
    ) -> Result<Self> {
        Self::with_delays(
            width,
            height,
            vec![delay; width * height],
            false_alarm,
            artefact_weight,
        )
    }

    /// Per-pixel delay penalties (length N, all strictly positive).
    pub fn with_delays(
        width: usize,
        height: usize,
        delays: Vec<f64>,
        false_alarm: f64,
        artefact_weight: f64,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(CoreError::invalid(
                "cost model dimensions",
                format!("{width}x{height}; both must be >= 1"),
            ));
        }
        if delays.len() != width * height {
            return Err(CoreError::invalid(
                "delay penalties",
                format!("expected {} entries, got {}", width * height, delays.len()),
            ));
        }
        if delays.iter().any(|d| !d.is_finite() || *d <= 0.0) {
            return Err(CoreError::invalid(
                "delay penalties",
                "pixel entries must be finite and > 0",
            ));
        }
        if !(false_alarm.is_finite() && false_alarm > 0.0) {
            return Err(CoreError::invalid(
                "false alarm penalty",
                format!("{false_alarm}; must be > 0"),
            ));
        }
        if !(artefact_weight.is_finite() && artefact_weight >= 0.0) {
            return Err(CoreError::invalid(
                "artefact weight",
                format!("{artefact_weight}; must be >= 0"),
            ));
        }
        Ok(Self {
            width,
            height,
            delays,
            false_alarm,
            artefact_weight,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    pub fn false_alarm(&self) -> f64 {
        self.false_alarm
    }

    pub fn artefact_weight(&self) -> f64 {
        self.artefact_weight
    }

    /// The maximum delay constant `c_m`.
    pub fn max_delay(&self) -> f64 {
        self.delays.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
    }

    /// Cost of continuing one more step under the given belief.
    pub fn continue_cost(&self, belief: &BeliefState) -> f64 {
        self.assert_dims(belief);
        self.delays
            .iter()
            .zip(belief.pixel_probs())
            .map(|(d, p)| d * p)
            .sum()
    }

    /// Cost of stopping now and declaring location `i`.
    pub fn stop_cost(&self, i: usize, belief: &BeliefState) -> f64 {
        self.assert_dims(belief);
        let neigh = neighbor_sum_at(belief.pixel_probs(), self.width, self.height, i);
        self.false_alarm * belief.out_of_image() + self.artefact_weight * neigh
    }

    /// Stopping cost at every location; cheaper than N calls to
    /// [`CostModel::stop_cost`].
    pub fn stop_costs(&self, belief: &BeliefState) -> Vec<f64> {
        self.assert_dims(belief);
        let fa = self.false_alarm * belief.out_of_image();
        if self.artefact_weight == 0.0 {
            return vec![fa; self.delays.len()];
        }
        neighbor_sums(belief.pixel_probs(), self.width, self.height)
            .into_iter()
            .map(|n| fa + self.artefact_weight * n)
            .collect()
    }

    /// The greedy rule's false-alarm bound `c_m / (c_m + c_2)`.
    pub fn pfa_bound(&self) -> f64 {
        let c_m = self.max_delay();
        c_m / (c_m + self.false_alarm)
    }

    fn assert_dims(&self, belief: &BeliefState) {
        assert!(
            self.width == belief.width() && self.height == belief.height(),
            "cost model is {}x{} but belief is {}x{}",
            self.width,
            self.height,
            belief.width(),
            belief.height()
        );
    }
}

/// A declared detection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectionDecision {
    pub rule: Rule,
    /// 1-based count of frames processed when the rule fired; the initial
    /// belief (before any frame) is never tested.
    pub frame: u32,
    /// Row-major pixel index of the location decision.
    pub pixel: usize,
    /// The same location as `[x, y]`.
    pub pixel_xy: [usize; 2],
    pub statistic: f64,
    pub threshold: f64,
}

/// Baseline statistic: total in-image posterior mass `1 - out_of_image`.
pub fn isd_statistic(belief: &BeliefState) -> f64 {
    1.0 - belief.out_of_image()
}

/// Largest pixel posterior and its location (ties to the lowest row-major
/// index).
pub fn greedy1_statistic(belief: &BeliefState) -> (f64, usize) {
    argmax(belief.pixel_probs())
}

/// Correlation of the posterior pixel field with the 3x3 kernel that is
/// +1 at the center and -1 on the 8 neighbors, zero padded: each pixel's
/// own mass minus its in-image neighbor mass.
pub fn zeta(belief: &BeliefState) -> Vec<f64> {
    zeta_field(belief.pixel_probs(), belief.width(), belief.height())
}

pub(crate) fn zeta_field(field: &[f64], width: usize, height: usize) -> Vec<f64> {
    let neigh = neighbor_sums(field, width, height);
    field.iter().zip(neigh).map(|(v, n)| v - n).collect()
}

/// Largest kernel-penalised posterior and its location.
pub fn greedy2_statistic(belief: &BeliefState) -> (f64, usize) {
    argmax(&zeta(belief))
}

fn argmax(values: &[f64]) -> (f64, usize) {
    let mut best = f64::NEG_INFINITY;
    let mut best_idx = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > best {
            best = v;
            best_idx = i;
        }
    }
    (best, best_idx)
}

/// Sum of the in-image 8-neighborhood of every pixel.
pub(crate) fn neighbor_sums(field: &[f64], width: usize, height: usize) -> Vec<f64> {
    let mut out = vec![0.0; field.len()];
    for y in 0..height {
        let y0 = y.saturating_sub(1);
        let y1 = (y + 1).min(height - 1);
        for x in 0..width {
            let x0 = x.saturating_sub(1);
            let x1 = (x + 1).min(width - 1);
            let mut acc = 0.0;
            for qy in y0..=y1 {
                for qx in x0..=x1 {
                    if qx != x || qy != y {
                        acc += field[qy * width + qx];
                    }
                }
            }
            out[y * width + x] = acc;
        }
    }
    out
}

fn neighbor_sum_at(field: &[f64], width: usize, height: usize, i: usize) -> f64 {
    let (x, y) = (i % width, i / width);
    let y0 = y.saturating_sub(1);
    let y1 = (y + 1).min(height - 1);
    let x0 = x.saturating_sub(1);
    let x1 = (x + 1).min(width - 1);
    let mut acc = 0.0;
    for qy in y0..=y1 {
        for qx in x0..=x1 {
            if qx != x || qy != y {
                acc += field[qy * width + qx];
            }
        }
    }
    acc
}

/// Per-frame record of all three statistics plus filter diagnostics.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StatRecord {
    /// 1-based count of frames processed.
    pub frame: u32,
    pub isd: f64,
    pub g1: f64,
    pub g1_pixel: usize,
    pub g2: f64,
    pub g2_pixel: usize,
    pub out_of_image: f64,
}

impl StatRecord {
    pub fn statistic(&self, rule: Rule) -> f64 {
        match rule {
            Rule::Isd => self.isd,
            Rule::G1 => self.g1,
            Rule::G2 => self.g2,
        }
    }

    /// Location decision for the rule. The ISD statistic is a global sum;
    /// its location decision is the maximum-posterior pixel.
    pub fn pixel(&self, rule: Rule) -> usize {
        match rule {
            Rule::Isd | Rule::G1 => self.g1_pixel,
            Rule::G2 => self.g2_pixel,
        }
    }
}

fn record_from_belief(belief: &BeliefState, frame: u32) -> StatRecord {
    let (g1, g1_pixel) = greedy1_statistic(belief);
    let (g2, g2_pixel) = greedy2_statistic(belief);
    StatRecord {
        frame,
        isd: isd_statistic(belief),
        g1,
        g1_pixel,
        g2,
        g2_pixel,
        out_of_image: belief.out_of_image(),
    }
}

fn check_frame_dims(belief: &BeliefState, frame: &GrayImage, index: u32) -> Result<()> {
    if frame.width() != belief.width() || frame.height() != belief.height() {
        return Err(CoreError::DimensionMismatch {
            expected_width: belief.width(),
            expected_height: belief.height(),
            width: frame.width(),
            height: frame.height(),
            context: format!("frame {index}"),
        });
    }
    Ok(())
}

/// Runs the full pipeline over an ordered frame source and returns the
/// first declaration of `rule` at `threshold`, or `None` if the sequence
/// ends without a crossing.
///
/// Frames are counted from 1; the uniform initial belief is never tested,
/// so no declaration can precede the first frame.
pub fn run_detector<I>(
    frames: I,
    rule: Rule,
    threshold: f64,
    tm: &TransitionModel,
    se: &StructuringElement,
) -> Result<Option<DetectionDecision>>
where
    I: IntoIterator<Item = Result<GrayImage>>,
{
    let mut iter = frames.into_iter();
    let first = match iter.next() {
        Some(frame) => frame?,
        None => return Err(CoreError::invalid("frame source", "no frames")),
    };
    let mut belief = BeliefState::uniform(first.width(), first.height())?;
    let mut k: u32 = 0;
    let mut pending = Some(first);
    loop {
        let frame = match pending.take() {
            Some(f) => f,
            None => match iter.next() {
                Some(f) => f?,
                None => return Ok(None),
            },
        };
        k += 1;
        check_frame_dims(&belief, &frame, k)?;
        let (next, _) = filter_step(&belief, &frame, tm, se)?;
        belief = next;
        let (statistic, pixel) = match rule {
            Rule::Isd => {
                let (_, px) = greedy1_statistic(&belief);
                (isd_statistic(&belief), px)
            }
            Rule::G1 => greedy1_statistic(&belief),
            Rule::G2 => greedy2_statistic(&belief),
        };
        if statistic >= threshold {
            return Ok(Some(DetectionDecision {
                rule,
                frame: k,
                pixel,
                pixel_xy: [pixel % belief.width(), pixel / belief.width()],
                statistic,
                threshold,
            }));
        }
    }
}

/// Runs the pipeline over the whole sequence and records every frame's
/// statistics. [`run_detector`]'s declaration is exactly the first record
/// whose statistic crosses the threshold.
pub fn trace_statistics<I>(
    frames: I,
    tm: &TransitionModel,
    se: &StructuringElement,
) -> Result<Vec<StatRecord>>
where
    I: IntoIterator<Item = Result<GrayImage>>,
{
    let mut belief: Option<BeliefState> = None;
    let mut records = Vec::new();
    for (idx, frame) in frames.into_iter().enumerate() {
        let frame = frame?;
        let k = idx as u32 + 1;
        let current = match belief.take() {
            Some(b) => b,
            None => BeliefState::uniform(frame.width(), frame.height())?,
        };
        check_frame_dims(&current, &frame, k)?;
        let (next, _) = filter_step(&current, &frame, tm, se)?;
        records.push(record_from_belief(&next, k));
        belief = Some(next);
    }
    if records.is_empty() {
        return Err(CoreError::invalid("frame source", "no frames"));
    }
    Ok(records)
}

/// First declaration in a recorded trace, equivalent to re-running
/// [`run_detector`] at the same threshold.
pub fn first_crossing(
    records: &[StatRecord],
    rule: Rule,
    threshold: f64,
    width: usize,
) -> Option<DetectionDecision> {
    records
        .iter()
        .find(|r| r.statistic(rule) >= threshold)
        .map(|r| {
            let pixel = r.pixel(rule);
            DetectionDecision {
                rule,
                frame: r.frame,
                pixel,
                pixel_xy: [pixel % width, pixel / width],
                statistic: r.statistic(rule),
                threshold,
            }
        })
}

/// Least location whose stopping cost does not exceed the continuing
/// cost, i.e. membership of the belief in the greedy stopping region.
pub fn greedy_region_member(belief: &BeliefState, cm: &CostModel) -> Option<usize> {
    let c = cm.continue_cost(belief);
    cm.stop_costs(belief).iter().position(|s| *s <= c)
}

/// Writes the per-frame statistic trace as CSV.
pub fn write_trace_csv(path: &Path, records: &[StatRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| CoreError::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let mut run = || -> std::io::Result<()> {
        writeln!(w, "frame,isd,g1,g2,out_of_image_mass")?;
        for r in records {
            writeln!(w, "{},{},{},{},{}", r.frame, r.isd, r.g1, r.g2, r.out_of_image)?;
        }
        w.flush()
    };
    run().map_err(|e| CoreError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn belief_from(w: usize, h: usize, probs: Vec<f64>) -> BeliefState {
        BeliefState::from_probs(w, h, probs).unwrap()
    }

    fn random_belief(rng: &mut StdRng, w: usize, h: usize) -> BeliefState {
        let mut probs: Vec<f64> = (0..w * h + 1).map(|_| rng.gen_range(0.0..1.0)).collect();
        let sum: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= sum);
        belief_from(w, h, probs)
    }

    fn delta_belief(w: usize, h: usize, i: usize) -> BeliefState {
        let mut probs = vec![0.0; w * h + 1];
        probs[i] = 1.0;
        belief_from(w, h, probs)
    }

    #[test]
    fn isd_examples() {
        let uniform = BeliefState::uniform(2, 2).unwrap();
        assert!((isd_statistic(&uniform) - 0.8).abs() < 1e-15);
        let out = delta_belief(2, 2, 4);
        assert_eq!(isd_statistic(&out), 0.0);
        let mut rng = StdRng::seed_from_u64(1);
        for _ in 0..50 {
            let b = random_belief(&mut rng, 4, 3);
            let sum: f64 = b.pixel_probs().iter().sum();
            assert!((isd_statistic(&b) - sum).abs() < 1e-12);
        }
    }

    #[test]
    fn greedy1_examples() {
        let b = delta_belief(3, 3, 7);
        assert_eq!(greedy1_statistic(&b), (1.0, 7));
        let uniform = BeliefState::uniform(2, 2).unwrap();
        assert_eq!(greedy1_statistic(&uniform), (0.2, 0));
        let mut rng = StdRng::seed_from_u64(2);
        for _ in 0..50 {
            let b = random_belief(&mut rng, 5, 4);
            assert!(greedy1_statistic(&b).0 <= isd_statistic(&b));
        }
    }

    #[test]
    fn zeta_isolated_interior_pixel() {
        let p = 0.3;
        let mut probs = vec![0.0; 26];
        probs[2 * 5 + 2] = p;
        probs[25] = 1.0 - p;
        let b = belief_from(5, 5, probs);
        let z = zeta(&b);
        for y in 0..5i32 {
            for x in 0..5i32 {
                let v = z[(y * 5 + x) as usize];
                let d = (x - 2).abs().max((y - 2).abs());
                match d {
                    0 => assert_eq!(v, p),
                    1 => assert_eq!(v, -p),
                    _ => assert_eq!(v, 0.0),
                }
            }
        }
    }

    #[test]
    fn zeta_uniform_block_center() {
        let p = 0.05;
        let mut probs = vec![0.0; 26];
        for y in 1..=3 {
            for x in 1..=3 {
                probs[y * 5 + x] = p;
            }
        }
        probs[25] = 1.0 - 9.0 * p;
        let b = belief_from(5, 5, probs);
        let z = zeta(&b);
        assert!((z[2 * 5 + 2] - (p - 8.0 * p)).abs() < 1e-15);
    }

    #[test]
    fn zeta_corner_uses_zero_padding() {
        let p = 0.4;
        let mut probs = vec![0.0; 26];
        probs[0] = p;
        probs[25] = 1.0 - p;
        let b = belief_from(5, 5, probs);
        let z = zeta(&b);
        assert_eq!(z[0], p);
    }

    #[test]
    fn zeta_matches_brute_force_and_conserves_degree_sum() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..40 {
            let w = rng.gen_range(1..=8);
            let h = rng.gen_range(1..=8);
            let b = random_belief(&mut rng, w, h);
            let z = zeta(&b);
            let naive = reference::naive_zeta(&b);
            for (a, c) in z.iter().zip(&naive) {
                assert!((a - c).abs() < 1e-15);
            }
            let total: f64 = z.iter().sum();
            let expected: f64 = b
                .pixel_probs()
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let (x, y) = (i % w, i / w);
                    let nx = (x > 0) as usize + 1 + (x + 1 < w) as usize;
                    let ny = (y > 0) as usize + 1 + (y + 1 < h) as usize;
                    v * (1.0 - (nx * ny - 1) as f64)
                })
                .sum();
            assert!((total - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn greedy2_examples() {
        let b = delta_belief(4, 4, 5);
        assert_eq!(greedy2_statistic(&b), (1.0, 5));
        let uniform = BeliefState::uniform(4, 4).unwrap();
        let (stat, _) = greedy2_statistic(&uniform);
        assert!(stat < 0.0);
        let u = 1.0 / 17.0;
        assert!((stat - (-2.0 * u)).abs() < 1e-15);
        let mut rng = StdRng::seed_from_u64(4);
        for _ in 0..50 {
            let b = random_belief(&mut rng, 5, 4);
            assert!(greedy2_statistic(&b).0 <= greedy1_statistic(&b).0);
        }
    }

    #[test]
    fn greedy_region_member_examples() {
        // With no artefact weight, a pure pixel belief makes stopping free
        // at every location; the least index wins and membership holds in
        // particular at the target pixel (stop cost 0 <= continue cost 1).
        let cm = CostModel::uniform(2, 2, 1.0, 9.0, 0.0).unwrap();
        for i in 0..4 {
            let b = delta_belief(2, 2, i);
            assert_eq!(greedy_region_member(&b, &cm), Some(0));
            assert_eq!(cm.stop_cost(i, &b), 0.0);
            assert!(cm.stop_cost(i, &b) <= cm.continue_cost(&b));
        }
        // An artefact weight above the continue cost prices out every
        // neighbor of the target, leaving the target pixel itself as the
        // least member.
        let cm_w = CostModel::uniform(2, 2, 1.0, 9.0, 2.0).unwrap();
        for i in 0..4 {
            let b = delta_belief(2, 2, i);
            assert_eq!(greedy_region_member(&b, &cm_w), Some(i));
        }
        let out = delta_belief(2, 2, 4);
        assert_eq!(greedy_region_member(&out, &cm), None);

        let cm_rand = CostModel::uniform(3, 2, 1.0, 9.0, 0.0).unwrap();
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..100 {
            let b = random_belief(&mut rng, 3, 2);
            let member = greedy_region_member(&b, &cm_rand).is_some();
            let direct = cm_rand.false_alarm() * b.out_of_image() <= cm_rand.continue_cost(&b);
            assert_eq!(member, direct);
        }
    }

    #[test]
    fn greedy_region_with_zero_weight_reduces_to_isd_threshold() {
        let cm = CostModel::uniform(3, 3, 2.0, 5.0, 0.0).unwrap();
        let threshold = cm.false_alarm() / (cm.max_delay() + cm.false_alarm());
        let mut rng = StdRng::seed_from_u64(6);
        for _ in 0..200 {
            let b = random_belief(&mut rng, 3, 3);
            let member = greedy_region_member(&b, &cm).is_some();
            let via_isd = isd_statistic(&b) >= threshold;
            assert_eq!(member, via_isd);
        }
    }

    #[test]
    fn pfa_bound_examples() {
        let cm = CostModel::uniform(2, 2, 1.0, 9.0, 0.0).unwrap();
        assert!((cm.pfa_bound() - 0.1).abs() < 1e-15);
        let cm = CostModel::with_delays(3, 1, vec![1.0, 3.0, 2.0], 3.0, 0.0).unwrap();
        assert!((cm.pfa_bound() - 0.5).abs() < 1e-15);
        let cm = CostModel::uniform(2, 2, 1.0, 1e12, 0.0).unwrap();
        assert!(cm.pfa_bound() < 1e-11);
    }

    #[test]
    fn cost_model_validation() {
        assert!(CostModel::uniform(2, 2, 0.0, 1.0, 0.0).is_err());
        assert!(CostModel::uniform(2, 2, 1.0, 0.0, 0.0).is_err());
        assert!(CostModel::uniform(2, 2, 1.0, 1.0, -0.1).is_err());
        assert!(CostModel::with_delays(2, 2, vec![1.0; 3], 1.0, 0.0).is_err());
    }

    fn noisy_frames(count: usize, w: usize, h: usize, seed: u64) -> Vec<GrayImage> {
        let mut rng = StdRng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let values = (0..w * h).map(|_| rng.gen_range(0.0..60.0)).collect();
                GrayImage::new(w, h, values).unwrap()
            })
            .collect()
    }

    #[test]
    fn detector_declares_immediately_at_zero_threshold() {
        let tm = TransitionModel::default();
        let se = StructuringElement::square(3).unwrap();
        let frames = noisy_frames(10, 6, 5, 7);
        let decision = run_detector(
            frames.iter().cloned().map(Ok),
            Rule::Isd,
            0.0,
            &tm,
            &se,
        )
        .unwrap()
        .unwrap();
        assert_eq!(decision.frame, 1);
        assert!(decision.statistic >= 0.0);
    }

    #[test]
    fn detector_never_declares_above_one_for_g1() {
        let tm = TransitionModel::default();
        let se = StructuringElement::square(3).unwrap();
        let frames = noisy_frames(30, 6, 5, 8);
        let decision =
            run_detector(frames.iter().cloned().map(Ok), Rule::G1, 1.5, &tm, &se).unwrap();
        assert!(decision.is_none());
    }

    #[test]
    fn detector_rejects_empty_source_and_dim_drift() {
        let tm = TransitionModel::default();
        let se = StructuringElement::square(3).unwrap();
        assert!(run_detector(std::iter::empty(), Rule::G1, 0.5, &tm, &se).is_err());

        let mut frames = noisy_frames(3, 6, 5, 9);
        frames.push(GrayImage::zeros(5, 6).unwrap());
        let err = run_detector(frames.iter().cloned().map(Ok), Rule::G1, 2.0, &tm, &se);
        assert!(matches!(err, Err(CoreError::DimensionMismatch { .. })));
    }

    #[test]
    fn first_crossing_agrees_with_run_detector() {
        let tm = TransitionModel::default();
        let se = StructuringElement::square(3).unwrap();
        let frames = noisy_frames(40, 8, 6, 10);
        let records = trace_statistics(frames.iter().cloned().map(Ok), &tm, &se).unwrap();
        assert_eq!(records.len(), 40);
        for rule in Rule::ALL {
            for threshold in [0.0, 0.05, 0.2, 0.9, 1.5] {
                let from_trace = first_crossing(&records, rule, threshold, 8);
                let direct =
                    run_detector(frames.iter().cloned().map(Ok), rule, threshold, &tm, &se)
                        .unwrap();
                match (from_trace, direct) {
                    (None, None) => {}
                    (Some(a), Some(b)) => {
                        assert_eq!(a.frame, b.frame);
                        assert_eq!(a.pixel, b.pixel);
                        assert_eq!(a.statistic, b.statistic);
                    }
                    (a, b) => panic!("trace {a:?} vs direct {b:?}"),
                }
            }
        }
    }

    proptest! {
        #[test]
        fn statistic_ordering_holds(seed in 0u64..300) {
            let mut rng = StdRng::seed_from_u64(seed);
            let b = random_belief(&mut rng, 6, 5);
            let isd = isd_statistic(&b);
            let (g1, _) = greedy1_statistic(&b);
            let (g2, _) = greedy2_statistic(&b);
            prop_assert!(isd >= g1 - 1e-12);
            prop_assert!(g1 >= g2);
        }

        #[test]
        fn raising_threshold_never_declares_earlier(seed in 0u64..50) {
            let tm = TransitionModel::default();
            let se = StructuringElement::square(3).unwrap();
            let frames = noisy_frames(25, 6, 5, seed);
            let records = trace_statistics(frames.iter().cloned().map(Ok), &tm, &se).unwrap();
            for rule in Rule::ALL {
                let lo = first_crossing(&records, rule, 0.1, 6).map(|d| d.frame);
                let hi = first_crossing(&records, rule, 0.3, 6).map(|d| d.frame);
                match (lo, hi) {
                    (Some(a), Some(b)) => prop_assert!(a <= b),
                    (None, Some(_)) => prop_assert!(false, "higher threshold declared, lower did not"),
                    _ => {}
                }
            }
        }

        #[test]
        fn zeta_argmax_is_scale_invariant(seed in 0u64..200, alpha in 0.01f64..50.0) {
            let mut rng = StdRng::seed_from_u64(seed);
            let b = random_belief(&mut rng, 6, 5);
            let field: Vec<f64> = b.pixel_probs().to_vec();
            let scaled: Vec<f64> = field.iter().map(|v| v * alpha).collect();
            let z1 = zeta_field(&field, 6, 5);
            let z2 = zeta_field(&scaled, 6, 5);
            for (a, c) in z1.iter().zip(&z2) {
                prop_assert!((a * alpha - c).abs() <= 1e-12 * alpha.max(1.0));
            }
            let am1 = super::argmax(&z1).1;
            let am2 = super::argmax(&z2).1;
            prop_assert_eq!(am1, am2);
        }
    }
}
