//! Monte Carlo estimate of the greedy rule's false-alarm probability.
//!
//! Hidden-state trajectories are sampled from the transition model,
//! symbols from the discrete observation model; the exact Bayes filter
//! tracks the belief and the trial stops on first entry into the greedy
//! stopping region. A false alarm is a trial whose true state is
//! out-of-image at the stopping time.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::detection::{greedy_region_member, CostModel};
use crate::error::Result;
use crate::hmm::{BeliefState, TransitionModel};

use super::DiscreteObservationModel;

/// Result of a Monte Carlo false-alarm run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PfaEstimate {
    /// Fraction of stopped trials whose true state was out-of-image.
    pub false_alarm_rate: f64,
    /// Binomial standard error over the stopped trials.
    pub standard_error: f64,
    pub stopped_trials: usize,
    /// Trials that hit the step cap without entering the greedy region;
    /// excluded from the rate.
    pub unstopped_trials: usize,
    pub step_cap: usize,
}

/// Runs `trials` independent trajectories. Each trial draws its own
/// deterministic stream from the master seed, so results are reproducible
/// under any parallel schedule.
pub fn simulate_pfa(
    tm: &TransitionModel,
    obs: &DiscreteObservationModel,
    cm: &CostModel,
    trials: usize,
    seed: u64,
    step_cap: usize,
) -> Result<PfaEstimate> {
    let width = cm.width();
    let height = cm.height();
    let dim = width * height + 1;
    obs.check_states(dim)?;
    let a = tm.dense_matrix(width, height);

    let outcomes: Vec<Option<bool>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64 + 1);
            run_trial(&mut rng, &a, obs, cm, width, height, dim, step_cap)
        })
        .collect();

    let stopped = outcomes.iter().flatten().count();
    let false_alarms = outcomes.iter().flatten().filter(|fa| **fa).count();
    let rate = if stopped > 0 {
        false_alarms as f64 / stopped as f64
    } else {
        0.0
    };
    let standard_error = if stopped > 0 {
        (rate * (1.0 - rate) / stopped as f64).sqrt()
    } else {
        0.0
    };
    Ok(PfaEstimate {
        false_alarm_rate: rate,
        standard_error,
        stopped_trials: stopped,
        unstopped_trials: trials - stopped,
        step_cap,
    })
}

/// Returns `Some(was_false_alarm)` if the trial stopped, `None` at cap.
#[allow(clippy::too_many_arguments)]
fn run_trial(
    rng: &mut ChaCha8Rng,
    a: &[f64],
    obs: &DiscreteObservationModel,
    cm: &CostModel,
    width: usize,
    height: usize,
    dim: usize,
    step_cap: usize,
) -> Option<bool> {
    // X_0 ~ uniform initial distribution, matching the filter's prior.
    let mut state = rng.gen_range(0..dim);
    let mut belief = BeliefState::uniform(width, height).expect("valid dims");

    if greedy_region_member(&belief, cm).is_some() {
        return Some(state == dim - 1);
    }

    for _ in 0..step_cap {
        state = sample_column(rng, a, dim, state);
        let symbol = sample_emission(rng, obs, state);

        // Exact Bayes step against the same dense matrix.
        let probs = belief.probs();
        let mut next = vec![0.0; dim];
        for (dest, slot) in next.iter_mut().enumerate() {
            for src in 0..dim {
                *slot += a[dest * dim + src] * probs[src];
            }
            *slot *= obs.emission(dest, symbol);
        }
        let z: f64 = next.iter().sum();
        debug_assert!(z > 0.0, "observed symbol has zero model probability");
        next.iter_mut().for_each(|v| *v /= z);
        belief = BeliefState::from_probs(width, height, next).expect("normalized");

        if greedy_region_member(&belief, cm).is_some() {
            return Some(state == dim - 1);
        }
    }
    None
}

fn sample_column(rng: &mut ChaCha8Rng, a: &[f64], dim: usize, src: usize) -> usize {
    let draw: f64 = rng.gen();
    let mut acc = 0.0;
    for dest in 0..dim {
        acc += a[dest * dim + src];
        if draw < acc {
            return dest;
        }
    }
    dim - 1
}

fn sample_emission(rng: &mut ChaCha8Rng, obs: &DiscreteObservationModel, state: usize) -> usize {
    let draw: f64 = rng.gen();
    let mut acc = 0.0;
    for symbol in 0..obs.alphabet_size() {
        acc += obs.emission(state, symbol);
        if draw < acc {
            return symbol;
        }
    }
    obs.alphabet_size() - 1
}
