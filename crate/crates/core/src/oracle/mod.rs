//! Desk-scale dynamic-programming oracle.
//!
//! The main pipeline never solves the stopping problem exactly — that is
//! the point of the greedy rules. This module solves it anyway, on an
//! image small enough (at most 3 pixels) that the belief simplex can be
//! discretized and swept exhaustively, and turns the structural results
//! into numerical checks:
//!
//! - the per-location stopping regions are convex and contain their
//!   vertices,
//! - the greedy regions are contained in the optimal ones,
//! - the greedy rule's false-alarm probability respects the
//!   `c_m / (c_m + c_2)` bound.
//!
//! Unlike the image pipeline's unnormalized `bottom_hat + 1` likelihoods,
//! the oracle uses a proper row-stochastic emission table; the Bayes
//! update is otherwise identical, which a cross-module equivalence test
//! pins down.

mod checks;
mod grid;
mod pfa;
mod value;

pub use checks::{
    check_concavity, check_convexity, check_greedy_containment, ConcavityViolation,
    ContainmentViolation, ConvexityViolation,
};
pub use grid::SimplexGrid;
pub use pfa::{simulate_pfa, PfaEstimate};
pub use value::{value_iteration, ValueIterationOptions, ValueSolution, ValueTableRow};

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::hmm::{BeliefState, TransitionModel};

/// Row-stochastic emission table `P(symbol | state)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteObservationModel {
    emission: Vec<Vec<f64>>,
}

impl DiscreteObservationModel {
    /// Builds from explicit rows (one per state), each summing to 1.
    pub fn new(emission: Vec<Vec<f64>>) -> Result<Self> {
        if emission.is_empty() {
            return Err(CoreError::invalid("emission table", "no states"));
        }
        let m = emission[0].len();
        if m < 2 {
            return Err(CoreError::invalid(
                "emission table",
                "alphabet must have at least 2 symbols",
            ));
        }
        for (i, row) in emission.iter().enumerate() {
            if row.len() != m {
                return Err(CoreError::invalid(
                    "emission table",
                    format!("row {i} has {} entries, expected {m}", row.len()),
                ));
            }
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(CoreError::invalid(
                    "emission table",
                    format!("row {i} has negative or non-finite entries"),
                ));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(CoreError::invalid(
                    "emission table",
                    format!("row {i} sums to {sum}, expected 1 within 1e-12"),
                ));
            }
        }
        Ok(Self { emission })
    }

    /// Diagonally dominant table: state `i` emits symbol `min(i, M-1)`
    /// with probability `accuracy` and spreads the rest uniformly.
    /// `accuracy = 1` gives deterministic emissions.
    pub fn diagonal(n_states: usize, alphabet_size: usize, accuracy: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&accuracy) {
            return Err(CoreError::invalid(
                "emission accuracy",
                format!("{accuracy}; must be in [0, 1]"),
            ));
        }
        if alphabet_size < 2 {
            return Err(CoreError::invalid(
                "alphabet size",
                "must be at least 2",
            ));
        }
        let off = (1.0 - accuracy) / (alphabet_size as f64 - 1.0);
        let emission = (0..n_states)
            .map(|i| {
                let hot = i.min(alphabet_size - 1);
                (0..alphabet_size)
                    .map(|y| if y == hot { accuracy } else { off })
                    .collect()
            })
            .collect();
        Self::new(emission)
    }

    pub fn alphabet_size(&self) -> usize {
        self.emission[0].len()
    }

    pub fn n_states(&self) -> usize {
        self.emission.len()
    }

    #[inline]
    pub fn emission(&self, state: usize, symbol: usize) -> f64 {
        self.emission[state][symbol]
    }

    /// Emission probabilities of one symbol across all states (a column
    /// of the table, i.e. the diagonal of `B(y)`).
    pub fn likelihood_column(&self, symbol: usize) -> Vec<f64> {
        self.emission.iter().map(|row| row[symbol]).collect()
    }

    pub(crate) fn check_states(&self, expected: usize) -> Result<()> {
        if self.n_states() != expected {
            return Err(CoreError::invalid(
                "emission table",
                format!("{} states, expected {expected}", self.n_states()),
            ));
        }
        Ok(())
    }
}

/// Exact Bayes update of a belief after observing `symbol`:
/// prediction through the transition matrix, then reweighting by the
/// emission column and normalizing.
pub fn belief_update(
    belief: &BeliefState,
    tm: &TransitionModel,
    obs: &DiscreteObservationModel,
    symbol: usize,
) -> Result<BeliefState> {
    let dim = belief.probs().len();
    obs.check_states(dim)?;
    if symbol >= obs.alphabet_size() {
        return Err(CoreError::invalid(
            "observation symbol",
            format!("{symbol} out of range 0..{}", obs.alphabet_size()),
        ));
    }
    let a = tm.dense_matrix(belief.width(), belief.height());
    let probs = belief.probs();
    let mut next = vec![0.0; dim];
    for (dest, slot) in next.iter_mut().enumerate() {
        for src in 0..dim {
            *slot += a[dest * dim + src] * probs[src];
        }
        *slot *= obs.emission(dest, symbol);
    }
    let z: f64 = next.iter().sum();
    if z <= 0.0 {
        return Err(CoreError::ZeroProbabilityObservation { symbol });
    }
    next.iter_mut().for_each(|v| *v /= z);
    BeliefState::from_probs(belief.width(), belief.height(), next)
}
