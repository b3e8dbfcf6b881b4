//! Value iteration for the optimal stopping problem on the discretized
//! belief simplex.
//!
//! Starting from the stop-everywhere table `V_0 = min_i S_i`, each sweep
//! applies
//!
//! ```text
//! V(b) = min( min_i S_i(b),  C(b) + sum_y P(y | b) V(update(b, y)) )
//! ```
//!
//! with off-grid successors evaluated by barycentric interpolation. The
//! iterates decrease monotonically and are bounded below by zero, so the
//! sweep delta is a faithful convergence measure.

use rayon::prelude::*;
use serde::Serialize;

use crate::detection::CostModel;
use crate::error::{CoreError, Result};
use crate::hmm::TransitionModel;

use super::grid::SimplexGrid;
use super::DiscreteObservationModel;

/// Stopping criteria for the solver.
#[derive(Debug, Clone, Copy)]
pub struct ValueIterationOptions {
    /// Sweep terminates when the max value change drops below this.
    pub tolerance: f64,
    /// Hard sweep budget; exceeding it flags the solution as
    /// non-converged.
    pub max_sweeps: usize,
}

impl Default for ValueIterationOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_sweeps: 20_000,
        }
    }
}

/// Converged (or budget-exhausted) solution of the recursion.
#[derive(Debug, Clone)]
pub struct ValueSolution {
    pub grid: SimplexGrid,
    /// V at every grid point.
    pub values: Vec<f64>,
    /// Continue cost Q = C + E[V(successor)] at every grid point.
    pub q_values: Vec<f64>,
    /// Stopping location where stopping is optimal (Q >= S̄), else `None`.
    pub stop_action: Vec<Option<usize>>,
    pub converged: bool,
    pub sweeps: usize,
    pub final_delta: f64,
    /// Max-norm change per sweep, for contraction diagnostics.
    pub sweep_deltas: Vec<f64>,
}

/// Per-point precomputation: static costs and, per symbol, the
/// observation probability and the successor's interpolation cell.
struct PointDynamics {
    continue_cost: f64,
    stop_best: f64,
    stop_argmin: usize,
    /// `(P(y | point), successor cell)` for each symbol with positive
    /// probability.
    transitions: Vec<(f64, Vec<(usize, f64)>)>,
}

fn precompute_dynamics(
    grid: &SimplexGrid,
    tm: &TransitionModel,
    obs: &DiscreteObservationModel,
    cm: &CostModel,
) -> Result<Vec<PointDynamics>> {
    if cm.width() != grid.width() || cm.height() != grid.height() {
        return Err(CoreError::invalid(
            "cost model",
            format!(
                "cost model is {}x{} but grid is {}x{}",
                cm.width(),
                cm.height(),
                grid.width(),
                grid.height()
            ),
        ));
    }
    obs.check_states(grid.n_states())?;
    let a = tm.dense_matrix(grid.width(), grid.height());
    let dim = grid.n_states();
    let m = obs.alphabet_size();

    (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let belief = grid.belief(idx);
            let coords = grid.coords(idx);
            let continue_cost = cm.continue_cost(&belief);
            let stop_costs = cm.stop_costs(&belief);
            let (stop_argmin, stop_best) = stop_costs
                .iter()
                .enumerate()
                .fold((0usize, f64::INFINITY), |(bi, bv), (i, &v)| {
                    if v < bv {
                        (i, v)
                    } else {
                        (bi, bv)
                    }
                });

            let mut predicted = vec![0.0; dim];
            for (dest, slot) in predicted.iter_mut().enumerate() {
                for src in 0..dim {
                    *slot += a[dest * dim + src] * coords[src];
                }
            }

            let mut transitions = Vec::with_capacity(m);
            for y in 0..m {
                let mut posterior: Vec<f64> = (0..dim)
                    .map(|i| obs.emission(i, y) * predicted[i])
                    .collect();
                let p_y: f64 = posterior.iter().sum();
                if p_y <= 0.0 {
                    continue;
                }
                posterior.iter_mut().for_each(|v| *v /= p_y);
                transitions.push((p_y, grid.barycentric(&posterior)));
            }
            Ok(PointDynamics {
                continue_cost,
                stop_best,
                stop_argmin,
                transitions,
            })
        })
        .collect()
}

/// Solves the recursion over the whole grid.
pub fn value_iteration(
    grid: SimplexGrid,
    tm: &TransitionModel,
    obs: &DiscreteObservationModel,
    cm: &CostModel,
    options: ValueIterationOptions,
) -> Result<ValueSolution> {
    let dynamics = precompute_dynamics(&grid, tm, obs, cm)?;

    let mut values: Vec<f64> = dynamics.iter().map(|d| d.stop_best).collect();
    let mut sweep_deltas = Vec::new();
    let mut converged = false;

    let q_of = |d: &PointDynamics, values: &[f64]| -> f64 {
        let expectation: f64 = d
            .transitions
            .iter()
            .map(|(p_y, cell)| {
                let v: f64 = cell.iter().map(|&(i, w)| values[i] * w).sum();
                p_y * v
            })
            .sum();
        d.continue_cost + expectation
    };

    while sweep_deltas.len() < options.max_sweeps {
        let next: Vec<f64> = dynamics
            .par_iter()
            .zip(&values)
            .map(|(d, _)| q_of(d, &values).min(d.stop_best))
            .collect();
        let delta = next
            .par_iter()
            .zip(&values)
            .map(|(a, b)| (a - b).abs())
            .reduce(|| 0.0, f64::max);
        values = next;
        sweep_deltas.push(delta);
        if delta < options.tolerance {
            converged = true;
            break;
        }
    }

    let q_values: Vec<f64> = dynamics.par_iter().map(|d| q_of(d, &values)).collect();
    let stop_action: Vec<Option<usize>> = dynamics
        .iter()
        .zip(&q_values)
        .map(|(d, &q)| (q >= d.stop_best).then_some(d.stop_argmin))
        .collect();

    let final_delta = sweep_deltas.last().copied().unwrap_or(0.0);
    Ok(ValueSolution {
        grid,
        values,
        q_values,
        stop_action,
        converged,
        sweeps: sweep_deltas.len(),
        final_delta,
        sweep_deltas,
    })
}

impl ValueSolution {
    /// Grid points where stopping at `location` costs no more than
    /// continuing: the discrete stopping region for that location.
    pub fn stopping_region(&self, location: usize, cm: &CostModel) -> Vec<usize> {
        (0..self.grid.len())
            .filter(|&idx| {
                let belief = self.grid.belief(idx);
                cm.stop_cost(location, &belief) <= self.q_values[idx]
            })
            .collect()
    }

    /// All locations' stopping regions.
    pub fn stopping_regions(&self, cm: &CostModel) -> Vec<Vec<usize>> {
        (0..self.grid.width() * self.grid.height())
            .map(|i| self.stopping_region(i, cm))
            .collect()
    }
}

/// Serializable dump of the solved table.
#[derive(Debug, Clone, Serialize)]
pub struct ValueTableRow {
    pub belief: Vec<f64>,
    pub value: f64,
    pub q_value: f64,
    pub stop_location: Option<usize>,
}

impl ValueSolution {
    pub fn table_rows(&self) -> Vec<ValueTableRow> {
        (0..self.grid.len())
            .map(|idx| ValueTableRow {
                belief: self.grid.coords(idx),
                value: self.values[idx],
                q_value: self.q_values[idx],
                stop_location: self.stop_action[idx],
            })
            .collect()
    }

    /// CSV dump `(belief coords..., V, Q, action)`.
    pub fn write_table_csv(&self, path: &std::path::Path) -> Result<()> {
        use std::io::Write;
        let file = std::fs::File::create(path).map_err(|e| CoreError::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let n = self.grid.n_states();
        let mut run = || -> std::io::Result<()> {
            let coords: Vec<String> = (0..n).map(|i| format!("b{i}")).collect();
            writeln!(w, "{},value,q_value,action", coords.join(","))?;
            for row in self.table_rows() {
                let coords: Vec<String> = row.belief.iter().map(|c| c.to_string()).collect();
                writeln!(
                    w,
                    "{},{},{},{}",
                    coords.join(","),
                    row.value,
                    row.q_value,
                    row.stop_location
                        .map(|l| l.to_string())
                        .unwrap_or_else(|| "continue".to_string())
                )?;
            }
            w.flush()
        };
        run().map_err(|e| CoreError::io(path, e))
    }
}
