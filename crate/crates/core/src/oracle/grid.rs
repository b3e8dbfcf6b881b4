//! Discretization of the belief simplex: a lattice of compositions of the
//! resolution `R` into `N + 1` parts, with piecewise-linear interpolation
//! over the Freudenthal triangulation for off-grid beliefs.

use std::collections::HashMap;

use crate::error::{CoreError, Result};
use crate::hmm::BeliefState;

/// Enumerated belief lattice for a tiny image of `width x height` pixels
/// plus the out-of-image state.
#[derive(Debug, Clone)]
pub struct SimplexGrid {
    width: usize,
    height: usize,
    resolution: u32,
    points: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
}

impl SimplexGrid {
    /// Enumerates all nonnegative integer compositions of `resolution`
    /// into `width * height + 1` parts. The pixel count is capped at 3 to
    /// keep exhaustive sweeps cheap.
    pub fn new(width: usize, height: usize, resolution: u32) -> Result<Self> {
        let n = width * height;
        if n == 0 {
            return Err(CoreError::invalid("grid dimensions", "empty image"));
        }
        if n > 3 {
            return Err(CoreError::invalid(
                "grid dimensions",
                format!("{n} pixel states; the oracle is limited to 3"),
            ));
        }
        if resolution == 0 {
            return Err(CoreError::invalid("grid resolution", "must be >= 1"));
        }
        let mut points = Vec::new();
        let mut current = vec![0u32; n + 1];
        enumerate_compositions(resolution, 0, &mut current, &mut points);
        let index = points
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i))
            .collect();
        Ok(Self {
            width,
            height,
            resolution,
            points,
            index,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of states `N + 1`.
    pub fn n_states(&self) -> usize {
        self.width * self.height + 1
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<u32>] {
        &self.points
    }

    /// Lattice index of an integer composition, if it is on the grid.
    pub fn index_of(&self, composition: &[u32]) -> Option<usize> {
        self.index.get(composition).copied()
    }

    /// Grid index of the vertex `e_i`.
    pub fn vertex(&self, state: usize) -> usize {
        let mut composition = vec![0u32; self.n_states()];
        composition[state] = self.resolution;
        self.index[&composition]
    }

    /// Belief coordinates of a grid point.
    pub fn coords(&self, idx: usize) -> Vec<f64> {
        let r = self.resolution as f64;
        self.points[idx].iter().map(|&c| c as f64 / r).collect()
    }

    /// Grid point as a full [`BeliefState`].
    pub fn belief(&self, idx: usize) -> BeliefState {
        BeliefState::from_probs(self.width, self.height, self.coords(idx))
            .expect("grid points are valid beliefs")
    }

    /// Vertices and barycentric weights of the triangulation cell
    /// containing `belief` (coordinates summing to 1). Zero-weight
    /// vertices are dropped; weights sum to 1.
    ///
    /// Works in the suffix-sum coordinates `x_i = R * sum_{j >= i} b_j`,
    /// where the lattice is the set of monotone integer vectors and the
    /// Freudenthal simplex of the fractional parts gives the cell.
    pub fn barycentric(&self, belief: &[f64]) -> Vec<(usize, f64)> {
        let n = self.n_states();
        debug_assert_eq!(belief.len(), n);
        let r = self.resolution as f64;

        // Suffix sums x[0] = R >= x[1] >= ... >= x[n-1] >= 0; the free
        // coordinates are x[1..n].
        let mut xs = vec![0.0; n + 1];
        let mut acc = 0.0;
        for i in (0..n).rev() {
            acc += belief[i].max(0.0);
            xs[i] = (acc * r).clamp(0.0, r);
        }
        xs[n] = 0.0;

        let m = n - 1;
        let mut base = vec![0i64; n + 1];
        base[0] = self.resolution as i64;
        let mut frac = vec![0.0; n];
        for i in 1..n {
            let f = xs[i].floor();
            base[i] = f as i64;
            frac[i] = xs[i] - f;
        }

        // Descending fractional parts; ties resolve to the lower index so
        // increments preserve monotonicity.
        let mut order: Vec<usize> = (1..n).collect();
        order.sort_by(|&a, &b| {
            frac[b]
                .partial_cmp(&frac[a])
                .expect("fractional parts are finite")
                .then(a.cmp(&b))
        });

        let mut cell: Vec<(usize, f64)> = Vec::with_capacity(m + 1);
        let push = |vertex_x: &[i64], weight: f64, cell: &mut Vec<(usize, f64)>| {
            if weight <= 1e-12 {
                return;
            }
            // Difference the suffix sums back into a composition.
            let composition: Vec<u32> = (0..n)
                .map(|i| (vertex_x[i] - vertex_x[i + 1]).max(0) as u32)
                .collect();
            let idx = self.index[&composition];
            cell.push((idx, weight));
        };

        let first_weight = 1.0 - order.first().map(|&i| frac[i]).unwrap_or(0.0);
        push(&base, first_weight, &mut cell);
        let mut current = base;
        for (j, &coord) in order.iter().enumerate() {
            current[coord] += 1;
            let weight = if j + 1 < m {
                frac[coord] - frac[order[j + 1]]
            } else {
                frac[coord]
            };
            push(&current, weight, &mut cell);
        }

        // Weights telescope to 1; renormalize to absorb rounding.
        let total: f64 = cell.iter().map(|(_, w)| w).sum();
        if total > 0.0 {
            for (_, w) in &mut cell {
                *w /= total;
            }
        }
        cell
    }

    /// Piecewise-linear interpolation of a per-grid-point table.
    pub fn interpolate(&self, table: &[f64], belief: &[f64]) -> f64 {
        self.barycentric(belief)
            .iter()
            .map(|&(idx, w)| table[idx] * w)
            .sum()
    }
}

fn enumerate_compositions(
    remaining: u32,
    slot: usize,
    current: &mut Vec<u32>,
    out: &mut Vec<Vec<u32>>,
) {
    if slot == current.len() - 1 {
        current[slot] = remaining;
        out.push(current.clone());
        return;
    }
    for v in 0..=remaining {
        current[slot] = v;
        enumerate_compositions(remaining - v, slot + 1, current, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn binomial(n: u64, k: u64) -> u64 {
        let k = k.min(n - k);
        let mut acc = 1u64;
        for i in 0..k {
            acc = acc * (n - i) / (i + 1);
        }
        acc
    }

    #[test]
    fn point_count_matches_binomial() {
        for (w, h, r) in [(2, 1, 10), (2, 1, 50), (3, 1, 20), (1, 1, 7)] {
            let grid = SimplexGrid::new(w, h, r).unwrap();
            let n = (w * h) as u64;
            assert_eq!(grid.len() as u64, binomial(r as u64 + n, n));
            for p in grid.points() {
                assert_eq!(p.iter().sum::<u32>(), r);
            }
        }
    }

    #[test]
    fn rejects_oversized_images() {
        assert!(SimplexGrid::new(2, 2, 10).is_err());
        assert!(SimplexGrid::new(2, 1, 0).is_err());
    }

    #[test]
    fn barycentric_reproduces_grid_points_exactly() {
        let grid = SimplexGrid::new(2, 1, 17).unwrap();
        for idx in 0..grid.len() {
            let cell = grid.barycentric(&grid.coords(idx));
            assert_eq!(cell.len(), 1, "grid point should be its own cell");
            assert_eq!(cell[0].0, idx);
            assert!((cell[0].1 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn barycentric_weights_reconstruct_the_point() {
        let mut rng = StdRng::seed_from_u64(9);
        for (w, h, r) in [(2usize, 1usize, 13u32), (3, 1, 9), (1, 1, 5)] {
            let grid = SimplexGrid::new(w, h, r).unwrap();
            let n = grid.n_states();
            for _ in 0..300 {
                let mut b: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
                let sum: f64 = b.iter().sum();
                b.iter_mut().for_each(|v| *v /= sum);
                let cell = grid.barycentric(&b);
                assert!(!cell.is_empty());
                let total: f64 = cell.iter().map(|(_, w)| w).sum();
                assert!((total - 1.0).abs() < 1e-9);
                for coord in 0..n {
                    let rebuilt: f64 = cell
                        .iter()
                        .map(|&(idx, wgt)| grid.coords(idx)[coord] * wgt)
                        .sum();
                    assert!(
                        (rebuilt - b[coord]).abs() < 1e-9,
                        "coordinate {coord}: {rebuilt} vs {}",
                        b[coord]
                    );
                }
            }
        }
    }

    #[test]
    fn interpolation_is_exact_for_linear_functions() {
        let grid = SimplexGrid::new(2, 1, 25).unwrap();
        // f(b) = 3 b0 - 2 b1 + 0.5 b2 is linear, so PL interpolation
        // reproduces it everywhere.
        let table: Vec<f64> = (0..grid.len())
            .map(|i| {
                let c = grid.coords(i);
                3.0 * c[0] - 2.0 * c[1] + 0.5 * c[2]
            })
            .collect();
        let mut rng = StdRng::seed_from_u64(10);
        for _ in 0..200 {
            let mut b: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..1.0)).collect();
            let sum: f64 = b.iter().sum();
            b.iter_mut().for_each(|v| *v /= sum);
            let expected = 3.0 * b[0] - 2.0 * b[1] + 0.5 * b[2];
            let got = grid.interpolate(&table, &b);
            assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
        }
    }

    #[test]
    fn vertices_resolve_to_unit_compositions() {
        let grid = SimplexGrid::new(2, 1, 50).unwrap();
        for state in 0..3 {
            let idx = grid.vertex(state);
            let coords = grid.coords(idx);
            assert_eq!(coords[state], 1.0);
        }
    }
}
