//! Uniform time grids on `[t, 0]` and fields sampled on them.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::space::ScalarField;

/// Uniform grid `t_k = t_start + k Δt`, `k = 0..=K`, ending exactly at `0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TimeGrid {
    dt: f64,
    steps: usize,
}

impl TimeGrid {
    /// Grid over `[t_start, 0]`; `|t_start|` must be an integer multiple of `dt`
    /// up to a relative `1e-9`.
    pub fn new(t_start: f64, dt: f64) -> Result<Self> {
        if !(t_start <= 0.0) || !t_start.is_finite() {
            return Err(Error::InvalidArgument(format!("start time must be <= 0, got {t_start}")));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        let ratio = -t_start / dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "horizon {} is not a multiple of the step {dt}",
                -t_start
            )));
        }
        Ok(TimeGrid { dt, steps: steps as usize })
    }

    pub fn from_steps(steps: usize, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        Ok(TimeGrid { dt, steps })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of steps `K`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of nodes `K + 1`.
    pub fn nodes(&self) -> usize {
        self.steps + 1
    }

    pub fn t_start(&self) -> f64 {
        self.time(0)
    }

    /// `t_k = (k - K) Δt`, so the final node is exactly `+0`.
    pub fn time(&self, k: usize) -> f64 {
        (k as f64 - self.steps as f64) * self.dt
    }

    /// The grid restricted to the last `steps` steps (nodes `K-steps..=K`).
    pub fn tail(&self, steps: usize) -> TimeGrid {
        TimeGrid { dt: self.dt, steps: steps.min(self.steps) }
    }
}

/// A vertex field at every node of a [`TimeGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarFieldPath {
    grid: TimeGrid,
    values: Vec<ScalarField>,
}

impl ScalarFieldPath {
    pub fn new(grid: TimeGrid, values: Vec<ScalarField>) -> Result<Self> {
        if values.len() != grid.nodes() {
            return Err(Error::DimensionMismatch { expected: grid.nodes(), got: values.len() });
        }
        if let Some(first) = values.first() {
            if let Some(bad) = values.iter().find(|v| v.len() != first.len()) {
                return Err(Error::DimensionMismatch { expected: first.len(), got: bad.len() });
            }
        }
        if values.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(Error::InvalidArgument("field path has non-finite entries".into()));
        }
        Ok(ScalarFieldPath { grid, values })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn at(&self, k: usize) -> &ScalarField {
        &self.values[k]
    }

    pub fn values(&self) -> &[ScalarField] {
        &self.values
    }

    /// Value at `t = 0`.
    pub fn final_value(&self) -> &ScalarField {
        self.values.last().expect("a grid has at least one node")
    }

    /// Value at `t = t_start`.
    pub fn initial_value(&self) -> &ScalarField {
        &self.values[0]
    }

    pub fn map(&self, f: impl Fn(&ScalarField) -> ScalarField) -> ScalarFieldPath {
        ScalarFieldPath { grid: self.grid, values: self.values.iter().map(f).collect() }
    }

    /// `max_k ‖a_k - b_k‖_{L∞}`.
    pub fn max_abs_diff(&self, other: &ScalarFieldPath) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).amax())
            .fold(0.0, f64::max)
    }

    /// Rows `(time, vertex, value)` with time descending from `0`.
    pub fn rows(&self) -> impl Iterator<Item = (f64, usize, f64)> + '_ {
        (0..self.grid.nodes()).rev().flat_map(move |k| {
            let t = self.grid.time(k);
            self.values[k].iter().enumerate().map(move |(x, &v)| (t, x, v))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_ends_at_zero() {
        let g = TimeGrid::new(-1.0, 1e-3).unwrap();
        assert_eq!(g.steps(), 1000);
        assert_eq!(g.time(1000), 0.0);
        assert!((g.t_start() + 1.0).abs() < 1e-12);
        assert!(TimeGrid::new(-1.0, 0.3).is_err());
        assert!(TimeGrid::new(0.5, 0.1).is_err());
        assert_eq!(TimeGrid::new(0.0, 0.1).unwrap().nodes(), 1);
    }

    #[test]
    fn rows_run_backwards_in_time() {
        let g = TimeGrid::from_steps(2, 0.5).unwrap();
        let p = ScalarFieldPath::new(g, (0..3).map(|k| ScalarField::from_element(2, k as f64)).collect()).unwrap();
        let rows: Vec<_> = p.rows().collect();
        assert_eq!(rows[0], (0.0, 0, 2.0));
        assert_eq!(rows[5], (-1.0, 1, 0.0));
    }
}
