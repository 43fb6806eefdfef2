//! Uniform simulation grid. The same grid serves as the maturity pillar grid.

use crate::error::{Error, Result};

/// Relative tolerance used to snap dates onto grid nodes.
const SNAP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    dt: f64,
    steps: usize,
}

impl TimeGrid {
    /// Grid `0, dt, ..., horizon`; the horizon must be a multiple of `dt`.
    pub fn new(horizon: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidGrid(format!("step must be positive, got {dt}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::EmptyGrid);
        }
        let n = (horizon / dt).round();
        if (n * dt - horizon).abs() > SNAP * horizon.max(1.0) || n < 1.0 {
            return Err(Error::InvalidGrid(format!(
                "horizon {horizon} is not a multiple of the step {dt}"
            )));
        }
        Ok(TimeGrid { dt, steps: n as usize })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.steps)
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|i| self.time(i)).collect()
    }

    /// Index of the node equal to `t`, or `ScheduleOffGrid`.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let x = t / self.dt;
        let i = x.round();
        if i < 0.0 || i > self.steps as f64 || (x - i).abs() > SNAP * x.abs().max(1.0) {
            return Err(Error::ScheduleOffGrid(t));
        }
        Ok(i as usize)
    }
}

/// Checks that `times` has at least two strictly increasing entries.
pub fn check_increasing(times: &[f64]) -> Result<()> {
    if times.len() < 2 {
        return Err(Error::EmptyGrid);
    }
    for w in times.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidGrid(format!("{} does not exceed {}", w[1], w[0])));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_and_lookup() {
        let g = TimeGrid::new(5.0, 1.0 / 96.0).unwrap();
        assert_eq!(g.steps(), 480);
        assert_eq!(g.index_of(2.25).unwrap(), 216);
        assert_eq!(g.index_of(5.0).unwrap(), 480);
        assert!(matches!(g.index_of(0.001), Err(Error::ScheduleOffGrid(_))));
        assert!(matches!(g.index_of(5.5), Err(Error::ScheduleOffGrid(_))));
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TimeGrid::new(1.0, 0.3).is_err());
        assert!(TimeGrid::new(1.0, 0.0).is_err());
        assert_eq!(check_increasing(&[0.0]), Err(Error::EmptyGrid));
        assert!(check_increasing(&[0.0, 0.0]).is_err());
    }
}
