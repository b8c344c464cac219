use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};

/// Uniform periodic grid along the vertical axis, SI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub z_min: f64,
    pub z_max: f64,
    pub n_points: usize,
    /// Real-time step, s.
    pub dt: f64,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            z_min: -170e-6,
            z_max: 30e-6,
            n_points: 8192,
            dt: 1e-6,
        }
    }
}

impl Grid {
    pub fn dz(&self) -> f64 {
        (self.z_max - self.z_min) / self.n_points as f64
    }

    pub fn z(&self, i: usize) -> f64 {
        self.z_min + i as f64 * self.dz()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.z(i)).collect()
    }

    /// Half the spacing in space and time.
    pub fn refined(&self) -> Self {
        Self {
            n_points: self.n_points * 2,
            dt: self.dt / 2.0,
            ..*self
        }
    }

    /// Structural checks plus containment of `[centre − margin, centre + margin]`.
    pub fn validate(&self, centre: f64, margin: f64) -> Result<()> {
        let mut v = Vec::new();
        if self.n_points < 256 || !self.n_points.is_power_of_two() {
            v.push(Violation::new("grid.n_points", self.n_points, "must be a power of two >= 256"));
        }
        if !(self.z_max > self.z_min) || !self.z_min.is_finite() || !self.z_max.is_finite() {
            v.push(Violation::new("grid.z_max", self.z_max, format!("must exceed z_min = {}", self.z_min)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            v.push(Violation::new("grid.dt", self.dt, "must be positive"));
        }
        if v.is_empty() && (centre - margin < self.z_min || centre + margin > self.z_max) {
            v.push(Violation::new(
                "grid.z_min",
                self.z_min,
                format!(
                    "grid [{:e}, {:e}] must contain the sag position {centre:e} m with margin {margin:e} m",
                    self.z_min, self.z_max
                ),
            ));
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    /// Number of steps in `duration`, if it is a whole multiple of dt.
    pub fn steps_in(&self, duration: f64) -> Result<usize> {
        if duration < 0.0 {
            return Err(Error::Duration { duration, dt: self.dt });
        }
        let n = (duration / self.dt).round();
        if (n * self.dt - duration).abs() > 1e-9 * self.dt.max(duration) {
            return Err(Error::Duration { duration, dt: self.dt });
        }
        Ok(n as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_and_refinement() {
        let g = Grid::default();
        assert!((g.dz() - 200e-6 / 8192.0).abs() < 1e-20);
        let r = g.refined();
        assert_eq!(r.n_points, 16384);
        assert!((r.dz() * 2.0 - g.dz()).abs() < 1e-20);
        assert_eq!(r.dt, 5e-7);
    }

    #[test]
    fn rejects_bad_grids() {
        let mut g = Grid::default();
        g.n_points = 1000;
        assert!(g.validate(-17e-6, 30e-6).is_err());
        let g = Grid {
            n_points: 128,
            ..Grid::default()
        };
        assert!(g.validate(-17e-6, 30e-6).is_err());
        assert!(Grid::default().validate(-17e-6, 30e-6).is_ok());
        assert!(Grid::default().validate(-17e-6, 60e-6).is_err());
    }

    #[test]
    fn step_counting() {
        let g = Grid::default();
        assert_eq!(g.steps_in(3e-3).unwrap(), 3000);
        assert_eq!(g.steps_in(0.0).unwrap(), 0);
        assert!(g.steps_in(1.5e-6).is_err());
    }
}
