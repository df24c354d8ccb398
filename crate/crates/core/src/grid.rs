//! Uniform discretization of the admissible action interval.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Evenly spaced grid of candidate actions over `[z_min, z_max]`.
///
/// Endpoints are stored exactly; interior points are `z_min + k * step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct ActionGrid {
    z_min: f64,
    z_max: f64,
    points: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub z_min: f64,
    pub z_max: f64,
    pub n_points: usize,
}

impl TryFrom<GridSpec> for ActionGrid {
    type Error = Error;

    fn try_from(spec: GridSpec) -> Result<Self> {
        ActionGrid::new(spec.z_min, spec.z_max, spec.n_points)
    }
}

impl From<ActionGrid> for GridSpec {
    fn from(grid: ActionGrid) -> Self {
        GridSpec {
            z_min: grid.z_min,
            z_max: grid.z_max,
            n_points: grid.points.len(),
        }
    }
}

impl ActionGrid {
    pub fn new(z_min: f64, z_max: f64, n_points: usize) -> Result<Self> {
        if !z_min.is_finite() || !z_max.is_finite() {
            return Err(Error::invalid(format!(
                "grid bounds must be finite, got [{z_min}, {z_max}]"
            )));
        }
        if z_min >= z_max {
            return Err(Error::invalid(format!(
                "grid requires z_min < z_max, got z_min = {z_min}, z_max = {z_max}"
            )));
        }
        if n_points < 2 {
            return Err(Error::invalid(format!(
                "grid requires at least 2 points, got {n_points}"
            )));
        }
        let step = (z_max - z_min) / (n_points - 1) as f64;
        let mut points: Vec<f64> = (0..n_points).map(|k| z_min + k as f64 * step).collect();
        points[0] = z_min;
        points[n_points - 1] = z_max;
        Ok(ActionGrid {
            z_min,
            z_max,
            points,
        })
    }

    pub fn z_min(&self) -> f64 {
        self.z_min
    }

    pub fn z_max(&self) -> f64 {
        self.z_max
    }

    pub fn width(&self) -> f64 {
        self.z_max - self.z_min
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn step(&self) -> f64 {
        self.width() / (self.points.len() - 1) as f64
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn contains(&self, z: f64) -> bool {
        z >= self.z_min && z <= self.z_max
    }

    /// Index of the grid point nearest to `z` (ties go to the lower index).
    pub fn nearest_index(&self, z: f64) -> usize {
        let raw = ((z - self.z_min) / self.step()).clamp(0.0, (self.n_points() - 1) as f64);
        let lo = raw.floor() as usize;
        let hi = (lo + 1).min(self.n_points() - 1);
        if (self.points[hi] - z).abs() < (z - self.points[lo]).abs() {
            hi
        } else {
            lo
        }
    }

    /// Index of `z` if it is (within rounding) one of the grid points.
    pub fn index_of(&self, z: f64) -> Option<usize> {
        let k = self.nearest_index(z);
        let tol = 1e-9 * self.step();
        ((self.points[k] - z).abs() <= tol).then_some(k)
    }
}

/// Builds a validated grid; see [`ActionGrid::new`].
pub fn make_grid(z_min: f64, z_max: f64, n_points: usize) -> Result<ActionGrid> {
    ActionGrid::new(z_min, z_max, n_points)
}
