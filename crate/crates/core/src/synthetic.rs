//! Synthetic decision worlds with a known generative model.
//!
//! Outcomes follow `y = w.x + b + e*z + q*e*z^2 + eps` with
//! `x ~ N(0, feature_sd^2)^d` and `eps ~ N(0, noise_sd^2)`. The action `z`
//! shifts the outcome, so the oracle must evaluate counterfactually: each
//! queried action regenerates `y` under that action.

use rand::distr::weighted::WeightedIndex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, LabeledSample};
use crate::error::{Error, Result};
use crate::grid::ActionGrid;
use crate::problem::{Problem, TaskCost};

/// Overage/underage cost of stocking `z` against demand `y`.
pub fn newsvendor_cost(z: f64, y: f64, c_h: f64, c_s: f64) -> f64 {
    c_h * (z - y).max(0.0) + c_s * (y - z).max(0.0)
}

/// Negative revenue of selling at price `z` when demand is `y`, with sales
/// capped at `capacity`.
pub fn pricing_cost(z: f64, y: f64, capacity: f64) -> f64 {
    -z * y.clamp(0.0, capacity)
}

/// Shipped task costs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostModel {
    Newsvendor { holding: f64, shortage: f64 },
    Pricing { capacity: f64 },
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CostModel::Newsvendor { holding, shortage } => {
                if !(holding >= 0.0 && shortage >= 0.0 && holding + shortage > 0.0) {
                    return Err(Error::invalid(format!(
                        "newsvendor costs need holding, shortage >= 0 with a positive sum, got ({holding}, {shortage})"
                    )));
                }
            }
            CostModel::Pricing { capacity } => {
                if !(capacity > 0.0) {
                    return Err(Error::invalid(format!(
                        "capacity must be > 0, got {capacity}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            CostModel::Newsvendor { .. } => "newsvendor",
            CostModel::Pricing { .. } => "pricing",
        }
    }
}

impl TaskCost for CostModel {
    fn cost(&self, z: f64, y: f64) -> f64 {
        match *self {
            CostModel::Newsvendor { holding, shortage } => newsvendor_cost(z, y, holding, shortage),
            CostModel::Pricing { capacity } => pricing_cost(z, y, capacity),
        }
    }

    fn d_outcome(&self, z: f64, y: f64) -> f64 {
        match *self {
            CostModel::Newsvendor { holding, shortage } => {
                if y < z {
                    -holding
                } else if y > z {
                    shortage
                } else {
                    0.0
                }
            }
            CostModel::Pricing { capacity } => {
                if y > 0.0 && y < capacity {
                    -z
                } else {
                    0.0
                }
            }
        }
    }
}

/// How historical actions were chosen in the logged data.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LoggingPolicy {
    /// Every grid point equally likely.
    #[default]
    Uniform,
    /// Triangular weights `max(0, 1 - |z - center| / width)` over grid points.
    Biased { center: f64, width: f64 },
}

impl LoggingPolicy {
    fn sampler(&self, grid: &ActionGrid) -> Result<WeightedIndex<f64>> {
        let weights: Vec<f64> = match *self {
            LoggingPolicy::Uniform => vec![1.0; grid.n_points()],
            LoggingPolicy::Biased { center, width } => {
                if !(width > 0.0) {
                    return Err(Error::invalid(format!(
                        "logging width must be > 0, got {width}"
                    )));
                }
                grid.points()
                    .iter()
                    .map(|z| (1.0 - (z - center).abs() / width).max(0.0))
                    .collect()
            }
        };
        WeightedIndex::new(weights)
            .map_err(|e| Error::invalid(format!("logging policy puts no mass on the grid: {e}")))
    }
}

/// Generative truth of a synthetic decision world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrueModel {
    pub base_weights: Vec<f64>,
    pub intercept: f64,
    /// Linear action effect `e`.
    pub action_effect: f64,
    /// Coefficient `q` of the `e * z^2` term; 0 for linear worlds.
    #[serde(default)]
    pub nonlinearity: f64,
    pub noise_sd: f64,
    #[serde(default = "unit")]
    pub feature_sd: f64,
    pub cost: CostModel,
    #[serde(default)]
    pub logging: LoggingPolicy,
}

fn unit() -> f64 {
    1.0
}

impl TrueModel {
    pub fn validate(&self) -> Result<()> {
        if self.base_weights.is_empty() {
            return Err(Error::invalid("base_weights needs at least one feature"));
        }
        if !(self.noise_sd > 0.0) {
            return Err(Error::invalid(format!(
                "noise_sd must be > 0, got {}",
                self.noise_sd
            )));
        }
        if !(self.feature_sd > 0.0) {
            return Err(Error::invalid(format!(
                "feature_sd must be > 0, got {}",
                self.feature_sd
            )));
        }
        let coeffs = [self.intercept, self.action_effect, self.nonlinearity];
        if coeffs
            .iter()
            .chain(&self.base_weights)
            .any(|v| !v.is_finite())
        {
            return Err(Error::invalid("true model coefficients must be finite"));
        }
        self.cost.validate()
    }

    pub fn kind(&self) -> &'static str {
        self.cost.name()
    }

    pub fn feature_dim(&self) -> usize {
        self.base_weights.len()
    }

    /// Outcome shift caused by action `z`.
    pub fn action_shift(&self, z: f64) -> f64 {
        self.action_effect * z + self.nonlinearity * self.action_effect * z * z
    }

    /// Conditional mean `E[y | x, z]`.
    pub fn mean_outcome(&self, x: &[f64], z: f64) -> f64 {
        let base: f64 = self.base_weights.iter().zip(x).map(|(w, v)| w * v).sum();
        base + self.intercept + self.action_shift(z)
    }

    pub fn problem(&self, name: impl Into<String>, grid: ActionGrid) -> Problem {
        Problem::new(name, grid, std::sync::Arc::new(self.cost))
    }
}

pub fn gen_dataset(model: &TrueModel, n: usize, grid: &ActionGrid, seed: u64) -> Result<Dataset> {
    model.validate()?;
    if n == 0 {
        return Err(Error::invalid("gen_dataset needs n >= 1"));
    }
    let logging = model.logging.sampler(grid)?;
    let features = Normal::new(0.0, model.feature_sd).map_err(|e| Error::invalid(e.to_string()))?;
    let noise = Normal::new(0.0, model.noise_sd).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..model.feature_dim())
                .map(|_| features.sample(&mut rng))
                .collect();
            let z_obs = grid.points()[logging.sample(&mut rng)];
            let y = model.mean_outcome(&x, z_obs) + noise.sample(&mut rng);
            LabeledSample { x, z_obs, y }
        })
        .collect();
    Dataset::new(samples)
}

/// Fixed Monte Carlo draws of the action-free part of the outcome,
/// `w.x + b + eps`. Reusing one draw for every action gives common random
/// numbers across the grid.
#[derive(Debug, Clone)]
pub struct OracleSamples<'a> {
    model: &'a TrueModel,
    base: Vec<f64>,
}

impl<'a> OracleSamples<'a> {
    pub fn draw(model: &'a TrueModel, n_mc: usize, seed: u64) -> Result<Self> {
        model.validate()?;
        if n_mc == 0 {
            return Err(Error::invalid("oracle needs n_mc >= 1"));
        }
        let features =
            Normal::new(0.0, model.feature_sd).map_err(|e| Error::invalid(e.to_string()))?;
        let noise = Normal::new(0.0, model.noise_sd).map_err(|e| Error::invalid(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = (0..n_mc)
            .map(|_| {
                let mut v = model.intercept;
                for w in &model.base_weights {
                    v += w * features.sample(&mut rng);
                }
                v + noise.sample(&mut rng)
            })
            .collect();
        Ok(OracleSamples { model, base })
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn expected_cost(&self, z: f64) -> f64 {
        let shift = self.model.action_shift(z);
        let cost = &self.model.cost;
        self.base
            .iter()
            .map(|b| cost.cost(z, b + shift))
            .sum::<f64>()
            / self.base.len() as f64
    }

    /// Standard error of the mean of `g(z_a, y) - g(z_b, y)` over the draws.
    pub fn difference_std_error(&self, z_a: f64, z_b: f64) -> f64 {
        let (sa, sb) = (self.model.action_shift(z_a), self.model.action_shift(z_b));
        let cost = &self.model.cost;
        let diffs: Vec<f64> = self
            .base
            .iter()
            .map(|b| cost.cost(z_a, b + sa) - cost.cost(z_b, b + sb))
            .collect();
        let n = diffs.len() as f64;
        if diffs.len() < 2 {
            return 0.0;
        }
        let mean = diffs.iter().sum::<f64>() / n;
        let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    }

    /// Grid scan with ties resolved toward the smallest action.
    pub fn best_action(&self, grid: &ActionGrid) -> (f64, f64) {
        let mut best = (grid.points()[0], self.expected_cost(grid.points()[0]));
        for &z in &grid.points()[1..] {
            let c = self.expected_cost(z);
            if c < best.1 {
                best = (z, c);
            }
        }
        best
    }
}

/// Monte Carlo estimate of the true expected cost of committing to `z`.
pub fn oracle_expected_cost(model: &TrueModel, z: f64, n_mc: usize, seed: u64) -> Result<f64> {
    Ok(OracleSamples::draw(model, n_mc, seed)?.expected_cost(z))
}

/// Best grid action under the true model and its estimated cost.
pub fn oracle_action(
    model: &TrueModel,
    grid: &ActionGrid,
    n_mc: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    Ok(OracleSamples::draw(model, n_mc, seed)?.best_action(grid))
}
