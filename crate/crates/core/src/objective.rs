//! Cost profiles over the action grid, anchor actions, the soft-min action
//! distribution, the weight functions and the joint objective value.
//!
//! The joint objective is
//!
//! ```text
//! F = l(y, y_hat) * omega + task * gamma
//! omega = 1 + alpha * E_p[|z - z_train|] / (z_max - z_min)
//! gamma = exp(-beta * |z_train - z_test| / (z_max - z_min))
//! ```
//!
//! where `p` is the soft-min distribution of the model cost profile and the
//! anchors are hard argmins of the empirical and model profiles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ActionGrid;
use crate::predictor::PredictorParams;
use crate::problem::Problem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileSource {
    Empirical,
    Model,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostProfile {
    pub grid: ActionGrid,
    pub values: Vec<f64>,
    pub source: ProfileSource,
}

impl CostProfile {
    pub fn new(grid: ActionGrid, values: Vec<f64>, source: ProfileSource) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::invalid(format!(
                "profile has {} values for a {}-point grid",
                values.len(),
                grid.n_points()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "profile value at z = {} is not finite",
                grid.points()[k]
            )));
        }
        Ok(CostProfile {
            grid,
            values,
            source,
        })
    }

    /// Index of the minimum; ties resolve to the lowest index.
    pub fn argmin_index(&self) -> usize {
        let mut best = 0;
        for (k, &v) in self.values.iter().enumerate().skip(1) {
            if v < self.values[best] {
                best = k;
            }
        }
        best
    }

    pub fn min_value(&self) -> f64 {
        self.values[self.argmin_index()]
    }

    pub fn value_at(&self, z: f64) -> Option<f64> {
        self.grid.index_of(z).map(|k| self.values[k])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorActions {
    pub z_star_train: f64,
    pub z_star_test: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightPair {
    pub omega: f64,
    pub gamma: f64,
}

impl WeightPair {
    pub const UNIT: WeightPair = WeightPair {
        omega: 1.0,
        gamma: 1.0,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointObjectiveValue {
    pub total: f64,
    pub pred_term: f64,
    pub task_term: f64,
    pub weights: WeightPair,
}

/// Hyperparameters of the weight functions and the soft-min.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightConfig {
    /// Steepness of omega in the action-mass distance.
    pub alpha: f64,
    /// Decay of gamma in the anchor distance.
    pub beta: f64,
    /// Soft-min temperature.
    pub tau: f64,
    #[serde(default = "enabled")]
    pub task_term_enabled: bool,
}

fn enabled() -> bool {
    true
}

impl Default for WeightConfig {
    fn default() -> Self {
        WeightConfig {
            alpha: 1.0,
            beta: 1.0,
            tau: 0.1,
            task_term_enabled: true,
        }
    }
}

impl WeightConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid(format!(
                "alpha must be >= 0, got {}",
                self.alpha
            )));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid(format!(
                "beta must be >= 0, got {}",
                self.beta
            )));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::invalid(format!("tau must be > 0, got {}", self.tau)));
        }
        Ok(())
    }
}

/// Mean task cost of every grid action against the historical labels.
pub fn empirical_profile(train_labels: &[f64], problem: &Problem) -> Result<CostProfile> {
    if train_labels.is_empty() {
        return Err(Error::invalid("empirical profile needs at least one label"));
    }
    let n = train_labels.len() as f64;
    let values = problem
        .grid
        .points()
        .iter()
        .map(|&z| {
            train_labels
                .iter()
                .map(|&y| problem.cost(z, y))
                .sum::<f64>()
                / n
        })
        .collect();
    CostProfile::new(problem.grid.clone(), values, ProfileSource::Empirical)
}

/// Certainty-equivalent model cost of every grid action, averaged over inputs.
pub fn model_profile(
    params: &PredictorParams,
    inputs: &[Vec<f64>],
    grid: &ActionGrid,
    problem: &Problem,
) -> Result<CostProfile> {
    if inputs.is_empty() {
        return Err(Error::invalid("model profile needs at least one input"));
    }
    let d = params.architecture().feature_dim();
    if let Some(x) = inputs.iter().find(|x| x.len() != d) {
        return Err(Error::invalid(format!(
            "input has {} features, model expects {d}",
            x.len()
        )));
    }
    let m = inputs.len() as f64;
    let mut hidden = Vec::new();
    let values = grid
        .points()
        .iter()
        .map(|&z| {
            inputs
                .iter()
                .map(|x| problem.cost(z, params.forward(x, z, &mut hidden)))
                .sum::<f64>()
                / m
        })
        .collect();
    CostProfile::new(grid.clone(), values, ProfileSource::Model)
}

pub fn argmin_profile(profile: &CostProfile) -> f64 {
    profile.grid.points()[profile.argmin_index()]
}

/// Soft-min over the profile at temperature `tau`, shifted by the minimum.
pub fn action_distribution(profile: &CostProfile, tau: f64) -> Result<Vec<f64>> {
    if !(tau > 0.0) {
        return Err(Error::invalid(format!("tau must be > 0, got {tau}")));
    }
    let min = profile.min_value();
    let mut probs: Vec<f64> = profile
        .values
        .iter()
        .map(|v| (-(v - min) / tau).exp())
        .collect();
    let norm: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= norm;
    }
    Ok(probs)
}

pub fn omega_weight(
    probs: &[f64],
    grid: &ActionGrid,
    z_star_train: f64,
    alpha: f64,
) -> Result<f64> {
    if probs.len() != grid.n_points() {
        return Err(Error::invalid(format!(
            "{} probabilities for a {}-point grid",
            probs.len(),
            grid.n_points()
        )));
    }
    if grid.index_of(z_star_train).is_none() {
        return Err(Error::invalid(format!(
            "z_star_train = {z_star_train} is not a grid point"
        )));
    }
    let mean_distance: f64 = probs
        .iter()
        .zip(grid.points())
        .map(|(p, z)| p * (z - z_star_train).abs())
        .sum();
    Ok(1.0 + alpha * mean_distance / grid.width())
}

pub fn gamma_weight(
    z_star_train: f64,
    z_star_test: f64,
    beta: f64,
    grid: &ActionGrid,
) -> Result<f64> {
    for z in [z_star_train, z_star_test] {
        if grid.index_of(z).is_none() {
            return Err(Error::invalid(format!("anchor {z} is not a grid point")));
        }
    }
    Ok((-beta * (z_star_train - z_star_test).abs() / grid.width()).exp())
}

pub fn joint_objective(
    pred_loss: f64,
    task_loss: f64,
    weights: WeightPair,
    task_enabled: bool,
) -> JointObjectiveValue {
    let task_term = if task_enabled { task_loss } else { 0.0 };
    JointObjectiveValue {
        total: pred_loss * weights.omega + task_term * weights.gamma,
        pred_term: pred_loss,
        task_term,
        weights,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::{init_params, Architecture};
    use crate::synthetic::CostModel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};
    use std::sync::Arc;

    fn profile(values: &[f64]) -> CostProfile {
        let grid = ActionGrid::new(0.0, (values.len() - 1) as f64, values.len()).unwrap();
        CostProfile::new(grid, values.to_vec(), ProfileSource::Model).unwrap()
    }

    fn nv(grid: ActionGrid, holding: f64, shortage: f64) -> Problem {
        Problem::new(
            "nv",
            grid,
            Arc::new(CostModel::Newsvendor { holding, shortage }),
        )
    }

    #[test]
    fn empirical_profile_constant_labels() {
        let grid = ActionGrid::new(0.0, 10.0, 21).unwrap();
        let prof = empirical_profile(&[5.0; 8], &nv(grid, 1.0, 1.0)).unwrap();
        assert_eq!(argmin_profile(&prof), 5.0);
        assert_eq!(prof.min_value(), 0.0);
        assert_eq!(prof.source, ProfileSource::Empirical);
    }

    #[test]
    fn empirical_profile_single_label_is_abs_distance() {
        let grid = ActionGrid::new(-2.0, 2.0, 9).unwrap();
        let prof = empirical_profile(&[0.3], &nv(grid.clone(), 1.0, 1.0)).unwrap();
        for (v, z) in prof.values.iter().zip(grid.points()) {
            assert!((v - (z - 0.3).abs()).abs() < 1e-15);
        }
    }

    #[test]
    fn empirical_profile_gaussian_quantile() {
        // Critical quantile 0.75 of N(10, 2^2): 10 + 2 * 0.6745 = 11.349.
        let grid = ActionGrid::new(0.0, 20.0, 201).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let normal = Normal::new(10.0, 2.0).unwrap();
        let labels: Vec<f64> = (0..10_000).map(|_| normal.sample(&mut rng)).collect();
        let prof = empirical_profile(&labels, &nv(grid.clone(), 1.0, 3.0)).unwrap();
        assert!((argmin_profile(&prof) - 11.349).abs() <= grid.step());
    }

    #[test]
    fn model_profile_zero_params() {
        let grid = ActionGrid::new(0.0, 5.0, 6).unwrap();
        let problem = nv(grid.clone(), 1.0, 3.0);
        let p = init_params(Architecture::linear(2), 0).unwrap();
        let prof = model_profile(&p, &[vec![1.0, 2.0], vec![-3.0, 0.5]], &grid, &problem).unwrap();
        for (v, &z) in prof.values.iter().zip(grid.points()) {
            assert_eq!(*v, problem.cost(z, 0.0));
        }
    }

    #[test]
    fn model_profile_perfect_tracking() {
        let grid = ActionGrid::new(0.0, 5.0, 11).unwrap();
        let p =
            PredictorParams::from_weights(Architecture::linear(1), vec![0.0, 1.0, 0.0]).unwrap();
        let prof = model_profile(&p, &[vec![4.2]], &grid, &nv(grid.clone(), 1.0, 1.0)).unwrap();
        assert!(prof.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn model_profile_matches_double_loop() {
        let grid = ActionGrid::new(0.0, 10.0, 41).unwrap();
        let problem = nv(grid.clone(), 2.0, 0.5);
        let p = init_params(Architecture::mlp1(3, 4), 17).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inputs: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let prof = model_profile(&p, &inputs, &grid, &problem).unwrap();
        for (k, &z) in grid.points().iter().enumerate() {
            let mut total = 0.0;
            for x in &inputs {
                let y = p.predict(x, z).unwrap();
                total += 2.0 * (z - y).max(0.0) + 0.5 * (y - z).max(0.0);
            }
            let brute = total / 50.0;
            assert!((prof.values[k] - brute).abs() <= 1e-12 * brute.abs().max(1.0));
        }
    }

    #[test]
    fn argmin_rules() {
        assert_eq!(argmin_profile(&profile(&[3.0, 1.0, 2.0])), 1.0);
        assert_eq!(argmin_profile(&profile(&[1.0, 1.0, 2.0])), 0.0);
        assert_eq!(argmin_profile(&profile(&[5.0, 4.0, 3.0, 2.0])), 3.0);
    }

    #[test]
    fn softmin_examples() {
        let uniform = action_distribution(&profile(&[2.0; 4]), 0.3).unwrap();
        assert!(uniform.iter().all(|&p| (p - 0.25).abs() < 1e-15));

        // normalizer 1 + e^-1 + e^-2
        let p = action_distribution(&profile(&[1.0, 2.0, 3.0]), 1.0).unwrap();
        let expected = [
            0.665_240_955_774_821_8,
            0.244_728_471_054_797_64,
            0.090_030_573_170_380_46,
        ];
        for (a, b) in p.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }

        let sharp = action_distribution(&profile(&[1.0, 2.0]), 0.01).unwrap();
        assert_eq!(sharp[0], 1.0);
        assert!(sharp[1] < 1e-40);
        assert!(action_distribution(&profile(&[1.0, 2.0]), 0.0).is_err());
    }

    #[test]
    fn omega_examples() {
        let grid = ActionGrid::new(0.0, 10.0, 11).unwrap();
        let mut one_hot = vec![0.0; 11];
        one_hot[4] = 1.0;
        assert_eq!(omega_weight(&one_hot, &grid, 4.0, 3.0).unwrap(), 1.0);
        let spread = vec![1.0 / 11.0; 11];
        assert_eq!(omega_weight(&spread, &grid, 4.0, 0.0).unwrap(), 1.0);

        let two = ActionGrid::new(0.0, 10.0, 2).unwrap();
        assert_eq!(omega_weight(&[0.5, 0.5], &two, 0.0, 2.0).unwrap(), 2.0);
        assert!(omega_weight(&[0.5, 0.5], &two, 3.0, 2.0).is_err());
    }

    #[test]
    fn gamma_examples() {
        let grid = ActionGrid::new(0.0, 10.0, 11).unwrap();
        assert_eq!(gamma_weight(3.0, 3.0, 5.0, &grid).unwrap(), 1.0);
        assert_eq!(gamma_weight(3.0, 8.0, 0.0, &grid).unwrap(), 1.0);
        let g = gamma_weight(2.0, 7.0, 1.0, &grid).unwrap();
        assert!((g - 0.606_530_659_712_633_4).abs() < 1e-15);
        assert!(gamma_weight(2.5, 7.0, 1.0, &grid).is_err());
    }

    #[test]
    fn joint_examples() {
        let w = WeightPair {
            omega: 1.5,
            gamma: 0.5,
        };
        assert_eq!(joint_objective(0.0, 7.0, w, false).total, 0.0);
        let v = joint_objective(2.0, 4.0, w, true);
        assert_eq!(v.total, 5.0);
        assert_eq!((v.pred_term, v.task_term), (2.0, 4.0));
        assert_eq!(
            joint_objective(3.25, 9.0, WeightPair::UNIT, false).total,
            3.25
        );
    }

    #[test]
    fn weight_config_validation() {
        assert!(WeightConfig::default().validate().is_ok());
        for bad in [
            WeightConfig {
                alpha: -1.0,
                ..Default::default()
            },
            WeightConfig {
                beta: f64::NAN,
                ..Default::default()
            },
            WeightConfig {
                tau: 0.0,
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
