//! Experiment configuration: one strict JSON document per experiment.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::Scenario;
use crate::grid::ActionGrid;
use crate::predictor::Architecture;
use crate::synthetic::TrueModel;
use crate::training::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root of all randomness: data, splits, initialization, batching and
    /// Monte Carlo evaluation.
    pub seed: u64,
    pub problem: ProblemBlock,
    pub model: Architecture,
    pub train: TrainConfig,
    pub eval: EvalBlock,
    #[serde(default)]
    pub io: IoBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemBlock {
    pub name: String,
    pub true_model: TrueModel,
    pub grid: ActionGrid,
    pub n_samples: usize,
    pub train_frac: f64,
    pub val_frac: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalBlock {
    pub n_mc: usize,
    pub n_seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoBlock {
    pub output_dir: PathBuf,
}

impl Default for IoBlock {
    fn default() -> Self {
        IoBlock {
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario().validate()?;
        self.model.validate()?;
        self.train.validate()?;
        if self.model.feature_dim() != self.problem.true_model.feature_dim() {
            return Err(Error::invalid(format!(
                "model.feature_dim = {} but problem.true_model has {} base weights",
                self.model.feature_dim(),
                self.problem.true_model.feature_dim()
            )));
        }
        if self.eval.n_seeds == 0 {
            return Err(Error::invalid("eval.n_seeds must be >= 1"));
        }
        let p = &self.problem;
        if !(p.train_frac > 0.0 && p.val_frac > 0.0 && p.train_frac + p.val_frac < 1.0) {
            return Err(Error::invalid(format!(
                "split fractions must be positive with train + val < 1, got ({}, {})",
                p.train_frac, p.val_frac
            )));
        }
        Ok(())
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            name: self.problem.name.clone(),
            true_model: self.problem.true_model.clone(),
            grid: self.problem.grid.clone(),
            n_samples: self.problem.n_samples,
            train_frac: self.problem.train_frac,
            val_frac: self.problem.val_frac,
            n_mc: self.eval.n_mc,
        }
    }

    /// Training settings with the experiment seed filled in.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train
        }
    }
}
