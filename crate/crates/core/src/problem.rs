//! A decision task: the action grid, the task cost `g(z, y)` and the
//! predictive loss `l(y, y_hat)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::grid::ActionGrid;

/// Task cost `g(action, outcome)`, minimized over actions.
///
/// `d_outcome` is the derivative with respect to the outcome. Costs with
/// kinks must return 0 exactly at the kink.
pub trait TaskCost: Send + Sync + fmt::Debug {
    fn cost(&self, z: f64, y: f64) -> f64;
    fn d_outcome(&self, z: f64, y: f64) -> f64;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictiveLoss {
    #[default]
    SquaredError,
    AbsoluteError,
}

impl PredictiveLoss {
    pub fn value(self, y: f64, y_hat: f64) -> f64 {
        match self {
            PredictiveLoss::SquaredError => (y_hat - y) * (y_hat - y),
            PredictiveLoss::AbsoluteError => (y_hat - y).abs(),
        }
    }

    /// Derivative with respect to the prediction.
    pub fn d_prediction(self, y: f64, y_hat: f64) -> f64 {
        match self {
            PredictiveLoss::SquaredError => 2.0 * (y_hat - y),
            PredictiveLoss::AbsoluteError => {
                if y_hat > y {
                    1.0
                } else if y_hat < y {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Clone)]
pub struct Problem {
    pub name: String,
    pub grid: ActionGrid,
    pub task_cost: Arc<dyn TaskCost>,
    pub predictive_loss: PredictiveLoss,
}

impl Problem {
    pub fn new(name: impl Into<String>, grid: ActionGrid, task_cost: Arc<dyn TaskCost>) -> Self {
        Problem {
            name: name.into(),
            grid,
            task_cost,
            predictive_loss: PredictiveLoss::default(),
        }
    }

    pub fn with_loss(mut self, loss: PredictiveLoss) -> Self {
        self.predictive_loss = loss;
        self
    }

    #[inline]
    pub fn cost(&self, z: f64, y: f64) -> f64 {
        self.task_cost.cost(z, y)
    }

    #[inline]
    pub fn loss(&self, y: f64, y_hat: f64) -> f64 {
        self.predictive_loss.value(y, y_hat)
    }
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("grid", &self.grid)
            .field("task_cost", &self.task_cost)
            .field("predictive_loss", &self.predictive_loss)
            .finish()
    }
}
