//! Joint training loop and the two-stage baseline.
//!
//! Each joint iteration: build the model cost profile on the validation
//! inputs, turn it into a soft-min action distribution and the test anchor,
//! compute omega and gamma against the training anchor, take one gradient
//! step on `pred * omega + task * gamma` with those coefficients frozen, then
//! test for termination.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::objective::{
    action_distribution, argmin_profile, empirical_profile, gamma_weight, joint_objective,
    model_profile, omega_weight, CostProfile, WeightConfig, WeightPair,
};
use crate::predictor::{
    init_params, loss_and_grad, task_grad, Architecture, PredictorParams, WeightedExample,
};
use crate::problem::Problem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default)]
    pub weights: WeightConfig,
    pub learning_rate: f64,
    /// Minibatch size; 0 means full batch.
    #[serde(default)]
    pub batch_size: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub patience: usize,
    /// Drives initialization and batching. Experiments supply it from their
    /// own seed, so it is not part of the serialized form.
    #[serde(skip)]
    pub seed: u64,
    /// Keep the parameters after every step in [`TrainResult::trajectory`].
    #[serde(skip)]
    pub record_trajectory: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            weights: WeightConfig::default(),
            learning_rate: 0.01,
            batch_size: 0,
            max_iters: 500,
            tol: 1e-9,
            patience: 20,
            seed: 0,
            record_trajectory: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be >= 1"));
        }
        if self.patience == 0 {
            return Err(Error::invalid("patience must be >= 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid(format!("tol must be > 0, got {}", self.tol)));
        }
        Ok(())
    }
}

/// One logged iteration, evaluated at the parameters before that
/// iteration's step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iter: usize,
    pub total: f64,
    pub pred_term: f64,
    pub task_term: f64,
    pub omega: f64,
    pub gamma: f64,
    pub z_star_test: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub params: PredictorParams,
    pub iter: usize,
    pub history: Vec<HistoryRow>,
    pub z_star_train: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    pub params_star: PredictorParams,
    pub z_star: f64,
    pub g_star: f64,
    pub iters_run: usize,
    pub converged: bool,
    pub z_star_train: f64,
    pub history: Vec<HistoryRow>,
    /// Parameters after each step; empty unless requested in the config.
    pub trajectory: Vec<PredictorParams>,
}

impl TrainResult {
    /// Training log as CSV: `iter,F,pred_term,task_term,omega,gamma,z_star_test`.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("iter,F,pred_term,task_term,omega,gamma,z_star_test\n");
        for r in &self.history {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.iter, r.total, r.pred_term, r.task_term, r.omega, r.gamma, r.z_star_test
            ));
        }
        out
    }
}

pub fn sgd_step(params: &PredictorParams, grad: &[f64], lr: f64) -> Result<PredictorParams> {
    if grad.len() != params.len() {
        return Err(Error::invalid(format!(
            "gradient has length {}, parameters have {}",
            grad.len(),
            params.len()
        )));
    }
    let mut next = params.clone();
    for (w, g) in next.weights_mut().iter_mut().zip(grad) {
        *w -= lr * g;
    }
    Ok(next)
}

/// True once the iteration cap is hit, or when each of the last `patience`
/// relative improvements of F fell below `tol`.
pub fn check_termination(history: &[HistoryRow], config: &TrainConfig) -> bool {
    let Some(last) = history.last() else {
        return false;
    };
    if last.iter >= config.max_iters {
        return true;
    }
    if history.len() <= config.patience {
        return false;
    }
    history[history.len() - config.patience - 1..]
        .windows(2)
        .all(|w| {
            let (prev, cur) = (w[0].total, w[1].total);
            (prev - cur) / prev.abs().max(1e-12) < config.tol
        })
}

/// Deterministic batch schedule shared by both trainers.
struct Batcher {
    order: Vec<usize>,
    cursor: usize,
    size: usize,
    rng: ChaCha8Rng,
}

impl Batcher {
    fn new(n: usize, batch_size: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let size = if batch_size == 0 || batch_size >= n {
            n
        } else {
            batch_size
        };
        let mut order: Vec<usize> = (0..n).collect();
        if size < n {
            order.shuffle(&mut rng);
        }
        Batcher {
            order,
            cursor: 0,
            size,
            rng,
        }
    }

    fn next_batch(&mut self) -> &[usize] {
        if self.size == self.order.len() {
            return &self.order;
        }
        if self.cursor + self.size > self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let start = self.cursor;
        self.cursor += self.size;
        &self.order[start..start + self.size]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Joint,
    PredictOnly,
}

fn validate_inputs(
    problem: &Problem,
    train: &Dataset,
    val: &Dataset,
    arch: &Architecture,
) -> Result<()> {
    arch.validate()?;
    for (name, d) in [("train", train), ("val", val)] {
        if d.feature_dim() != arch.feature_dim() {
            return Err(Error::invalid(format!(
                "{name} split has {} features, architecture expects {}",
                d.feature_dim(),
                arch.feature_dim()
            )));
        }
        d.check_actions(&problem.grid)?;
    }
    Ok(())
}

fn profile_at(
    params: &PredictorParams,
    inputs: &[Vec<f64>],
    problem: &Problem,
    iter: usize,
) -> Result<CostProfile> {
    model_profile(params, inputs, &problem.grid, problem).map_err(|e| Error::Diverged {
        iter,
        what: format!("model cost profile: {e}"),
    })
}

fn ensure_finite(iter: usize, what: &str, values: &[f64]) -> Result<()> {
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Diverged {
            iter,
            what: format!("non-finite {what} ({v})"),
        });
    }
    Ok(())
}

fn fit(
    problem: &Problem,
    train: &Dataset,
    val: &Dataset,
    arch: Architecture,
    config: &TrainConfig,
    mode: Mode,
) -> Result<TrainResult> {
    config.validate()?;
    validate_inputs(problem, train, val, &arch)?;

    let z_star_train = argmin_profile(&empirical_profile(&train.labels(), problem)?);
    let val_inputs = val.inputs();
    let mut state = TrainState {
        params: init_params(arch, config.seed)?,
        iter: 0,
        history: Vec::new(),
        z_star_train,
    };
    let mut batcher = Batcher::new(train.len(), config.batch_size, config.seed);
    let wc = config.weights;
    let mut converged = false;
    let mut trajectory = Vec::new();

    while state.iter < config.max_iters {
        state.iter += 1;
        let iter = state.iter;

        // Step 1: action distribution and test anchor from the current model.
        let profile = profile_at(&state.params, &val_inputs, problem, iter)?;
        let z_star_test = argmin_profile(&profile);

        // Step 2: loss weights from the anchors.
        let (weights, probs) = match mode {
            Mode::Joint => {
                let probs = action_distribution(&profile, wc.tau)?;
                let omega = omega_weight(&probs, &problem.grid, z_star_train, wc.alpha)?;
                let gamma = gamma_weight(z_star_train, z_star_test, wc.beta, &problem.grid)?;
                (WeightPair { omega, gamma }, Some(probs))
            }
            Mode::PredictOnly => (WeightPair::UNIT, None),
        };

        // Step 3: gradient step with the coefficients frozen.
        let batch: Vec<WeightedExample<'_>> = batcher
            .next_batch()
            .iter()
            .map(|&i| {
                let s = &train.samples()[i];
                WeightedExample {
                    x: &s.x,
                    z: s.z_obs,
                    y: s.y,
                    weight: 1.0,
                }
            })
            .collect();
        let (pred_loss, pred_grad) = loss_and_grad(&state.params, &batch, problem)?;
        ensure_finite(iter, "predictive loss", &[pred_loss])?;
        ensure_finite(iter, "predictive gradient", &pred_grad)?;

        let task_enabled = mode == Mode::Joint && wc.task_term_enabled;
        let (task_loss, task_gradient) = match (&probs, task_enabled) {
            (Some(p), true) => {
                let (l, g) = task_grad(&state.params, &val_inputs, &problem.grid, p, problem)?;
                ensure_finite(iter, "task loss", &[l])?;
                ensure_finite(iter, "task gradient", &g)?;
                (l, Some(g))
            }
            _ => (0.0, None),
        };

        let value = joint_objective(pred_loss, task_loss, weights, task_enabled);
        ensure_finite(iter, "joint objective", &[value.total])?;
        state.history.push(HistoryRow {
            iter,
            total: value.total,
            pred_term: value.pred_term,
            task_term: value.task_term,
            omega: weights.omega,
            gamma: weights.gamma,
            z_star_test,
        });

        let grad: Vec<f64> = match (mode, task_gradient) {
            (Mode::PredictOnly, _) => pred_grad,
            (Mode::Joint, None) => pred_grad.iter().map(|g| weights.omega * g).collect(),
            (Mode::Joint, Some(tg)) => pred_grad
                .iter()
                .zip(&tg)
                .map(|(p, t)| weights.omega * p + weights.gamma * t)
                .collect(),
        };
        state.params = sgd_step(&state.params, &grad, config.learning_rate)?;
        ensure_finite(iter, "parameters", state.params.weights())?;
        if config.record_trajectory {
            trajectory.push(state.params.clone());
        }

        // Step 4.
        if check_termination(&state.history, config) {
            converged = state.iter < config.max_iters;
            break;
        }
    }

    let final_profile = profile_at(&state.params, &val_inputs, problem, state.iter)?;
    let k = final_profile.argmin_index();
    Ok(TrainResult {
        z_star: problem.grid.points()[k],
        g_star: final_profile.values[k],
        params_star: state.params,
        iters_run: state.iter,
        converged,
        z_star_train,
        history: state.history,
        trajectory,
    })
}

/// Trains on the joint weighted objective and returns the decision implied
/// by the final model.
pub fn simpo_fit(
    problem: &Problem,
    train: &Dataset,
    val: &Dataset,
    arch: Architecture,
    config: &TrainConfig,
) -> Result<TrainResult> {
    fit(problem, train, val, arch, config, Mode::Joint)
}

/// Fits the predictor on its own loss, then picks the action that minimizes
/// the fitted model's cost profile on the validation inputs.
pub fn two_stage_fit(
    problem: &Problem,
    train: &Dataset,
    val: &Dataset,
    arch: Architecture,
    config: &TrainConfig,
) -> Result<TrainResult> {
    fit(problem, train, val, arch, config, Mode::PredictOnly)
}
