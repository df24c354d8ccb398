//! Action-conditioned point predictors `y_hat = h(x, z; theta)` with exact
//! parameter gradients.
//!
//! Weights live in one flat vector. Layouts:
//!
//! * `linear`: `[w_x (d), w_z, b]`
//! * `mlp1`:   `[W1 ((d+1) x h, row = input), b1 (h), w2 (h), b2]`, where the
//!   network input is `[x; z]` and the hidden activation is `tanh`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ActionGrid;
use crate::problem::Problem;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Architecture {
    Linear {
        feature_dim: usize,
    },
    Mlp1 {
        feature_dim: usize,
        hidden_units: usize,
        #[serde(default)]
        activation: Activation,
    },
}

impl Architecture {
    pub fn linear(feature_dim: usize) -> Self {
        Architecture::Linear { feature_dim }
    }

    pub fn mlp1(feature_dim: usize, hidden_units: usize) -> Self {
        Architecture::Mlp1 {
            feature_dim,
            hidden_units,
            activation: Activation::Tanh,
        }
    }

    pub fn feature_dim(&self) -> usize {
        match *self {
            Architecture::Linear { feature_dim } | Architecture::Mlp1 { feature_dim, .. } => {
                feature_dim
            }
        }
    }

    pub fn n_params(&self) -> usize {
        match *self {
            Architecture::Linear { feature_dim } => feature_dim + 2,
            Architecture::Mlp1 {
                feature_dim,
                hidden_units,
                ..
            } => (feature_dim + 3) * hidden_units + 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_dim() == 0 {
            return Err(Error::invalid("architecture needs feature_dim >= 1"));
        }
        if let Architecture::Mlp1 {
            hidden_units: 0, ..
        } = self
        {
            return Err(Error::invalid("mlp1 needs hidden_units >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct PredictorParams {
    architecture: Architecture,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    architecture: Architecture,
    weights: Vec<f64>,
}

impl TryFrom<RawParams> for PredictorParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        PredictorParams::from_weights(raw.architecture, raw.weights)
    }
}

/// One training example for the weighted predictive loss.
#[derive(Debug, Clone, Copy)]
pub struct WeightedExample<'a> {
    pub x: &'a [f64],
    pub z: f64,
    pub y: f64,
    pub weight: f64,
}

/// Deterministic initialization: zeros for the linear model and every bias;
/// `mlp1` weight matrices uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
pub fn init_params(arch: Architecture, seed: u64) -> Result<PredictorParams> {
    arch.validate()?;
    let mut weights = vec![0.0; arch.n_params()];
    if let Architecture::Mlp1 {
        feature_dim,
        hidden_units,
        ..
    } = arch
    {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_in = feature_dim + 1;
        let s1 = 1.0 / (n_in as f64).sqrt();
        let s2 = 1.0 / (hidden_units as f64).sqrt();
        let w1_end = n_in * hidden_units;
        for w in &mut weights[..w1_end] {
            *w = rng.random_range(-s1..=s1);
        }
        let w2_start = w1_end + hidden_units;
        for w in &mut weights[w2_start..w2_start + hidden_units] {
            *w = rng.random_range(-s2..=s2);
        }
    }
    Ok(PredictorParams {
        architecture: arch,
        weights,
    })
}

impl PredictorParams {
    pub fn from_weights(architecture: Architecture, weights: Vec<f64>) -> Result<Self> {
        architecture.validate()?;
        if weights.len() != architecture.n_params() {
            return Err(Error::invalid(format!(
                "weight vector has length {}, architecture expects {}",
                weights.len(),
                architecture.n_params()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("weights must be finite"));
        }
        Ok(PredictorParams {
            architecture,
            weights,
        })
    }

    pub fn architecture(&self) -> Architecture {
        self.architecture
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        let d = self.architecture.feature_dim();
        if x.len() != d {
            return Err(Error::invalid(format!(
                "input has {} features, model expects {d}",
                x.len()
            )));
        }
        Ok(())
    }

    pub fn predict(&self, x: &[f64], z: f64) -> Result<f64> {
        self.check_input(x)?;
        if !z.is_finite() {
            return Err(Error::invalid(format!("action must be finite, got {z}")));
        }
        Ok(self.forward(x, z, &mut Vec::new()))
    }

    /// Forward pass without validation; `hidden` is scratch space.
    pub(crate) fn forward(&self, x: &[f64], z: f64, hidden: &mut Vec<f64>) -> f64 {
        let w = &self.weights;
        match self.architecture {
            Architecture::Linear { feature_dim: d } => dot(&w[..d], x) + w[d] * z + w[d + 1],
            Architecture::Mlp1 {
                feature_dim: d,
                hidden_units: h,
                ..
            } => {
                mlp_hidden(w, d, h, x, z, hidden);
                let w2 = &w[(d + 2) * h..(d + 3) * h];
                dot(w2, hidden) + w[(d + 3) * h]
            }
        }
    }

    /// Adds `scale * d h(x, z) / d theta` into `grad` and returns `h(x, z)`.
    pub(crate) fn accumulate_grad(
        &self,
        x: &[f64],
        z: f64,
        scale: f64,
        grad: &mut [f64],
        hidden: &mut Vec<f64>,
    ) -> f64 {
        let w = &self.weights;
        match self.architecture {
            Architecture::Linear { feature_dim: d } => {
                for (g, xi) in grad[..d].iter_mut().zip(x) {
                    *g += scale * xi;
                }
                grad[d] += scale * z;
                grad[d + 1] += scale;
                dot(&w[..d], x) + w[d] * z + w[d + 1]
            }
            Architecture::Mlp1 {
                feature_dim: d,
                hidden_units: h,
                ..
            } => {
                mlp_hidden(w, d, h, x, z, hidden);
                let w2_off = (d + 2) * h;
                let b1_off = (d + 1) * h;
                for k in 0..h {
                    let a = hidden[k];
                    grad[w2_off + k] += scale * a;
                    let back = scale * w[w2_off + k] * (1.0 - a * a);
                    grad[b1_off + k] += back;
                    for (i, ui) in x.iter().copied().chain(std::iter::once(z)).enumerate() {
                        grad[i * h + k] += back * ui;
                    }
                }
                grad[(d + 3) * h] += scale;
                dot(&w[w2_off..w2_off + h], hidden) + w[(d + 3) * h]
            }
        }
    }

    /// `||w2|| * ||W1[z, :]||`, a Lipschitz bound of `h` in the action for `mlp1`.
    pub fn action_lipschitz_bound(&self) -> Option<f64> {
        match self.architecture {
            Architecture::Linear { feature_dim: d } => Some(self.weights[d].abs()),
            Architecture::Mlp1 {
                feature_dim: d,
                hidden_units: h,
                ..
            } => {
                let w = &self.weights;
                let zcol = &w[d * h..(d + 1) * h];
                let w2 = &w[(d + 2) * h..(d + 3) * h];
                Some(dot(zcol, zcol).sqrt() * dot(w2, w2).sqrt())
            }
        }
    }
}

fn mlp_hidden(w: &[f64], d: usize, h: usize, x: &[f64], z: f64, hidden: &mut Vec<f64>) {
    hidden.clear();
    hidden.extend_from_slice(&w[(d + 1) * h..(d + 2) * h]);
    for (i, xi) in x.iter().copied().chain(std::iter::once(z)).enumerate() {
        let row = &w[i * h..(i + 1) * h];
        for (acc, wik) in hidden.iter_mut().zip(row) {
            *acc += wik * xi;
        }
    }
    for a in hidden.iter_mut() {
        *a = a.tanh();
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Weighted mean predictive loss `(1/n) sum_i w_i l(y_i, h(x_i, z_i))` and its
/// gradient with respect to the flat weight vector.
pub fn loss_and_grad(
    params: &PredictorParams,
    batch: &[WeightedExample<'_>],
    problem: &Problem,
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::invalid("loss_and_grad needs a non-empty batch"));
    }
    let mut grad = vec![0.0; params.len()];
    let mut hidden = Vec::new();
    let mut loss = 0.0;
    let n = batch.len() as f64;
    for (i, ex) in batch.iter().enumerate() {
        params.check_input(ex.x)?;
        if !(ex.weight.is_finite() && ex.weight >= 0.0) {
            return Err(Error::invalid(format!(
                "example {i} has invalid weight {}",
                ex.weight
            )));
        }
        if ex.weight == 0.0 {
            continue;
        }
        let y_hat = params.forward(ex.x, ex.z, &mut hidden);
        loss += ex.weight * problem.loss(ex.y, y_hat);
        let scale = ex.weight * problem.predictive_loss.d_prediction(ex.y, y_hat) / n;
        params.accumulate_grad(ex.x, ex.z, scale, &mut grad, &mut hidden);
    }
    Ok((loss / n, grad))
}

/// Expected model-implied task cost under a fixed action distribution,
/// `sum_k p_k (1/m) sum_j g(z_k, h(x_j, z_k))`, and its gradient in `theta`
/// with the probabilities held constant.
pub fn task_grad(
    params: &PredictorParams,
    inputs: &[Vec<f64>],
    grid: &ActionGrid,
    action_probs: &[f64],
    problem: &Problem,
) -> Result<(f64, Vec<f64>)> {
    if inputs.is_empty() {
        return Err(Error::invalid("task_grad needs at least one input"));
    }
    if action_probs.len() != grid.n_points() {
        return Err(Error::invalid(format!(
            "{} action probabilities for a {}-point grid",
            action_probs.len(),
            grid.n_points()
        )));
    }
    let total: f64 = action_probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 || action_probs.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::invalid(format!(
            "action probabilities must be nonnegative and sum to 1, sum = {total}"
        )));
    }
    for x in inputs {
        params.check_input(x)?;
    }

    let m = inputs.len() as f64;
    let mut grad = vec![0.0; params.len()];
    let mut hidden = Vec::new();
    let mut task_loss = 0.0;
    for (&z, &p) in grid.points().iter().zip(action_probs) {
        if p == 0.0 {
            continue;
        }
        let mut mean_cost = 0.0;
        for x in inputs {
            let y_hat = params.forward(x, z, &mut hidden);
            mean_cost += problem.cost(z, y_hat);
            let dg = problem.task_cost.d_outcome(z, y_hat);
            if dg != 0.0 {
                params.accumulate_grad(x, z, p * dg / m, &mut grad, &mut hidden);
            }
        }
        task_loss += p * mean_cost / m;
    }
    Ok((task_loss, grad))
}
