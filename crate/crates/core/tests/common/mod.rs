#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;
use simpo::{Architecture, ExperimentConfig, PredictorParams, TrainResult};

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

pub fn load_config(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&config_path(name)).expect("shipped config parses")
}

pub fn random_params<R: Rng>(arch: Architecture, rng: &mut R, scale: f64) -> PredictorParams {
    let w = (0..arch.n_params())
        .map(|_| rng.random_range(-scale..scale))
        .collect();
    PredictorParams::from_weights(arch, w).unwrap()
}

/// Central finite differences of `f` with respect to every weight.
pub fn finite_difference<F>(params: &PredictorParams, step: f64, f: F) -> Vec<f64>
where
    F: Fn(&PredictorParams) -> f64,
{
    let arch = params.architecture();
    (0..params.len())
        .map(|i| {
            let mut up = params.weights().to_vec();
            let mut down = params.weights().to_vec();
            up[i] += step;
            down[i] -= step;
            let fu = f(&PredictorParams::from_weights(arch, up).unwrap());
            let fd = f(&PredictorParams::from_weights(arch, down).unwrap());
            (fu - fd) / (2.0 * step)
        })
        .collect()
}

/// Largest per-coordinate mismatch: relative where the gradient is
/// non-negligible, absolute (against 1e-8) otherwise. Returns
/// `(worst relative error, worst absolute error on tiny coordinates)`.
pub fn gradient_mismatch(analytic: &[f64], numeric: &[f64]) -> (f64, f64) {
    let mut rel: f64 = 0.0;
    let mut abs: f64 = 0.0;
    for (a, n) in analytic.iter().zip(numeric) {
        let scale = a.abs().max(n.abs());
        if scale < 1e-8 {
            abs = abs.max((a - n).abs());
        } else {
            rel = rel.max((a - n).abs() / scale);
        }
    }
    (rel, abs)
}

/// `F = pred * omega + task * gamma` on every logged row, to 1e-12 relative.
pub fn history_composes(result: &TrainResult) -> Result<(), String> {
    for r in &result.history {
        let expected = r.pred_term * r.omega + r.task_term * r.gamma;
        if (r.total - expected).abs() > 1e-12 * expected.abs().max(1e-300) && r.total != expected {
            return Err(format!(
                "iter {}: F = {} but pred*omega + task*gamma = {}",
                r.iter, r.total, expected
            ));
        }
    }
    Ok(())
}
