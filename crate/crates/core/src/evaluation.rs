//! Regret against the oracle and the multi-seed comparison sweep.

use std::fmt;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{split_dataset, Dataset};
use crate::error::{Error, Result};
use crate::grid::ActionGrid;
use crate::predictor::{Architecture, PredictorParams};
use crate::synthetic::{gen_dataset, OracleSamples, TrueModel};
use crate::training::{simpo_fit, two_stage_fit, TrainConfig, TrainResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Simpo,
    TwoStage,
    Oracle,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Simpo => "simpo",
            Method::TwoStage => "two_stage",
            Method::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionEvaluation {
    pub expected_cost: f64,
    pub regret: f64,
    pub oracle_action: f64,
    pub oracle_cost: f64,
    /// Three Monte Carlo standard errors of the cost difference.
    pub mc_tolerance: f64,
}

/// True expected cost of `action` and its regret against the best grid
/// action, both estimated on the same Monte Carlo draws.
pub fn evaluate_decision(
    model: &TrueModel,
    action: f64,
    grid: &ActionGrid,
    n_mc: usize,
    seed: u64,
) -> Result<DecisionEvaluation> {
    let samples = OracleSamples::draw(model, n_mc, seed)?;
    evaluate_with(&samples, action, grid)
}

fn evaluate_with(
    samples: &OracleSamples<'_>,
    action: f64,
    grid: &ActionGrid,
) -> Result<DecisionEvaluation> {
    if grid.index_of(action).is_none() {
        return Err(Error::invalid(format!(
            "action {action} is not a grid point"
        )));
    }
    let (oracle_action, oracle_cost) = samples.best_action(grid);
    let expected_cost = samples.expected_cost(action);
    let mc_tolerance = 3.0 * samples.difference_std_error(action, oracle_action);
    let mut regret = expected_cost - oracle_cost;
    if regret < 0.0 && regret >= -mc_tolerance {
        regret = 0.0;
    }
    Ok(DecisionEvaluation {
        expected_cost,
        regret,
        oracle_action,
        oracle_cost,
        mc_tolerance,
    })
}

/// One row of the comparison results.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionReport {
    pub method: Method,
    pub seed: u64,
    pub problem: String,
    pub chosen_action: f64,
    pub expected_cost: f64,
    pub regret: f64,
    pub pred_mse: f64,
    pub iters_run: usize,
    pub wall_ms: u64,
    /// Set when the method failed for this seed; numeric fields are NaN.
    pub error: Option<String>,
}

impl DecisionReport {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

/// A synthetic world together with its data-generation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub true_model: TrueModel,
    pub grid: ActionGrid,
    pub n_samples: usize,
    pub train_frac: f64,
    pub val_frac: f64,
    pub n_mc: usize,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.true_model.validate()?;
        if self.n_mc == 0 {
            return Err(Error::invalid("n_mc must be >= 1"));
        }
        if self.n_samples == 0 {
            return Err(Error::invalid("n_samples must be >= 1"));
        }
        Ok(())
    }

    pub fn problem(&self) -> crate::problem::Problem {
        self.true_model
            .problem(self.name.clone(), self.grid.clone())
    }

    /// Generates and splits the data for one seed.
    pub fn splits(&self, seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
        let data = gen_dataset(&self.true_model, self.n_samples, &self.grid, seed)?;
        split_dataset(&data, self.train_frac, self.val_frac, seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompareOptions {
    pub jobs: usize,
    /// Record elapsed wall time per fit. Off by default so results are
    /// byte-reproducible.
    pub record_timing: bool,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            jobs: 1,
            record_timing: false,
        }
    }
}

/// Mean squared prediction error of `params` on observed `(x, z_obs, y)`.
pub fn prediction_mse(params: &PredictorParams, data: &Dataset) -> Result<f64> {
    let mut total = 0.0;
    for s in data.samples() {
        let e = params.predict(&s.x, s.z_obs)? - s.y;
        total += e * e;
    }
    Ok(total / data.len() as f64)
}

fn true_model_mse(model: &TrueModel, data: &Dataset) -> f64 {
    data.samples()
        .iter()
        .map(|s| (model.mean_outcome(&s.x, s.z_obs) - s.y).powi(2))
        .sum::<f64>()
        / data.len() as f64
}

fn failed(method: Method, seed: u64, problem: &str, err: &Error) -> DecisionReport {
    DecisionReport {
        method,
        seed,
        problem: problem.to_string(),
        chosen_action: f64::NAN,
        expected_cost: f64::NAN,
        regret: f64::NAN,
        pred_mse: f64::NAN,
        iters_run: 0,
        wall_ms: 0,
        error: Some(err.to_string()),
    }
}

fn run_seed(
    scenario: &Scenario,
    arch: Architecture,
    config: &TrainConfig,
    seed: u64,
    opts: CompareOptions,
) -> Vec<DecisionReport> {
    let name = scenario.name.as_str();
    let methods = [Method::Simpo, Method::TwoStage, Method::Oracle];
    let prepared = scenario.splits(seed).and_then(|splits| {
        let samples = OracleSamples::draw(&scenario.true_model, scenario.n_mc, seed)?;
        Ok((splits, samples))
    });
    let ((train, val, test), samples) = match prepared {
        Ok(v) => v,
        Err(e) => return methods.iter().map(|&m| failed(m, seed, name, &e)).collect(),
    };
    let problem = scenario.problem();
    let config = TrainConfig { seed, ..*config };

    let mut rows = Vec::with_capacity(3);
    for method in [Method::Simpo, Method::TwoStage] {
        let started = Instant::now();
        let fitted: Result<TrainResult> = match method {
            Method::Simpo => simpo_fit(&problem, &train, &val, arch, &config),
            _ => two_stage_fit(&problem, &train, &val, arch, &config),
        };
        let elapsed = started.elapsed().as_millis() as u64;
        let row = fitted.and_then(|res| {
            let eval = evaluate_with(&samples, res.z_star, &scenario.grid)?;
            Ok(DecisionReport {
                method,
                seed,
                problem: name.to_string(),
                chosen_action: res.z_star,
                expected_cost: eval.expected_cost,
                regret: eval.regret,
                pred_mse: prediction_mse(&res.params_star, &test)?,
                iters_run: res.iters_run,
                wall_ms: if opts.record_timing { elapsed } else { 0 },
                error: None,
            })
        });
        rows.push(row.unwrap_or_else(|e| failed(method, seed, name, &e)));
    }

    let (oracle_action, oracle_cost) = samples.best_action(&scenario.grid);
    rows.push(DecisionReport {
        method: Method::Oracle,
        seed,
        problem: name.to_string(),
        chosen_action: oracle_action,
        expected_cost: oracle_cost,
        regret: 0.0,
        pred_mse: true_model_mse(&scenario.true_model, &test),
        iters_run: 0,
        wall_ms: 0,
        error: None,
    });
    rows
}

/// Runs both trainers and the oracle on identical data for each seed.
/// Rows come back ordered by seed, then simpo, two_stage, oracle.
pub fn compare_methods(
    scenario: &Scenario,
    arch: Architecture,
    config: &TrainConfig,
    seeds: &[u64],
    opts: CompareOptions,
) -> Result<Vec<DecisionReport>> {
    if seeds.is_empty() {
        return Err(Error::invalid("compare needs at least one seed"));
    }
    scenario.validate()?;
    config.validate()?;
    arch.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    let per_seed: Vec<Vec<DecisionReport>> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&s| run_seed(scenario, arch, config, s, opts))
            .collect()
    });
    Ok(per_seed.into_iter().flatten().collect())
}

/// Consecutive seeds starting at `base`.
pub fn seed_range(base: u64, n_seeds: usize) -> Vec<u64> {
    (0..n_seeds as u64).map(|i| base.wrapping_add(i)).collect()
}

pub const RESULTS_HEADER: &str =
    "method,seed,problem,chosen_action,expected_cost,regret,pred_mse,iters_run,wall_ms";

fn sig17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

pub fn write_results_csv<W: Write>(reports: &[DecisionReport], mut out: W) -> Result<()> {
    writeln!(out, "{RESULTS_HEADER}")?;
    for r in reports {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.method,
            r.seed,
            r.problem,
            sig17(r.chosen_action),
            sig17(r.expected_cost),
            sig17(r.regret),
            sig17(r.pred_mse),
            r.iters_run,
            r.wall_ms
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    pub mean_regret: f64,
    pub mean_pred_mse: f64,
    pub succeeded: usize,
    pub failed: usize,
}

pub fn summarize(reports: &[DecisionReport]) -> Vec<MethodSummary> {
    [Method::Simpo, Method::TwoStage, Method::Oracle]
        .into_iter()
        .filter_map(|method| {
            let rows: Vec<_> = reports.iter().filter(|r| r.method == method).collect();
            if rows.is_empty() {
                return None;
            }
            let ok: Vec<_> = rows.iter().filter(|r| r.is_ok()).collect();
            let mean = |f: fn(&DecisionReport) -> f64| {
                if ok.is_empty() {
                    f64::NAN
                } else {
                    ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
                }
            };
            Some(MethodSummary {
                method,
                mean_regret: mean(|r| r.regret),
                mean_pred_mse: mean(|r| r.pred_mse),
                succeeded: ok.len(),
                failed: rows.len() - ok.len(),
            })
        })
        .collect()
}
