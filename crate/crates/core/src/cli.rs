//! `simpo` command-line interface.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 runtime or
//! training error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::evaluation::{
    compare_methods, evaluate_decision, prediction_mse, seed_range, summarize, write_results_csv,
    CompareOptions, DecisionReport, Method,
};
use crate::io::write_atomic;
use crate::objective::model_profile;
use crate::predictor::PredictorParams;
use crate::synthetic::{gen_dataset, TrueModel};
use crate::training::{simpo_fit, two_stage_fit};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "simpo",
    version,
    about = "Joint prediction-and-optimization experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TrainMethod {
    Simpo,
    TwoStage,
}

impl From<TrainMethod> for Method {
    fn from(m: TrainMethod) -> Self {
        match m {
            TrainMethod::Simpo => Method::Simpo,
            TrainMethod::TwoStage => Method::TwoStage,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a synthetic dataset and write it as CSV.
    Generate {
        #[arg(long)]
        config: PathBuf,
        /// Dataset path; defaults to `<output_dir>/dataset.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train one method and write checkpoint, training log and summary.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        method: TrainMethod,
        /// Output directory; defaults to the config's `io.output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score a trained checkpoint's decision against the oracle.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum)]
        method: TrainMethod,
        /// Results CSV path; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run both trainers and the oracle over several seeds.
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// Results CSV path; defaults to `<output_dir>/results.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Record wall-clock time per fit (makes results non-reproducible).
        #[arg(long)]
        timing: bool,
    },
}

#[derive(Debug, Serialize)]
struct TrainSummary {
    z_star: f64,
    g_star: f64,
    converged: bool,
    iters_run: usize,
}

#[derive(Debug, Serialize)]
struct DatasetMeta<'a> {
    true_model: &'a TrueModel,
    seed: u64,
    n_samples: usize,
    grid: &'a crate::grid::ActionGrid,
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let config_path = match &cli.command {
        Command::Generate { config, .. }
        | Command::Train { config, .. }
        | Command::Evaluate { config, .. }
        | Command::Compare { config, .. } => config.clone(),
    };
    let mut config = match ExperimentConfig::load(&config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", config_path.display());
            return EXIT_USAGE;
        }
    };
    let seed_override = match &cli.command {
        Command::Generate { seed, .. }
        | Command::Train { seed, .. }
        | Command::Evaluate { seed, .. }
        | Command::Compare { seed, .. } => *seed,
    };
    if let Some(seed) = seed_override {
        config.seed = seed;
    }

    let outcome = match cli.command {
        Command::Generate { out, .. } => cmd_generate(&config, out),
        Command::Train { method, out, .. } => cmd_train(&config, method.into(), out),
        Command::Evaluate {
            checkpoint,
            method,
            out,
            ..
        } => cmd_evaluate(&config, &checkpoint, method.into(), out),
        Command::Compare {
            out, jobs, timing, ..
        } => cmd_compare(&config, out, jobs, timing),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn cmd_generate(config: &ExperimentConfig, out: Option<PathBuf>) -> Result<()> {
    let out = out.unwrap_or_else(|| config.io.output_dir.join("dataset.csv"));
    let p = &config.problem;
    let data = gen_dataset(&p.true_model, p.n_samples, &p.grid, config.seed)?;
    let mut csv = Vec::new();
    data.write_csv(&mut csv)?;
    let meta = DatasetMeta {
        true_model: &p.true_model,
        seed: config.seed,
        n_samples: p.n_samples,
        grid: &p.grid,
    };
    let mut meta_json = serde_json::to_vec_pretty(&meta)?;
    meta_json.push(b'\n');
    write_atomic(&out, &csv)?;
    write_atomic(&out.with_extension("meta.json"), &meta_json)?;
    eprintln!("wrote {} samples to {}", data.len(), out.display());
    Ok(())
}

fn cmd_train(config: &ExperimentConfig, method: Method, out: Option<PathBuf>) -> Result<()> {
    let out = out.unwrap_or_else(|| config.io.output_dir.clone());
    let scenario = config.scenario();
    let (train, val, _test) = scenario.splits(config.seed)?;
    let problem = scenario.problem();
    let tc = config.train_config();
    let result = match method {
        Method::Simpo => simpo_fit(&problem, &train, &val, config.model, &tc)?,
        _ => two_stage_fit(&problem, &train, &val, config.model, &tc)?,
    };

    let summary = TrainSummary {
        z_star: result.z_star,
        g_star: result.g_star,
        converged: result.converged,
        iters_run: result.iters_run,
    };
    let mut checkpoint = serde_json::to_vec(&result.params_star)?;
    checkpoint.push(b'\n');
    let mut summary_json = serde_json::to_vec_pretty(&summary)?;
    summary_json.push(b'\n');
    write_atomic(&out.join("checkpoint.json"), &checkpoint)?;
    write_atomic(
        &out.join("training_log.csv"),
        result.history_csv().as_bytes(),
    )?;
    write_atomic(&out.join("summary.json"), &summary_json)?;
    println!(
        "{method}: z_star = {}, g_star = {}, iters = {}, converged = {}",
        result.z_star, result.g_star, result.iters_run, result.converged
    );
    Ok(())
}

fn cmd_evaluate(
    config: &ExperimentConfig,
    checkpoint: &Path,
    method: Method,
    out: Option<PathBuf>,
) -> Result<()> {
    let text = std::fs::read_to_string(checkpoint)?;
    let params: PredictorParams = serde_json::from_str(&text)?;
    if params.architecture().feature_dim() != config.problem.true_model.feature_dim() {
        return Err(Error::invalid(
            "checkpoint feature dimension does not match the config",
        ));
    }
    let scenario = config.scenario();
    let (_train, val, test) = scenario.splits(config.seed)?;
    let problem = scenario.problem();
    let profile = model_profile(&params, &val.inputs(), &scenario.grid, &problem)?;
    let action = crate::objective::argmin_profile(&profile);
    let eval = evaluate_decision(
        &scenario.true_model,
        action,
        &scenario.grid,
        scenario.n_mc,
        config.seed,
    )?;
    let report = DecisionReport {
        method,
        seed: config.seed,
        problem: scenario.name.clone(),
        chosen_action: action,
        expected_cost: eval.expected_cost,
        regret: eval.regret,
        pred_mse: prediction_mse(&params, &test)?,
        iters_run: 0,
        wall_ms: 0,
        error: None,
    };
    let mut csv = Vec::new();
    write_results_csv(&[report], &mut csv)?;
    match out {
        Some(path) => write_atomic(&path, &csv)?,
        None => print!("{}", String::from_utf8_lossy(&csv)),
    }
    Ok(())
}

fn cmd_compare(
    config: &ExperimentConfig,
    out: Option<PathBuf>,
    jobs: usize,
    timing: bool,
) -> Result<()> {
    let out = out.unwrap_or_else(|| config.io.output_dir.join("results.csv"));
    let seeds = seed_range(config.seed, config.eval.n_seeds);
    let opts = CompareOptions {
        jobs,
        record_timing: timing,
    };
    let reports = compare_methods(
        &config.scenario(),
        config.model,
        &config.train_config(),
        &seeds,
        opts,
    )?;
    let mut csv = Vec::new();
    write_results_csv(&reports, &mut csv)?;
    write_atomic(&out, &csv)?;
    for r in reports.iter().filter(|r| !r.is_ok()) {
        eprintln!(
            "warning: {} failed for seed {}: {}",
            r.method,
            r.seed,
            r.error.as_deref().unwrap_or("unknown error")
        );
    }
    print!("{}", summary_table(&reports));
    Ok(())
}

fn summary_table(reports: &[DecisionReport]) -> String {
    let mut s = format!(
        "{:<10} {:>14} {:>14} {:>4} {:>6}\n",
        "method", "mean_regret", "mean_pred_mse", "ok", "failed"
    );
    for m in summarize(reports) {
        let _ = writeln!(
            s,
            "{:<10} {:>14.6} {:>14.6} {:>4} {:>6}",
            m.method.as_str(),
            m.mean_regret,
            m.mean_pred_mse,
            m.succeeded,
            m.failed
        );
    }
    s
}
