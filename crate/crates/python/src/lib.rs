//! Python bindings: grids, costs, the predictor, weight functions, data
//! generation, both trainers and the comparison harness.

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use simpo::evaluation::seed_range;
use simpo::{Error, ExperimentConfig};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Invalid(_) | Error::Json(_) | Error::Csv(_) => {
            PyValueError::new_err(err.to_string())
        }
        Error::Diverged { .. } => PyRuntimeError::new_err(err.to_string()),
        Error::Io(_) => PyOSError::new_err(err.to_string()),
    }
}

fn parse_config(config_json: &str, seed: Option<u64>) -> PyResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_json(config_json).map_err(to_py)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

/// Evenly spaced candidate actions.
#[pyclass(name = "ActionGrid", module = "simpo_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyActionGrid(simpo::ActionGrid);

#[pymethods]
impl PyActionGrid {
    #[new]
    fn new(z_min: f64, z_max: f64, n_points: usize) -> PyResult<Self> {
        simpo::ActionGrid::new(z_min, z_max, n_points)
            .map(Self)
            .map_err(to_py)
    }

    fn points(&self) -> Vec<f64> {
        self.0.points().to_vec()
    }

    #[getter]
    fn step(&self) -> f64 {
        self.0.step()
    }

    #[getter]
    fn width(&self) -> f64 {
        self.0.width()
    }

    fn __len__(&self) -> usize {
        self.0.n_points()
    }

    fn __repr__(&self) -> String {
        format!(
            "ActionGrid({}, {}, {})",
            self.0.z_min(),
            self.0.z_max(),
            self.0.n_points()
        )
    }
}

/// Predictor parameters tied to an architecture.
#[pyclass(name = "Predictor", module = "simpo_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPredictor(simpo::PredictorParams);

#[pymethods]
impl PyPredictor {
    /// Seeded initialization. `hidden_units = 0` selects the linear model.
    #[staticmethod]
    #[pyo3(signature = (feature_dim, hidden_units = 0, seed = 0))]
    fn init(feature_dim: usize, hidden_units: usize, seed: u64) -> PyResult<Self> {
        let arch = if hidden_units == 0 {
            simpo::Architecture::linear(feature_dim)
        } else {
            simpo::Architecture::mlp1(feature_dim, hidden_units)
        };
        simpo::init_params(arch, seed).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text)
            .map(Self)
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn predict(&self, x: Vec<f64>, z: f64) -> PyResult<f64> {
        self.0.predict(&x, z).map_err(to_py)
    }

    fn weights(&self) -> Vec<f64> {
        self.0.weights().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyfunction]
fn newsvendor_cost(z: f64, y: f64, holding: f64, shortage: f64) -> f64 {
    simpo::newsvendor_cost(z, y, holding, shortage)
}

#[pyfunction]
fn pricing_cost(z: f64, y: f64, capacity: f64) -> f64 {
    simpo::pricing_cost(z, y, capacity)
}

/// Soft-min distribution over a cost profile laid out on `grid`.
#[pyfunction]
fn action_distribution(grid: &PyActionGrid, values: Vec<f64>, tau: f64) -> PyResult<Vec<f64>> {
    let profile = simpo::CostProfile::new(grid.0.clone(), values, simpo::ProfileSource::Model)
        .map_err(to_py)?;
    simpo::action_distribution(&profile, tau).map_err(to_py)
}

#[pyfunction]
fn omega_weight(
    probs: Vec<f64>,
    grid: &PyActionGrid,
    z_star_train: f64,
    alpha: f64,
) -> PyResult<f64> {
    simpo::omega_weight(&probs, &grid.0, z_star_train, alpha).map_err(to_py)
}

#[pyfunction]
fn gamma_weight(
    z_star_train: f64,
    z_star_test: f64,
    beta: f64,
    grid: &PyActionGrid,
) -> PyResult<f64> {
    simpo::gamma_weight(z_star_train, z_star_test, beta, &grid.0).map_err(to_py)
}

type Columns = (Vec<Vec<f64>>, Vec<f64>, Vec<f64>);

/// Samples the config's synthetic world. Returns `(x, z_obs, y)` lists.
#[pyfunction]
#[pyo3(signature = (config_json, seed = None))]
fn generate(config_json: &str, seed: Option<u64>) -> PyResult<Columns> {
    let cfg = parse_config(config_json, seed)?;
    let p = &cfg.problem;
    let data = simpo::gen_dataset(&p.true_model, p.n_samples, &p.grid, cfg.seed).map_err(to_py)?;
    let xs = data.inputs();
    let zs = data.samples().iter().map(|s| s.z_obs).collect();
    Ok((xs, zs, data.labels()))
}

/// Trains one method (`"simpo"` or `"two_stage"`) on the config's data.
#[pyfunction]
#[pyo3(signature = (config_json, method, seed = None))]
fn fit<'py>(
    py: Python<'py>,
    config_json: &str,
    method: &str,
    seed: Option<u64>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = parse_config(config_json, seed)?;
    let joint = match method {
        "simpo" => true,
        "two_stage" | "two-stage" => false,
        other => return Err(PyValueError::new_err(format!("unknown method {other:?}"))),
    };
    let res = py
        .detach(|| {
            let scenario = cfg.scenario();
            let (train, val, _) = scenario.splits(cfg.seed)?;
            let problem = scenario.problem();
            let tc = cfg.train_config();
            if joint {
                simpo::simpo_fit(&problem, &train, &val, cfg.model, &tc)
            } else {
                simpo::two_stage_fit(&problem, &train, &val, cfg.model, &tc)
            }
        })
        .map_err(to_py)?;

    let out = PyDict::new(py);
    out.set_item("z_star", res.z_star)?;
    out.set_item("g_star", res.g_star)?;
    out.set_item("iters_run", res.iters_run)?;
    out.set_item("converged", res.converged)?;
    out.set_item("z_star_train", res.z_star_train)?;
    let history = res
        .history
        .iter()
        .map(|r| {
            let row = PyDict::new(py);
            row.set_item("iter", r.iter)?;
            row.set_item("F", r.total)?;
            row.set_item("pred_term", r.pred_term)?;
            row.set_item("task_term", r.task_term)?;
            row.set_item("omega", r.omega)?;
            row.set_item("gamma", r.gamma)?;
            row.set_item("z_star_test", r.z_star_test)?;
            Ok(row)
        })
        .collect::<PyResult<Vec<_>>>()?;
    out.set_item("history", history)?;
    out.set_item("params", PyPredictor(res.params_star))?;
    Ok(out)
}

/// Runs both trainers and the oracle over the config's seeds and returns
/// one dict per results row.
#[pyfunction]
#[pyo3(signature = (config_json, jobs = 1, seed = None))]
fn compare<'py>(
    py: Python<'py>,
    config_json: &str,
    jobs: usize,
    seed: Option<u64>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = parse_config(config_json, seed)?;
    let seeds = seed_range(cfg.seed, cfg.eval.n_seeds);
    let opts = simpo::CompareOptions {
        jobs,
        record_timing: false,
    };
    let rows = py
        .detach(|| {
            simpo::compare_methods(
                &cfg.scenario(),
                cfg.model,
                &cfg.train_config(),
                &seeds,
                opts,
            )
        })
        .map_err(to_py)?;
    rows.iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("method", r.method.as_str())?;
            d.set_item("seed", r.seed)?;
            d.set_item("problem", &r.problem)?;
            d.set_item("chosen_action", r.chosen_action)?;
            d.set_item("expected_cost", r.expected_cost)?;
            d.set_item("regret", r.regret)?;
            d.set_item("pred_mse", r.pred_mse)?;
            d.set_item("iters_run", r.iters_run)?;
            d.set_item("error", r.error.as_deref())?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn simpo_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyActionGrid>()?;
    m.add_class::<PyPredictor>()?;
    m.add_function(wrap_pyfunction!(newsvendor_cost, m)?)?;
    m.add_function(wrap_pyfunction!(pricing_cost, m)?)?;
    m.add_function(wrap_pyfunction!(action_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(omega_weight, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_weight, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    Ok(())
}
