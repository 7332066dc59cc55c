//! Python bindings for the oamrs simulator.
//!
//! `Scenario` wraps a full downlink scenario; module functions run the
//! optimizer, the baseline schemes and sweeps on it.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use oamrs::baseline::SchemeOutcome;
use oamrs::channel::{gram_eigenvalues, ideal_mode_channel, ChannelMatrix};
use oamrs::fp::{optimize, FpConfig};
use oamrs::harness::{self, CaseId, Scheme, Spacing, SweepSpec, SweepVariable};
use oamrs::metrics::RateReport;
use oamrs::scenario::{PairProblem, ScenarioConfig};
use oamrs::Error;

fn to_py(e: Error) -> PyErr {
    if e.is_config_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn fp_config(seed: u64, starts: usize, max_iterations: Option<usize>, threshold: Option<f64>) -> PyResult<FpConfig> {
    let mut cfg = FpConfig {
        init_seed: seed,
        starts,
        ..FpConfig::default()
    };
    if let Some(n) = max_iterations {
        cfg.max_outer_iterations = n;
    }
    if let Some(t) = threshold {
        cfg.convergence_threshold = t;
    }
    cfg.validate().map_err(to_py)?;
    Ok(cfg)
}

fn parse_scheme(name: &str) -> PyResult<Scheme> {
    name.parse().map_err(to_py)
}

fn rows_of(m: &ChannelMatrix) -> Vec<Vec<Complex64>> {
    let e = m.entries();
    (0..e.nrows()).map(|r| e.row(r).iter().copied().collect()).collect()
}

fn matrix_rows(m: &oamrs::CMatrix) -> Vec<Vec<Complex64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

fn report_dict<'py>(py: Python<'py>, r: &RateReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("private_a", r.private_a)?;
    d.set_item("private_b", r.private_b)?;
    d.set_item("common_a", r.common_a)?;
    d.set_item("common_b", r.common_b)?;
    d.set_item("common_pair", r.common_pair)?;
    d.set_item("sum", r.sum)?;
    d.set_item("user_a", r.user_a)?;
    d.set_item("user_b", r.user_b)?;
    Ok(d)
}

fn outcome_dict<'py>(py: Python<'py>, o: &SchemeOutcome) -> PyResult<Bound<'py, PyDict>> {
    let d = report_dict(py, &o.report)?;
    d.set_item("converged", o.converged())?;
    d.set_item("iterations", o.iterations())?;
    Ok(d)
}

/// A downlink scenario: OAM pairs, array geometry and link constants.
#[pyclass(name = "Scenario", from_py_object)]
#[derive(Clone)]
struct PyScenario {
    inner: ScenarioConfig,
}

impl PyScenario {
    fn problem(&self, pair: usize) -> PyResult<PairProblem> {
        let p = self
            .inner
            .pairs
            .get(pair)
            .ok_or_else(|| PyValueError::new_err(format!("pair {pair} out of range")))?;
        PairProblem::new(p, &self.inner).map_err(to_py)
    }
}

#[pymethods]
impl PyScenario {
    /// Default three-pair scenario.
    #[new]
    fn new() -> Self {
        PyScenario {
            inner: ScenarioConfig::default(),
        }
    }

    /// Scenario section of a JSON config; other sections are checked but dropped.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let (inner, sweep, _) = harness::parse_scenario(text).map_err(to_py)?;
        let inner = sweep.resolve_scenario(&inner).map_err(to_py)?;
        Ok(PyScenario { inner })
    }

    /// The default scenario reshaped to preset mode case `id` (1..4).
    #[staticmethod]
    fn preset(id: u8) -> PyResult<Self> {
        let case = harness::preset_case(id).map_err(to_py)?;
        let inner = harness::scenario_for_case(&ScenarioConfig::default(), &case).map_err(to_py)?;
        Ok(PyScenario { inner })
    }

    fn with_distance(&self, distance: f64) -> PyResult<Self> {
        let inner = self.inner.with_distance(distance).map_err(to_py)?;
        inner.validate().map_err(to_py)?;
        Ok(PyScenario { inner })
    }

    fn with_power_budget(&self, power_budget: f64) -> PyResult<Self> {
        let inner = self.inner.with_power_budget(power_budget);
        inner.validate().map_err(to_py)?;
        Ok(PyScenario { inner })
    }

    #[getter]
    fn modes(&self) -> Vec<i64> {
        self.inner.modes()
    }

    #[getter]
    fn noise_power(&self) -> f64 {
        self.inner.noise_power
    }

    #[getter]
    fn power_budget(&self) -> f64 {
        self.inner.power_budget
    }

    #[getter]
    fn tau_sq(&self) -> Vec<f64> {
        self.inner.tau_sq.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.pairs.len()
    }

    /// Channel of `user` ("a" or "b") in `pair`, as rows of complex numbers.
    fn channel(&self, pair: usize, user: &str) -> PyResult<Vec<Vec<Complex64>>> {
        let problem = self.problem(pair)?;
        match user {
            "a" => Ok(rows_of(&problem.channels.a)),
            "b" => Ok(rows_of(&problem.channels.b)),
            _ => Err(PyValueError::new_err(format!("user must be 'a' or 'b', got {user:?}"))),
        }
    }

    /// Nonzero Gram eigenvalues of one user's channel, descending.
    #[pyo3(signature = (pair, user, normalize=true))]
    fn gram_eigenvalues(&self, pair: usize, user: &str, normalize: bool) -> PyResult<Vec<f64>> {
        let problem = self.problem(pair)?;
        let h = match user {
            "a" => &problem.channels.a,
            "b" => &problem.channels.b,
            _ => return Err(PyValueError::new_err(format!("user must be 'a' or 'b', got {user:?}"))),
        };
        gram_eigenvalues(h, normalize).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(modes={:?}, noise_power={:e}, power_budget={})",
            self.inner.modes(),
            self.inner.noise_power,
            self.inner.power_budget
        )
    }
}

/// Modes, array sizes and eigenvalues of preset case `id`.
#[pyfunction]
fn preset_case<'py>(py: Python<'py>, id: u8) -> PyResult<Bound<'py, PyDict>> {
    let c = harness::preset_case(id).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("name", c.name)?;
    d.set_item("modes", c.modes)?;
    d.set_item("rx_count", c.rx_count)?;
    d.set_item("tx_count", c.tx_count)?;
    d.set_item("tau_sq", c.tau_sq)?;
    Ok(d)
}

/// Gram eigenvalues of the ideal normalized mode channel.
#[pyfunction]
fn mode_channel_eigenvalues(rx_count: usize, modes: Vec<i64>) -> PyResult<Vec<f64>> {
    let h = ideal_mode_channel(rx_count, &modes).map_err(to_py)?;
    gram_eigenvalues(&h, false).map_err(to_py)
}

/// Evaluate one access scheme on every pair of `scenario`.
#[pyfunction]
#[pyo3(signature = (scenario, scheme="rs", seed=0, starts=4, max_iterations=None, threshold=None))]
fn evaluate<'py>(
    py: Python<'py>,
    scenario: &PyScenario,
    scheme: &str,
    seed: u64,
    starts: usize,
    max_iterations: Option<usize>,
    threshold: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let scheme = parse_scheme(scheme)?;
    let cfg = fp_config(seed, starts, max_iterations, threshold)?;
    let out = py
        .detach(|| harness::evaluate_scenario(&scenario.inner, scheme, &cfg))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("scheme", scheme.label())?;
    d.set_item("sum", out.sum())?;
    d.set_item("user_a", out.user_a())?;
    d.set_item("user_b", out.user_b())?;
    d.set_item("converged", out.converged())?;
    d.set_item("iterations", out.iterations())?;
    let pairs = out
        .pairs
        .iter()
        .map(|p| outcome_dict(py, p))
        .collect::<PyResult<Vec<_>>>()?;
    d.set_item("pairs", pairs)?;
    Ok(d)
}

/// Rate-splitting optimizer on one pair, with its trace and precoder.
#[pyfunction]
#[pyo3(signature = (scenario, pair=0, seed=0, starts=4, max_iterations=None, threshold=None))]
fn optimize_pair<'py>(
    py: Python<'py>,
    scenario: &PyScenario,
    pair: usize,
    seed: u64,
    starts: usize,
    max_iterations: Option<usize>,
    threshold: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let problem = scenario.problem(pair)?;
    let cfg = fp_config(seed, starts, max_iterations, threshold)?;
    let (state, report) = py.detach(|| optimize(&problem, &cfg)).map_err(to_py)?;
    let d = report_dict(py, &report)?;
    d.set_item("converged", state.converged)?;
    d.set_item("iterations", state.iterations_used)?;
    d.set_item("objective_trace", state.objective_trace)?;
    d.set_item("power_trace", state.power_trace)?;
    let precoder = PyDict::new(py);
    precoder.set_item("private_a", matrix_rows(&state.precoder.private_a))?;
    precoder.set_item("private_b", matrix_rows(&state.precoder.private_b))?;
    precoder.set_item("common", matrix_rows(&state.precoder.common))?;
    d.set_item("precoder", precoder)?;
    Ok(d)
}

/// Sweep distance (m) or power (W) and return one dict per point and scheme.
#[pyfunction]
#[pyo3(signature = (scenario, variable="distance", start=5.0, stop=50.0, points=10, spacing="linear", schemes=vec!["rs".to_string()], case_id=None, seed=0, starts=4))]
#[allow(clippy::too_many_arguments)]
fn run_sweep<'py>(
    py: Python<'py>,
    scenario: &PyScenario,
    variable: &str,
    start: f64,
    stop: f64,
    points: usize,
    spacing: &str,
    schemes: Vec<String>,
    case_id: Option<u8>,
    seed: u64,
    starts: usize,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let variable = match variable {
        "distance" => SweepVariable::Distance,
        "power" => SweepVariable::Power,
        v => return Err(PyValueError::new_err(format!("variable must be 'distance' or 'power', got {v:?}"))),
    };
    let spacing = match spacing {
        "linear" => Spacing::Linear,
        "log" => Spacing::Log,
        s => return Err(PyValueError::new_err(format!("spacing must be 'linear' or 'log', got {s:?}"))),
    };
    let spec = SweepSpec {
        variable,
        start,
        stop,
        points,
        spacing,
        schemes: schemes.iter().map(|s| parse_scheme(s)).collect::<PyResult<_>>()?,
        case_id: case_id.map_or(CaseId::Custom, CaseId::Preset),
    };
    let cfg = fp_config(seed, starts, None, None)?;
    let rows = py
        .detach(|| harness::run_sweep(&scenario.inner, &spec, &cfg))
        .map_err(to_py)?;
    rows.iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("sweep_var", r.sweep_var.label())?;
            d.set_item("sweep_value", r.sweep_value)?;
            d.set_item("scheme", r.scheme.label())?;
            d.set_item("case", &r.case)?;
            d.set_item("sum_capacity", r.sum_capacity)?;
            d.set_item("cap_user_a", r.cap_user_a)?;
            d.set_item("cap_user_b", r.cap_user_b)?;
            d.set_item("converged", r.converged)?;
            d.set_item("iterations", r.iterations)?;
            d.set_item("seed", r.seed)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn oamrs_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_function(wrap_pyfunction!(preset_case, m)?)?;
    m.add_function(wrap_pyfunction!(mode_channel_eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_pair, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    Ok(())
}
