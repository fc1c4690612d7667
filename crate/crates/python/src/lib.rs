//! Python bindings for the `mdiqkd` crate.
//!
//! Structured results (reports, sweep points, bounds) cross the boundary as
//! plain dicts built from their serde representation.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use mdiqkd::channel::{self, Basis};
use mdiqkd::error::Error;
use mdiqkd::estimation::{self, FluctuationConfig};
use mdiqkd::keyrate::{self, KeyRateInputs, DEFAULT_EC_INEFFICIENCY};
use mdiqkd::photon;
use mdiqkd::runner;

create_exception!(mdiqkd_py, InfeasibleError, PyRuntimeError, "The estimation LP has no feasible point.");

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Infeasible { .. } => InfeasibleError::new_err(e.to_string()),
        Error::Io(_) => PyOSError::new_err(e.to_string()),
        Error::SolverDefect(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_dict<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_basis(name: &str) -> PyResult<Basis> {
    match name {
        "x" | "X" => Ok(Basis::X),
        "z" | "Z" => Ok(Basis::Z),
        _ => Err(PyValueError::new_err(format!("unknown basis {name:?}, expected \"x\" or \"z\""))),
    }
}

fn fluctuation(n_alpha: f64, cutoff: usize) -> FluctuationConfig {
    let mut cfg = FluctuationConfig::default().with_n_alpha(n_alpha);
    cfg.cutoff = cutoff;
    cfg
}

/// Channel transmittances, dark-count probability and misalignment.
#[pyclass(name = "ChannelParams", module = "mdiqkd_py", frozen)]
struct PyChannelParams {
    inner: channel::ChannelParams,
}

#[pymethods]
impl PyChannelParams {
    #[new]
    #[pyo3(signature = (eta_a, eta_b, p_d = 3e-6, e_d = 0.015))]
    fn new(eta_a: f64, eta_b: f64, p_d: f64, e_d: f64) -> PyResult<Self> {
        channel::ChannelParams::new(eta_a, eta_b, p_d, e_d).map(|inner| Self { inner }).map_err(to_py)
    }

    #[getter]
    fn eta_a(&self) -> f64 {
        self.inner.eta_a
    }

    #[getter]
    fn eta_b(&self) -> f64 {
        self.inner.eta_b
    }

    #[getter]
    fn p_d(&self) -> f64 {
        self.inner.p_d
    }

    #[getter]
    fn e_d(&self) -> f64 {
        self.inner.e_d
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!("ChannelParams(eta_a={}, eta_b={}, p_d={}, e_d={})", c.eta_a, c.eta_b, c.p_d, c.e_d)
    }
}

/// A full analysis configuration, as read from a scenario JSON file.
#[pyclass(name = "Scenario", module = "mdiqkd_py")]
struct PyScenario {
    inner: runner::Scenario,
}

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        runner::Scenario::from_json(text).map(|inner| Self { inner }).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        runner::Scenario::load(&path).map(|inner| Self { inner }).map_err(to_py)
    }

    #[staticmethod]
    fn vacuum_weak() -> Self {
        Self { inner: runner::Scenario::vacuum_weak() }
    }

    #[staticmethod]
    fn vacuum_two_weak() -> Self {
        Self { inner: runner::Scenario::vacuum_two_weak() }
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn n_alpha(&self) -> f64 {
        self.inner.estimation.n_alpha
    }

    #[setter]
    fn set_n_alpha(&mut self, n_alpha: f64) -> PyResult<()> {
        let mut next = self.inner.clone();
        next.estimation.n_alpha = n_alpha;
        next.validate().map_err(to_py)?;
        self.inner = next;
        Ok(())
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    #[getter]
    fn sampled(&self) -> bool {
        self.inner.mode == runner::Mode::Sampled
    }

    #[setter]
    fn set_sampled(&mut self, sampled: bool) {
        self.inner.mode = if sampled { runner::Mode::Sampled } else { runner::Mode::Analytic };
    }

    fn channel(&self) -> PyResult<PyChannelParams> {
        self.inner.channel_params().map(|inner| PyChannelParams { inner }).map_err(to_py)
    }

    /// Bounds and key rate at the configured operating point.
    fn run_point<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let report = py.detach(|| runner::run_point(&self.inner)).map_err(to_py)?;
        to_dict(py, &report)
    }

    /// Rates over `losses_db`, or over the configured sweep when omitted.
    #[pyo3(signature = (losses_db = None))]
    fn run_sweep<'py>(&self, py: Python<'py>, losses_db: Option<Vec<f64>>) -> PyResult<Bound<'py, PyAny>> {
        let points = py
            .detach(|| match &losses_db {
                Some(grid) => runner::run_sweep(&self.inner, grid),
                None => runner::run_configured_sweep(&self.inner),
            })
            .map_err(to_py)?;
        to_dict(py, &points)
    }

    fn __repr__(&self) -> String {
        format!("Scenario({})", self.inner.to_json().split_whitespace().collect::<String>())
    }
}

/// `(gain, qber)` for one intensity pair in basis `"x"` or `"z"`.
#[pyfunction]
fn gain_qber(params: &PyChannelParams, basis: &str, mu: f64, nu: f64) -> PyResult<(f64, f64)> {
    let g = channel::gain_qber(&params.inner, parse_basis(basis)?, mu, nu).map_err(to_py)?;
    Ok((g.gain, g.qber))
}

#[pyfunction]
fn single_photon_stats<'py>(py: Python<'py>, params: &PyChannelParams) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &channel::single_photon_stats(&params.inner).map_err(to_py)?)
}

#[pyfunction]
fn binary_entropy(e: f64) -> PyResult<f64> {
    keyrate::binary_entropy(e).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (q11_z, e11_x, gain_z, qber_z, f_ec = DEFAULT_EC_INEFFICIENCY))]
fn key_rate(q11_z: f64, e11_x: f64, gain_z: f64, qber_z: f64, f_ec: f64) -> PyResult<f64> {
    let inputs = KeyRateInputs { q11_z, e11_x, gain_z, qber_z, f_ec };
    keyrate::key_rate(&inputs).map(|r| r.rate).map_err(to_py)
}

#[pyfunction]
fn failure_probability(n_alpha: f64) -> PyResult<f64> {
    keyrate::failure_probability(n_alpha).map_err(to_py)
}

/// Joint Poisson mass of two sources of mean `mu` lost when photon numbers
/// `>= k` are discarded.
#[pyfunction]
fn truncation_bound(mu: f64, k: usize) -> f64 {
    photon::truncation_bound(mu, k)
}

/// Decoy bounds from a counts CSV file.
#[pyfunction]
#[pyo3(signature = (path, n_alpha = 5.0, cutoff = 7))]
fn estimate_counts<'py>(py: Python<'py>, path: PathBuf, n_alpha: f64, cutoff: usize) -> PyResult<Bound<'py, PyAny>> {
    let obs = runner::ingest_counts(&path).map_err(to_py)?;
    let bounds = py.detach(|| estimation::estimate(&obs, &fluctuation(n_alpha, cutoff))).map_err(to_py)?;
    to_dict(py, &bounds)
}

/// Bounds and key rate from a counts CSV file for signal pair `(k, l)`.
#[pyfunction]
#[pyo3(signature = (path, signal, n_alpha = 5.0, cutoff = 7, f_ec = DEFAULT_EC_INEFFICIENCY))]
fn analyze_counts<'py>(
    py: Python<'py>,
    path: PathBuf,
    signal: (usize, usize),
    n_alpha: f64,
    cutoff: usize,
    f_ec: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let obs = runner::ingest_counts(&path).map_err(to_py)?;
    let cfg = fluctuation(n_alpha, cutoff);
    let report = py.detach(|| runner::analyze(obs, signal, &cfg, f_ec, None)).map_err(to_py)?;
    to_dict(py, &report)
}

#[pymodule]
fn mdiqkd_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyChannelParams>()?;
    m.add_class::<PyScenario>()?;
    m.add_function(wrap_pyfunction!(gain_qber, m)?)?;
    m.add_function(wrap_pyfunction!(single_photon_stats, m)?)?;
    m.add_function(wrap_pyfunction!(binary_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(key_rate, m)?)?;
    m.add_function(wrap_pyfunction!(failure_probability, m)?)?;
    m.add_function(wrap_pyfunction!(truncation_bound, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_counts, m)?)?;
    m.add_function(wrap_pyfunction!(analyze_counts, m)?)?;
    m.add("InfeasibleError", m.py().get_type::<InfeasibleError>())?;
    Ok(())
}
