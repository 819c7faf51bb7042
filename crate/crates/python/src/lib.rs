//! Python bindings. Scenarios, samples and summaries cross the boundary as
//! plain dicts (JSON-shaped), so they match the on-disk formats exactly.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyString;
use serde::Serialize;

use ccsim::metrics::{self, JainIndex};
use ccsim::ScenarioConfig;

fn to_py_err(e: ccsim::Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Accepts a scenario as a dict or a JSON string.
fn scenario_arg(obj: &Bound<'_, PyAny>) -> PyResult<ScenarioConfig> {
    let text: String = if obj.is_instance_of::<PyString>() {
        obj.extract()?
    } else {
        obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?
    };
    ScenarioConfig::from_json(&text).map_err(to_py_err)
}

/// Names and descriptions of the builtin presets.
#[pyfunction]
fn presets(py: Python<'_>) -> PyResult<Bound<'_, PyAny>> {
    to_py(py, &ccsim::presets())
}

/// The scenario dict for a builtin preset.
#[pyfunction]
#[pyo3(signature = (name, seed = 1))]
fn preset<'py>(py: Python<'py>, name: &str, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &ccsim::preset(name, seed).map_err(to_py_err)?)
}

/// Validates a scenario and returns it with defaults filled in.
#[pyfunction]
fn validate<'py>(py: Python<'py>, scenario: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &scenario_arg(scenario)?)
}

/// Runs a scenario in memory and returns its samples as a list of dicts.
#[pyfunction]
fn simulate<'py>(py: Python<'py>, scenario: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = scenario_arg(scenario)?;
    let samples = py.detach(|| ccsim::simulate(&cfg)).map_err(to_py_err)?;
    to_py(py, &samples)
}

/// Runs a scenario, writes its log and summary under `out_dir`, and returns
/// the run result (paths, summary, wall-clock seconds).
#[pyfunction]
fn run_scenario<'py>(py: Python<'py>, scenario: &Bound<'py, PyAny>, out_dir: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let cfg = scenario_arg(scenario)?;
    let result = py.detach(|| ccsim::run_scenario(&cfg, &out_dir)).map_err(to_py_err)?;
    to_py(py, &result)
}

/// Recomputes the summary of an existing JSONL log.
#[pyfunction]
fn summarize(py: Python<'_>, log_path: PathBuf) -> PyResult<Bound<'_, PyAny>> {
    let summary = py.detach(|| ccsim::summarize(&log_path)).map_err(to_py_err)?;
    to_py(py, &summary)
}

#[pyfunction]
fn jain_index(values: Vec<f64>) -> PyResult<f64> {
    if values.iter().any(|v| !(*v >= 0.0)) {
        return Err(PyValueError::new_err("rates must be non-negative"));
    }
    let JainIndex { value, .. } = metrics::jain_index(&values);
    Ok(value)
}

/// `series[i][k]` is flow i's goodput at `times[k]`.
#[pyfunction]
#[pyo3(signature = (times, series, band = 0.2))]
fn convergence_time(times: Vec<f64>, series: Vec<Vec<f64>>, band: f64) -> PyResult<Option<f64>> {
    if series.iter().any(|s| s.len() != times.len()) {
        return Err(PyValueError::new_err("every series must have one value per time"));
    }
    Ok(metrics::convergence_time(&times, &series, band))
}

#[pymodule]
pub fn pyccsim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add_function(wrap_pyfunction!(preset, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(summarize, m)?)?;
    m.add_function(wrap_pyfunction!(jain_index, m)?)?;
    m.add_function(wrap_pyfunction!(convergence_time, m)?)?;
    Ok(())
}
