//! Python bindings. Runs return the same JSON documents the CLI writes.

use std::path::Path;

use dcsim::catalog::{self, CATALOG};
use dcsim::config::ConfigDocument;
use dcsim::experiments::{self, parse_values, run_scenario, Parameter};
use dcsim::pdcp::DcMode;
use dcsim::report::{self, RunMeta};
use dcsim::trace_io::{self, ConvertOptions, RateUnit};
use dcsim::Error;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn scenario_doc(toml: &str, seed: Option<u64>, reps: Option<u32>) -> Result<ConfigDocument, Error> {
    let mut doc = ConfigDocument::from_toml_str(toml)?;
    doc.seed = seed.or(doc.seed);
    doc.repetitions = reps.or(doc.repetitions);
    Ok(doc)
}

#[pyfunction]
fn jain_index(xs: Vec<f64>) -> PyResult<f64> {
    experiments::jain_index(&xs).map_err(py_err)
}

#[pyfunction]
fn expected_duplication_goodput(b: f64, p: f64) -> f64 {
    experiments::expected_duplication_goodput(b, p)
}

/// `mode` is `"split"`, `"duplicate"` or `None` for a single-connectivity path.
#[pyfunction]
#[pyo3(signature = (p, mode=None))]
fn delivery_probability(p: f64, mode: Option<&str>) -> PyResult<f64> {
    let mode = match mode {
        None => None,
        Some("split") => Some(DcMode::Split),
        Some("duplicate") => Some(DcMode::Duplicate),
        Some(other) => return Err(PyValueError::new_err(format!("unknown mode `{other}`"))),
    };
    Ok(experiments::delivery_probability(p, mode))
}

/// Runs a TOML scenario and returns the summary JSON.
#[pyfunction]
#[pyo3(signature = (toml="", seed=None, reps=None))]
fn run(toml: &str, seed: Option<u64>, reps: Option<u32>) -> PyResult<String> {
    let doc = scenario_doc(toml, seed, reps).map_err(py_err)?;
    let s = doc.to_scenario(Path::new(".")).map_err(py_err)?;
    let r = run_scenario(&s).map_err(py_err)?;
    let meta = RunMeta {
        scenario: s.name.clone(),
        paper_figure: doc.figure.clone(),
        seed: s.seed,
        repetitions: s.repetitions,
    };
    report::summary_json(&meta, &r).map_err(py_err)
}

/// Sweeps one parameter and returns `(sweep_csv, summary_json)`.
#[pyfunction]
#[pyo3(signature = (parameter, values, toml="", seed=None, reps=None))]
fn sweep(
    parameter: &str,
    values: &str,
    toml: &str,
    seed: Option<u64>,
    reps: Option<u32>,
) -> PyResult<(String, String)> {
    let doc = scenario_doc(toml, seed, reps).map_err(py_err)?;
    let s = doc.to_scenario(Path::new(".")).map_err(py_err)?;
    let param: Parameter = parameter.parse().map_err(py_err)?;
    let values = parse_values(values).map_err(py_err)?;
    let points = experiments::sweep(&s, param, &values).map_err(py_err)?;
    let meta = RunMeta {
        scenario: s.name.clone(),
        paper_figure: doc.figure.clone(),
        seed: s.seed,
        repetitions: s.repetitions,
    };
    let rows = report::rows_csv(&report::report_rows(&s.name, param, &points)).map_err(py_err)?;
    Ok((
        rows,
        report::sweep_json(&meta, param, &points).map_err(py_err)?,
    ))
}

#[pyfunction]
#[pyo3(signature = (text, time_col=0, rate_col=1, rate_unit="kbps"))]
fn convert_trace(
    text: &str,
    time_col: usize,
    rate_col: usize,
    rate_unit: &str,
) -> PyResult<String> {
    let rate_unit: RateUnit = rate_unit.parse().map_err(py_err)?;
    trace_io::convert(
        text,
        ConvertOptions {
            time_col,
            rate_col,
            rate_unit,
        },
    )
    .map_err(py_err)
}

/// `(id, label)` for every bundled config.
#[pyfunction]
fn catalog_entries() -> Vec<(String, String)> {
    CATALOG
        .iter()
        .map(|e| (e.id.to_string(), e.label()))
        .collect()
}

#[pyfunction]
fn catalog_toml(key: &str) -> PyResult<String> {
    catalog::find(key)
        .map(|e| e.toml.to_string())
        .ok_or_else(|| PyValueError::new_err(format!("no catalog entry `{key}`")))
}

#[pymodule]
fn dcsim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(jain_index, m)?)?;
    m.add_function(wrap_pyfunction!(expected_duplication_goodput, m)?)?;
    m.add_function(wrap_pyfunction!(delivery_probability, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(convert_trace, m)?)?;
    m.add_function(wrap_pyfunction!(catalog_entries, m)?)?;
    m.add_function(wrap_pyfunction!(catalog_toml, m)?)?;
    Ok(())
}
