//! Python bindings. Structured results (reports, measures, errors) cross
//! the boundary as JSON text, which the Python side decodes with `json`.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyKeyError, PyValueError};
use pyo3::prelude::*;

use avcal::doe;
use avcal::fielddata::{export_csv, extract_events, read_field_data, write_field_data, ParseOptions};
use avcal::metrics;
use avcal::pipeline::{self, all_mops, simulate_dataset};
use avcal::roadsim::ScenarioConfig;
use avcal::saga;

fn py_err(e: avcal::Error) -> PyErr {
    match e {
        avcal::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        avcal::Error::UnknownParameter(_) => PyKeyError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json<T: serde::Serialize>(value: &T) -> PyResult<String> {
    serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Road network, demand and driver behaviour of one simulation.
#[pyclass(name = "Scenario", from_py_object)]
#[derive(Clone)]
struct PyScenario {
    inner: ScenarioConfig,
}

#[pymethods]
impl PyScenario {
    /// The built-in corridor, or a scenario parsed from TOML text.
    #[new]
    #[pyo3(signature = (toml=None))]
    fn new(toml: Option<&str>) -> PyResult<Self> {
        let inner = match toml {
            Some(t) => ScenarioConfig::from_toml(t).map_err(py_err)?,
            None => ScenarioConfig::default(),
        };
        Ok(PyScenario { inner })
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    /// Parameter value by id, e.g. `input.E1` or `background.cf.T`.
    fn get(&self, id: &str) -> PyResult<f64> {
        self.inner.get_param(id).map_err(py_err)
    }

    fn set(&mut self, id: &str, value: f64) -> PyResult<()> {
        self.inner.set_param(id, value).map_err(py_err)
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml().map_err(py_err)
    }

    /// Runs the scenario and writes the subject's detection log to `path`.
    /// Returns the run summary as JSON.
    fn simulate(&self, py: Python<'_>, path: PathBuf) -> PyResult<String> {
        let sc = self.inner.clone();
        let sim = py.detach(|| -> avcal::Result<_> {
            sc.validate()?;
            let sim = simulate_dataset(&sc)?;
            write_field_data(&sim.dataset, &path)?;
            Ok(sim)
        });
        json(&sim.map_err(py_err)?.summary)
    }
}

/// Calibration settings for both stages.
#[pyclass(name = "CalibrationConfig", from_py_object)]
#[derive(Clone)]
struct PyCalibrationConfig {
    inner: pipeline::CalibrationConfig,
}

#[pymethods]
impl PyCalibrationConfig {
    #[new]
    #[pyo3(signature = (toml=None))]
    fn new(toml: Option<&str>) -> PyResult<Self> {
        let inner = match toml {
            Some(t) => pipeline::CalibrationConfig::from_toml(t).map_err(py_err)?,
            None => pipeline::CalibrationConfig::default(),
        };
        Ok(PyCalibrationConfig { inner })
    }

    #[getter]
    fn master_seed(&self) -> u64 {
        self.inner.master_seed
    }

    #[setter]
    fn set_master_seed(&mut self, seed: u64) {
        self.inner.master_seed = seed;
    }

    #[getter]
    fn output_dir(&self) -> Option<PathBuf> {
        self.inner.output_dir.clone()
    }

    #[setter]
    fn set_output_dir(&mut self, dir: Option<PathBuf>) {
        self.inner.output_dir = dir;
    }

    #[getter]
    fn scenario(&self) -> PyScenario {
        PyScenario {
            inner: self.inner.scenario.clone(),
        }
    }

    #[setter]
    fn set_scenario(&mut self, s: PyScenario) {
        self.inner.scenario = s.inner;
    }

    fn stage1_parameters(&self) -> Vec<String> {
        self.inner.stage1_parameters()
    }

    fn stage2_parameters(&self) -> Vec<String> {
        self.inner.stage2_parameters()
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml().map_err(py_err)
    }

    /// Calibrates against the detection log at `field`; returns the
    /// report as JSON.
    fn calibrate(&self, py: Python<'_>, field: PathBuf) -> PyResult<String> {
        let cfg = self.inner.clone();
        let report = py.detach(|| {
            let data = read_field_data(&field, &ParseOptions::default())?;
            pipeline::calibrate_with(&cfg, data)
        });
        json(&report.map_err(py_err)?)
    }
}

/// The synthetic recovery scenario for `master_seed`: its field data is
/// written to `field_path`, and the config plus the true parameter values
/// are returned.
#[pyfunction]
fn recovery_case(
    py: Python<'_>,
    master_seed: u64,
    field_path: PathBuf,
) -> PyResult<(PyCalibrationConfig, Vec<(String, f64)>)> {
    let case = py
        .detach(|| {
            let case = pipeline::synthetic::recovery_case(master_seed)?;
            write_field_data(&case.field, &field_path)?;
            Ok(case)
        })
        .map_err(py_err)?;
    Ok((PyCalibrationConfig { inner: case.config }, case.truth.values))
}

/// Text rendering of a report produced by `CalibrationConfig.calibrate`.
#[pyfunction]
fn render_report(report_json: &str) -> PyResult<String> {
    let r: pipeline::CalibrationReport =
        serde_json::from_str(report_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(pipeline::render_report(&r))
}

/// Measures of performance of a detection log, as JSON.
#[pyfunction]
#[pyo3(signature = (path, config=None))]
fn extract_mops(path: PathBuf, config: Option<&PyCalibrationConfig>) -> PyResult<String> {
    let cfg = config.map(|c| c.inner.clone()).unwrap_or_default();
    let data = read_field_data(&path, &ParseOptions::default()).map_err(py_err)?;
    let events = extract_events(&data, &cfg.events);
    json(&all_mops(&data, &events, &cfg.metric_config()).map_err(py_err)?)
}

/// Evaluation errors between two detection logs, as JSON.
#[pyfunction]
#[pyo3(signature = (field, sim, config=None))]
fn evaluate_moes(field: PathBuf, sim: PathBuf, config: Option<&PyCalibrationConfig>) -> PyResult<String> {
    let cfg = config.map(|c| c.inner.clone()).unwrap_or_default();
    let opts = ParseOptions::default();
    let f = read_field_data(&field, &opts).map_err(py_err)?;
    let s = read_field_data(&sim, &opts).map_err(py_err)?;
    let (fe, se) = (extract_events(&f, &cfg.events), extract_events(&s, &cfg.events));
    json(&metrics::evaluate_moes((&f, &fe), (&s, &se), &cfg.cutin, &cfg.metric_config()))
}

/// Re-exports a detection log in canonical form.
#[pyfunction]
fn normalize_detections(src: PathBuf, dst: PathBuf) -> PyResult<usize> {
    let d = read_field_data(&src, &ParseOptions::default()).map_err(py_err)?;
    let f = std::fs::File::create(&dst).map_err(|e| py_err(avcal::Error::io(&dst, e)))?;
    export_csv(&d, f).map_err(py_err)?;
    Ok(d.len())
}

/// Strength-2 orthogonal array as a list of runs with 0-based levels.
#[pyfunction]
fn orthogonal_array(levels: usize, factors: usize) -> PyResult<Vec<Vec<usize>>> {
    Ok(doe::build_orthogonal_array(levels, factors).map_err(py_err)?.matrix)
}

/// Range analysis of `accuracies` over the array `(levels, factors)`;
/// returns `(ranges, ranking, critical_set, best_levels)`.
#[pyfunction]
#[allow(clippy::type_complexity)]
fn range_analysis(
    levels: usize,
    factors: usize,
    accuracies: Vec<f64>,
    k: usize,
) -> PyResult<(Vec<f64>, Vec<usize>, Vec<usize>, Vec<usize>)> {
    let oa = doe::build_orthogonal_array(levels, factors).map_err(py_err)?;
    let r = doe::range_analysis(&oa, &accuracies, k).map_err(py_err)?;
    Ok((r.ranges, r.ranking, r.critical_set, r.best_levels))
}

#[pyfunction]
fn adaptive_probability(f_pair: f64, f_max: f64, f_avg: f64, p_min: f64, p_max: f64) -> f64 {
    saga::adaptive_probability(f_pair, f_max, f_avg, p_min, p_max)
}

#[pyfunction]
#[pyo3(signature = (n_real, n_sim, delta_lb=0.0, delta_ub=1.0))]
fn cutin_error(n_real: f64, n_sim: f64, delta_lb: f64, delta_ub: f64) -> f64 {
    metrics::cutin_error(n_real, n_sim, &metrics::CutinErrorParams { delta_lb, delta_ub })
}

#[pyfunction]
fn jaccard_similarity(a: Vec<String>, b: Vec<String>, k: usize) -> PyResult<f64> {
    metrics::jaccard_similarity(&a, &b, k).map_err(py_err)
}

#[pymodule]
fn avcal_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PyCalibrationConfig>()?;
    m.add_function(wrap_pyfunction!(recovery_case, m)?)?;
    m.add_function(wrap_pyfunction!(render_report, m)?)?;
    m.add_function(wrap_pyfunction!(extract_mops, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_moes, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_detections, m)?)?;
    m.add_function(wrap_pyfunction!(orthogonal_array, m)?)?;
    m.add_function(wrap_pyfunction!(range_analysis, m)?)?;
    m.add_function(wrap_pyfunction!(adaptive_probability, m)?)?;
    m.add_function(wrap_pyfunction!(cutin_error, m)?)?;
    m.add_function(wrap_pyfunction!(jaccard_similarity, m)?)?;
    Ok(())
}
