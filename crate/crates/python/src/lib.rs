//! Python bindings.
//!
//! Forecasts cross the boundary as lists of probabilities and labels as
//! integer indices; reports come back as plain dicts.

use std::fs::File;
use std::io::BufReader;

use crcal::lab::pooled_crc_curve;
use crcal::{
    ConfidenceLevel, CrcCurve, ForecastVector, LabelId, LearnerConfig, PreprocessScope,
    ProtocolOptions, SplitPlan, SyntheticTask,
};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: crcal::Error) -> PyErr {
    match e {
        crcal::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        e if e.is_input_error() => PyValueError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

fn json_to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn level(delta: f64) -> PyResult<ConfidenceLevel> {
    ConfidenceLevel::new(delta).map_err(to_py)
}

fn batch(probs: Vec<Vec<f64>>, true_labels: Option<Vec<usize>>) -> PyResult<Vec<ForecastVector>> {
    if let Some(labels) = &true_labels {
        if labels.len() != probs.len() {
            return Err(PyValueError::new_err(format!(
                "{} forecasts but {} true labels",
                probs.len(),
                labels.len()
            )));
        }
    }
    probs
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let label = true_labels.as_ref().map(|l| LabelId(l[i]));
            ForecastVector::new(format!("row-{i}"), p, label).map_err(to_py)
        })
        .collect()
}

/// Region of the most probable labels, most probable first, whose excluded
/// mass stays below `delta`.
#[pyfunction]
fn build_region(probs: Vec<f64>, delta: f64) -> PyResult<Vec<usize>> {
    let f = ForecastVector::new("x", probs, None).map_err(to_py)?;
    let region = crcal::build_region(&f, level(delta)?);
    Ok(region.members().iter().map(|l| l.index()).collect())
}

/// Regions for a batch of forecasts at one delta.
#[pyfunction]
fn build_regions(probs: Vec<Vec<f64>>, delta: f64) -> PyResult<Vec<Vec<usize>>> {
    let forecasts = batch(probs, None)?;
    let regions = crcal::build_regions_batch(&forecasts, level(delta)?).map_err(to_py)?;
    Ok(regions
        .iter()
        .map(|r| r.members().iter().map(|l| l.index()).collect())
        .collect())
}

/// Error fraction and average width of the regions at `delta`.
#[pyfunction]
fn score_regions<'py>(
    py: Python<'py>,
    probs: Vec<Vec<f64>>,
    true_labels: Vec<usize>,
    delta: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let forecasts = batch(probs, Some(true_labels.clone()))?;
    let regions = crcal::build_regions_batch(&forecasts, level(delta)?).map_err(to_py)?;
    let labels: Vec<LabelId> = true_labels.into_iter().map(LabelId).collect();
    json_to_py(py, &crcal::score_regions(&regions, &labels).map_err(to_py)?)
}

/// Argmax error rate in percent.
#[pyfunction]
fn error_rate(probs: Vec<Vec<f64>>, true_labels: Vec<usize>) -> PyResult<f64> {
    crcal::error_rate(&batch(probs, Some(true_labels))?).map_err(to_py)
}

/// Mean over examples of the squared distance to the one-hot true label.
#[pyfunction]
fn square_loss(probs: Vec<Vec<f64>>, true_labels: Vec<usize>) -> PyResult<f64> {
    crcal::square_loss(&batch(probs, Some(true_labels))?).map_err(to_py)
}

/// CRC curve: error fraction and average width on a uniform delta grid.
#[pyclass(name = "CrcCurve", frozen)]
struct PyCrcCurve {
    inner: CrcCurve,
}

#[pymethods]
impl PyCrcCurve {
    #[getter]
    fn grid_deltas(&self) -> Vec<f64> {
        self.inner.grid_deltas().to_vec()
    }

    #[getter]
    fn err_at(&self) -> Vec<f64> {
        self.inner.err_at().to_vec()
    }

    #[getter]
    fn unc_at(&self) -> Vec<f64> {
        self.inner.unc_at().to_vec()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn err_above_area(&self) -> f64 {
        crcal::err_above_area(&self.inner)
    }

    fn avg_width_area(&self) -> f64 {
        crcal::avg_width_area(&self.inner)
    }

    #[pyo3(signature = (loose_tolerance = crcal::crc::DEFAULT_LOOSE_TOLERANCE))]
    fn verdict<'py>(&self, py: Python<'py>, loose_tolerance: f64) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &crcal::verdict(&self.inner, loose_tolerance).map_err(to_py)?)
    }

    fn to_csv(&self) -> PyResult<String> {
        let mut out = Vec::new();
        crcal::crc::write_crc_table(&self.inner, &mut out).map_err(to_py)?;
        String::from_utf8(out).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    fn to_svg(&self) -> String {
        crcal::svg::render_crc_svg(&self.inner)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "CrcCurve(n={}, grid_intervals={})",
            self.inner.n(),
            self.inner.grid_intervals()
        )
    }
}

#[pyfunction]
#[pyo3(signature = (probs, true_labels, grid_intervals = crcal::crc::DEFAULT_GRID_INTERVALS))]
fn crc_curve(probs: Vec<Vec<f64>>, true_labels: Vec<usize>, grid_intervals: usize) -> PyResult<PyCrcCurve> {
    let forecasts = batch(probs, Some(true_labels))?;
    let inner = crcal::compute_crc_curve(&forecasts, grid_intervals).map_err(to_py)?;
    Ok(PyCrcCurve { inner })
}

/// Reads a forecast CSV into `(label_names, example_ids, probs, true_labels)`;
/// unknown true labels come back as `None`.
#[pyfunction]
#[allow(clippy::type_complexity)]
fn read_forecasts(path: &str) -> PyResult<(Vec<String>, Vec<String>, Vec<Vec<f64>>, Vec<Option<usize>>)> {
    let file = File::open(path).map_err(|e| PyIOError::new_err(format!("{path}: {e}")))?;
    let (space, forecasts) = crcal::formats::read_forecast_csv(BufReader::new(file)).map_err(to_py)?;
    Ok((
        space.names().to_vec(),
        forecasts.iter().map(|f| f.example_id().to_string()).collect(),
        forecasts.iter().map(|f| f.probs().to_vec()).collect(),
        forecasts.iter().map(|f| f.true_label().map(LabelId::index)).collect(),
    ))
}

/// Repeated train/test evaluation of a built-in learner on an ARFF dataset.
/// Returns the JSON report as a dict.
#[pyfunction]
#[pyo3(signature = (dataset, learner, k = None, seeds = 5, train_fraction = 0.66, preprocess_scope = "train", grid_intervals = crcal::crc::DEFAULT_GRID_INTERVALS))]
#[allow(clippy::too_many_arguments)]
fn run_protocol<'py>(
    py: Python<'py>,
    dataset: &str,
    learner: &str,
    k: Option<usize>,
    seeds: usize,
    train_fraction: f64,
    preprocess_scope: &str,
    grid_intervals: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let config = match (learner, k) {
        ("dwknn", Some(k)) => LearnerConfig::dwknn(k),
        ("dwknn", None) => return Err(PyValueError::new_err("dwknn needs k")),
        ("naivebayes", None) => LearnerConfig::naive_bayes(),
        ("naivebayes", Some(_)) => return Err(PyValueError::new_err("k only applies to dwknn")),
        (other, _) => return Err(PyValueError::new_err(format!("unknown learner `{other}`"))),
    };
    let scope = match preprocess_scope {
        "train" => PreprocessScope::Train,
        "all" => PreprocessScope::All,
        other => return Err(PyValueError::new_err(format!("unknown preprocess scope `{other}`"))),
    };
    let plan = SplitPlan::with_seed_count(train_fraction, seeds).map_err(to_py)?;
    let options = ProtocolOptions {
        grid_intervals,
        scope,
        ..ProtocolOptions::default()
    };
    let file = File::open(dataset).map_err(|e| PyIOError::new_err(format!("{dataset}: {e}")))?;
    let data = crcal::arff::parse_arff(BufReader::new(file)).map_err(to_py)?;
    let run = py
        .detach(|| crcal::run_protocol(&data, &config, &plan, &options))
        .map_err(to_py)?;
    json_to_py(py, &run.report)
}

/// Finite-sample calibration check on the default synthetic task. The dict
/// also carries the error-above-diagonal area of the pooled CRC curve.
#[pyfunction]
#[pyo3(signature = (delta, epsilon, n = 1000, labels = 3, trials = 200, temperature = 1.0, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn check_bound<'py>(
    py: Python<'py>,
    delta: f64,
    epsilon: f64,
    n: usize,
    labels: usize,
    trials: usize,
    temperature: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let (check, pooled) = py
        .detach(|| -> crcal::Result<_> {
            let task = crcal::perturb_forecaster(&SyntheticTask::default_task(labels, seed)?, temperature)?;
            let check = crcal::check_theorem1(&task, n, delta, epsilon, trials)?;
            let curve = pooled_crc_curve(&task, n, trials, crcal::crc::DEFAULT_GRID_INTERVALS)?;
            Ok((check, crcal::err_above_area(&curve)))
        })
        .map_err(to_py)?;
    let out = json_to_py(py, &check)?;
    out.cast::<PyDict>()?.set_item("pooled_err_above_area", pooled)?;
    Ok(out)
}

#[pymodule]
pub fn pycrcal(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(build_region, m)?)?;
    m.add_function(wrap_pyfunction!(build_regions, m)?)?;
    m.add_function(wrap_pyfunction!(score_regions, m)?)?;
    m.add_function(wrap_pyfunction!(error_rate, m)?)?;
    m.add_function(wrap_pyfunction!(square_loss, m)?)?;
    m.add_function(wrap_pyfunction!(crc_curve, m)?)?;
    m.add_function(wrap_pyfunction!(read_forecasts, m)?)?;
    m.add_function(wrap_pyfunction!(run_protocol, m)?)?;
    m.add_function(wrap_pyfunction!(check_bound, m)?)?;
    m.add_class::<PyCrcCurve>()?;
    Ok(())
}
