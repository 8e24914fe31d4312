//! Python bindings: AOI type, geometry and statistics helpers, and the
//! corpus entry points.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;
use serde::de::DeserializeOwned;

use allserp_core::attribution::AttributionParams;
use allserp_core::config::PipelineConfig;
use allserp_core::emit::{trial_document, write_build_outputs, Provenance, run_summary};
use allserp_core::labeler::{label_sequence, parse_doc_cards};
use allserp_core::model::{AoiSource, Etype, Flavor, Rect, TypedAoi};
use allserp_core::pipeline::{load_rules, process_trial_dir as process_dir, run_corpus};
use allserp_core::rules::Rules;
use allserp_core::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } | Error::MissingMeta(_) | Error::Ingest { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_name<T: DeserializeOwned>(kind: &str, s: &str) -> PyResult<T> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| PyValueError::new_err(format!("unknown {kind} `{s}`")))
}

fn to_python<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// One typed AOI box.
#[pyclass(name = "Aoi", module = "allserp", from_py_object)]
#[derive(Clone)]
struct PyAoi {
    #[pyo3(get, set)]
    aoi_id: String,
    #[pyo3(get, set)]
    etype: String,
    #[pyo3(get, set)]
    x: i64,
    #[pyo3(get, set)]
    y: i64,
    #[pyo3(get, set)]
    w: i64,
    #[pyo3(get, set)]
    h: i64,
    #[pyo3(get, set)]
    position: i32,
    #[pyo3(get, set)]
    flavor: String,
    #[pyo3(get, set)]
    source: String,
}

#[pymethods]
impl PyAoi {
    #[new]
    #[pyo3(signature = (aoi_id, etype, x, y, w, h, position, flavor = "typed".to_string(), source = "cv_span".to_string()))]
    #[allow(clippy::too_many_arguments)]
    fn new(aoi_id: String, etype: String, x: i64, y: i64, w: i64, h: i64, position: i32, flavor: String, source: String) -> PyResult<Self> {
        let a = Self { aoi_id, etype, x, y, w, h, position, flavor, source };
        a.to_core()?;
        Ok(a)
    }

    fn __repr__(&self) -> String {
        format!(
            "Aoi({:?}, {:?}, x={}, y={}, w={}, h={}, position={}, flavor={:?}, source={:?})",
            self.aoi_id, self.etype, self.x, self.y, self.w, self.h, self.position, self.flavor, self.source
        )
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.to_tuple() == other.to_tuple()
    }

    /// True for the ten main-axis etypes.
    fn is_main_axis(&self) -> PyResult<bool> {
        Ok(self.to_core()?.is_main_axis())
    }
}

impl PyAoi {
    fn to_tuple(&self) -> (&str, &str, i64, i64, i64, i64, i32, &str, &str) {
        (&self.aoi_id, &self.etype, self.x, self.y, self.w, self.h, self.position, &self.flavor, &self.source)
    }

    fn to_core(&self) -> PyResult<TypedAoi> {
        let etype: Etype = self.etype.parse().map_err(|e: allserp_core::model::UnknownEtype| PyValueError::new_err(format!("unknown etype `{}`", e.0)))?;
        Ok(TypedAoi {
            aoi_id: self.aoi_id.clone(),
            etype,
            x: self.x,
            y: self.y,
            w: self.w,
            h: self.h,
            position: self.position,
            flavor: parse_name::<Flavor>("flavor", &self.flavor)?,
            source: parse_name::<AoiSource>("source", &self.source)?,
            doc_index: None,
        })
    }

    fn from_core(a: &TypedAoi) -> Self {
        Self {
            aoi_id: a.aoi_id.clone(),
            etype: a.etype.as_str().into(),
            x: a.x,
            y: a.y,
            w: a.w,
            h: a.h,
            position: a.position,
            flavor: a.flavor.as_str().into(),
            source: a.source.as_str().into(),
        }
    }
}

fn core_aois(aois: &[PyAoi]) -> PyResult<Vec<TypedAoi>> {
    aois.iter().map(PyAoi::to_core).collect()
}

/// IoU of two `(x, y, w, h)` boxes.
#[pyfunction]
fn iou(a: (i64, i64, i64, i64), b: (i64, i64, i64, i64)) -> f64 {
    allserp_core::model::iou(&Rect::new(a.0, a.1, a.2, a.3), &Rect::new(b.0, b.1, b.2, b.3))
}

/// Spearman rank correlation; None for fewer than three points or a
/// constant input.
#[pyfunction]
fn spearman(xs: Vec<f64>, ys: Vec<f64>) -> Option<f64> {
    allserp_core::inventory::spearman(&xs, &ys)
}

/// `(type_token_ratio, query_token_overlap)` of a snippet.
#[pyfunction]
fn snippet_features(snippet: &str, query: &str) -> (f64, f64) {
    let f = allserp_core::inventory::snippet_features(snippet, query);
    (f.type_token_ratio, f.query_token_overlap)
}

/// Attributes a point to one of `aois`: `(aoi_id or None, mode)`.
#[pyfunction]
#[pyo3(signature = (aois, x, y, tolerance_x = 5.0, tolerance_y = 10.0))]
fn attribute_point(aois: Vec<PyAoi>, x: f64, y: f64, tolerance_x: f64, tolerance_y: f64) -> PyResult<(Option<String>, String)> {
    let params = AttributionParams { tolerance_x, tolerance_y, ..Default::default() };
    let p = allserp_core::attribution::attribute_point(&core_aois(&aois)?, x, y, &params).map_err(py_err)?;
    let mode = serde_json::to_value(p.mode).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
    Ok((p.aoi_id, mode))
}

/// Midpoint gap-fill over typed AOIs.
#[pyfunction]
fn gapfill(aois: Vec<PyAoi>) -> PyResult<Vec<PyAoi>> {
    let out = allserp_core::gapfill::gapfill(&core_aois(&aois)?).map_err(py_err)?;
    Ok(out.iter().map(PyAoi::from_core).collect())
}

/// `(etype, tier)` for every card of a SERP document, in document order.
#[pyfunction]
#[pyo3(signature = (html, rules = None))]
fn classify_html(html: &str, rules: Option<PathBuf>) -> PyResult<Vec<(String, u8)>> {
    let rules = match rules {
        Some(p) => Rules::load(&p).map_err(py_err)?,
        None => Rules::default(),
    };
    Ok(label_sequence(&parse_doc_cards(html, &rules), &rules)
        .into_iter()
        .map(|l| (l.etype.as_str().to_string(), l.tier))
        .collect())
}

fn config_from(path: Option<PathBuf>, jobs: Option<usize>) -> PyResult<PipelineConfig> {
    let mut c = match path {
        Some(p) => PipelineConfig::load(&p).map_err(py_err)?,
        None => PipelineConfig::default(),
    };
    if let Some(j) = jobs {
        c.jobs = j;
    }
    Ok(c)
}

/// Processes one trial directory and returns its per-trial document as a
/// dict. Raises on a dropped or invalid trial.
#[pyfunction]
#[pyo3(signature = (trial_dir, config = None))]
fn process_trial_dir<'py>(py: Python<'py>, trial_dir: PathBuf, config: Option<PathBuf>) -> PyResult<Bound<'py, PyAny>> {
    let config = config_from(config, None)?;
    let rules = load_rules(&config).map_err(py_err)?;
    let t = process_dir(&trial_dir, &config, &rules)
        .map_err(|f| PyValueError::new_err(format!("{}: {} ({})", f.trial_id, f.reason, f.detail)))?;
    to_python(py, &trial_document(&t, &config.flavor.flavors(), None))
}

/// Runs a corpus and writes every build output; returns the run summary.
#[pyfunction]
#[pyo3(signature = (input_dir, out_dir, config = None, jobs = None))]
fn build<'py>(py: Python<'py>, input_dir: PathBuf, out_dir: PathBuf, config: Option<PathBuf>, jobs: Option<usize>) -> PyResult<Bound<'py, PyAny>> {
    let config = config_from(config, jobs)?;
    let rules = load_rules(&config).map_err(py_err)?;
    let summary = py
        .detach(|| {
            let run = run_corpus(&input_dir, &config)?;
            write_build_outputs(&out_dir, &run, &config, &rules)
        })
        .map_err(py_err)?;
    to_python(py, &summary)
}

/// Runs a corpus in memory and returns the run summary without writing.
#[pyfunction]
#[pyo3(signature = (input_dir, config = None, jobs = None))]
fn summarize<'py>(py: Python<'py>, input_dir: PathBuf, config: Option<PathBuf>, jobs: Option<usize>) -> PyResult<Bound<'py, PyAny>> {
    let config = config_from(config, jobs)?;
    let rules = load_rules(&config).map_err(py_err)?;
    let run = py.detach(|| run_corpus(&input_dir, &config)).map_err(py_err)?;
    to_python(py, &run_summary(&run, Provenance::new(&config, &rules)))
}

/// Writes a synthetic corpus; returns the number of trials.
#[pyfunction]
#[pyo3(signature = (out_dir, n = 20, seed = 0, noise_sigma = 0.0))]
fn synth(py: Python<'_>, out_dir: PathBuf, n: usize, seed: u64, noise_sigma: f64) -> PyResult<usize> {
    py.detach(|| allserp_core::synth::write_synth_corpus(&out_dir, n, seed, noise_sigma))
        .map(|t| t.len())
        .map_err(py_err)
}

#[pymodule]
fn allserp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyAoi>()?;
    m.add_function(wrap_pyfunction!(iou, m)?)?;
    m.add_function(wrap_pyfunction!(spearman, m)?)?;
    m.add_function(wrap_pyfunction!(snippet_features, m)?)?;
    m.add_function(wrap_pyfunction!(attribute_point, m)?)?;
    m.add_function(wrap_pyfunction!(gapfill, m)?)?;
    m.add_function(wrap_pyfunction!(classify_html, m)?)?;
    m.add_function(wrap_pyfunction!(process_trial_dir, m)?)?;
    m.add_function(wrap_pyfunction!(build, m)?)?;
    m.add_function(wrap_pyfunction!(summarize, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
