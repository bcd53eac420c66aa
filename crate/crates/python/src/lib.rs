//! Python bindings for the frictions estimation library.
//!
//! The module mirrors the Rust API at the level a notebook user wants:
//! simulate a market or load survey data, run one of the estimation routes,
//! and turn the result into plain Python objects. Estimation failures raise
//! `frictions.EstimationError`; invalid inputs raise `ValueError`.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyList};

use frictions_core::ingest::{default_age_bands, DatasetManifest};
use frictions_core::model::{FitFlag, SegmentKey};
use frictions_core::monopsony::{DecompositionSettings, MonopsonySettings, MuEstimator};
use frictions_core::parametric::{CensoringMode, MleSettings};
use frictions_core::sim::Scenario;
use frictions_core::{GroupedDurations, Observation};

create_exception!(
    frictions,
    EstimationError,
    PyException,
    "Raised when an estimation routine cannot produce a valid fit."
);

fn est_err(e: frictions_core::EstimationError) -> PyErr {
    EstimationError::new_err(e.to_string())
}

fn val_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Recursively converts a JSON value into plain Python objects.
fn json_to_py(py: Python<'_>, value: &serde_json::Value) -> PyResult<Py<PyAny>> {
    use serde_json::Value;
    Ok(match value {
        Value::Null => py.None(),
        Value::Bool(b) => PyBool::new(py, *b).to_owned().into_any().unbind(),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py)?.into_any().unbind()
            } else if let Some(u) = n.as_u64() {
                u.into_pyobject(py)?.into_any().unbind()
            } else {
                n.as_f64()
                    .unwrap_or(f64::NAN)
                    .into_pyobject(py)?
                    .into_any()
                    .unbind()
            }
        }
        Value::String(s) => s.into_pyobject(py)?.into_any().unbind(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_any().unbind()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (key, val) in map {
                dict.set_item(key, json_to_py(py, val)?)?;
            }
            dict.into_any().unbind()
        }
    })
}

fn serialize_to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let v = serde_json::to_value(value).map_err(val_err)?;
    json_to_py(py, &v)
}

/// The snake_case wire name of a serializable enum variant.
fn variant_name<T: serde::Serialize + std::fmt::Debug>(value: &T) -> String {
    serde_json::to_value(value)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_else(|| format!("{value:?}"))
}

fn flag_names(flags: &[FitFlag]) -> Vec<String> {
    flags.iter().map(variant_name).collect()
}

fn parse_mu_estimator(name: &str) -> PyResult<MuEstimator> {
    match name {
        "semiparametric" => Ok(MuEstimator::Semiparametric),
        "semiparametric_robust" => Ok(MuEstimator::SemiparametricRobust),
        "parametric" => Ok(MuEstimator::Parametric),
        other => Err(val_err(format!(
            "unknown estimator '{other}': expected semiparametric, \
             semiparametric_robust, or parametric"
        ))),
    }
}

/// One worker row: wage, elapsed job spell, censoring flag, survey weight,
/// and the labels that place the worker in a segment.
#[pyclass(name = "Observation", module = "frictions", from_py_object)]
#[derive(Clone)]
struct PyObservation {
    inner: Observation,
}

#[pymethods]
impl PyObservation {
    #[new]
    #[pyo3(signature = (
        wage,
        elapsed_spell,
        censored = false,
        weight = 1.0,
        sector = "",
        education = "",
        age_band = "",
        region = None,
        gender = None,
        year = None,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        wage: f64,
        elapsed_spell: f64,
        censored: bool,
        weight: f64,
        sector: &str,
        education: &str,
        age_band: &str,
        region: Option<String>,
        gender: Option<String>,
        year: Option<i32>,
    ) -> PyResult<Self> {
        let segment = SegmentKey {
            sector: sector.to_string(),
            education: education.to_string(),
            age_band: age_band.to_string(),
            region,
            gender,
            year,
        };
        Observation::new(wage, elapsed_spell, censored, weight, segment)
            .map(|inner| Self { inner })
            .map_err(val_err)
    }

    #[getter]
    fn wage(&self) -> f64 {
        self.inner.wage
    }

    #[getter]
    fn elapsed_spell(&self) -> f64 {
        self.inner.elapsed_spell
    }

    #[getter]
    fn censored(&self) -> bool {
        self.inner.censored
    }

    #[getter]
    fn weight(&self) -> f64 {
        self.inner.weight
    }

    /// Human-readable segment label (`"all"` when no labels are set).
    #[getter]
    fn segment(&self) -> String {
        self.inner.segment.label()
    }

    fn __repr__(&self) -> String {
        format!(
            "Observation(wage={}, elapsed_spell={}, censored={}, segment='{}')",
            self.inner.wage,
            self.inner.elapsed_spell,
            if self.inner.censored { "True" } else { "False" },
            self.inner.segment.label()
        )
    }
}

fn unwrap_observations(observations: Vec<PyObservation>) -> Vec<Observation> {
    observations.into_iter().map(|o| o.inner).collect()
}

/// A synthetic labour market, loaded from scenario TOML.
#[pyclass(name = "Scenario", module = "frictions", skip_from_py_object)]
#[derive(Clone)]
struct PyScenario {
    inner: Scenario,
}

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Scenario::from_toml_str(text)
            .map(|inner| Self { inner })
            .map_err(val_err)
    }

    #[staticmethod]
    fn from_path(path: PathBuf) -> PyResult<Self> {
        Scenario::from_path(&path)
            .map(|inner| Self { inner })
            .map_err(val_err)
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml_string()
    }

    #[getter]
    fn lambda_(&self) -> f64 {
        self.inner.lambda
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }

    /// Friction ratio `lambda / delta` at the scenario level.
    #[getter]
    fn k(&self) -> f64 {
        self.inner.k()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    /// Draws the employed cross-section as a list of observations.
    fn simulate(&self, py: Python<'_>) -> PyResult<Vec<PyObservation>> {
        let scenario = self.inner.clone();
        let workers = py
            .detach(move || frictions_core::sim::sample_employed(&scenario))
            .map_err(val_err)?;
        let bands = default_age_bands();
        workers
            .iter()
            .map(|w| {
                w.to_observation(&bands)
                    .map(|inner| PyObservation { inner })
                    .map_err(val_err)
            })
            .collect()
    }

    /// Draws the unemployed side and groups it into the scenario's duration
    /// classes, returning `(class_bounds, frequencies)`; `None` when the
    /// scenario has no unemployment block.
    fn simulate_unemployment(&self, py: Python<'_>) -> PyResult<Option<(Vec<f64>, Vec<u64>)>> {
        let Some(block) = &self.inner.unemployment else {
            return Ok(None);
        };
        let scenario = self.inner.clone();
        let durations = py
            .detach(move || frictions_core::sim::sample_unemployed(&scenario))
            .map_err(val_err)?;
        let grouped =
            frictions_core::sim::group_durations(&durations, &block.class_bounds).map_err(val_err)?;
        Ok(Some((
            grouped.boundaries().to_vec(),
            grouped.frequencies().to_vec(),
        )))
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(lambda={}, delta={}, k={:.4}, seed={})",
            self.inner.lambda,
            self.inner.delta,
            self.inner.k(),
            self.inner.seed
        )
    }
}

/// Point estimates, standard errors, and confidence intervals for the
/// friction parameters.
#[pyclass(name = "FrictionEstimate", module = "frictions", skip_from_py_object)]
#[derive(Clone)]
struct PyFrictionEstimate {
    inner: frictions_core::FrictionEstimate,
}

#[pymethods]
impl PyFrictionEstimate {
    #[getter]
    fn k(&self) -> f64 {
        self.inner.k
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }

    #[getter]
    fn lambda_(&self) -> f64 {
        self.inner.lambda
    }

    #[getter]
    fn se_k(&self) -> Option<f64> {
        self.inner.se_k
    }

    #[getter]
    fn se_delta(&self) -> Option<f64> {
        self.inner.se_delta
    }

    #[getter]
    fn se_lambda(&self) -> Option<f64> {
        self.inner.se_lambda
    }

    #[getter]
    fn ci_k(&self) -> Option<(f64, f64)> {
        self.inner.ci_k
    }

    #[getter]
    fn ci_delta(&self) -> Option<(f64, f64)> {
        self.inner.ci_delta
    }

    #[getter]
    fn ci_lambda(&self) -> Option<(f64, f64)> {
        self.inner.ci_lambda
    }

    #[getter]
    fn method(&self) -> String {
        variant_name(&self.inner.method)
    }

    #[getter]
    fn censor_level(&self) -> Option<f64> {
        self.inner.censor_level
    }

    #[getter]
    fn n_obs(&self) -> usize {
        self.inner.n_obs
    }

    #[getter]
    fn flags(&self) -> Vec<String> {
        flag_names(&self.inner.flags)
    }

    /// The full estimate, diagnostics included, as nested dicts and lists.
    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        serialize_to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "FrictionEstimate(k={:.4}, delta={:.4}, lambda={:.4}, method='{}', n_obs={})",
            self.inner.k,
            self.inner.delta,
            self.inner.lambda,
            variant_name(&self.inner.method),
            self.inner.n_obs
        )
    }
}

/// Stayer-share / exit-rate estimate from grouped unemployment durations.
#[pyclass(name = "UnemploymentMixtureEstimate", module = "frictions", skip_from_py_object)]
#[derive(Clone)]
struct PyMixtureEstimate {
    inner: frictions_core::UnemploymentMixtureEstimate,
}

#[pymethods]
impl PyMixtureEstimate {
    #[getter]
    fn pi(&self) -> f64 {
        self.inner.pi
    }

    #[getter]
    fn lambda0(&self) -> f64 {
        self.inner.lambda0
    }

    #[getter]
    fn se_pi(&self) -> Option<f64> {
        self.inner.se_pi
    }

    #[getter]
    fn se_lambda0(&self) -> Option<f64> {
        self.inner.se_lambda0
    }

    #[getter]
    fn implied_delta(&self) -> Option<f64> {
        self.inner.implied_delta
    }

    #[getter]
    fn n_obs(&self) -> u64 {
        self.inner.n_obs
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        serialize_to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "UnemploymentMixtureEstimate(pi={:.4}, lambda0={:.4}, n_obs={})",
            self.inner.pi, self.inner.lambda0, self.inner.n_obs
        )
    }
}

/// Wage-setting power index for one segment, with the friction estimate it
/// was derived from.
#[pyclass(name = "MonopsonyResult", module = "frictions", from_py_object)]
#[derive(Clone)]
struct PyMonopsonyResult {
    inner: frictions_core::MonopsonyResult,
}

#[pymethods]
impl PyMonopsonyResult {
    #[getter]
    fn segment(&self) -> String {
        self.inner.segment.label()
    }

    #[getter]
    fn year(&self) -> Option<i32> {
        self.inner.segment.year
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.inner.mu
    }

    #[getter]
    fn se_mu(&self) -> Option<f64> {
        self.inner.se_mu
    }

    #[getter]
    fn ci_mu(&self) -> Option<(f64, f64)> {
        self.inner.ci_mu
    }

    #[getter]
    fn mean_wage(&self) -> f64 {
        self.inner.mean_wage
    }

    #[getter]
    fn floor_wage(&self) -> f64 {
        self.inner.floor_wage
    }

    #[getter]
    fn n_obs(&self) -> usize {
        self.inner.n_obs
    }

    #[getter]
    fn frictions(&self) -> PyFrictionEstimate {
        PyFrictionEstimate {
            inner: self.inner.frictions.clone(),
        }
    }

    #[getter]
    fn flags(&self) -> Vec<String> {
        flag_names(&self.inner.flags)
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        serialize_to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "MonopsonyResult(segment='{}', mu={:.4}, n_obs={})",
            self.inner.segment.label(),
            self.inner.mu,
            self.inner.n_obs
        )
    }
}

/// Loads a dataset described by a manifest file and returns
/// `(observations, drop_report)`.
#[pyfunction]
fn load_dataset(py: Python<'_>, manifest_path: PathBuf) -> PyResult<(Vec<PyObservation>, Py<PyAny>)> {
    let manifest = DatasetManifest::from_path(&manifest_path).map_err(val_err)?;
    let loaded = py
        .detach(move || frictions_core::ingest::load_dataset(&manifest))
        .map_err(val_err)?;
    let observations = loaded
        .observations
        .into_iter()
        .map(|inner| PyObservation { inner })
        .collect();
    Ok((observations, serialize_to_py(py, &loaded.report)?))
}

/// Tenure-on-wage-rank regression (ordinary least squares).
#[pyfunction]
fn fit_linear(py: Python<'_>, observations: Vec<PyObservation>) -> PyResult<PyFrictionEstimate> {
    let obs = unwrap_observations(observations);
    py.detach(move || frictions_core::semiparametric::fit_linear(&obs))
        .map(|(inner, _)| PyFrictionEstimate { inner })
        .map_err(est_err)
}

/// Tenure-on-wage-rank regression with Huber-robust reweighting.
#[pyfunction]
fn fit_linear_robust(
    py: Python<'_>,
    observations: Vec<PyObservation>,
) -> PyResult<PyFrictionEstimate> {
    let obs = unwrap_observations(observations);
    py.detach(move || frictions_core::semiparametric::fit_linear_robust(&obs))
        .map(|(inner, _)| PyFrictionEstimate { inner })
        .map_err(est_err)
}

/// Censored-spell maximum likelihood. With `censor_level` set, spells at or
/// above that value are treated as censored regardless of their flags; by
/// default the per-observation flags decide.
#[pyfunction]
#[pyo3(signature = (observations, censor_level = None))]
fn fit_mle(
    py: Python<'_>,
    observations: Vec<PyObservation>,
    censor_level: Option<f64>,
) -> PyResult<PyFrictionEstimate> {
    let obs = unwrap_observations(observations);
    let settings = MleSettings {
        censoring: match censor_level {
            Some(level) => CensoringMode::Threshold(level),
            None => CensoringMode::FromData,
        },
        ..MleSettings::default()
    };
    py.detach(move || frictions_core::parametric::fit_mle(&obs, &settings))
        .map(|inner| PyFrictionEstimate { inner })
        .map_err(est_err)
}

/// Interval-censored maximum likelihood: spells are observed only as classes
/// with the given lower bounds (last class open-ended), wages stay exact.
#[pyfunction]
fn fit_mle_grouped(
    py: Python<'_>,
    observations: Vec<PyObservation>,
    class_bounds: Vec<f64>,
) -> PyResult<PyFrictionEstimate> {
    let obs = unwrap_observations(observations);
    py.detach(move || {
        frictions_core::parametric::fit_mle_grouped(&obs, &class_bounds, &MleSettings::default())
    })
    .map(|inner| PyFrictionEstimate { inner })
    .map_err(est_err)
}

/// Friction fit from grouped in-progress durations alone (no wages).
#[pyfunction]
fn fit_estock_grouped(
    py: Python<'_>,
    class_bounds: Vec<f64>,
    frequencies: Vec<u64>,
) -> PyResult<PyFrictionEstimate> {
    let grouped = GroupedDurations::new(class_bounds, frequencies).map_err(val_err)?;
    py.detach(move || frictions_core::unconditional::fit_estock_grouped(&grouped))
        .map(|inner| PyFrictionEstimate { inner })
        .map_err(est_err)
}

/// Stayer-mixture fit on grouped unemployment durations. Pass the observed
/// unemployment rate to also get the implied job-destruction rate.
#[pyfunction]
#[pyo3(signature = (class_bounds, frequencies, unemployment_rate = None))]
fn fit_unemployment_mixture(
    py: Python<'_>,
    class_bounds: Vec<f64>,
    frequencies: Vec<u64>,
    unemployment_rate: Option<f64>,
) -> PyResult<PyMixtureEstimate> {
    let grouped = GroupedDurations::new(class_bounds, frequencies).map_err(val_err)?;
    py.detach(move || {
        frictions_core::unconditional::fit_unemployment_mixture(&grouped, unemployment_rate)
    })
    .map(|inner| PyMixtureEstimate { inner })
    .map_err(est_err)
}

/// Wage-setting power index for one pooled sample of observations.
#[pyfunction]
#[pyo3(signature = (observations, bootstrap = 500, seed = 0, estimator = "semiparametric"))]
fn segment_mu(
    py: Python<'_>,
    observations: Vec<PyObservation>,
    bootstrap: usize,
    seed: u64,
    estimator: &str,
) -> PyResult<PyMonopsonyResult> {
    let settings = MonopsonySettings {
        bootstrap,
        seed,
        estimator: parse_mu_estimator(estimator)?,
    };
    let obs = unwrap_observations(observations);
    py.detach(move || frictions_core::monopsony::segment_mu(&obs, &settings))
        .map(|inner| PyMonopsonyResult { inner })
        .map_err(est_err)
}

/// Splits observations into segments, fits each, and returns
/// `(results, failures, skip_report)` where `failures` maps segment labels
/// to error messages.
#[pyfunction]
#[pyo3(signature = (
    observations,
    min_segment_size = 100,
    bootstrap = 500,
    seed = 0,
    estimator = "semiparametric",
))]
fn segment_mu_all(
    py: Python<'_>,
    observations: Vec<PyObservation>,
    min_segment_size: usize,
    bootstrap: usize,
    seed: u64,
    estimator: &str,
) -> PyResult<(Vec<PyMonopsonyResult>, Py<PyAny>, Py<PyAny>)> {
    let settings = MonopsonySettings {
        bootstrap,
        seed,
        estimator: parse_mu_estimator(estimator)?,
    };
    let obs = unwrap_observations(observations);
    let (outcomes, skip_report) = py.detach(move || {
        let (segments, skip_report) =
            frictions_core::ingest::segmentize(obs, min_segment_size);
        let outcomes = frictions_core::monopsony::segment_mu_all(&segments, &settings);
        (outcomes, skip_report)
    });
    let mut results = Vec::new();
    let failures = PyDict::new(py);
    for (key, outcome) in outcomes {
        match outcome {
            Ok(inner) => results.push(PyMonopsonyResult { inner }),
            Err(e) => failures.set_item(key.label(), e.to_string())?,
        }
    }
    Ok((
        results,
        failures.into_any().unbind(),
        serialize_to_py(py, &skip_report)?,
    ))
}

/// Regresses segment indices on their dimension dummies. Returns the
/// coefficient table as a dict, including a rendered `table` string.
#[pyfunction]
#[pyo3(signature = (results, trend = false, weighted = true))]
fn decompose(
    py: Python<'_>,
    results: Vec<PyMonopsonyResult>,
    trend: bool,
    weighted: bool,
) -> PyResult<Py<PyAny>> {
    let inner: Vec<frictions_core::MonopsonyResult> =
        results.into_iter().map(|r| r.inner).collect();
    let settings = DecompositionSettings { trend, weighted };
    let fit = py
        .detach(move || frictions_core::monopsony::decompose(&inner, &settings))
        .map_err(est_err)?;
    let dict = serialize_to_py(py, &fit)?;
    dict.bind(py)
        .cast::<PyDict>()?
        .set_item("table", fit.render_table())?;
    Ok(dict)
}

/// Power index from a mean wage, a floor wage, and a friction ratio.
#[pyfunction]
fn mu_index(mean_wage: f64, floor_wage: f64, k: f64) -> PyResult<f64> {
    frictions_core::model::mu_index(mean_wage, floor_wage, k).map_err(val_err)
}

/// Lowest non-outlier wage under the log-scale lower-whisker rule; always
/// one of the supplied wages.
#[pyfunction]
fn wage_floor(wages: Vec<f64>) -> PyResult<f64> {
    frictions_core::model::wage_floor(&wages).map_err(val_err)
}

/// Density of in-progress spell durations in the employed stock.
#[pyfunction]
fn estock_density(t: f64, k: f64, delta: f64) -> f64 {
    frictions_core::estock::estock_density(t, k, delta)
}

/// CDF of in-progress spell durations in the employed stock.
#[pyfunction]
fn estock_cdf(t: f64, k: f64, delta: f64) -> f64 {
    frictions_core::estock::estock_cdf(t, k, delta)
}

/// Survival function of in-progress spell durations in the employed stock.
#[pyfunction]
fn estock_survival(t: f64, k: f64, delta: f64) -> f64 {
    frictions_core::estock::estock_survival(t, k, delta)
}

#[pymodule]
fn frictions(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PyObservation>()?;
    m.add_class::<PyFrictionEstimate>()?;
    m.add_class::<PyMixtureEstimate>()?;
    m.add_class::<PyMonopsonyResult>()?;
    m.add_function(wrap_pyfunction!(load_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(fit_linear, m)?)?;
    m.add_function(wrap_pyfunction!(fit_linear_robust, m)?)?;
    m.add_function(wrap_pyfunction!(fit_mle, m)?)?;
    m.add_function(wrap_pyfunction!(fit_mle_grouped, m)?)?;
    m.add_function(wrap_pyfunction!(fit_estock_grouped, m)?)?;
    m.add_function(wrap_pyfunction!(fit_unemployment_mixture, m)?)?;
    m.add_function(wrap_pyfunction!(segment_mu, m)?)?;
    m.add_function(wrap_pyfunction!(segment_mu_all, m)?)?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(mu_index, m)?)?;
    m.add_function(wrap_pyfunction!(wage_floor, m)?)?;
    m.add_function(wrap_pyfunction!(estock_density, m)?)?;
    m.add_function(wrap_pyfunction!(estock_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(estock_survival, m)?)?;
    m.add("EstimationError", m.py().get_type::<EstimationError>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
