//! Python bindings: problems, sampling, the Gabriel edited set, classifiers,
//! cross-validation and the Monte Carlo estimators.
//!
//! Points cross the boundary as lists of floats and labels as `+1` / `-1`.
//! Hyperparameters and grids are plain dicts with the same keys as their JSON
//! files (`K` and `M` included).

use pyo3::exceptions::{PyArithmeticError, PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use poflab_core::estimator::{direct_mc_pof, repeat_stats, surrogate_mc_pof, PofEstimate};
use poflab_core::gabriel::{gabriel_edited_set, max_pair_distance};
use poflab_core::models::{cross_validate, HyperGrid};
use poflab_core::sampling::{pof_darts, uniform_sample};
use poflab_core::{Classifier, DartsConfig, Hyperparams, Label, Method, PofError};

fn to_py(e: PofError) -> PyErr {
    match e {
        PofError::Io(io) => PyIOError::new_err(io.to_string()),
        e if e.is_numerical() => PyArithmeticError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn sign(label: Label) -> i8 {
    match label {
        Label::Failure => 1,
        Label::Success => -1,
    }
}

/// Overlay a Python dict on the JSON form of `base`.
fn merged<T: serde::Serialize + serde::de::DeserializeOwned>(base: T, overrides: Option<&Bound<'_, PyDict>>) -> PyResult<T> {
    let mut value = serde_json::to_value(base).map_err(|e| PyValueError::new_err(e.to_string()))?;
    if let Some(d) = overrides {
        let text: String = d.py().import("json")?.call_method1("dumps", (d,))?.extract()?;
        let extra: serde_json::Map<String, serde_json::Value> =
            serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let obj = value.as_object_mut().expect("structs serialize to objects");
        for (k, v) in extra {
            if !obj.contains_key(&k) {
                return Err(PyValueError::new_err(format!("unknown key `{k}`")));
            }
            obj.insert(k, v);
        }
    }
    serde_json::from_value(value).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn json_to_dict<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// A test problem: response, gradient and failure threshold.
#[pyclass(name = "Problem", module = "poflab", frozen)]
pub struct PyProblem {
    inner: poflab_core::Problem,
}

#[pymethods]
impl PyProblem {
    #[new]
    fn new(name: &str) -> PyResult<Self> {
        Ok(Self { inner: poflab_core::Problem::by_name(name).map_err(to_py)? })
    }

    #[staticmethod]
    fn names() -> Vec<&'static str> {
        poflab_core::problems::PROBLEM_NAMES.to_vec()
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn q0(&self) -> f64 {
        self.inner.q0
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.domain.dim()
    }

    #[getter]
    fn bounds(&self) -> Vec<(f64, f64)> {
        self.inner.domain.bounds().to_vec()
    }

    fn q(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.eval_q(&x).map_err(to_py)
    }

    fn q_and_grad(&self, x: Vec<f64>) -> PyResult<(f64, Vec<f64>)> {
        self.inner.eval_q_and_grad(&x).map_err(to_py)
    }

    fn label(&self, x: Vec<f64>) -> PyResult<i8> {
        Ok(sign(Label::from_response(self.q(x)?, self.inner.q0)))
    }

    fn __repr__(&self) -> String {
        format!("Problem({:?}, dim={}, q0={})", self.inner.name, self.inner.domain.dim(), self.inner.q0)
    }
}

/// Evaluated samples with exclusion radii.
#[pyclass(name = "TrainingSet", module = "poflab", frozen)]
pub struct PyTrainingSet {
    inner: poflab_core::TrainingSet,
}

#[pymethods]
impl PyTrainingSet {
    #[staticmethod]
    #[pyo3(signature = (path, problem = "unknown"))]
    fn load_csv(path: &str, problem: &str) -> PyResult<Self> {
        Ok(Self { inner: poflab_core::TrainingSet::load_csv(path, problem).map_err(to_py)? })
    }

    fn save_csv(&self, path: &str) -> PyResult<()> {
        self.inner.save_csv(path).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn x(&self) -> Vec<Vec<f64>> {
        self.inner.samples.iter().map(|s| s.x.clone()).collect()
    }

    #[getter]
    fn q(&self) -> Vec<f64> {
        self.inner.samples.iter().map(|s| s.q).collect()
    }

    #[getter]
    fn grad(&self) -> Vec<Vec<f64>> {
        self.inner.samples.iter().map(|s| s.grad.clone()).collect()
    }

    #[getter]
    fn labels(&self) -> Vec<i8> {
        self.inner.samples.iter().map(|s| sign(s.label)).collect()
    }

    #[getter]
    fn radius(&self) -> Vec<f64> {
        self.inner.samples.iter().map(|s| s.radius).collect()
    }

    #[getter]
    fn saturated(&self) -> bool {
        self.inner.saturated
    }

    #[getter]
    fn problem(&self) -> &str {
        &self.inner.problem
    }

    /// Gabriel pairs `(i, j)` with opposite labels and their midpoints.
    fn gabriel_edited_set(&self) -> PyResult<(Vec<(usize, usize)>, Vec<Vec<f64>>)> {
        let ges = gabriel_edited_set(&self.inner).map_err(to_py)?;
        Ok((ges.pairs, ges.cbps))
    }

    /// Largest distance between the two points of a Gabriel pair.
    fn max_pair_distance(&self) -> PyResult<f64> {
        let ges = gabriel_edited_set(&self.inner).map_err(to_py)?;
        max_pair_distance(&ges, &self.inner).map_err(to_py)
    }
}

#[pyfunction]
#[pyo3(name = "uniform_sample")]
fn py_uniform_sample(problem: &PyProblem, n: usize, seed: u64) -> PyResult<PyTrainingSet> {
    Ok(PyTrainingSet { inner: uniform_sample(&problem.inner, n, seed).map_err(to_py)? })
}

#[pyfunction]
#[pyo3(name = "pof_darts", signature = (problem, n, seed, n_initial = 10, scale_l = 1.5, grad_floor = 1e-3, max_misses = 1000))]
fn py_pof_darts(
    problem: &PyProblem,
    n: usize,
    seed: u64,
    n_initial: usize,
    scale_l: f64,
    grad_floor: f64,
    max_misses: usize,
) -> PyResult<PyTrainingSet> {
    let cfg = DartsConfig { n_initial, scale_l, grad_floor, max_misses };
    Ok(PyTrainingSet { inner: pof_darts(&problem.inner, n, &cfg, seed).map_err(to_py)? })
}

/// A trained boundary model.
#[pyclass(name = "Classifier", module = "poflab", frozen)]
pub struct PyClassifier {
    inner: Classifier,
}

#[pymethods]
impl PyClassifier {
    /// Train `method` with the default hyperparameters overlaid by `hyperparams`.
    #[staticmethod]
    #[pyo3(signature = (method, training_set, hyperparams = None, seed = 0))]
    fn train(
        method: &str,
        training_set: &PyTrainingSet,
        hyperparams: Option<&Bound<'_, PyDict>>,
        seed: u64,
    ) -> PyResult<Self> {
        let method: Method = method.parse().map_err(to_py)?;
        let hp = merged(Hyperparams::default(), hyperparams)?;
        Ok(Self { inner: poflab_core::models::train(method, &training_set.inner, &hp, seed).map_err(to_py)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: Classifier::from_json(text).map_err(to_py)? })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py)
    }

    #[getter]
    fn method(&self) -> &'static str {
        self.inner.method().as_str()
    }

    /// Linear models in an ensemble, `None` for other classifiers.
    #[getter]
    fn n_models(&self) -> Option<usize> {
        match &self.inner {
            Classifier::Ensemble(e) => Some(e.entries.len()),
            _ => None,
        }
    }

    fn predict(&self, x: Vec<f64>) -> i8 {
        sign(self.inner.predict(&x))
    }

    fn predict_many(&self, py: Python<'_>, points: Vec<Vec<f64>>) -> Vec<i8> {
        py.detach(|| points.iter().map(|p| sign(self.inner.predict(p))).collect())
    }

    fn __repr__(&self) -> String {
        match self.n_models() {
            Some(k) => format!("Classifier({}, models={k})", self.method()),
            None => format!("Classifier({})", self.method()),
        }
    }
}

/// Grid search by stratified k-fold accuracy. Returns the winning
/// hyperparameters and their mean validation accuracy.
#[pyfunction]
#[pyo3(signature = (method, training_set, folds = 10, seed = 0, grid = None))]
fn cross_validate_hyperparams<'py>(
    py: Python<'py>,
    method: &str,
    training_set: &PyTrainingSet,
    folds: usize,
    seed: u64,
    grid: Option<&Bound<'py, PyDict>>,
) -> PyResult<(Bound<'py, PyAny>, f64)> {
    let method: Method = method.parse().map_err(to_py)?;
    let grid = merged(HyperGrid::default(), grid)?;
    let cv = py.detach(|| cross_validate(&training_set.inner, method, &grid, folds, seed)).map_err(to_py)?;
    Ok((json_to_dict(py, &cv.best)?, cv.scores[cv.best_index]))
}

fn estimate_dict<'py>(py: Python<'py>, est: &PofEstimate) -> PyResult<Bound<'py, PyAny>> {
    json_to_dict(py, est)
}

/// Fraction of `n` uniform points whose response reaches the threshold.
#[pyfunction]
#[pyo3(name = "direct_mc_pof")]
fn py_direct_mc_pof<'py>(py: Python<'py>, problem: &PyProblem, n: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let est = py.detach(|| direct_mc_pof(&problem.inner, n, seed)).map_err(to_py)?;
    estimate_dict(py, &est)
}

/// Fraction of `n` uniform points the classifier labels as failures.
#[pyfunction]
#[pyo3(name = "surrogate_mc_pof")]
fn py_surrogate_mc_pof<'py>(
    py: Python<'py>,
    classifier: &PyClassifier,
    problem: &PyProblem,
    n: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let est = py.detach(|| surrogate_mc_pof(&classifier.inner, &problem.inner.domain, n, seed)).map_err(to_py)?;
    estimate_dict(py, &est)
}

/// Mean and sample sd of repeated estimates, optionally dropping the extremes.
#[pyfunction]
#[pyo3(signature = (estimates, trim = true))]
fn repetition_stats(estimates: Vec<f64>, trim: bool) -> PyResult<(f64, f64)> {
    let s = repeat_stats(&estimates, trim).map_err(to_py)?;
    Ok((s.mean, s.sd))
}

#[pymodule]
pub fn poflab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add_class::<PyTrainingSet>()?;
    m.add_class::<PyClassifier>()?;
    m.add_function(wrap_pyfunction!(py_uniform_sample, m)?)?;
    m.add_function(wrap_pyfunction!(py_pof_darts, m)?)?;
    m.add_function(wrap_pyfunction!(cross_validate_hyperparams, m)?)?;
    m.add_function(wrap_pyfunction!(py_direct_mc_pof, m)?)?;
    m.add_function(wrap_pyfunction!(py_surrogate_mc_pof, m)?)?;
    m.add_function(wrap_pyfunction!(repetition_stats, m)?)?;
    Ok(())
}
