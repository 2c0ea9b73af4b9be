//! Python bindings for `choquet_fusion`.
//!
//! Matrices cross the boundary as lists of rows (`list[list[float]]`); a
//! batch of criteria is a list of such matrices. Structured results
//! (metrics, histories) come back as plain dicts and lists.

use std::sync::Mutex;

use ndarray::Array2;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;

use choquet_fusion::de::{
    Bounds, DeConfig, DEFAULT_CROSSOVER_RATE, DEFAULT_MAX_GENERATIONS, DEFAULT_POPULATION_SIZE,
    DEFAULT_SCALE_FACTOR,
};
use choquet_fusion::ensemble::{self, LabeledSet};
use choquet_fusion::io::to_json;
use choquet_fusion::{choquet, fuzzy_measure, metrics, DensityVector, Error, EvidenceBatch};

fn to_py(error: Error) -> PyErr {
    match error {
        Error::FileNotFound { .. } | Error::Io { .. } => PyOSError::new_err(error.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_array(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
        return Err(PyValueError::new_err(format!(
            "row {i} has {} columns, expected {cols}",
            row.len()
        )));
    }
    let n = rows.len();
    Array2::from_shape_vec((n, cols), rows.into_iter().flatten().collect())
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

fn to_rows(matrix: &Array2<f64>) -> Vec<Vec<f64>> {
    matrix.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn to_batch(matrices: Vec<Vec<Vec<f64>>>) -> PyResult<EvidenceBatch> {
    let arrays = matrices
        .into_iter()
        .map(to_array)
        .collect::<PyResult<Vec<_>>>()?;
    EvidenceBatch::new(arrays).map_err(to_py)
}

fn json_loads(py: Python<'_>, text: String) -> PyResult<Bound<'_, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

/// Solves for the Sugeno λ of the given densities.
#[pyfunction]
fn solve_lambda(densities: Vec<f64>) -> PyResult<f64> {
    fuzzy_measure::solve_lambda(&DensityVector::new(densities).map_err(to_py)?).map_err(to_py)
}

#[pyclass(name = "SugenoMeasure", module = "choquet_fusion_py", frozen)]
struct PySugenoMeasure {
    inner: fuzzy_measure::SugenoMeasure,
}

#[pymethods]
impl PySugenoMeasure {
    #[new]
    fn new(densities: Vec<f64>) -> PyResult<Self> {
        let inner =
            fuzzy_measure::SugenoMeasure::new(DensityVector::new(densities).map_err(to_py)?)
                .map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn densities(&self) -> Vec<f64> {
        self.inner.densities().values().to_vec()
    }

    #[getter]
    fn lambda_(&self) -> f64 {
        self.inner.lambda()
    }

    fn __len__(&self) -> usize {
        self.inner.criteria_count()
    }

    fn union(&self, a: f64, b: f64) -> f64 {
        self.inner.union(a, b)
    }

    fn measure_of_subset(&self, indices: Vec<usize>) -> PyResult<f64> {
        self.inner.measure_of_subset(&indices).map_err(to_py)
    }

    fn full_set_measure(&self) -> f64 {
        self.inner.full_set_measure()
    }

    fn __repr__(&self) -> String {
        format!(
            "SugenoMeasure(densities={:?}, lambda_={})",
            self.inner.densities().values(),
            self.inner.lambda()
        )
    }
}

/// Choquet integral of one value per criterion.
#[pyfunction]
fn choquet_integral(values: Vec<f64>, measure: &PySugenoMeasure) -> PyResult<f64> {
    choquet::choquet_integral(&values, &measure.inner).map_err(to_py)
}

/// Reference Choquet integral by enumerating every subset of criteria.
#[pyfunction]
fn choquet_oracle(values: Vec<f64>, measure: &PySugenoMeasure) -> PyResult<f64> {
    choquet::choquet_oracle(&values, &measure.inner).map_err(to_py)
}

/// Fuses one matrix per criterion, element by element.
#[pyfunction]
fn choquet_aggregate(
    py: Python<'_>,
    matrices: Vec<Vec<Vec<f64>>>,
    measure: &PySugenoMeasure,
) -> PyResult<Vec<Vec<f64>>> {
    let batch = to_batch(matrices)?;
    let inner = measure.inner.clone();
    let fused = py
        .detach(move || choquet::choquet_aggregate(&batch, &inner))
        .map_err(to_py)?;
    Ok(to_rows(&fused))
}

#[pyclass(name = "DeResult", module = "choquet_fusion_py", frozen, get_all)]
struct PyDeResult {
    best: Vec<f64>,
    best_fitness: f64,
    history: Vec<f64>,
}

#[pymethods]
impl PyDeResult {
    fn __repr__(&self) -> String {
        format!(
            "DeResult(best={:?}, best_fitness={}, generations={})",
            self.best,
            self.best_fitness,
            self.history.len().saturating_sub(1)
        )
    }
}

#[allow(clippy::too_many_arguments)]
fn de_config(
    lower: Vec<f64>,
    upper: Vec<f64>,
    population_size: usize,
    scale_factor: f64,
    crossover_rate: f64,
    max_generations: usize,
    seed: u64,
) -> PyResult<DeConfig> {
    let config = DeConfig {
        bounds: Bounds::new(lower, upper).map_err(to_py)?,
        population_size,
        scale_factor,
        crossover_rate,
        max_generations,
        seed,
    };
    config.validate().map_err(to_py)?;
    Ok(config)
}

/// Minimises a Python callable `f(list[float]) -> float` with DE/best/1/bin.
#[pyfunction]
#[pyo3(signature = (
    objective, lower, upper, *,
    population_size = DEFAULT_POPULATION_SIZE,
    scale_factor = DEFAULT_SCALE_FACTOR,
    crossover_rate = DEFAULT_CROSSOVER_RATE,
    max_generations = DEFAULT_MAX_GENERATIONS,
    seed = 0,
))]
#[allow(clippy::too_many_arguments)]
fn differential_evolution(
    py: Python<'_>,
    objective: Py<PyAny>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    population_size: usize,
    scale_factor: f64,
    crossover_rate: f64,
    max_generations: usize,
    seed: u64,
) -> PyResult<PyDeResult> {
    let config = de_config(
        lower,
        upper,
        population_size,
        scale_factor,
        crossover_rate,
        max_generations,
        seed,
    )?;
    let raised: Mutex<Option<PyErr>> = Mutex::new(None);
    let call = |x: &[f64]| -> f64 {
        Python::attach(|py| {
            match objective
                .call1(py, (x.to_vec(),))
                .and_then(|v| v.extract::<f64>(py))
            {
                Ok(value) => value,
                Err(err) => {
                    raised.lock().unwrap().get_or_insert(err);
                    f64::NAN
                }
            }
        })
    };
    let outcome = py.detach(|| choquet_fusion::optimize(call, &config));
    if let Some(err) = raised.into_inner().unwrap() {
        return Err(err);
    }
    let outcome = outcome.map_err(to_py)?;
    Ok(PyDeResult {
        best: outcome.best,
        best_fitness: outcome.best_fitness,
        history: outcome.history.best_fitness().collect(),
    })
}

/// Numerically stable softmax of one logit vector.
#[pyfunction]
fn softmax(logits: Vec<f64>) -> Vec<f64> {
    ensemble::softmax(&logits)
}

/// Mean categorical cross-entropy of row-wise class probabilities.
#[pyfunction]
fn cross_entropy(probabilities: Vec<Vec<f64>>, labels: Vec<usize>) -> PyResult<f64> {
    ensemble::cross_entropy(&to_array(probabilities)?, &labels).map_err(to_py)
}

#[pyclass(name = "LinearHead", module = "choquet_fusion_py", frozen)]
struct PyLinearHead {
    inner: ensemble::LinearHead,
}

#[pymethods]
impl PyLinearHead {
    /// `weights` is inputs × classes; `bias` has one entry per class.
    #[new]
    fn new(weights: Vec<Vec<f64>>, bias: Vec<f64>) -> PyResult<Self> {
        let inner = ensemble::LinearHead::new(to_array(weights)?, bias.into()).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn inputs(&self) -> usize {
        self.inner.inputs()
    }

    #[getter]
    fn classes(&self) -> usize {
        self.inner.classes()
    }

    fn probabilities(&self, features: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        Ok(to_rows(
            &self
                .inner
                .probabilities(&to_array(features)?)
                .map_err(to_py)?,
        ))
    }
}

/// Class probabilities of the fused ensemble.
#[pyfunction]
fn ensemble_forward(
    matrices: Vec<Vec<Vec<f64>>>,
    measure: &PySugenoMeasure,
    head: &PyLinearHead,
) -> PyResult<Vec<Vec<f64>>> {
    let batch = to_batch(matrices)?;
    let p = ensemble::ensemble_forward(&batch, &measure.inner, &head.inner).map_err(to_py)?;
    Ok(to_rows(&p))
}

#[pyclass(name = "FittedEnsemble", module = "choquet_fusion_py", frozen)]
struct PyFittedEnsemble {
    inner: ensemble::FittedEnsemble,
}

#[pymethods]
impl PyFittedEnsemble {
    #[getter]
    fn measure(&self) -> PySugenoMeasure {
        PySugenoMeasure {
            inner: self.inner.measure.clone(),
        }
    }

    #[getter]
    fn densities(&self) -> Vec<f64> {
        self.inner.measure.densities().values().to_vec()
    }

    #[getter]
    fn lambda_(&self) -> f64 {
        self.inner.measure.lambda()
    }

    #[getter]
    fn criteria(&self) -> Vec<String> {
        self.inner.criteria.clone()
    }

    #[getter]
    fn final_loss(&self) -> Option<f64> {
        self.inner.metadata.as_ref().map(|m| m.final_loss)
    }

    #[getter]
    fn history(&self) -> Vec<f64> {
        self.inner
            .metadata
            .as_ref()
            .map(|m| m.history.best_fitness().collect())
            .unwrap_or_default()
    }

    fn forward(&self, matrices: Vec<Vec<Vec<f64>>>) -> PyResult<Vec<Vec<f64>>> {
        Ok(to_rows(
            &self.inner.forward(&to_batch(matrices)?).map_err(to_py)?,
        ))
    }

    fn predict(&self, matrices: Vec<Vec<Vec<f64>>>) -> PyResult<Vec<usize>> {
        choquet_fusion::predict(&to_batch(matrices)?, &self.inner).map_err(to_py)
    }
}

/// Fits one density per criterion on labelled validation evidence.
#[pyfunction]
#[pyo3(signature = (
    matrices, labels, head, *,
    population_size = DEFAULT_POPULATION_SIZE,
    scale_factor = DEFAULT_SCALE_FACTOR,
    crossover_rate = DEFAULT_CROSSOVER_RATE,
    max_generations = DEFAULT_MAX_GENERATIONS,
    seed = 0,
))]
#[allow(clippy::too_many_arguments)]
fn fit_densities(
    py: Python<'_>,
    matrices: Vec<Vec<Vec<f64>>>,
    labels: Vec<usize>,
    head: &PyLinearHead,
    population_size: usize,
    scale_factor: f64,
    crossover_rate: f64,
    max_generations: usize,
    seed: u64,
) -> PyResult<PyFittedEnsemble> {
    let n = matrices.len();
    let config = de_config(
        vec![0.0; n],
        vec![1.0; n],
        population_size,
        scale_factor,
        crossover_rate,
        max_generations,
        seed,
    )?;
    let validation =
        LabeledSet::new(to_batch(matrices)?, labels, head.inner.classes()).map_err(to_py)?;
    let head = head.inner.clone();
    let inner = py
        .detach(move || ensemble::fit_densities(&validation, &head, &config))
        .map_err(to_py)?;
    Ok(PyFittedEnsemble { inner })
}

/// Confusion matrix as a list of rows indexed by true class.
#[pyfunction]
fn confusion_matrix(
    predictions: Vec<usize>,
    labels: Vec<usize>,
    classes: usize,
) -> PyResult<Vec<Vec<u64>>> {
    let cm = metrics::confusion_matrix(&predictions, &labels, classes).map_err(to_py)?;
    Ok(cm.counts().to_vec())
}

/// One-vs-rest metrics of a single class, as a dict.
#[pyfunction]
fn class_metrics<'py>(
    py: Python<'py>,
    counts: Vec<Vec<u64>>,
    class_index: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let cm = metrics::ConfusionMatrix::from_counts(counts).map_err(to_py)?;
    json_loads(
        py,
        to_json(&metrics::class_metrics(&cm, class_index).map_err(to_py)?),
    )
}

/// Macro-averaged report with per-class entries, as a dict. Undefined values are `None`.
#[pyfunction]
fn macro_metrics<'py>(py: Python<'py>, counts: Vec<Vec<u64>>) -> PyResult<Bound<'py, PyAny>> {
    let cm = metrics::ConfusionMatrix::from_counts(counts).map_err(to_py)?;
    json_loads(py, to_json(&metrics::macro_metrics(&cm).map_err(to_py)?))
}

#[pymodule]
fn choquet_fusion_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySugenoMeasure>()?;
    m.add_class::<PyLinearHead>()?;
    m.add_class::<PyFittedEnsemble>()?;
    m.add_class::<PyDeResult>()?;
    m.add_function(wrap_pyfunction!(solve_lambda, m)?)?;
    m.add_function(wrap_pyfunction!(choquet_integral, m)?)?;
    m.add_function(wrap_pyfunction!(choquet_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(choquet_aggregate, m)?)?;
    m.add_function(wrap_pyfunction!(differential_evolution, m)?)?;
    m.add_function(wrap_pyfunction!(softmax, m)?)?;
    m.add_function(wrap_pyfunction!(cross_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(ensemble_forward, m)?)?;
    m.add_function(wrap_pyfunction!(fit_densities, m)?)?;
    m.add_function(wrap_pyfunction!(confusion_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(class_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(macro_metrics, m)?)?;
    Ok(())
}
