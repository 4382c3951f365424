//! Python bindings. Matrices cross the boundary as lists of rows with one
//! observation per row, and predictor indices are 1-based.

use eas::admissibility::{h_exhaustive, h_pgd, HConfig};
use eas::matstat::{DenseMatrix, RngStream};
use eas::model::{fit_model, log_gf_mass, ModelIndexSet};
use eas::sampler::{run_chain, ChainConfig, HEstimator, WeightSpec};
use eas::simstudy::{generate, run_experiment, ExperimentConfig, SelectionMethod, SimulationDesign, PRESETS};
use eas::tuning::{tune, EpsilonGrid, TuningConfig, TuningMethod};
use eas::EasError;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py_err(e: EasError) -> PyErr {
    match e {
        EasError::InitializationFailed(_) | EasError::AllInadmissible => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn from_rows(rows: &[Vec<f64>], what: &str) -> PyResult<DenseMatrix> {
    let n = rows.len();
    let k = rows.first().map_or(0, Vec::len);
    if n == 0 || k == 0 {
        return Err(PyValueError::new_err(format!("{what} is empty")));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != k) {
        return Err(PyValueError::new_err(format!("{what} row {i} has {} entries, expected {k}", rows[i].len())));
    }
    Ok(DenseMatrix::from_fn(n, k, |i, j| rows[i][j]))
}

fn to_rows(m: &DenseMatrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Serialize through JSON and hand the result to Python's `json.loads`.
fn to_python<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let loads = py.import("json")?.getattr("loads")?;
    Ok(loads.call1((text,))?.unbind())
}

fn model_from(indices: Vec<usize>, p: usize) -> PyResult<ModelIndexSet> {
    let model = ModelIndexSet::from_one_based(&indices).map_err(to_py_err)?;
    model.check(p).map_err(to_py_err)?;
    Ok(model)
}

fn weight_spec(weights: Option<&Bound<'_, PyAny>>) -> PyResult<WeightSpec> {
    let Some(w) = weights else {
        return Ok(WeightSpec::Correlation);
    };
    if let Ok(name) = w.extract::<String>() {
        return match name.as_str() {
            "correlation" => Ok(WeightSpec::Correlation),
            "uniform" => Ok(WeightSpec::Uniform),
            "lasso" => Ok(WeightSpec::Lasso { folds: 10 }),
            other => Err(PyValueError::new_err(format!("unknown weights `{other}`"))),
        };
    }
    Ok(WeightSpec::Custom(w.extract::<Vec<f64>>()?))
}

/// Responses and predictors with observations in rows.
#[pyclass(module = "pyeas", frozen)]
struct Dataset {
    inner: eas::model::Dataset,
}

#[pymethods]
impl Dataset {
    #[new]
    #[pyo3(signature = (y, x, center = false))]
    fn new(y: Vec<Vec<f64>>, x: Vec<Vec<f64>>, center: bool) -> PyResult<Self> {
        let y = from_rows(&y, "y")?;
        let x = from_rows(&x, "x")?;
        if y.nrows() != x.nrows() {
            return Err(PyValueError::new_err(format!("y has {} rows but x has {}", y.nrows(), x.nrows())));
        }
        let mut inner = eas::model::Dataset::new(y.transpose(), x.transpose()).map_err(to_py_err)?;
        if center {
            inner = inner.centered().map_err(to_py_err)?;
        }
        Ok(Dataset { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn p(&self) -> usize {
        self.inner.p()
    }

    #[getter]
    fn q(&self) -> usize {
        self.inner.q()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(n={}, p={}, q={})", self.inner.n(), self.inner.p(), self.inner.q())
    }

    /// Least-squares fit on `model`: coefficients (`q × |M|`), `Σ̂` and its log determinant.
    fn fit(&self, py: Python<'_>, model: Vec<usize>) -> PyResult<Py<PyDict>> {
        let model = model_from(model, self.inner.p())?;
        let fitted = fit_model(&self.inner, &model).map_err(to_py_err)?;
        let out = PyDict::new(py);
        out.set_item("model", model.one_based())?;
        out.set_item("coef", fitted.coef().map(to_rows))?;
        out.set_item("sigma", fitted.sigma().map(to_rows))?;
        out.set_item("log_det_sigma", fitted.log_det_sigma())?;
        out.set_item("full_rank", fitted.full_rank())?;
        Ok(out.unbind())
    }

    /// Admissibility verdict `h_ε(B̂_M)` with the attained objective.
    #[pyo3(signature = (model, epsilon, exhaustive = false))]
    fn admissibility(&self, py: Python<'_>, model: Vec<usize>, epsilon: f64, exhaustive: bool) -> PyResult<Py<PyDict>> {
        let model = model_from(model, self.inner.p())?;
        let fitted = fit_model(&self.inner, &model).map_err(to_py_err)?;
        let r = if exhaustive {
            h_exhaustive(&self.inner, &fitted, epsilon)
        } else {
            h_pgd(&self.inner, &fitted, &HConfig::new(epsilon))
        }
        .map_err(to_py_err)?;
        let out = PyDict::new(py);
        out.set_item("h", r.h)?;
        out.set_item("objective", r.objective)?;
        out.set_item("iterations", r.iterations)?;
        out.set_item("converged", r.converged)?;
        Ok(out.unbind())
    }

    /// Unnormalized log fiducial mass of `model` at `epsilon`.
    #[pyo3(signature = (model, epsilon, exhaustive = false))]
    fn log_mass(&self, model: Vec<usize>, epsilon: f64, exhaustive: bool) -> PyResult<f64> {
        let model = model_from(model, self.inner.p())?;
        let fitted = fit_model(&self.inner, &model).map_err(to_py_err)?;
        let h = if exhaustive {
            h_exhaustive(&self.inner, &fitted, epsilon)
        } else {
            h_pgd(&self.inner, &fitted, &HConfig::new(epsilon))
        }
        .map_err(to_py_err)?
        .h;
        Ok(log_gf_mass(&fitted, h, self.inner.n(), self.inner.q(), epsilon).log_mass)
    }

    /// Run one Metropolis-Hastings chain over models at a fixed `epsilon`.
    #[pyo3(signature = (epsilon, steps = 10_000, burn_in = 2_000, seed = 0, weights = None, max_size = None, initial = None, exhaustive = false))]
    #[allow(clippy::too_many_arguments)]
    fn sample(
        &self,
        py: Python<'_>,
        epsilon: f64,
        steps: usize,
        burn_in: usize,
        seed: u64,
        weights: Option<&Bound<'_, PyAny>>,
        max_size: Option<usize>,
        initial: Option<Vec<usize>>,
        exhaustive: bool,
    ) -> PyResult<Py<PyAny>> {
        let mut cfg = ChainConfig::new(epsilon, steps, burn_in, seed);
        cfg.weights = weight_spec(weights)?;
        cfg.max_size = max_size;
        cfg.initial = initial.map(|m| model_from(m, self.inner.p())).transpose()?;
        if exhaustive {
            cfg.estimator = HEstimator::Exhaustive;
        }
        let data = &self.inner;
        let summary = py.detach(|| run_chain(data, &cfg)).map_err(to_py_err)?;
        to_python(py, &summary)
    }

    /// Choose ε over a grid by `"bic"` or `"cv"` and return the scores and final chain.
    #[pyo3(signature = (method = "bic", grid = None, steps = 10_000, burn_in = 2_000, seed = 0, folds = 10))]
    #[allow(clippy::too_many_arguments)]
    fn tune(
        &self,
        py: Python<'_>,
        method: &str,
        grid: Option<Vec<f64>>,
        steps: usize,
        burn_in: usize,
        seed: u64,
        folds: usize,
    ) -> PyResult<Py<PyAny>> {
        let grid = match grid {
            Some(values) => EpsilonGrid::new(values).map_err(to_py_err)?,
            None => EpsilonGrid::standard(),
        };
        let chain = ChainConfig::new(grid.values()[0], steps, burn_in, seed);
        let (method, mut cfg) = match method {
            "bic" => (TuningMethod::Bic, TuningConfig::bic(grid, chain)),
            "cv" => (TuningMethod::Cv, TuningConfig::cv(grid, chain)),
            other => return Err(PyValueError::new_err(format!("unknown tuning method `{other}`"))),
        };
        cfg.folds = folds;
        cfg.search_steps = steps;
        cfg.search_burn_in = burn_in;
        cfg.final_steps = steps;
        cfg.final_burn_in = burn_in;
        let data = &self.inner;
        let result = py.detach(|| tune(data, method, &cfg)).map_err(to_py_err)?;
        to_python(py, &result)
    }
}

/// Names of the built-in simulation designs.
#[pyfunction]
fn designs() -> Vec<&'static str> {
    PRESETS.to_vec()
}

fn preset(name: &str) -> PyResult<SimulationDesign> {
    SimulationDesign::preset(name).ok_or_else(|| PyValueError::new_err(format!("unknown design `{name}`")))
}

/// Draw one training and test set from a named design.
#[pyfunction]
#[pyo3(signature = (design, seed = 0, n = None))]
fn simulate(py: Python<'_>, design: &str, seed: u64, n: Option<usize>) -> PyResult<Py<PyDict>> {
    let mut d = preset(design)?;
    if let Some(n) = n {
        d = d.with_n(n);
    }
    let sim = generate(&d, RngStream::new(seed)).map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("train", Dataset { inner: sim.train })?;
    out.set_item("test", Dataset { inner: sim.test })?;
    out.set_item("truth", sim.truth.one_based())?;
    out.set_item("coef", to_rows(&sim.coef))?;
    Ok(out.unbind())
}

/// Repeat simulate-select-score over `replications` draws of a design.
#[pyfunction]
#[pyo3(signature = (design, replications, method = "bic", epsilon = None, steps = 10_000, burn_in = 2_000, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn experiment(
    py: Python<'_>,
    design: &str,
    replications: usize,
    method: &str,
    epsilon: Option<f64>,
    steps: usize,
    burn_in: usize,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let method = match (method, epsilon) {
        (_, Some(epsilon)) => SelectionMethod::Fixed { epsilon },
        ("bic", None) => SelectionMethod::Bic,
        ("cv", None) => SelectionMethod::Cv,
        (other, None) => return Err(PyValueError::new_err(format!("unknown selection method `{other}`"))),
    };
    let mut cfg = ExperimentConfig::new(preset(design)?, replications, method, seed);
    cfg.tuning.search_steps = steps;
    cfg.tuning.search_burn_in = burn_in;
    cfg.tuning.final_steps = steps;
    cfg.tuning.final_burn_in = burn_in;
    let report = py.detach(|| run_experiment(&cfg)).map_err(to_py_err)?;
    to_python(py, &report)
}

#[pymodule]
fn pyeas(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_function(wrap_pyfunction!(designs, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(experiment, m)?)?;
    Ok(())
}
