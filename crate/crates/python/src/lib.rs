//! Python bindings: datasets, fits, and simulation tables.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use robustreg::sim::{run_mse, ErrorCase, Example, Scenario};
use robustreg::{FitOptions, MethodId};

create_exception!(robustreg, RobustRegError, PyException);

fn to_py(e: robustreg::Error) -> PyErr {
    RobustRegError::new_err(e.to_string())
}

fn method(name: &str) -> PyResult<MethodId> {
    name.parse().map_err(to_py)
}

/// Regression data: covariate rows, a response and an optional intercept.
#[pyclass(name = "Dataset", module = "robustreg", frozen)]
struct PyDataset {
    inner: robustreg::Dataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    #[pyo3(signature = (x, y, intercept = true))]
    fn new(x: Vec<Vec<f64>>, y: Vec<f64>, intercept: bool) -> PyResult<Self> {
        let inner = robustreg::Dataset::from_rows(&x, y, intercept).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (path, response, intercept = true))]
    fn from_csv(path: &str, response: &str, intercept: bool) -> PyResult<Self> {
        let inner = robustreg::Dataset::from_csv(path, response, intercept).map_err(to_py)?;
        Ok(Self { inner })
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
    fn coefficient_names(&self) -> Vec<String> {
        self.inner.coefficient_names()
    }

    #[getter]
    fn y(&self) -> Vec<f64> {
        self.inner.y().to_vec()
    }

    /// Copy without the given row indices.
    fn without_rows(&self, rows: Vec<usize>) -> PyResult<Self> {
        let inner = self.inner.without_rows(&rows).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn __repr__(&self) -> String {
        format!("Dataset(n={}, p={})", self.inner.n(), self.inner.p())
    }
}

#[pyclass(name = "Fit", module = "robustreg", frozen)]
struct PyFit {
    inner: robustreg::RegressionFit,
}

#[pymethods]
impl PyFit {
    #[getter]
    fn method(&self) -> &'static str {
        self.inner.method.as_str()
    }

    #[getter]
    fn coefficients(&self) -> Vec<f64> {
        self.inner.beta().to_vec()
    }

    #[getter]
    fn scale(&self) -> f64 {
        self.inner.scale
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights.clone()
    }

    #[getter]
    fn residuals(&self) -> Vec<f64> {
        self.inner.residuals.clone()
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    #[getter]
    fn exact_fit(&self) -> bool {
        self.inner.exact_fit
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("fit serializes")
    }

    fn __repr__(&self) -> String {
        format!("Fit(method={}, coefficients={:?})", self.inner.method, self.inner.beta())
    }
}

/// Fits `method` to `data`. `lam` is the mean-shift threshold in units of the start's scale.
#[pyfunction]
#[pyo3(signature = (data, method_name, seed = 0, k1 = 4.68, lam = 2.5, eta = 2.5))]
fn fit(py: Python<'_>, data: &PyDataset, method_name: &str, seed: u64, k1: f64, lam: f64, eta: f64) -> PyResult<PyFit> {
    let m = method(method_name)?;
    let opts = FitOptions {
        seed,
        k1,
        lambda: lam,
        eta,
        ..FitOptions::default()
    };
    let d = &data.inner;
    let inner = py.detach(|| robustreg::fit(d, m, &opts)).map_err(to_py)?;
    Ok(PyFit { inner })
}

/// Names of every estimator.
#[pyfunction]
fn methods() -> Vec<&'static str> {
    MethodId::names()
}

/// The bundled cigarette consumption data.
#[pyfunction]
fn cigarette() -> PyDataset {
    PyDataset {
        inner: robustreg::demo::cigarette(),
    }
}

/// MSE table as a list of dicts with keys method, coefficient, mse, replicates, excluded.
#[pyfunction]
#[pyo3(signature = (example, case, n = 100, reps = 1000, seed = 0, methods = None))]
fn simulate<'py>(
    py: Python<'py>,
    example: &str,
    case: &str,
    n: usize,
    reps: usize,
    seed: u64,
    methods: Option<Vec<String>>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let ex: Example = example.parse().map_err(to_py)?;
    let c: ErrorCase = case.parse().map_err(to_py)?;
    let ms = match methods {
        None => MethodId::SIMULATION.to_vec(),
        Some(v) => v.iter().map(|m| method(m)).collect::<PyResult<_>>()?,
    };
    let s = Scenario::new(ex, c, n, reps, seed).map_err(to_py)?;
    let table = py
        .detach(|| run_mse(&s, &ms, &FitOptions::default()))
        .map_err(to_py)?;
    table
        .rows
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("method", r.method.as_str())?;
            d.set_item("coefficient", &r.coefficient)?;
            d.set_item("mse", r.mse)?;
            d.set_item("replicates", r.replicates)?;
            d.set_item("excluded", r.excluded)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
#[pyo3(name = "robustreg")]
fn robustreg_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyFit>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(methods, m)?)?;
    m.add_function(wrap_pyfunction!(cigarette, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add("RobustRegError", m.py().get_type::<RobustRegError>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
