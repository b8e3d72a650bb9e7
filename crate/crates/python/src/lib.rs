//! Python bindings for `proxi2s`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;

use proxi2s::cli::{fit_and_report, load_csv, ColumnRoles, FitReport};
use proxi2s::datagen::{generate_logit_dataset, DgpParams};
use proxi2s::sim::VarianceMethod;
use proxi2s::{build_design, Dataset, Error, Link, ModelSpec, OutcomeLink, TermSpec};

fn to_py(e: Error) -> PyErr {
    if e.is_numerical() {
        PyArithmeticError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py)
}

#[pyclass(name = "Dataset", module = "proxi2s_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyDataset {
    inner: Dataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    #[pyo3(signature = (y, a, w, z, x = None))]
    fn new(y: Vec<f64>, a: Vec<f64>, w: Vec<f64>, z: Vec<Vec<f64>>, x: Option<Vec<Vec<f64>>>) -> PyResult<Self> {
        Ok(PyDataset { inner: Dataset::new(y, a, w, z, x.unwrap_or_default()).map_err(to_py)? })
    }

    /// The 15-row worked example.
    #[staticmethod]
    fn demo() -> Self {
        PyDataset { inner: proxi2s::data::demo_dataset() }
    }

    #[staticmethod]
    #[pyo3(signature = (path, y = "y", a = "a", w = "w", z = vec!["z".to_string()], x = vec![]))]
    fn from_csv(path: PathBuf, y: &str, a: &str, w: &str, z: Vec<String>, x: Vec<String>) -> PyResult<Self> {
        let roles = ColumnRoles { y: y.into(), a: a.into(), w: w.into(), z, x, y_link: None, w_link: None };
        Ok(PyDataset { inner: load_csv(&path, &roles).map_err(to_py)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn y(&self) -> Vec<f64> {
        self.inner.y().to_vec()
    }

    #[getter]
    fn a(&self) -> Vec<f64> {
        self.inner.a().to_vec()
    }

    #[getter]
    fn w(&self) -> Vec<f64> {
        self.inner.w().to_vec()
    }

    #[getter]
    fn z(&self) -> Vec<Vec<f64>> {
        self.inner.z().to_vec()
    }

    #[getter]
    fn u(&self) -> Option<Vec<f64>> {
        self.inner.u().map(|u| u.to_vec())
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }
}

#[pyclass(name = "FitResult", module = "proxi2s_py", frozen)]
pub struct PyFitResult {
    report: FitReport,
}

#[pymethods]
impl PyFitResult {
    #[getter]
    fn procedure(&self) -> String {
        self.report.procedure.clone()
    }

    #[getter]
    fn beta_a(&self) -> f64 {
        self.report.beta_a.estimate
    }

    #[getter]
    fn se(&self) -> Option<f64> {
        self.report.beta_a.sandwich.as_ref().or(self.report.beta_a.bootstrap.as_ref()).map(|i| i.se)
    }

    #[getter]
    fn ci(&self) -> Option<(f64, f64)> {
        self.report.beta_a.sandwich.as_ref().or(self.report.beta_a.bootstrap.as_ref()).map(|i| i.ci)
    }

    #[getter]
    fn bootstrap_se(&self) -> Option<f64> {
        self.report.beta_a.bootstrap.as_ref().map(|i| i.se)
    }

    #[getter]
    fn first_stage(&self) -> BTreeMap<String, f64> {
        self.report.first_stage.iter().map(|c| (c.name.clone(), c.estimate)).collect()
    }

    #[getter]
    fn second_stage(&self) -> BTreeMap<String, f64> {
        self.report.second_stage.iter().map(|c| (c.name.clone(), c.estimate)).collect()
    }

    #[getter]
    fn reduced(&self) -> BTreeMap<String, f64> {
        self.report.reduced.clone()
    }

    fn to_json(&self) -> String {
        self.report.to_json()
    }

    fn __repr__(&self) -> String {
        format!("FitResult(procedure={}, beta_a={})", self.report.procedure, self.report.beta_a.estimate)
    }
}

/// Two-stage fit with first stage `A + Z + X` and second stage `A + X`.
#[pyfunction]
#[pyo3(signature = (data, y_link = "logit", w_link = "logit", interactions = false, restrict_symmetry = false, variance = "sandwich", boot_b = 300, seed = 1, level = 0.95))]
#[allow(clippy::too_many_arguments)]
fn fit(
    data: &PyDataset,
    y_link: &str,
    w_link: &str,
    interactions: bool,
    restrict_symmetry: bool,
    variance: &str,
    boot_b: usize,
    seed: u64,
    level: f64,
) -> PyResult<PyFitResult> {
    let yl: OutcomeLink = parse(y_link)?;
    let wl: OutcomeLink = parse(w_link)?;
    let vm: VarianceMethod = parse(variance)?;
    let spec = ModelSpec::with_default_terms(&data.inner, yl, wl)
        .interactions(interactions)
        .restrict_symmetry(restrict_symmetry);
    let report = fit_and_report(&data.inner, &spec, vm, boot_b, seed, level).map_err(to_py)?;
    Ok(PyFitResult { report })
}

/// Procedure identifier selected for a link pair.
#[pyfunction]
#[pyo3(signature = (y_link, w_link, interactions = false, restrict_symmetry = false))]
fn procedure(y_link: &str, w_link: &str, interactions: bool, restrict_symmetry: bool) -> PyResult<String> {
    let ds = proxi2s::data::demo_dataset();
    let spec = ModelSpec::with_default_terms(&ds, parse(y_link)?, parse(w_link)?)
        .interactions(interactions)
        .restrict_symmetry(restrict_symmetry);
    Ok(proxi2s::resolve_plan(&spec).map_err(to_py)?.procedure.id().to_string())
}

/// GLM coefficients of `response` on an intercept and the named columns of `data`.
#[pyfunction]
#[pyo3(signature = (data, terms, link = "logit", response = "y"))]
fn fit_glm(data: &PyDataset, terms: Vec<String>, link: &str, response: &str) -> PyResult<BTreeMap<String, f64>> {
    let link = match link {
        "identity" => Link::Identity,
        "log" => Link::Log,
        "logit" => Link::Logit,
        other => return Err(PyValueError::new_err(format!("unknown link `{other}`"))),
    };
    let ds = &data.inner;
    let spec = TermSpec::parse(&terms.iter().map(String::as_str).collect::<Vec<_>>(), ds).map_err(to_py)?;
    let design = build_design(ds, &spec).map_err(to_py)?;
    let var = ds.resolve(response).map_err(to_py)?;
    let col = ds.column(var).ok_or_else(|| PyValueError::new_err(format!("`{response}` is not a column")))?;
    let fit = proxi2s::fit_glm(&design, col, link, None, None).map_err(to_py)?;
    Ok(fit.names.into_iter().zip(fit.coef).collect())
}

/// Simulated binary outcome/proxy data with the default study parameters.
#[pyfunction]
#[pyo3(signature = (n, seed = 1))]
fn simulate_binary(n: usize, seed: u64) -> PyResult<PyDataset> {
    let g = generate_logit_dataset(n, &DgpParams::simulation_study(), seed).map_err(to_py)?;
    Ok(PyDataset { inner: g.dataset })
}

#[pymodule]
fn proxi2s_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyFitResult>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(procedure, m)?)?;
    m.add_function(wrap_pyfunction!(fit_glm, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_binary, m)?)?;
    Ok(())
}
