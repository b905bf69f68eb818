//! Python bindings for `creeping`.
//!
//! Fields cross the boundary as flat lists indexed i + n·j + n²·k (x₁ fastest);
//! reports come back as plain dicts.

use std::path::PathBuf;

use creeping::analysis::{hardy_check, VerificationReport};
use creeping::energy::{diagnostics_series, energy_balance_residual, energy_inequality_check};
use creeping::experiment::{run_experiment, ExperimentConfig, Pipeline};
use creeping::lerf::{self, FieldData};
use creeping::mollifier::{mollify, MollifierKernel};
use creeping::profiles::{CurlField, GaussianMixture, Swirl};
use creeping::stokes::{self, FlowState, FluidParams, ForcingField};
use creeping::{Grid3, ScalarField, VectorField3};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn report_to_py<'py>(py: Python<'py>, r: &VerificationReport) -> PyResult<Bound<'py, PyAny>> {
    json_to_py(py, &r.to_json())
}

/// Uniform cell-centred grid on [-L, L]³ with n cells per axis.
#[pyclass(name = "Grid", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyGrid(Grid3);

#[pymethods]
impl PyGrid {
    #[new]
    #[pyo3(signature = (n, half_width))]
    fn new(n: usize, half_width: f64) -> PyResult<Self> {
        Grid3::new(n, half_width).map(Self).map_err(value_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn half_width(&self) -> f64 {
        self.0.half_width()
    }

    #[getter]
    fn spacing(&self) -> f64 {
        self.0.spacing()
    }

    /// Cell-centre coordinates along one axis.
    fn coords(&self) -> Vec<f64> {
        (0..self.0.n()).map(|k| self.0.coord(k)).collect()
    }

    fn __repr__(&self) -> String {
        format!("Grid(n={}, half_width={})", self.0.n(), self.0.half_width())
    }
}

#[pyclass(name = "FluidParams", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyFluidParams(FluidParams);

#[pymethods]
impl PyFluidParams {
    #[new]
    #[pyo3(signature = (nu, rho = 1.0))]
    fn new(nu: f64, rho: f64) -> PyResult<Self> {
        FluidParams::new(nu, rho).map(Self).map_err(value_err)
    }

    #[getter]
    fn nu(&self) -> f64 {
        self.0.nu()
    }

    #[getter]
    fn rho(&self) -> f64 {
        self.0.rho()
    }

    fn __repr__(&self) -> String {
        format!("FluidParams(nu={}, rho={})", self.0.nu(), self.0.rho())
    }
}

#[pyclass(name = "ScalarField", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyScalarField(ScalarField);

#[pymethods]
impl PyScalarField {
    #[new]
    fn new(grid: &PyGrid, data: Vec<f64>) -> PyResult<Self> {
        ScalarField::new(grid.0, data).map(Self).map_err(value_err)
    }

    /// Normalized Gaussian mixture with `count` random bumps.
    #[staticmethod]
    #[pyo3(signature = (grid, seed, count = 2, spread = 1.0, sigma = 1.0))]
    fn gaussian_mixture(grid: &PyGrid, seed: u64, count: usize, spread: f64, sigma: f64) -> Self {
        Self(GaussianMixture::random(seed, count, spread, sigma).sample(grid.0))
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid(*self.0.grid())
    }

    fn to_list(&self) -> Vec<f64> {
        self.0.samples().to_vec()
    }

    fn sup_norm(&self) -> f64 {
        self.0.max_abs()
    }

    fn __len__(&self) -> usize {
        self.0.samples().len()
    }
}

#[pyclass(name = "VectorField", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyVectorField(VectorField3);

#[pymethods]
impl PyVectorField {
    #[new]
    fn new(grid: &PyGrid, u1: Vec<f64>, u2: Vec<f64>, u3: Vec<f64>) -> PyResult<Self> {
        let c = |d| ScalarField::new(grid.0, d).map_err(value_err);
        VectorField3::new(c(u1)?, c(u2)?, c(u3)?).map(Self).map_err(value_err)
    }

    #[staticmethod]
    fn zeros(grid: &PyGrid) -> Self {
        Self(VectorField3::zeros(grid.0))
    }

    /// Divergence-free swirl built from a single Gaussian.
    #[staticmethod]
    fn gaussian_swirl(grid: &PyGrid) -> Self {
        Self(Swirl::sample(grid.0))
    }

    /// Curl of a random Gaussian vector potential (exactly solenoidal).
    #[staticmethod]
    #[pyo3(signature = (grid, seed, bumps = 2, spread = 1.0, sigma = 1.0))]
    fn random_curl(grid: &PyGrid, seed: u64, bumps: usize, spread: f64, sigma: f64) -> Self {
        Self(CurlField::random(seed, bumps, spread, sigma).sample(grid.0))
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid(*self.0.grid())
    }

    fn component(&self, c: usize) -> PyResult<PyScalarField> {
        if c > 2 {
            return Err(value_err(format!("component index {c} out of range")));
        }
        Ok(PyScalarField(self.0.component(c).clone()))
    }

    /// `[u1, u2, u3]` as flat lists.
    fn to_lists(&self) -> Vec<Vec<f64>> {
        self.0.components().iter().map(|c| c.samples().to_vec()).collect()
    }

    fn scaled(&self, c: f64) -> Self {
        Self(self.0.scaled(c))
    }

    fn __add__(&self, other: &PyVectorField) -> PyResult<Self> {
        self.0.add(&other.0).map(Self).map_err(value_err)
    }

    fn __sub__(&self, other: &PyVectorField) -> PyResult<Self> {
        self.0.sub(&other.0).map(Self).map_err(value_err)
    }

    fn sup_norm(&self) -> f64 {
        creeping::sup_norm(&self.0)
    }

    fn energy(&self) -> f64 {
        creeping::energy(&self.0)
    }

    /// W, J1, J2, V, D1 at the given time label.
    #[pyo3(signature = (t = 0.0))]
    fn diagnostics<'py>(&self, py: Python<'py>, t: f64) -> PyResult<Bound<'py, PyDict>> {
        let s = creeping::diagnostics(&self.0, t);
        let d = PyDict::new(py);
        for (k, v) in [("t", s.t), ("W", s.w), ("J1", s.j1), ("J2", s.j2), ("V", s.v), ("D1", s.d1)] {
            d.set_item(k, v)?;
        }
        Ok(d)
    }
}

#[pyclass(name = "FlowState", frozen)]
struct PyFlowState(FlowState);

#[pymethods]
impl PyFlowState {
    #[getter]
    fn t(&self) -> f64 {
        self.0.t
    }

    #[getter]
    fn u(&self) -> PyVectorField {
        PyVectorField(self.0.u.clone())
    }

    #[getter]
    fn p(&self) -> PyScalarField {
        PyScalarField(self.0.p.clone())
    }

    fn __repr__(&self) -> String {
        format!("FlowState(t={})", self.0.t)
    }
}

fn forcing(grid: Grid3, x: Option<&PyVectorField>) -> PyResult<ForcingField> {
    match x {
        None => Ok(ForcingField::zero(grid)),
        Some(f) => {
            f.0.component(0).same_grid(&ScalarField::zeros(grid)).map_err(value_err)?;
            Ok(ForcingField::constant(f.0.clone()))
        }
    }
}

fn states_of(states: &[PyRef<'_, PyFlowState>]) -> Vec<FlowState> {
    states.iter().map(|s| s.0.clone()).collect()
}

/// Heat semigroup applied to `u0` at time t.
#[pyfunction]
fn heat_propagate(u0: &PyVectorField, params: &PyFluidParams, t: f64) -> PyResult<PyVectorField> {
    stokes::heat_propagate(&u0.0, &params.0, t).map(PyVectorField).map_err(value_err)
}

/// Solve at the given times; `forcing` is a time-constant force field.
#[pyfunction]
#[pyo3(signature = (u0, params, times, forcing = None))]
fn solve_linearized(
    u0: &PyVectorField,
    params: &PyFluidParams,
    times: Vec<f64>,
    forcing: Option<&PyVectorField>,
) -> PyResult<Vec<PyFlowState>> {
    let x = self::forcing(*u0.0.grid(), forcing)?;
    let states = stokes::solve_linearized(&u0.0, &x, &params.0, &times).map_err(value_err)?;
    Ok(states.into_iter().map(PyFlowState).collect())
}

/// Energy inequality check over a solved time series.
#[pyfunction]
fn check_energy_inequality<'py>(
    py: Python<'py>,
    states: Vec<PyRef<'py, PyFlowState>>,
) -> PyResult<Bound<'py, PyAny>> {
    let series = diagnostics_series(&states_of(&states)).map_err(value_err)?;
    let r = energy_inequality_check(&series).map_err(value_err)?;
    report_to_py(py, &r)
}

/// Energy balance residual relative to the initial energy.
#[pyfunction]
#[pyo3(signature = (states, params, forcing = None))]
fn check_energy_balance<'py>(
    py: Python<'py>,
    states: Vec<PyRef<'py, PyFlowState>>,
    params: &PyFluidParams,
    forcing: Option<&PyVectorField>,
) -> PyResult<Bound<'py, PyAny>> {
    let states = states_of(&states);
    let grid = *states.first().ok_or_else(|| value_err("no states"))?.grid();
    let x = self::forcing(grid, forcing)?;
    let series = diagnostics_series(&states).map_err(value_err)?;
    let r = energy_balance_residual(&series, &states, &x, &params.0).map_err(value_err)?;
    report_to_py(py, &r)
}

/// Hardy inequality check for a scalar field.
#[pyfunction]
fn check_hardy<'py>(py: Python<'py>, u: &PyScalarField) -> PyResult<Bound<'py, PyAny>> {
    let r = hardy_check(&u.0).map_err(value_err)?;
    report_to_py(py, &r)
}

/// Mollify a scalar field at scale epsilon.
#[pyfunction]
#[pyo3(name = "mollify")]
fn py_mollify(u: &PyScalarField, epsilon: f64) -> PyResult<PyScalarField> {
    let k = MollifierKernel::new(epsilon).map_err(value_err)?;
    mollify(&u.0, &k).map(PyScalarField).map_err(value_err)
}

/// Write a scalar or vector field to a LERF file.
#[pyfunction]
fn write_field(path: PathBuf, field: &Bound<'_, PyAny>) -> PyResult<()> {
    let data = if let Ok(v) = field.cast::<PyVectorField>() {
        FieldData::Vector(v.get().0.clone())
    } else if let Ok(s) = field.cast::<PyScalarField>() {
        FieldData::Scalar(s.get().0.clone())
    } else {
        return Err(value_err("expected ScalarField or VectorField"));
    };
    lerf::write_field(path, &data).map_err(|e| PyIOError::new_err(e.to_string()))
}

/// Read a LERF file; returns a ScalarField or a VectorField.
#[pyfunction]
fn read_field(py: Python<'_>, path: PathBuf) -> PyResult<Py<PyAny>> {
    match lerf::read_field(path).map_err(|e| PyIOError::new_err(e.to_string()))? {
        FieldData::Scalar(s) => Ok(Py::new(py, PyScalarField(s))?.into_any()),
        FieldData::Vector(v) => Ok(Py::new(py, PyVectorField(v))?.into_any()),
    }
}

/// Run a CLI pipeline from a JSON config string.
///
/// Returns `(exit_code, reports)`; configuration errors raise ValueError.
#[pyfunction]
#[pyo3(signature = (command, config_json, output = None))]
fn run<'py>(
    py: Python<'py>,
    command: &str,
    config_json: &str,
    output: Option<PathBuf>,
) -> PyResult<(u8, Vec<Bound<'py, PyAny>>)> {
    let pipeline = match command {
        "solve" => Pipeline::Solve,
        "verify" => Pipeline::Verify,
        "mollify-study" => Pipeline::MollifyStudy,
        "convergence-study" => Pipeline::ConvergenceStudy,
        other => return Err(value_err(format!("unknown command {other:?}"))),
    };
    let mut cfg = ExperimentConfig::from_json(config_json).map_err(value_err)?;
    if let Some(out) = output {
        cfg.output = out;
    }
    cfg.validate().map_err(value_err)?;
    let outcome = py.detach(|| run_experiment(pipeline, &cfg)).map_err(value_err)?;
    let reports = outcome.reports.iter().map(|r| report_to_py(py, r)).collect::<PyResult<_>>()?;
    Ok((outcome.exit_code(), reports))
}

#[pymodule]
fn creeping_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyFluidParams>()?;
    m.add_class::<PyScalarField>()?;
    m.add_class::<PyVectorField>()?;
    m.add_class::<PyFlowState>()?;
    m.add_function(wrap_pyfunction!(heat_propagate, m)?)?;
    m.add_function(wrap_pyfunction!(solve_linearized, m)?)?;
    m.add_function(wrap_pyfunction!(check_energy_inequality, m)?)?;
    m.add_function(wrap_pyfunction!(check_energy_balance, m)?)?;
    m.add_function(wrap_pyfunction!(check_hardy, m)?)?;
    m.add_function(wrap_pyfunction!(py_mollify, m)?)?;
    m.add_function(wrap_pyfunction!(write_field, m)?)?;
    m.add_function(wrap_pyfunction!(read_field, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
