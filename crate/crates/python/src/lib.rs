//! Python bindings: norms, sets, Chebyshev centers, problem files and the
//! bundled experiments.

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use chebsip::bench::{self, ProblemFile};
use chebsip::chebyshev::{self, ChebyshevTask};
use chebsip::global::{GlobalConfig, Strategy};
use chebsip::sip::PathOptions;
use chebsip::{BoxDomain, ConstraintSet, Error, Inequality};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Schema(_) | Error::Json(_) | Error::DimensionMismatch { .. } | Error::InvalidArgument(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != c) {
        return Err(PyValueError::new_err("ragged matrix"));
    }
    Ok(DMatrix::from_fn(rows.len(), c, |i, j| rows[i][j]))
}

#[pyclass(name = "Norm", from_py_object)]
#[derive(Clone)]
struct PyNorm {
    inner: chebsip::Norm,
}

#[pymethods]
impl PyNorm {
    #[staticmethod]
    fn l1() -> Self {
        Self { inner: chebsip::Norm::l1() }
    }

    #[staticmethod]
    fn l2() -> Self {
        Self { inner: chebsip::Norm::l2() }
    }

    #[staticmethod]
    fn linf() -> Self {
        Self { inner: chebsip::Norm::linf() }
    }

    /// `sqrt(vᵀ M v)` for a symmetric positive definite `M`.
    #[staticmethod]
    fn weighted(m: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Self { inner: chebsip::Norm::weighted(matrix(m)?).map_err(py_err)? })
    }

    #[staticmethod]
    fn gram(g: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Self { inner: chebsip::Norm::gram(matrix(g)?).map_err(py_err)? })
    }

    fn __call__(&self, v: Vec<f64>) -> f64 {
        self.inner.apply(&v)
    }

    fn __repr__(&self) -> String {
        format!("Norm({:?})", self.inner.kind())
    }
}

/// A box cut by halfspaces, quadratic inequalities, balls and equalities.
#[pyclass(name = "Set", from_py_object)]
#[derive(Clone)]
struct PySet {
    bounds: Vec<(f64, f64)>,
    inequalities: Vec<Inequality>,
    equalities: Option<(DMatrix<f64>, DVector<f64>)>,
}

#[pymethods]
impl PySet {
    #[new]
    fn new(bounds: Vec<(f64, f64)>) -> PyResult<Self> {
        BoxDomain::from_bounds(&bounds).map_err(py_err)?;
        Ok(Self { bounds, inequalities: Vec::new(), equalities: None })
    }

    /// `normal · u ≤ offset`.
    fn add_halfspace(&mut self, normal: Vec<f64>, offset: f64) -> PyResult<()> {
        self.inequalities.push(Inequality::halfspace(DVector::from_vec(normal), offset).map_err(py_err)?);
        Ok(())
    }

    /// `uᵀ Q u + linear · u + constant ≤ 0`.
    fn add_quadratic(&mut self, q: Vec<Vec<f64>>, linear: Vec<f64>, constant: f64) -> PyResult<()> {
        self.inequalities.push(Inequality::Quadratic { q: matrix(q)?, linear: DVector::from_vec(linear), constant });
        Ok(())
    }

    fn add_outside_ball(&mut self, center: Vec<f64>, radius: f64) {
        self.inequalities.push(Inequality::outside_ball(DVector::from_vec(center), radius));
    }

    fn add_inside_ball(&mut self, center: Vec<f64>, radius: f64) {
        self.inequalities.push(Inequality::inside_ball(DVector::from_vec(center), radius));
    }

    /// `A u = b`.
    fn set_equalities(&mut self, a: Vec<Vec<f64>>, b: Vec<f64>) -> PyResult<()> {
        self.equalities = Some((matrix(a)?, DVector::from_vec(b)));
        Ok(())
    }

    fn contains(&self, u: Vec<f64>) -> PyResult<bool> {
        Ok(self.build()?.contains(&DVector::from_vec(u)))
    }

    fn dim(&self) -> usize {
        self.bounds.len()
    }
}

impl PySet {
    fn build(&self) -> PyResult<ConstraintSet> {
        let bx = BoxDomain::from_bounds(&self.bounds).map_err(py_err)?;
        ConstraintSet::new(bx, self.inequalities.clone(), self.equalities.clone()).map_err(py_err)
    }
}

#[pyclass(name = "ChebyshevCenter", get_all, skip_from_py_object)]
struct PyCenter {
    radius: f64,
    center: Vec<f64>,
    /// Probe verdict: the ball covers the set.
    circumscribed: bool,
    worst_excess: f64,
    /// `(eps, center)` along the regularization path.
    path: Vec<(f64, Vec<f64>)>,
}

#[pymethods]
impl PyCenter {
    fn __repr__(&self) -> String {
        format!("ChebyshevCenter(radius={:.6}, center={:?}, circumscribed={})", self.radius, self.center, self.circumscribed)
    }
}

/// Chebyshev center of `set` under `norm`.
#[pyfunction]
#[pyo3(signature = (set, norm, strategy = "de", seed = 0, probes = 10_000, center_on_equalities = false))]
fn chebyshev_center(
    py: Python<'_>,
    set: PySet,
    norm: PyNorm,
    strategy: &str,
    seed: u64,
    probes: usize,
    center_on_equalities: bool,
) -> PyResult<PyCenter> {
    let strategy = Strategy::from_short_name(strategy).ok_or_else(|| PyValueError::new_err("strategy must be de, sa or nm"))?;
    let mut task = ChebyshevTask::new(set.build()?, norm.inner);
    if center_on_equalities {
        let (a, b) = set.equalities.clone().ok_or_else(|| PyValueError::new_err("the set has no equalities"))?;
        task = task.with_center_equalities(a, b);
    }
    let cfg = GlobalConfig::with_strategy(strategy, seed);
    py.detach(|| {
        let psi = chebyshev::default_regularizer(&task)?;
        let r = chebyshev::chebyshev_center(&task, psi, &PathOptions::default(), &cfg)?;
        let c = chebyshev::circumscription_check(&r, &task, probes)?;
        Ok(PyCenter {
            radius: r.radius,
            center: r.center.as_slice().to_vec(),
            circumscribed: c.ok,
            worst_excess: c.worst,
            path: r.path.solutions.iter().map(|s| (s.eps, s.x.as_slice()[1..].to_vec())).collect(),
        })
    })
    .map_err(py_err)
}

/// Runs a problem file given as JSON text; returns the report as JSON.
#[pyfunction]
fn run_problem(py: Python<'_>, problem: &str) -> PyResult<String> {
    let p = ProblemFile::from_json(problem).map_err(py_err)?;
    let r = py.detach(|| bench::run_problem(&p)).map_err(py_err)?;
    Ok(r.to_stable_json())
}

/// Runs a bundled experiment; returns the scored report as JSON.
#[pyfunction]
fn repro(py: Python<'_>, name: &str) -> PyResult<String> {
    let r = py.detach(|| bench::run_repro(name, None)).map_err(py_err)?;
    Ok(r.to_stable_json())
}

#[pyfunction]
fn repro_ids() -> Vec<&'static str> {
    bench::repro::ids()
}

/// Grid minimax reference `(radius, center, error_bound)` for a center problem file.
#[pyfunction]
#[pyo3(signature = (problem, resolution = 256))]
fn oracle(py: Python<'_>, problem: &str, resolution: usize) -> PyResult<(f64, Vec<f64>, f64)> {
    let p = ProblemFile::from_json(problem).map_err(py_err)?;
    let task = p.chebyshev_task().map_err(py_err)?;
    let o = py.detach(|| bench::grid_oracle(&task, resolution)).map_err(py_err)?;
    Ok((o.radius, o.center, o.error_bound))
}

#[pymodule]
fn chebsip_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNorm>()?;
    m.add_class::<PySet>()?;
    m.add_class::<PyCenter>()?;
    m.add_function(wrap_pyfunction!(chebyshev_center, m)?)?;
    m.add_function(wrap_pyfunction!(run_problem, m)?)?;
    m.add_function(wrap_pyfunction!(repro, m)?)?;
    m.add_function(wrap_pyfunction!(repro_ids, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    Ok(())
}
