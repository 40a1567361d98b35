//! Python bindings for the gwgauss library: Gaussian measures, the
//! closed-form Gromov-Wasserstein bounds and maps, seeded sampling, and the
//! discrete objective/solvers on point clouds.
//!
//! Matrices cross the boundary as plain nested lists (row-major), so the
//! module has no hard dependency on numpy; `list(map(list, arr))` converts
//! from it when needed.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use nalgebra::{DMatrix, DVector};

use gwgauss as gw;
use gwgauss::{GwError, SymmetricMatrix};

fn to_py_err(e: GwError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> PyResult<DMatrix<f64>> {
    if rows.is_empty() {
        return Err(PyValueError::new_err(format!("{what} must be non-empty")));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err(format!("{what} has ragged rows")));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn uniform_cloud(points: Vec<Vec<f64>>, what: &str) -> PyResult<gw::PointCloud> {
    gw::PointCloud::uniform(matrix_from_rows(&points, what)?).map_err(to_py_err)
}

/// Affine map as it crosses the boundary: `(matrix rows, offset)`.
type PyAffine = (Vec<Vec<f64>>, Vec<f64>);

/// Gaussian measure `N(mean, cov)`.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct Gaussian {
    inner: gw::GaussianMeasure,
}

#[pymethods]
impl Gaussian {
    #[new]
    fn new(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> PyResult<Self> {
        let cov = SymmetricMatrix::from_rows(&cov).map_err(to_py_err)?;
        let inner =
            gw::GaussianMeasure::new(DVector::from_vec(mean), cov).map_err(to_py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn mean(&self) -> Vec<f64> {
        self.inner.mean().iter().copied().collect()
    }

    #[getter]
    fn cov(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(self.inner.covariance().as_matrix())
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __repr__(&self) -> String {
        format!("Gaussian(dim={})", self.inner.dim())
    }
}

/// Lower/upper bound report.
#[pyclass]
struct Bounds {
    #[pyo3(get)]
    lower: f64,
    #[pyo3(get)]
    upper: f64,
    #[pyo3(get)]
    exact: Option<f64>,
    #[pyo3(get)]
    gap: f64,
    #[pyo3(get)]
    gap_cap: f64,
    #[pyo3(get)]
    swapped: bool,
}

#[pymethods]
impl Bounds {
    fn __repr__(&self) -> String {
        format!(
            "Bounds(lower={}, upper={}, exact={:?}, gap={}, gap_cap={})",
            self.lower, self.upper, self.exact, self.gap, self.gap_cap
        )
    }
}

/// Solver outcome with the dense coupling matrix.
#[pyclass]
struct SolveResult {
    #[pyo3(get)]
    objective: f64,
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    converged: bool,
    #[pyo3(get)]
    marginal_error: f64,
    #[pyo3(get)]
    plan: Vec<Vec<f64>>,
}

impl From<gw::SolveReport> for SolveResult {
    fn from(r: gw::SolveReport) -> Self {
        Self {
            objective: r.objective,
            iterations: r.iterations,
            converged: r.converged,
            marginal_error: r.marginal_error,
            plan: matrix_to_rows(r.plan.matrix()),
        }
    }
}

/// Lower and upper bounds (with gap and cap) for a pair of Gaussians.
#[pyfunction]
fn bounds(a: &Gaussian, b: &Gaussian) -> Bounds {
    let r = gw::bounds(&a.inner, &b.inner);
    Bounds {
        lower: r.lower,
        upper: r.upper,
        exact: r.exact,
        gap: r.gap,
        gap_cap: r.gap_cap,
        swapped: r.swapped,
    }
}

#[pyfunction]
fn ggw2_squared(a: &Gaussian, b: &Gaussian) -> f64 {
    gw::ggw2_squared(&a.inner, &b.inner)
}

#[pyfunction]
fn lgw2_squared(a: &Gaussian, b: &Gaussian) -> f64 {
    gw::lgw2_squared(&a.inner, &b.inner)
}

#[pyfunction]
fn gw2_proportional(a: &Gaussian, b: &Gaussian) -> Option<f64> {
    gw::gw2_proportional(&a.inner, &b.inner)
}

/// Optimal affine map of the Gaussian-restricted problem as
/// `(matrix, offset)`, the source being the higher-rank measure.
#[pyfunction]
#[pyo3(signature = (a, b, signs=None))]
fn ggw_map(
    a: &Gaussian,
    b: &Gaussian,
    signs: Option<Vec<f64>>,
) -> PyResult<PyAffine> {
    let map = gw::ggw_map(&a.inner, &b.inner, signs.as_deref()).map_err(to_py_err)?;
    Ok((
        matrix_to_rows(map.matrix()),
        map.offset().iter().copied().collect(),
    ))
}

/// Quadratic Wasserstein distance squared; the affine map `(matrix,
/// offset)` is present when the source covariance is positive definite.
#[pyfunction]
fn w2_squared(a: &Gaussian, b: &Gaussian) -> PyResult<(f64, Option<PyAffine>)> {
    let (value, map) = gw::w2_squared(&a.inner, &b.inner).map_err(to_py_err)?;
    Ok((
        value,
        map.map(|m| (matrix_to_rows(m.matrix()), m.offset().iter().copied().collect())),
    ))
}

/// Draw `k` samples (row-major `k x dim` list) reproducibly.
#[pyfunction]
fn sample(g: &Gaussian, k: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    if k == 0 {
        return Err(PyValueError::new_err("k must be positive"));
    }
    Ok(matrix_to_rows(gw::sample(&g.inner, k, seed).points()))
}

/// Gromov-Wasserstein objective of a plan between two uniform clouds.
#[pyfunction]
fn gw_objective(x: Vec<Vec<f64>>, y: Vec<Vec<f64>>, plan: Vec<Vec<f64>>) -> PyResult<f64> {
    let xc = uniform_cloud(x, "x")?;
    let yc = uniform_cloud(y, "y")?;
    let plan = gw::CouplingPlan::new(
        matrix_from_rows(&plan, "plan")?,
        xc.weights().clone(),
        yc.weights().clone(),
    )
    .map_err(to_py_err)?;
    gw::gw_objective(&xc, &yc, &plan).map_err(to_py_err)
}

/// Entropic solver on two uniform clouds.
#[pyfunction]
#[pyo3(signature = (x, y, epsilon, max_outer=60, max_sinkhorn=500, tol=1e-6, seed=0, restarts=0))]
#[allow(clippy::too_many_arguments)]
fn entropic_gw(
    x: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    epsilon: f64,
    max_outer: usize,
    max_sinkhorn: usize,
    tol: f64,
    seed: u64,
    restarts: usize,
) -> PyResult<SolveResult> {
    let xc = uniform_cloud(x, "x")?;
    let yc = uniform_cloud(y, "y")?;
    let params = gw::EntropicGwParams {
        epsilon,
        max_outer,
        max_sinkhorn,
        tol,
        seed,
        restarts,
    };
    gw::entropic_gw_solve(&xc, &yc, &params)
        .map(SolveResult::from)
        .map_err(to_py_err)
}

/// Exhaustive permutation solver for uniform clouds with k <= 8.
#[pyfunction]
fn brute_force_gw(x: Vec<Vec<f64>>, y: Vec<Vec<f64>>) -> PyResult<SolveResult> {
    let xc = uniform_cloud(x, "x")?;
    let yc = uniform_cloud(y, "y")?;
    gw::brute_force_gw(&xc, &yc)
        .map(SolveResult::from)
        .map_err(to_py_err)
}

#[pymodule]
fn pygwgauss(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Gaussian>()?;
    m.add_class::<Bounds>()?;
    m.add_class::<SolveResult>()?;
    m.add_function(wrap_pyfunction!(bounds, m)?)?;
    m.add_function(wrap_pyfunction!(ggw2_squared, m)?)?;
    m.add_function(wrap_pyfunction!(lgw2_squared, m)?)?;
    m.add_function(wrap_pyfunction!(gw2_proportional, m)?)?;
    m.add_function(wrap_pyfunction!(ggw_map, m)?)?;
    m.add_function(wrap_pyfunction!(w2_squared, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(gw_objective, m)?)?;
    m.add_function(wrap_pyfunction!(entropic_gw, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_gw, m)?)?;
    Ok(())
}
