//! Python bindings: mesh generation, direct runs and coefficient
//! identification.
//!
//! Build with `cargo build --release -p coefid-py`; the resulting
//! `libcoefid_py.so` imports as the `coefid_py` module once renamed to
//! `coefid_py.so` on the Python path (see `python/smoke_test.py`).

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use coefid::direct::{
    record_observations, run_direct, subsample_observations, CoefficientFunction, DirectScheme,
    TimeGrid,
};
use coefid::fem::{build_observation, ObservationSpec, ProblemSpec};
use coefid::inverse::{
    identify as identify_rs, solve_nonlinear_implicit, solve_via_transform, IdentificationResult,
    SchemeKind,
};
use coefid::mesh::{triangulate, Point, PolygonSpec};

fn to_py_err(e: coefid::Error) -> PyErr {
    if e.exit_code() == 2 {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

/// Triangulation of a convex polygon.
#[pyclass(name = "Mesh", module = "coefid_py")]
struct PyMesh {
    inner: coefid::mesh::Mesh,
}

#[pymethods]
impl PyMesh {
    /// Triangulate the counterclockwise polygon `vertices` at the target
    /// edge length.
    #[staticmethod]
    fn triangulate(vertices: Vec<(f64, f64)>, edge_length: f64) -> PyResult<Self> {
        let polygon = PolygonSpec::new(
            vertices.into_iter().map(|(x, y)| Point::new(x, y)).collect(),
        )
        .map_err(to_py_err)?;
        let inner = triangulate(&polygon, edge_length).map_err(to_py_err)?;
        Ok(PyMesh { inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyMesh {
            inner: coefid::mesh::Mesh::read_file(path).map_err(to_py_err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.write_file(path).map_err(to_py_err)
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.inner.num_nodes()
    }

    #[getter]
    fn num_triangles(&self) -> usize {
        self.inner.num_triangles()
    }

    #[getter]
    fn num_boundary_edges(&self) -> usize {
        self.inner.boundary_edges.len()
    }

    fn nodes(&self) -> Vec<(f64, f64)> {
        self.inner.nodes.iter().map(|p| (p.x, p.y)).collect()
    }

    fn triangles(&self) -> Vec<(usize, usize, usize)> {
        self.inner
            .triangles
            .iter()
            .map(|t| (t[0], t[1], t[2]))
            .collect()
    }

    fn boundary_edges(&self) -> Vec<(usize, usize)> {
        self.inner
            .boundary_edges
            .iter()
            .map(|e| (e[0], e[1]))
            .collect()
    }

    fn total_area(&self) -> f64 {
        self.inner.total_area()
    }

    fn min_angle_deg(&self) -> f64 {
        self.inner.min_angle_deg()
    }

    fn centroid(&self) -> (f64, f64) {
        let c = self.inner.centroid();
        (c.x, c.y)
    }

    /// Invariant violations as human-readable strings (empty when valid).
    fn validate(&self) -> Vec<String> {
        self.inner
            .validate()
            .iter()
            .map(|v| v.to_string())
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Mesh({} nodes, {} triangles)",
            self.inner.num_nodes(),
            self.inner.num_triangles()
        )
    }
}

/// Result of an identification run.
#[pyclass(name = "Identification", module = "coefid_py")]
struct PyIdentification {
    /// Times `t_1 .. t_N` of the recovered values.
    #[pyo3(get)]
    times: Vec<f64>,
    /// Recovered coefficient series.
    #[pyo3(get)]
    p: Vec<f64>,
    /// Recovery denominators (observation of the companion field).
    #[pyo3(get)]
    w_functional: Vec<f64>,
    /// Relative residual of the scheme equation per step.
    #[pyo3(get)]
    residual: Vec<f64>,
    /// Observed values of the reconstructed trajectory at `t_0 .. t_N`.
    #[pyo3(get)]
    observed: Vec<f64>,
}

fn wrap_result(
    grid: TimeGrid,
    result: IdentificationResult,
    obs: &coefid::fem::ObservationFunctional,
) -> PyIdentification {
    PyIdentification {
        times: (1..=grid.steps()).map(|n| grid.time(n)).collect(),
        p: result.p_series,
        w_functional: result.diagnostics.iter().map(|d| d.w_functional).collect(),
        residual: result.diagnostics.iter().map(|d| d.residual).collect(),
        observed: result.trajectory.states.iter().map(|u| obs.apply(u)).collect(),
    }
}

fn problem_spec(diffusion: f64, boundary_coeff: f64, initial: f64) -> ProblemSpec {
    ProblemSpec::with_constants(diffusion, boundary_coeff, initial)
}

/// Coefficient selector: a name (`"zero"`, `"eq20"`, `"smooth_rational"`) or
/// a Python callable `t -> p(t)`, sampled at the grid times.
fn build_coefficient(
    obj: &Bound<'_, PyAny>,
    grid: TimeGrid,
) -> PyResult<CoefficientFunction> {
    if let Ok(name) = obj.extract::<String>() {
        return match name.as_str() {
            "zero" => Ok(CoefficientFunction::Constant(0.0)),
            "eq20" => Ok(CoefficientFunction::RampThenZero {
                slope: 1000.0,
                switch_time: 0.5 * grid.final_time(),
            }),
            "smooth_rational" => Ok(CoefficientFunction::RationalBump {
                scale: 1000.0,
                curvature: 500.0,
            }),
            other => Err(PyValueError::new_err(format!(
                "unknown coefficient name `{other}` (expected zero, eq20 or smooth_rational, \
                 or pass a callable)"
            ))),
        };
    }
    if obj.is_callable() {
        let times = grid.times();
        let values = times
            .iter()
            .map(|&t| obj.call1((t,))?.extract::<f64>())
            .collect::<PyResult<Vec<f64>>>()?;
        return Ok(CoefficientFunction::Table { times, values });
    }
    Err(PyValueError::new_err(
        "coefficient must be a name or a callable t -> p(t)",
    ))
}

/// Observation selector: `"centroid"`, `"mean"` or a point `(x, y)`.
fn observation_spec(obj: &Bound<'_, PyAny>, mesh: &PyMesh) -> PyResult<ObservationSpec> {
    if let Ok(name) = obj.extract::<String>() {
        return match name.as_str() {
            "centroid" => Ok(ObservationSpec::Point(mesh.inner.centroid())),
            "mean" => Ok(ObservationSpec::Mean),
            other => Err(PyValueError::new_err(format!(
                "unknown observation `{other}` (expected centroid, mean or a point (x, y))"
            ))),
        };
    }
    if let Ok((x, y)) = obj.extract::<(f64, f64)>() {
        return Ok(ObservationSpec::Point(Point::new(x, y)));
    }
    Err(PyValueError::new_err(
        "observation must be 'centroid', 'mean' or a point (x, y)",
    ))
}

/// Solve the direct problem and return `(times, observed_values)`.
#[pyfunction]
#[pyo3(signature = (mesh, coefficient, final_time, n_steps, *, diffusion=1.0,
       boundary_coeff=10.0, initial=1.0, scheme="implicit",
       observation=None, noise_level=0.0, seed=0))]
#[allow(clippy::too_many_arguments)]
fn direct_observations(
    py: Python<'_>,
    mesh: &PyMesh,
    coefficient: &Bound<'_, PyAny>,
    final_time: f64,
    n_steps: usize,
    diffusion: f64,
    boundary_coeff: f64,
    initial: f64,
    scheme: &str,
    observation: Option<&Bound<'_, PyAny>>,
    noise_level: f64,
    seed: u64,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let grid = TimeGrid::new(final_time, n_steps).map_err(to_py_err)?;
    let p = build_coefficient(coefficient, grid)?;
    let spec = problem_spec(diffusion, boundary_coeff, initial);
    let obs_spec = match observation {
        Some(obj) => observation_spec(obj, mesh)?,
        None => ObservationSpec::Point(mesh.inner.centroid()),
    };
    let direct_scheme = match scheme {
        "implicit" => DirectScheme::Implicit,
        "crank_nicolson" => DirectScheme::CrankNicolson,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown scheme `{other}` (expected implicit or crank_nicolson)"
            )))
        }
    };
    let (traj, obs) = py.detach(|| -> coefid::Result<_> {
        let obs = build_observation(&mesh.inner, &obs_spec)?;
        let traj = run_direct(&mesh.inner, &spec, &p, grid, direct_scheme)?;
        Ok((traj, obs))
    })
    .map_err(to_py_err)?;
    Ok((grid.times(), record_observations(&traj, &obs, noise_level, seed)))
}

/// Recover the time-dependent reaction coefficient from an observation
/// series on the same time grid (or a coarser one via `n_steps`).
#[pyfunction]
#[pyo3(signature = (mesh, observations, final_time, *, n_steps=None, scheme="first_order",
       diffusion=1.0, boundary_coeff=10.0, initial=1.0, observation=None,
       p0=None, threshold=None, fp_tol=1e-10, max_iters=50))]
#[allow(clippy::too_many_arguments)]
fn identify(
    py: Python<'_>,
    mesh: &PyMesh,
    observations: Vec<f64>,
    final_time: f64,
    n_steps: Option<usize>,
    scheme: &str,
    diffusion: f64,
    boundary_coeff: f64,
    initial: f64,
    observation: Option<&Bound<'_, PyAny>>,
    p0: Option<f64>,
    threshold: Option<f64>,
    fp_tol: f64,
    max_iters: usize,
) -> PyResult<PyIdentification> {
    if observations.len() < 2 {
        return Err(PyValueError::new_err(
            "need at least two observation values",
        ));
    }
    let steps = n_steps.unwrap_or(observations.len() - 1);
    let grid = TimeGrid::new(final_time, steps).map_err(to_py_err)?;
    let spec = problem_spec(diffusion, boundary_coeff, initial);
    let obs_spec = match observation {
        Some(obj) => observation_spec(obj, mesh)?,
        None => ObservationSpec::Point(mesh.inner.centroid()),
    };
    let scheme = scheme.to_string();
    let (result, obs) = py
        .detach(|| -> coefid::Result<_> {
            let obs = build_observation(&mesh.inner, &obs_spec)?;
            let phi = subsample_observations(&observations, steps)?;
            let result = match scheme.as_str() {
                "transform" => solve_via_transform(&mesh.inner, &spec, grid, &obs, &phi)?.1,
                "nonlinear" => solve_nonlinear_implicit(
                    &mesh.inner,
                    &spec,
                    grid,
                    &obs,
                    &phi,
                    fp_tol,
                    max_iters,
                )?,
                name => {
                    let kind = SchemeKind::ALL
                        .iter()
                        .find(|s| s.name() == name)
                        .copied()
                        .ok_or_else(|| coefid::Error::Config {
                            field: "scheme".into(),
                            message: format!(
                                "unknown scheme `{name}` (expected first_order, crank_nicolson, \
                                 hybrid_implicit, transform or nonlinear)"
                            ),
                        })?;
                    identify_rs(&mesh.inner, &spec, grid, kind, &obs, &phi, p0, threshold)?
                }
            };
            Ok((result, obs))
        })
        .map_err(to_py_err)?;
    Ok(wrap_result(grid, result, &obs))
}

#[pymodule]
fn coefid_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMesh>()?;
    m.add_class::<PyIdentification>()?;
    m.add_function(wrap_pyfunction!(direct_observations, m)?)?;
    m.add_function(wrap_pyfunction!(identify, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
