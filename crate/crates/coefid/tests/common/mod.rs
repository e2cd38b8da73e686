//! Shared fixtures and independent oracles for the integration suites.
//!
//! Everything here is deliberately naive (dense factorization, scalar
//! recurrences, composite quadrature) and stays independent of the library's
//! own solution paths.

#![allow(dead_code)]

use coefid::direct::CoefficientFunction;
use coefid::fem::{build_observation, ObservationFunctional, ObservationSpec, ProblemSpec};
use coefid::mesh::{triangulate, Mesh, Point, PolygonSpec};
use coefid::sparse::SparseMatrix;

/// Trapezoid with corners (0,0), (1.5,0), (1.5,0.5), (0,1).
pub fn trapezoid() -> PolygonSpec {
    PolygonSpec::new(vec![
        Point::new(0.0, 0.0),
        Point::new(1.5, 0.0),
        Point::new(1.5, 0.5),
        Point::new(0.0, 1.0),
    ])
    .unwrap()
}

pub fn unit_square() -> PolygonSpec {
    PolygonSpec::new(vec![
        Point::new(0.0, 0.0),
        Point::new(1.0, 0.0),
        Point::new(1.0, 1.0),
        Point::new(0.0, 1.0),
    ])
    .unwrap()
}

/// Reference problem data: unit diffusion, boundary coefficient 10, unit
/// initial state, zero source.
pub fn reference_problem() -> ProblemSpec {
    ProblemSpec::with_constants(1.0, 10.0, 1.0)
}

/// Insulated problem whose solutions stay spatially constant.
pub fn insulated_problem() -> ProblemSpec {
    ProblemSpec::with_constants(1.0, 0.0, 1.0)
}

/// Coarse trapezoid mesh for cheap tests.
pub fn coarse_trapezoid_mesh() -> Mesh {
    triangulate(&trapezoid(), 0.1).unwrap()
}

pub fn centroid_observation(mesh: &Mesh) -> ObservationFunctional {
    build_observation(mesh, &ObservationSpec::Point(mesh.centroid())).unwrap()
}

/// Discontinuous ramp test coefficient on [0, T]: `1000 t`, dropping to zero
/// after T/2.
pub fn ramp_coefficient(final_time: f64) -> CoefficientFunction {
    CoefficientFunction::RampThenZero {
        slope: 1000.0,
        switch_time: 0.5 * final_time,
    }
}

/// Smooth rational test coefficient `1000 t / (1 + 500 t^2)`.
pub fn smooth_coefficient() -> CoefficientFunction {
    CoefficientFunction::RationalBump {
        scale: 1000.0,
        curvature: 500.0,
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

// ---------------------------------------------------------------------------
// Dense factorization oracle
// ---------------------------------------------------------------------------

pub fn to_dense(a: &SparseMatrix) -> Vec<Vec<f64>> {
    let n = a.dim();
    (0..n)
        .map(|i| (0..n).map(|j| a.get(i, j)).collect())
        .collect()
}

/// Solve a dense SPD system by Cholesky factorization.
pub fn dense_solve_spd(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    assert!(n <= 2000, "dense oracle is for small systems");
    let mut l = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                assert!(sum > 0.0, "matrix is not positive definite at row {i}");
                l[i][j] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    // Forward then backward substitution.
    let mut y = vec![0.0f64; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i][k] * y[k];
        }
        y[i] = sum / l[i][i];
    }
    let mut x = vec![0.0f64; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in i + 1..n {
            sum -= l[k][i] * x[k];
        }
        x[i] = sum / l[i][i];
    }
    x
}

// ---------------------------------------------------------------------------
// Scalar time-stepping oracles
// ---------------------------------------------------------------------------

/// Backward-Euler recurrence for `c' + p(t) c = 0`, `c(0) = 1`:
/// `c_{n+1} = c_n / (1 + tau p(t_{n+1}))`.
pub fn backward_euler_series(p: &CoefficientFunction, final_time: f64, steps: usize) -> Vec<f64> {
    let tau = final_time / steps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    let mut c = 1.0;
    out.push(c);
    for n in 0..steps {
        c /= 1.0 + tau * p.eval(tau * (n + 1) as f64);
        out.push(c);
    }
    out
}

/// Trapezoid-rule recurrence for the same problem:
/// `c_{n+1} = c_n (1 - tau p(t_n)/2) / (1 + tau p(t_{n+1})/2)`.
pub fn trapezoid_series(p: &CoefficientFunction, final_time: f64, steps: usize) -> Vec<f64> {
    let tau = final_time / steps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    let mut c = 1.0;
    out.push(c);
    for n in 0..steps {
        let p_n = p.eval(tau * n as f64);
        let p_next = p.eval(tau * (n + 1) as f64);
        c *= (1.0 - 0.5 * tau * p_n) / (1.0 + 0.5 * tau * p_next);
        out.push(c);
    }
    out
}

/// `integral of p over [0, t]` by composite Simpson on a fine fixed grid;
/// exact solution oracle `exp(-integral)` for the scalar decay problem.
pub fn integral_of(p: &CoefficientFunction, t: f64) -> f64 {
    let panels = 20_000;
    let h = t / panels as f64;
    let mut total = p.eval(0.0) + p.eval(t);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        total += w * p.eval(h * i as f64);
    }
    total * h / 3.0
}

pub fn exact_decay(p: &CoefficientFunction, t: f64) -> f64 {
    (-integral_of(p, t)).exp()
}

// ---------------------------------------------------------------------------
// High-order spatial quadrature oracle
// ---------------------------------------------------------------------------

/// Integrate `f` over the mesh by a 7-point degree-5 triangle rule.
pub fn integrate_high_order(mesh: &Mesh, f: impl Fn(Point) -> f64) -> f64 {
    const A1: f64 = 0.059715871789770;
    const B1: f64 = 0.470142064105115;
    const A2: f64 = 0.797426985353087;
    const B2: f64 = 0.101286507323456;
    const W0: f64 = 0.225;
    const W1: f64 = 0.132394152788506;
    const W2: f64 = 0.125939180544827;
    let points: [([f64; 3], f64); 7] = [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], W0),
        ([A1, B1, B1], W1),
        ([B1, A1, B1], W1),
        ([B1, B1, A1], W1),
        ([A2, B2, B2], W2),
        ([B2, A2, B2], W2),
        ([B2, B2, A2], W2),
    ];
    let mut total = 0.0;
    for t in 0..mesh.num_triangles() {
        let [p0, p1, p2] = mesh.triangle_points(t);
        let area = mesh.triangle_area(t);
        for (bary, w) in points {
            let x = Point::new(
                bary[0] * p0.x + bary[1] * p1.x + bary[2] * p2.x,
                bary[0] * p0.y + bary[1] * p1.y + bary[2] * p2.y,
            );
            total += area * w * f(x);
        }
    }
    total
}
