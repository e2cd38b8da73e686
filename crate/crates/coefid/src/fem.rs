//! P1 finite element assembly.
//!
//! Builds the three bilinear forms of the variational problem on a triangle
//! mesh: the mass matrix `M = (u, v)`, the stiffness matrix
//! `K = (k grad u, grad v)` and the Robin boundary matrix
//! `B = <g u, v>` over the boundary edges, plus the load vector `(f, v)` and
//! observation functionals (point evaluation or weighted integral).
//!
//! Quadrature: 3-point mid-edge rule on triangles (exact through degree 2),
//! 2-point Gauss on boundary edges. Consistent mass, no lumping, no Dirichlet
//! rows.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{cross2, Mesh, Point};
use crate::sparse::SparseMatrix;

/// Scalar field of position.
pub type SpatialFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
/// Scalar field of position and time.
pub type SpaceTimeFn = Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>;

/// Coefficients and data of the parabolic problem:
/// `du/dt - div(k grad u) + p(t) u = f` with `k du/dn + g u = 0` on the
/// boundary and `u = u0` at `t = 0`. The reaction coefficient `p(t)` is
/// supplied separately (it is the unknown of the inverse problem).
#[derive(Clone)]
pub struct ProblemSpec {
    pub diffusion: SpatialFn,
    pub boundary_coeff: SpatialFn,
    pub source: SpaceTimeFn,
    pub initial: SpatialFn,
}

impl ProblemSpec {
    pub fn new(
        diffusion: impl Fn(Point) -> f64 + Send + Sync + 'static,
        boundary_coeff: impl Fn(Point) -> f64 + Send + Sync + 'static,
        source: impl Fn(Point, f64) -> f64 + Send + Sync + 'static,
        initial: impl Fn(Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ProblemSpec {
            diffusion: Arc::new(diffusion),
            boundary_coeff: Arc::new(boundary_coeff),
            source: Arc::new(source),
            initial: Arc::new(initial),
        }
    }

    /// Constant coefficients and zero source.
    pub fn with_constants(diffusion: f64, boundary_coeff: f64, initial: f64) -> Self {
        Self::new(
            move |_| diffusion,
            move |_| boundary_coeff,
            |_, _| 0.0,
            move |_| initial,
        )
    }
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("ProblemSpec { .. }")
    }
}

/// The assembled matrices, all sharing one sparsity pattern.
#[derive(Debug, Clone)]
pub struct AssembledForms {
    pub mass: SparseMatrix,
    pub stiffness: SparseMatrix,
    pub boundary: SparseMatrix,
}

impl AssembledForms {
    pub fn dim(&self) -> usize {
        self.mass.dim()
    }
}

/// Mid-edge quadrature points of the reference triangle in barycentric form.
const TRI_QUAD: [[f64; 3]; 3] = [
    [0.5, 0.5, 0.0],
    [0.0, 0.5, 0.5],
    [0.5, 0.0, 0.5],
];

/// 2-point Gauss positions on [0, 1].
const EDGE_QUAD: [f64; 2] = [0.21132486540518713, 0.7886751345948129];

fn physical_point(p: [Point; 3], bary: [f64; 3]) -> Point {
    Point::new(
        bary[0] * p[0].x + bary[1] * p[1].x + bary[2] * p[2].x,
        bary[0] * p[0].y + bary[1] * p[1].y + bary[2] * p[2].y,
    )
}

/// Assemble mass, stiffness and boundary matrices for the mesh and problem.
///
/// Fails with [`Error::InvalidCoefficient`] if the diffusion is nonpositive or
/// the boundary coefficient negative at any quadrature point.
pub fn assemble(mesh: &Mesh, spec: &ProblemSpec) -> Result<AssembledForms> {
    let n = mesh.num_nodes();
    let pattern: Vec<(usize, usize)> = mesh
        .triangles
        .iter()
        .flat_map(|tri| {
            tri.iter()
                .flat_map(move |&i| tri.iter().map(move |&j| (i, j)))
        })
        .collect();
    let mut mass = SparseMatrix::from_pattern(n, pattern.iter().copied());
    let mut stiffness = mass.clone();
    let mut boundary = mass.clone();

    for (t, tri) in mesh.triangles.iter().enumerate() {
        let pts = mesh.triangle_points(t);
        let area2 = cross2(pts[0], pts[1], pts[2]);
        let area = 0.5 * area2;
        if area <= 0.0 {
            return Err(Error::InvalidMesh(format!(
                "triangle {t} has nonpositive area {area:e}"
            )));
        }
        // Gradients of the barycentric basis functions (constant per element).
        let grads = [
            [
                (pts[1].y - pts[2].y) / area2,
                (pts[2].x - pts[1].x) / area2,
            ],
            [
                (pts[2].y - pts[0].y) / area2,
                (pts[0].x - pts[2].x) / area2,
            ],
            [
                (pts[0].y - pts[1].y) / area2,
                (pts[1].x - pts[0].x) / area2,
            ],
        ];

        let mut k_mean = 0.0;
        for bary in TRI_QUAD {
            let x = physical_point(pts, bary);
            let k = (spec.diffusion)(x);
            if k <= 0.0 {
                return Err(Error::InvalidCoefficient {
                    name: "diffusion k",
                    value: k,
                    x: x.x,
                    y: x.y,
                });
            }
            k_mean += k / 3.0;
        }

        for a in 0..3 {
            for b in 0..3 {
                let grad_dot = grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1];
                stiffness.add(tri[a], tri[b], k_mean * grad_dot * area);
                let mut m = 0.0;
                for bary in TRI_QUAD {
                    m += bary[a] * bary[b] / 3.0;
                }
                mass.add(tri[a], tri[b], m * area);
            }
        }
    }

    for &[a, b] in &mesh.boundary_edges {
        let (pa, pb) = (mesh.nodes[a], mesh.nodes[b]);
        let len = pa.dist(pb);
        for s in EDGE_QUAD {
            let x = Point::new(pa.x + s * (pb.x - pa.x), pa.y + s * (pb.y - pa.y));
            let g = (spec.boundary_coeff)(x);
            if g < 0.0 {
                return Err(Error::InvalidCoefficient {
                    name: "boundary coefficient g",
                    value: g,
                    x: x.x,
                    y: x.y,
                });
            }
            let phi = [1.0 - s, s];
            let w = 0.5 * len * g;
            boundary.add(a, a, w * phi[0] * phi[0]);
            boundary.add(a, b, w * phi[0] * phi[1]);
            boundary.add(b, a, w * phi[1] * phi[0]);
            boundary.add(b, b, w * phi[1] * phi[1]);
        }
    }

    mass.verify_symmetric()?;
    stiffness.verify_symmetric()?;
    boundary.verify_symmetric()?;
    Ok(AssembledForms {
        mass,
        stiffness,
        boundary,
    })
}

/// Load vector `F_i = (f(., t), phi_i)` by the 3-point mid-edge rule (exact
/// for sources linear in space).
pub fn assemble_load(mesh: &Mesh, spec: &ProblemSpec, t: f64) -> Vec<f64> {
    let mut load = vec![0.0; mesh.num_nodes()];
    for (tr, tri) in mesh.triangles.iter().enumerate() {
        let pts = mesh.triangle_points(tr);
        let area = mesh.triangle_area(tr);
        for bary in TRI_QUAD {
            let x = physical_point(pts, bary);
            let f = (spec.source)(x, t);
            for a in 0..3 {
                load[tri[a]] += area / 3.0 * f * bary[a];
            }
        }
    }
    load
}

/// Nodal vector of `(u0, phi_i)`, the right-hand side of the initial
/// projection.
pub fn assemble_initial_load(mesh: &Mesh, spec: &ProblemSpec) -> Vec<f64> {
    let mut load = vec![0.0; mesh.num_nodes()];
    for (tr, tri) in mesh.triangles.iter().enumerate() {
        let pts = mesh.triangle_points(tr);
        let area = mesh.triangle_area(tr);
        for bary in TRI_QUAD {
            let x = physical_point(pts, bary);
            let f = (spec.initial)(x);
            for a in 0..3 {
                load[tri[a]] += area / 3.0 * f * bary[a];
            }
        }
    }
    load
}

/// How the extra observation of the inverse problem is taken.
#[derive(Clone)]
pub enum ObservationSpec {
    /// Evaluate the solution at an interior point.
    Point(Point),
    /// Integrate the solution against a weight over the domain.
    Weighted(SpatialFn),
    /// Mean value over the domain (weight 1/|domain|).
    Mean,
}

impl std::fmt::Debug for ObservationSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ObservationSpec::Point(p) => write!(f, "Point({}, {})", p.x, p.y),
            ObservationSpec::Weighted(_) => f.write_str("Weighted(..)"),
            ObservationSpec::Mean => f.write_str("Mean"),
        }
    }
}

/// A linear functional of the nodal solution: `apply(u) = r . u`.
#[derive(Debug, Clone)]
pub struct ObservationFunctional {
    pub spec: ObservationSpec,
    /// Nodal coefficient vector; for point evaluation this holds at most the
    /// three barycentric weights of the containing triangle.
    pub weights: Vec<f64>,
}

impl ObservationFunctional {
    pub fn apply(&self, u: &[f64]) -> f64 {
        self.weights.iter().zip(u).map(|(r, v)| r * v).sum()
    }
}

/// Build the nodal coefficient vector of an observation functional.
///
/// A point on a shared edge or vertex is assigned to the containing triangle
/// with the lowest index; the weights agree across that choice by continuity.
pub fn build_observation(mesh: &Mesh, spec: &ObservationSpec) -> Result<ObservationFunctional> {
    let n = mesh.num_nodes();
    let mut weights = vec![0.0; n];
    match spec {
        ObservationSpec::Point(p) => {
            let mut found = false;
            'tri: for (t, tri) in mesh.triangles.iter().enumerate() {
                let pts = mesh.triangle_points(t);
                let area2 = cross2(pts[0], pts[1], pts[2]);
                let bary = [
                    cross2(pts[1], pts[2], *p) / area2,
                    cross2(pts[2], pts[0], *p) / area2,
                    cross2(pts[0], pts[1], *p) / area2,
                ];
                let tol = 1e-12;
                if bary.iter().all(|&b| b >= -tol) {
                    let total: f64 = bary.iter().sum();
                    for a in 0..3 {
                        weights[tri[a]] = (bary[a].max(0.0)) / total;
                    }
                    found = true;
                    break 'tri;
                }
            }
            if !found {
                return Err(Error::OutOfDomain { x: p.x, y: p.y });
            }
        }
        ObservationSpec::Weighted(omega) => {
            accumulate_weighted(mesh, omega.as_ref(), &mut weights);
        }
        ObservationSpec::Mean => {
            let inv_area = 1.0 / mesh.total_area();
            accumulate_weighted(mesh, &|_| inv_area, &mut weights);
        }
    }
    Ok(ObservationFunctional {
        spec: spec.clone(),
        weights,
    })
}

fn accumulate_weighted(mesh: &Mesh, omega: &dyn Fn(Point) -> f64, weights: &mut [f64]) {
    for (tr, tri) in mesh.triangles.iter().enumerate() {
        let pts = mesh.triangle_points(tr);
        let area = mesh.triangle_area(tr);
        for bary in TRI_QUAD {
            let x = physical_point(pts, bary);
            let w = omega(x);
            for a in 0..3 {
                weights[tri[a]] += area / 3.0 * w * bary[a];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{triangulate, PolygonSpec};

    fn single_triangle_mesh() -> Mesh {
        Mesh {
            nodes: vec![
                Point::new(0.0, 0.0),
                Point::new(1.0, 0.0),
                Point::new(0.0, 1.0),
            ],
            triangles: vec![[0, 1, 2]],
            boundary_edges: vec![[0, 1], [1, 2], [2, 0]],
        }
    }

    fn unit_square_mesh(h: f64) -> Mesh {
        let square = PolygonSpec::new(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ])
        .unwrap();
        triangulate(&square, h).unwrap()
    }

    #[test]
    fn element_stiffness_unit_right_triangle() {
        let mesh = single_triangle_mesh();
        let spec = ProblemSpec::with_constants(1.0, 0.0, 0.0);
        let forms = assemble(&mesh, &spec).unwrap();
        let expected = [
            [1.0, -0.5, -0.5],
            [-0.5, 0.5, 0.0],
            [-0.5, 0.0, 0.5],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert!(
                    (forms.stiffness.get(i, j) - expected[i][j]).abs() < 1e-14,
                    "K[{i}][{j}] = {} vs {}",
                    forms.stiffness.get(i, j),
                    expected[i][j]
                );
            }
        }
    }

    #[test]
    fn element_mass_unit_right_triangle() {
        let mesh = single_triangle_mesh();
        let spec = ProblemSpec::with_constants(1.0, 0.0, 0.0);
        let forms = assemble(&mesh, &spec).unwrap();
        let area = 0.5;
        for i in 0..3 {
            for j in 0..3 {
                let expected = area / 12.0 * if i == j { 2.0 } else { 1.0 };
                assert!((forms.mass.get(i, j) - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn stiffness_annihilates_constants() {
        let mesh = unit_square_mesh(0.23);
        let spec = ProblemSpec::with_constants(3.7, 1.0, 0.0);
        let forms = assemble(&mesh, &spec).unwrap();
        let ones = vec![1.0; mesh.num_nodes()];
        for v in forms.stiffness.matvec(&ones) {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn mass_row_sums_cover_domain_area() {
        let mesh = unit_square_mesh(0.3);
        let spec = ProblemSpec::with_constants(1.0, 0.0, 0.0);
        let forms = assemble(&mesh, &spec).unwrap();
        let ones = vec![1.0; mesh.num_nodes()];
        let total: f64 = forms.mass.matvec(&ones).iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_matrix_total_is_g_times_perimeter() {
        let mesh = unit_square_mesh(0.25);
        let spec = ProblemSpec::with_constants(1.0, 10.0, 0.0);
        let forms = assemble(&mesh, &spec).unwrap();
        let ones = vec![1.0; mesh.num_nodes()];
        let total: f64 = forms.boundary.matvec(&ones).iter().sum();
        assert!((total - 40.0).abs() < 1e-11, "got {total}");
    }

    #[test]
    fn nonpositive_diffusion_rejected() {
        let mesh = single_triangle_mesh();
        let spec = ProblemSpec::new(|p| 1.0 - 4.0 * p.x, |_| 0.0, |_, _| 0.0, |_| 0.0);
        assert!(matches!(
            assemble(&mesh, &spec),
            Err(Error::InvalidCoefficient { .. })
        ));
    }

    #[test]
    fn negative_boundary_coeff_rejected() {
        let mesh = single_triangle_mesh();
        let spec = ProblemSpec::with_constants(1.0, -1.0, 0.0);
        assert!(matches!(
            assemble(&mesh, &spec),
            Err(Error::InvalidCoefficient { .. })
        ));
    }

    #[test]
    fn load_zero_source() {
        let mesh = single_triangle_mesh();
        let spec = ProblemSpec::with_constants(1.0, 0.0, 0.0);
        let load = assemble_load(&mesh, &spec, 0.0);
        assert!(load.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn load_constant_source_on_unit_triangle() {
        let mesh = single_triangle_mesh();
        let spec = ProblemSpec::new(|_| 1.0, |_| 0.0, |_, _| 1.0, |_| 0.0);
        let load = assemble_load(&mesh, &spec, 0.0);
        for v in load {
            assert!((v - 1.0 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn observation_at_mesh_node_is_unit_vector() {
        let mesh = single_triangle_mesh();
        let obs = build_observation(&mesh, &ObservationSpec::Point(Point::new(0.0, 0.0))).unwrap();
        assert!((obs.weights[0] - 1.0).abs() < 1e-12);
        assert!(obs.weights[1].abs() < 1e-12);
        assert!(obs.weights[2].abs() < 1e-12);
    }

    #[test]
    fn observation_at_centroid_has_equal_weights() {
        let mesh = single_triangle_mesh();
        let obs = build_observation(
            &mesh,
            &ObservationSpec::Point(Point::new(1.0 / 3.0, 1.0 / 3.0)),
        )
        .unwrap();
        for w in &obs.weights {
            assert!((w - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn observation_outside_domain_rejected() {
        let mesh = single_triangle_mesh();
        let r = build_observation(&mesh, &ObservationSpec::Point(Point::new(0.9, 0.9)));
        assert!(matches!(r, Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn mean_observation_of_ones_is_one() {
        let mesh = unit_square_mesh(0.3);
        let obs = build_observation(&mesh, &ObservationSpec::Mean).unwrap();
        let ones = vec![1.0; mesh.num_nodes()];
        assert!((obs.apply(&ones) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_weight_observation_gives_domain_area() {
        let mesh = unit_square_mesh(0.3);
        let obs =
            build_observation(&mesh, &ObservationSpec::Weighted(Arc::new(|_| 1.0))).unwrap();
        let ones = vec![1.0; mesh.num_nodes()];
        assert!((obs.apply(&ones) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn point_observation_reproduces_linear_fields() {
        let mesh = unit_square_mesh(0.21);
        let p = Point::new(0.37, 0.58);
        let obs = build_observation(&mesh, &ObservationSpec::Point(p)).unwrap();
        let linear: Vec<f64> = mesh.nodes.iter().map(|q| 2.0 * q.x - 0.5 * q.y + 1.0).collect();
        let exact = 2.0 * p.x - 0.5 * p.y + 1.0;
        assert!((obs.apply(&linear) - exact).abs() < 1e-12);
        let nonzeros = obs.weights.iter().filter(|w| w.abs() > 0.0).count();
        assert!(nonzeros <= 3);
        let sum: f64 = obs.weights.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }
}
