//! Conforming triangulations of convex polygons.
//!
//! The mesher samples the polygon boundary at the target spacing, fills the
//! interior with a triangular lattice kept clear of the boundary, Delaunay
//! triangulates the point set (Bowyer-Watson) and applies a fixed number of
//! Laplacian smoothing passes. Everything is deterministic: no randomness,
//! no hash-order dependence.
//!
//! Mesh text format:
//! ```text
//! nodes <N>
//! x y              (N lines)
//! triangles <M>
//! i j k            (M lines, 0-based, counterclockwise)
//! boundary_edges <B>
//! i j              (B lines, domain on the left)
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// A point in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// Twice the signed area of triangle (a, b, c); positive when counterclockwise.
pub fn cross2(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Signed area of triangle (a, b, c).
pub fn triangle_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * cross2(a, b, c)
}

/// A convex polygon given by counterclockwise-ordered vertices.
#[derive(Debug, Clone)]
pub struct PolygonSpec {
    vertices: Vec<Point>,
}

impl PolygonSpec {
    /// Validates: at least 3 vertices, counterclockwise order, convex, and
    /// strictly positive area. Collinear consecutive vertices are tolerated.
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidPolygon(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        let n = vertices.len();
        let mut area2 = 0.0;
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            area2 += a.x * b.y - b.x * a.y;
        }
        if area2 <= 0.0 {
            return Err(Error::InvalidPolygon(
                "vertices must be in counterclockwise order with positive area".into(),
            ));
        }
        let scale = vertices
            .iter()
            .fold(0.0f64, |m, p| m.max(p.x.abs()).max(p.y.abs()))
            .max(1.0);
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            if cross2(a, b, c) < -1e-12 * scale * scale {
                return Err(Error::InvalidPolygon(format!(
                    "not convex: reflex corner at vertex {}",
                    (i + 1) % n
                )));
            }
            if a.dist(b) <= 1e-14 * scale {
                return Err(Error::InvalidPolygon(format!(
                    "degenerate edge between vertices {} and {}",
                    i,
                    (i + 1) % n
                )));
            }
        }
        Ok(PolygonSpec { vertices })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        let mut area2 = 0.0;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            area2 += a.x * b.y - b.x * a.y;
        }
        0.5 * area2
    }

    pub fn perimeter(&self) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| self.vertices[i].dist(self.vertices[(i + 1) % n]))
            .sum()
    }

    /// Area centroid.
    pub fn centroid(&self) -> Point {
        let n = self.vertices.len();
        let (mut cx, mut cy, mut a2) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            let w = p.x * q.y - q.x * p.y;
            cx += (p.x + q.x) * w;
            cy += (p.y + q.y) * w;
            a2 += w;
        }
        Point::new(cx / (3.0 * a2), cy / (3.0 * a2))
    }

    pub fn diameter(&self) -> f64 {
        let mut best = 0.0f64;
        for (i, &p) in self.vertices.iter().enumerate() {
            for &q in &self.vertices[i + 1..] {
                best = best.max(p.dist(q));
            }
        }
        best
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &p in &self.vertices {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }

    /// Point-in-polygon test with a signed tolerance: `tol > 0` accepts points
    /// slightly outside, `tol < 0` demands clearance from the boundary.
    pub fn contains(&self, p: Point, tol: f64) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let len = a.dist(b);
            cross2(a, b, p) >= -tol * len
        })
    }

    /// Distance from `p` to the polygon boundary.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| point_segment_distance(p, self.vertices[i], self.vertices[(i + 1) % n]))
            .fold(f64::INFINITY, f64::min)
    }
}

fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    };
    p.dist(Point::new(a.x + t * dx, a.y + t * dy))
}

/// One invariant violation found by [`Mesh::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Name of the violated invariant.
    pub invariant: &'static str,
    /// Index of the offending entity (triangle, edge or node).
    pub entity: usize,
    pub detail: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (entity {}): {}", self.invariant, self.entity, self.detail)
    }
}

/// Conforming triangulation of a polygon.
///
/// Triangles are counterclockwise; boundary edges are oriented so the domain
/// lies on their left (outward normal to the right of the edge direction).
/// Immutable after construction and safe to share across threads.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub nodes: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<[usize; 2]>,
}

impl Mesh {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [i, j, k] = self.triangles[t];
        [self.nodes[i], self.nodes[j], self.nodes[k]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        triangle_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| self.triangle_area(t))
            .sum()
    }

    /// Area-weighted centroid of the triangulated domain.
    pub fn centroid(&self) -> Point {
        let (mut cx, mut cy, mut total) = (0.0, 0.0, 0.0);
        for t in 0..self.triangles.len() {
            let [a, b, c] = self.triangle_points(t);
            let area = triangle_area(a, b, c);
            cx += area * (a.x + b.x + c.x) / 3.0;
            cy += area * (a.y + b.y + c.y) / 3.0;
            total += area;
        }
        Point::new(cx / total, cy / total)
    }

    /// Undirected edge set derived from the triangles.
    pub fn edge_set(&self) -> BTreeMap<(usize, usize), Vec<usize>> {
        let mut edges: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                let key = (a.min(b), a.max(b));
                edges.entry(key).or_default().push(t);
            }
        }
        edges
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_deg(&self) -> f64 {
        let mut min_angle = f64::INFINITY;
        for t in 0..self.triangles.len() {
            let [a, b, c] = self.triangle_points(t);
            for (p, q, r) in [(a, b, c), (b, c, a), (c, a, b)] {
                let (ux, uy) = (q.x - p.x, q.y - p.y);
                let (vx, vy) = (r.x - p.x, r.y - p.y);
                let nu = (ux * ux + uy * uy).sqrt();
                let nv = (vx * vx + vy * vy).sqrt();
                if nu == 0.0 || nv == 0.0 {
                    return 0.0;
                }
                let cos = ((ux * vx + uy * vy) / (nu * nv)).clamp(-1.0, 1.0);
                min_angle = min_angle.min(cos.acos().to_degrees());
            }
        }
        min_angle
    }

    /// Check all mesh invariants; an empty list means the mesh is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut violations = Vec::new();
        let n = self.nodes.len();

        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= n) {
                violations.push(Violation {
                    invariant: "node index in range",
                    entity: t,
                    detail: format!("triangle {:?} references a missing node", tri),
                });
                continue;
            }
            let area = self.triangle_area(t);
            if area <= 0.0 {
                violations.push(Violation {
                    invariant: "positive triangle area",
                    entity: t,
                    detail: format!("signed area {area:e}"),
                });
            }
        }
        for (e, edge) in self.boundary_edges.iter().enumerate() {
            if edge.iter().any(|&i| i >= n) {
                violations.push(Violation {
                    invariant: "node index in range",
                    entity: e,
                    detail: format!("boundary edge {:?} references a missing node", edge),
                });
            }
        }
        if violations.iter().any(|v| v.invariant == "node index in range") {
            return violations;
        }

        let edges = self.edge_set();
        let boundary_keys: Vec<(usize, usize)> = self
            .boundary_edges
            .iter()
            .map(|&[a, b]| (a.min(b), a.max(b)))
            .collect();
        for (key, owners) in &edges {
            let listed = boundary_keys.iter().filter(|&&k| k == *key).count();
            match owners.len() {
                1 => {
                    if listed != 1 {
                        violations.push(Violation {
                            invariant: "boundary edge incidence",
                            entity: owners[0],
                            detail: format!(
                                "edge {:?} belongs to one triangle but is listed {} times as boundary",
                                key, listed
                            ),
                        });
                    }
                }
                2 => {
                    if listed != 0 {
                        violations.push(Violation {
                            invariant: "interior edge incidence",
                            entity: owners[0],
                            detail: format!(
                                "edge {:?} is interior but listed as a boundary edge",
                                key
                            ),
                        });
                    }
                }
                m => violations.push(Violation {
                    invariant: "edge incidence",
                    entity: owners[0],
                    detail: format!("edge {:?} belongs to {} triangles", key, m),
                }),
            }
        }
        for (e, &[a, b]) in self.boundary_edges.iter().enumerate() {
            let key = (a.min(b), a.max(b));
            match edges.get(&key) {
                None => violations.push(Violation {
                    invariant: "boundary edge incidence",
                    entity: e,
                    detail: format!("boundary edge ({a}, {b}) is not an edge of any triangle"),
                }),
                Some(owners) if owners.len() == 1 => {
                    // Outward orientation: the owning triangle must traverse
                    // the edge in the same direction (a -> b).
                    let tri = self.triangles[owners[0]];
                    let forward = (0..3).any(|e| tri[e] == a && tri[(e + 1) % 3] == b);
                    if !forward {
                        violations.push(Violation {
                            invariant: "boundary edge orientation",
                            entity: e,
                            detail: format!(
                                "edge ({a}, {b}) is reversed relative to its triangle"
                            ),
                        });
                    }
                }
                _ => {}
            }
        }
        violations
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "nodes {}", self.nodes.len()).unwrap();
        for p in &self.nodes {
            writeln!(s, "{} {}", p.x, p.y).unwrap();
        }
        writeln!(s, "triangles {}", self.triangles.len()).unwrap();
        for t in &self.triangles {
            writeln!(s, "{} {} {}", t[0], t[1], t[2]).unwrap();
        }
        writeln!(s, "boundary_edges {}", self.boundary_edges.len()).unwrap();
        for e in &self.boundary_edges {
            writeln!(s, "{} {}", e[0], e[1]).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Mesh> {
        let mut tokens = text.split_whitespace();
        fn take<'a>(
            tokens: &mut impl Iterator<Item = &'a str>,
            what: &str,
        ) -> Result<&'a str> {
            tokens
                .next()
                .ok_or_else(|| Error::MeshFormat(format!("unexpected end of file, wanted {what}")))
        }
        fn keyword<'a>(
            tokens: &mut impl Iterator<Item = &'a str>,
            word: &str,
        ) -> Result<()> {
            let t = take(tokens, word)?;
            if t != word {
                return Err(Error::MeshFormat(format!("expected `{word}`, found `{t}`")));
            }
            Ok(())
        }
        fn count<'a>(tokens: &mut impl Iterator<Item = &'a str>, what: &str) -> Result<usize> {
            take(tokens, what)?
                .parse::<usize>()
                .map_err(|e| Error::MeshFormat(format!("bad {what} count: {e}")))
        }

        keyword(&mut tokens, "nodes")?;
        let n = count(&mut tokens, "node")?;
        let mut nodes = Vec::with_capacity(n);
        for i in 0..n {
            let x: f64 = take(&mut tokens, "node x")?
                .parse()
                .map_err(|e| Error::MeshFormat(format!("node {i}: bad x ({e})")))?;
            let y: f64 = take(&mut tokens, "node y")?
                .parse()
                .map_err(|e| Error::MeshFormat(format!("node {i}: bad y ({e})")))?;
            nodes.push(Point::new(x, y));
        }
        keyword(&mut tokens, "triangles")?;
        let m = count(&mut tokens, "triangle")?;
        let mut triangles = Vec::with_capacity(m);
        for i in 0..m {
            let mut tri = [0usize; 3];
            for slot in &mut tri {
                *slot = take(&mut tokens, "triangle index")?
                    .parse()
                    .map_err(|e| Error::MeshFormat(format!("triangle {i}: bad index ({e})")))?;
            }
            triangles.push(tri);
        }
        keyword(&mut tokens, "boundary_edges")?;
        let b = count(&mut tokens, "boundary edge")?;
        let mut boundary_edges = Vec::with_capacity(b);
        for i in 0..b {
            let mut edge = [0usize; 2];
            for slot in &mut edge {
                *slot = take(&mut tokens, "edge index")?
                    .parse()
                    .map_err(|e| Error::MeshFormat(format!("edge {i}: bad index ({e})")))?;
            }
            boundary_edges.push(edge);
        }
        if tokens.next().is_some() {
            return Err(Error::MeshFormat("trailing data after boundary edges".into()));
        }
        Ok(Mesh {
            nodes,
            triangles,
            boundary_edges,
        })
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Mesh> {
        let text = std::fs::read_to_string(path)?;
        Mesh::from_text(&text)
    }
}

/// Triangulate a convex polygon at the given target edge length.
///
/// The result satisfies all [`Mesh`] invariants and a minimum-angle bound of
/// 20 degrees; otherwise a [`Error::MeshingFailure`] with diagnostics is
/// returned. Edge lengths larger than the polygon itself simply produce the
/// coarsest mesh over the polygon vertices.
pub fn triangulate(polygon: &PolygonSpec, target_edge_length: f64) -> Result<Mesh> {
    if !(target_edge_length > 0.0) || !target_edge_length.is_finite() {
        return Err(Error::InvalidPolygon(format!(
            "target edge length must be positive and finite, got {target_edge_length}"
        )));
    }
    let h = target_edge_length;

    // Boundary ring: each polygon edge subdivided at spacing close to h.
    let verts = polygon.vertices();
    let mut ring: Vec<Point> = Vec::new();
    for i in 0..verts.len() {
        let a = verts[i];
        let b = verts[(i + 1) % verts.len()];
        let segments = (a.dist(b) / h).round().max(1.0) as usize;
        for s in 0..segments {
            let t = s as f64 / segments as f64;
            ring.push(Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)));
        }
    }
    let ring_len = ring.len();

    // Interior points on a triangular lattice, kept clear of the boundary.
    let margin = 0.61 * h;
    let (lo, hi) = polygon.bounding_box();
    let row_step = h * 3.0f64.sqrt() / 2.0;
    let mut points = ring.clone();
    let mut j = 0usize;
    loop {
        let y = lo.y + margin + j as f64 * row_step;
        if y > hi.y - margin {
            break;
        }
        let offset = if j % 2 == 1 { h / 2.0 } else { 0.0 };
        let mut i = 0usize;
        loop {
            let x = lo.x + offset + i as f64 * h;
            if x > hi.x {
                break;
            }
            let p = Point::new(x, y);
            if polygon.contains(p, 0.0) && polygon.boundary_distance(p) >= margin {
                points.push(p);
            }
            i += 1;
        }
        j += 1;
    }

    let mut triangles = delaunay(&points)?;

    // Laplacian smoothing of the interior points; boundary ring stays fixed.
    for _ in 0..8 {
        let mut neighbor_sum = vec![(0.0f64, 0.0f64, 0usize); points.len()];
        for tri in &triangles {
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                neighbor_sum[a].0 += points[b].x;
                neighbor_sum[a].1 += points[b].y;
                neighbor_sum[a].2 += 1;
                neighbor_sum[b].0 += points[a].x;
                neighbor_sum[b].1 += points[a].y;
                neighbor_sum[b].2 += 1;
            }
        }
        let mut moved = false;
        for i in ring_len..points.len() {
            let (sx, sy, c) = neighbor_sum[i];
            if c == 0 {
                continue;
            }
            // Edges are visited once per adjacent triangle, so interior
            // neighbors are double counted; the average is unaffected.
            let target = Point::new(sx / c as f64, sy / c as f64);
            if polygon.contains(target, 0.0) && polygon.boundary_distance(target) >= 0.5 * margin {
                if points[i].dist(target) > 1e-9 * h {
                    moved = true;
                }
                points[i] = target;
            }
        }
        if !moved {
            break;
        }
        triangles = delaunay(&points)?;
    }

    // Canonical ordering: rotate each triangle to start at its smallest node,
    // then sort; keeps the output stable and diffable.
    for tri in &mut triangles {
        let k = (0..3).min_by_key(|&k| tri[k]).unwrap();
        tri.rotate_left(k);
    }
    triangles.sort_unstable();

    let boundary_edges: Vec<[usize; 2]> = (0..ring_len)
        .map(|i| [i, (i + 1) % ring_len])
        .collect();

    let mesh = Mesh {
        nodes: points,
        triangles,
        boundary_edges,
    };

    let violations = mesh.validate();
    if !violations.is_empty() {
        return Err(Error::MeshingFailure(format!(
            "generated mesh violates invariants: {}",
            violations
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("; ")
        )));
    }
    let area_err = (mesh.total_area() - polygon.area()).abs() / polygon.area();
    if area_err > 1e-12 {
        return Err(Error::MeshingFailure(format!(
            "triangle areas cover {:.16e} of the polygon area {:.16e} (relative error {area_err:e})",
            mesh.total_area(),
            polygon.area()
        )));
    }
    let min_angle = mesh.min_angle_deg();
    if min_angle < 20.0 {
        return Err(Error::MeshingFailure(format!(
            "minimum triangle angle {min_angle:.2} degrees is below the 20 degree bound \
             ({} nodes, {} triangles, edge length {h})",
            mesh.num_nodes(),
            mesh.num_triangles()
        )));
    }
    Ok(mesh)
}

/// Bowyer-Watson Delaunay triangulation of a point set.
///
/// Returns counterclockwise triangles covering the convex hull. Cocircular
/// configurations are broken deterministically by insertion order.
fn delaunay(points: &[Point]) -> Result<Vec<[usize; 3]>> {
    let n = points.len();
    if n < 3 {
        return Err(Error::MeshingFailure(format!(
            "need at least 3 points, got {n}"
        )));
    }

    let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    let span = (hi.x - lo.x).max(hi.y - lo.y).max(1e-12);
    let center = Point::new((lo.x + hi.x) / 2.0, (lo.y + hi.y) / 2.0);
    let big = 20.0 * span;

    let mut all: Vec<Point> = points.to_vec();
    all.push(Point::new(center.x - 2.0 * big, center.y - big));
    all.push(Point::new(center.x + 2.0 * big, center.y - big));
    all.push(Point::new(center.x, center.y + 2.0 * big));
    let (s0, s1, s2) = (n, n + 1, n + 2);

    let mut tris: Vec<[usize; 3]> = vec![[s0, s1, s2]];

    for p_idx in 0..n {
        let p = all[p_idx];
        let mut bad: Vec<usize> = Vec::new();
        for (t, tri) in tris.iter().enumerate() {
            if in_circumcircle(all[tri[0]], all[tri[1]], all[tri[2]], p) {
                bad.push(t);
            }
        }
        // Boundary of the cavity: edges used by exactly one bad triangle.
        let mut edge_count: BTreeMap<(usize, usize), (usize, usize, i32)> = BTreeMap::new();
        for &t in &bad {
            let tri = tris[t];
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let entry = edge_count.entry(key).or_insert((a, b, 0));
                entry.2 += 1;
            }
        }
        for i in bad.iter().rev() {
            tris.swap_remove(*i);
        }
        for (_, (a, b, count)) in edge_count {
            if count == 1 {
                tris.push([a, b, p_idx]);
            }
        }
    }

    tris.retain(|t| t.iter().all(|&i| i < n));

    // Orient counterclockwise and drop degenerate slivers from collinear
    // boundary runs (zero-area triangles cannot occur for points in general
    // position; guard anyway).
    let scale = span * span;
    let mut out = Vec::with_capacity(tris.len());
    for mut tri in tris {
        let area2 = cross2(all[tri[0]], all[tri[1]], all[tri[2]]);
        if area2 < 0.0 {
            tri.swap(1, 2);
        } else if area2 == 0.0 {
            return Err(Error::MeshingFailure(format!(
                "degenerate (collinear) triangle {:?} in Delaunay output, scale {scale:e}",
                tri
            )));
        }
        out.push(tri);
    }
    Ok(out)
}

/// Strict in-circumcircle predicate for counterclockwise (a, b, c).
fn in_circumcircle(a: Point, b: Point, c: Point, p: Point) -> bool {
    let (a, b, c) = if cross2(a, b, c) < 0.0 { (a, c, b) } else { (a, b, c) };
    let adx = a.x - p.x;
    let ady = a.y - p.y;
    let bdx = b.x - p.x;
    let bdy = b.y - p.y;
    let cdx = c.x - p.x;
    let cdy = c.y - p.y;
    let alift = adx * adx + ady * ady;
    let blift = bdx * bdx + bdy * bdy;
    let clift = cdx * cdx + cdy * cdy;
    let det = adx * (bdy * clift - cdy * blift) - ady * (bdx * clift - cdx * blift)
        + alift * (bdx * cdy - cdx * bdy);
    let scale = alift.max(blift).max(clift);
    det > 1e-12 * scale * scale
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> PolygonSpec {
        PolygonSpec::new(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ])
        .unwrap()
    }

    #[test]
    fn polygon_rejects_clockwise_order() {
        let r = PolygonSpec::new(vec![
            Point::new(0.0, 0.0),
            Point::new(0.0, 1.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 0.0),
        ]);
        assert!(matches!(r, Err(Error::InvalidPolygon(_))));
    }

    #[test]
    fn polygon_rejects_reflex_corner() {
        let r = PolygonSpec::new(vec![
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(1.0, 0.2),
            Point::new(2.0, 2.0),
        ]);
        assert!(matches!(r, Err(Error::InvalidPolygon(_))));
    }

    #[test]
    fn polygon_rejects_too_few_vertices() {
        let r = PolygonSpec::new(vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0)]);
        assert!(matches!(r, Err(Error::InvalidPolygon(_))));
    }

    #[test]
    fn unit_square_coarse_mesh() {
        let mesh = triangulate(&unit_square(), 1.0).unwrap();
        assert_eq!(mesh.num_nodes(), 4);
        assert!((mesh.total_area() - 1.0).abs() < 1e-14);
        assert!(mesh.validate().is_empty());
    }

    #[test]
    fn unit_right_triangle_single_element() {
        let tri = PolygonSpec::new(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
        ])
        .unwrap();
        let mesh = triangulate(&tri, 2.0).unwrap();
        assert_eq!(mesh.num_triangles(), 1);
        assert_eq!(mesh.num_nodes(), 3);
        assert!((mesh.total_area() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn refined_square_conserves_area() {
        let mesh = triangulate(&unit_square(), 0.1).unwrap();
        assert!((mesh.total_area() - 1.0).abs() < 1e-12);
        assert!(mesh.validate().is_empty());
        assert!(mesh.min_angle_deg() >= 20.0);
    }

    #[test]
    fn triangulation_is_deterministic() {
        let a = triangulate(&unit_square(), 0.17).unwrap();
        let b = triangulate(&unit_square(), 0.17).unwrap();
        assert_eq!(a.to_text(), b.to_text());
    }

    #[test]
    fn clockwise_triangle_flagged() {
        let mut mesh = triangulate(&unit_square(), 1.0).unwrap();
        mesh.triangles[0].swap(1, 2);
        let violations = mesh.validate();
        assert!(violations
            .iter()
            .any(|v| v.invariant == "positive triangle area" && v.entity == 0));
    }

    #[test]
    fn dangling_boundary_edge_flagged() {
        let mut mesh = triangulate(&unit_square(), 0.5).unwrap();
        mesh.triangles.pop();
        let violations = mesh.validate();
        assert!(violations
            .iter()
            .any(|v| v.invariant.contains("edge incidence")));
    }

    #[test]
    fn text_round_trip() {
        let mesh = triangulate(&unit_square(), 0.3).unwrap();
        let restored = Mesh::from_text(&mesh.to_text()).unwrap();
        assert_eq!(mesh.triangles, restored.triangles);
        assert_eq!(mesh.boundary_edges, restored.boundary_edges);
        assert_eq!(mesh.nodes.len(), restored.nodes.len());
        for (a, b) in mesh.nodes.iter().zip(&restored.nodes) {
            assert_eq!(a.x, b.x);
            assert_eq!(a.y, b.y);
        }
    }

    #[test]
    fn malformed_text_rejected() {
        assert!(Mesh::from_text("nodes 2\n0 0\n").is_err());
        assert!(Mesh::from_text("vertices 1\n0 0\n").is_err());
        let mesh = triangulate(&unit_square(), 1.0).unwrap();
        let mut text = mesh.to_text();
        text.push_str("extra");
        assert!(Mesh::from_text(&text).is_err());
    }

    #[test]
    fn invalid_edge_length_rejected() {
        assert!(triangulate(&unit_square(), 0.0).is_err());
        assert!(triangulate(&unit_square(), f64::NAN).is_err());
    }
}
