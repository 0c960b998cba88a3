//! Delzant polygons in facet form.
//!
//! A polytope is stored as its facet presentation `lᵢ(x) = ⟨x, vᵢ⟩ + cᵢ ≥ 0`
//! with primitive inward integer normals. Vertices are derived and the Delzant
//! condition (two facets per vertex, normals forming a ℤ² basis) is checked on
//! construction, so every `DelzantPolytope` value is valid.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::gauss_legendre;

pub type Point = [f64; 2];

/// One facet `⟨x, normal⟩ + offset ≥ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Facet {
    pub normal: [i64; 2],
    pub offset: f64,
}

impl Facet {
    pub fn new(normal: [i64; 2], offset: f64) -> Self {
        Self { normal, offset }
    }

    /// The affine function `l(x) = ⟨x, v⟩ + c`.
    #[inline]
    pub fn eval(&self, x: Point) -> f64 {
        self.normal[0] as f64 * x[0] + self.normal[1] as f64 * x[1] + self.offset
    }

    #[inline]
    pub fn normal_f64(&self) -> [f64; 2] {
        [self.normal[0] as f64, self.normal[1] as f64]
    }

    pub fn normal_norm(&self) -> f64 {
        let [a, b] = self.normal_f64();
        a.hypot(b)
    }
}

/// A validated Delzant polygon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolytopeFile", into = "PolytopeFile")]
pub struct DelzantPolytope {
    facets: Vec<Facet>,
    /// Counter-clockwise vertex list.
    vertices: Vec<Point>,
    /// For every facet, the indices of the two vertices bounding its edge.
    edges: Vec<(usize, usize)>,
}

/// Serialized facet form: `{"facets": [{"normal": [1, 0], "offset": 1.0}, ...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolytopeFile {
    pub facets: Vec<Facet>,
}

impl TryFrom<PolytopeFile> for DelzantPolytope {
    type Error = Error;

    fn try_from(file: PolytopeFile) -> Result<Self> {
        DelzantPolytope::from_facets(file.facets)
    }
}

impl From<DelzantPolytope> for PolytopeFile {
    fn from(p: DelzantPolytope) -> Self {
        PolytopeFile { facets: p.facets }
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl DelzantPolytope {
    /// The moment triangle of ℂP² in the class `c₁(O(3))`, with vertices
    /// `(−1,−1)`, `(−1,2)`, `(2,−1)`.
    pub fn standard_triangle() -> Self {
        Self::from_facets(vec![
            Facet::new([1, 0], 1.0),
            Facet::new([0, 1], 1.0),
            Facet::new([-1, -1], 1.0),
        ])
        .expect("standard triangle is Delzant")
    }

    /// The square `[−a, a]²` (used for flat-metric diagnostics).
    pub fn square(a: f64) -> Self {
        Self::from_facets(vec![
            Facet::new([1, 0], a),
            Facet::new([0, 1], a),
            Facet::new([-1, 0], a),
            Facet::new([0, -1], a),
        ])
        .expect("square is Delzant")
    }

    /// Builds a polytope from its facets, deriving and validating vertices.
    pub fn from_facets(facets: Vec<Facet>) -> Result<Self> {
        if facets.len() < 3 {
            return Err(Error::InvalidPolytope(format!(
                "need at least 3 facets, got {}",
                facets.len()
            )));
        }
        for (i, f) in facets.iter().enumerate() {
            if f.normal == [0, 0] {
                return Err(Error::InvalidPolytope(format!("facet {i} has zero normal")));
            }
            if gcd(f.normal[0], f.normal[1]) != 1 {
                return Err(Error::InvalidPolytope(format!(
                    "facet {i} normal {:?} is not primitive",
                    f.normal
                )));
            }
            if !f.offset.is_finite() {
                return Err(Error::InvalidPolytope(format!("facet {i} offset is not finite")));
            }
        }

        let scale = 1.0 + facets.iter().map(|f| f.offset.abs()).fold(0.0, f64::max);
        let tol = 1e-9 * scale;

        // Candidate vertices: pairwise intersections satisfying every inequality.
        let mut vertices: Vec<Point> = Vec::new();
        for i in 0..facets.len() {
            for j in (i + 1)..facets.len() {
                let [a1, b1] = facets[i].normal_f64();
                let [a2, b2] = facets[j].normal_f64();
                let det = a1 * b2 - a2 * b1;
                if det == 0.0 {
                    continue;
                }
                let (c1, c2) = (facets[i].offset, facets[j].offset);
                let x = [(-c1 * b2 + c2 * b1) / det, (-a1 * c2 + a2 * c1) / det];
                if facets.iter().all(|f| f.eval(x) >= -tol)
                    && !vertices
                        .iter()
                        .any(|v| (v[0] - x[0]).abs() <= tol && (v[1] - x[1]).abs() <= tol)
                {
                    vertices.push(x);
                }
            }
        }
        if vertices.len() < 3 {
            return Err(Error::InvalidPolytope(
                "facets do not bound a polygon with nonempty interior".into(),
            ));
        }

        let cx = vertices.iter().map(|v| v[0]).sum::<f64>() / vertices.len() as f64;
        let cy = vertices.iter().map(|v| v[1]).sum::<f64>() / vertices.len() as f64;
        for (i, f) in facets.iter().enumerate() {
            if f.eval([cx, cy]) <= tol {
                return Err(Error::InvalidPolytope(format!(
                    "facet {i} is not inward pointing or the polygon is unbounded/empty"
                )));
            }
        }
        vertices.sort_by(|a, b| {
            let ta = (a[1] - cy).atan2(a[0] - cx);
            let tb = (b[1] - cy).atan2(b[0] - cx);
            ta.total_cmp(&tb)
        });

        // Unboundedness shows up as a facet without two vertices on it.
        let mut edges = Vec::with_capacity(facets.len());
        for (i, f) in facets.iter().enumerate() {
            let on: Vec<usize> = (0..vertices.len())
                .filter(|&k| f.eval(vertices[k]).abs() <= tol)
                .collect();
            if on.len() != 2 {
                return Err(Error::InvalidPolytope(format!(
                    "facet {i} touches {} vertices (expected 2): redundant facet or unbounded polygon",
                    on.len()
                )));
            }
            edges.push((on[0], on[1]));
        }

        // Delzant: exactly two facets per vertex, normals form a ℤ² basis.
        for (k, v) in vertices.iter().enumerate() {
            let at: Vec<usize> = (0..facets.len())
                .filter(|&i| facets[i].eval(*v).abs() <= tol)
                .collect();
            if at.len() != 2 {
                return Err(Error::InvalidPolytope(format!(
                    "vertex {k} ({}, {}) lies on {} facets",
                    v[0],
                    v[1],
                    at.len()
                )));
            }
            let (n1, n2) = (facets[at[0]].normal, facets[at[1]].normal);
            let det = n1[0] * n2[1] - n1[1] * n2[0];
            if det.abs() != 1 {
                return Err(Error::InvalidPolytope(format!(
                    "normals {n1:?}, {n2:?} at vertex {k} have determinant {det}, not ±1"
                )));
            }
        }

        Ok(Self { facets, vertices, edges })
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    /// Endpoints of the edge carried by facet `i`.
    /// Whether facets `i` and `j` share a vertex.
    pub fn facets_meet(&self, i: usize, j: usize) -> bool {
        let (a, b) = self.edges[i];
        let (c, d) = self.edges[j];
        i != j && (a == c || a == d || b == c || b == d)
    }

    pub fn edge(&self, i: usize) -> (Point, Point) {
        let (a, b) = self.edges[i];
        (self.vertices[a], self.vertices[b])
    }

    /// `(l₁(x), …, l_d(x))`.
    pub fn facet_values(&self, x: Point) -> Vec<f64> {
        self.facets.iter().map(|f| f.eval(x)).collect()
    }

    /// `minᵢ lᵢ(x)`; positive exactly on the interior.
    pub fn min_facet_value(&self, x: Point) -> f64 {
        self.facets.iter().map(|f| f.eval(x)).fold(f64::INFINITY, f64::min)
    }

    pub fn contains_interior(&self, x: Point) -> bool {
        self.min_facet_value(x) > 0.0
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.vertices)
    }

    pub fn vertex_centroid(&self) -> Point {
        let n = self.vertices.len() as f64;
        [
            self.vertices.iter().map(|v| v[0]).sum::<f64>() / n,
            self.vertices.iter().map(|v| v[1]).sum::<f64>() / n,
        ]
    }

    /// Maximizer of `Σ ln lᵢ`, equivalently of `∏ lᵢ`, by damped Newton.
    pub fn analytic_center(&self) -> Point {
        let mut x = self.chebyshev_center().0;
        for _ in 0..100 {
            let mut g = Vector2::zeros();
            let mut hess = Matrix2::zeros();
            for f in &self.facets {
                let v = Vector2::from(f.normal_f64());
                let l = f.eval(x);
                g += v / l;
                hess -= v * v.transpose() / (l * l);
            }
            let Some(step) = hess.lu().solve(&(-g)) else { break };
            let mut t = 1.0;
            while !self.contains_interior([x[0] + t * step[0], x[1] + t * step[1]]) {
                t *= 0.5;
            }
            x = [x[0] + t * step[0], x[1] + t * step[1]];
            if step.norm() * t < 1e-15 * (1.0 + self.diameter()) {
                break;
            }
        }
        x
    }

    /// Center and radius of the largest inscribed disc.
    pub fn chebyshev_center(&self) -> (Point, f64) {
        let f = &self.facets;
        let mut best = (self.vertex_centroid(), self.distance_to_boundary(self.vertex_centroid()));
        for i in 0..f.len() {
            for j in (i + 1)..f.len() {
                for k in (j + 1)..f.len() {
                    let row = |q: &Facet| {
                        let [a, b] = q.normal_f64();
                        [a, b, -q.normal_norm()]
                    };
                    let m = Matrix3::from_rows(&[row(&f[i]).into(), row(&f[j]).into(), row(&f[k]).into()]);
                    let rhs = Vector3::new(-f[i].offset, -f[j].offset, -f[k].offset);
                    let Some(sol) = m.lu().solve(&rhs) else { continue };
                    let (x, r) = ([sol[0], sol[1]], sol[2]);
                    let fits = f.iter().all(|q| q.eval(x) >= r * q.normal_norm() * (1.0 - 1e-12) - 1e-12);
                    if fits && r > best.1 {
                        best = (x, r);
                    }
                }
            }
        }
        best
    }

    /// `(min corner, max corner)` of the axis-aligned bounding box.
    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &self.vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for a in &self.vertices {
            for b in &self.vertices {
                d = d.max((a[0] - b[0]).hypot(a[1] - b[1]));
            }
        }
        d
    }

    /// Lattice length of facet `i`: Euclidean length divided by `|vᵢ|`.
    pub fn lattice_length(&self, i: usize) -> f64 {
        let (a, b) = self.edge(i);
        (b[0] - a[0]).hypot(b[1] - a[1]) / self.facets[i].normal_norm()
    }

    /// Total lattice length of the boundary, `∫_∂P dσ`.
    pub fn boundary_measure(&self) -> f64 {
        (0..self.facets.len()).map(|i| self.lattice_length(i)).sum()
    }

    /// Euclidean distance from `x` to `∂P`, computed as the minimum distance
    /// to the facet segments (so vertices are handled exactly).
    pub fn distance_to_boundary(&self, x: Point) -> f64 {
        (0..self.facets.len())
            .map(|i| {
                let (a, b) = self.edge(i);
                segment_distance(x, a, b)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Boundary quadrature for `∫_∂P g dσ` with the lattice measure.
    ///
    /// Each facet is split into `panels` equal pieces carrying `points`
    /// Gauss–Legendre nodes each.
    pub fn boundary_quadrature(&self, panels: usize, points: usize) -> BoundaryQuadrature {
        let rule = gauss_legendre(points.max(1));
        let panels = panels.max(1);
        let mut samples = Vec::with_capacity(self.facets.len() * panels * rule.len());
        for i in 0..self.facets.len() {
            let (a, b) = self.edge(i);
            let lattice = self.lattice_length(i);
            for p in 0..panels {
                let s0 = p as f64 / panels as f64;
                let s1 = (p + 1) as f64 / panels as f64;
                for &(xi, w) in &rule {
                    let s = 0.5 * (s0 + s1) + 0.5 * (s1 - s0) * xi;
                    let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                    samples.push(BoundarySample {
                        x,
                        weight: 0.5 * (s1 - s0) * w * lattice,
                        facet: i,
                    });
                }
            }
        }
        BoundaryQuadrature { samples }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundarySample {
    pub x: Point,
    pub weight: f64,
    pub facet: usize,
}

/// Samples approximating `∫_∂P · dσ`, where on facet `i` the measure `dσ`
/// is Lebesgue measure divided by `|vᵢ|` (so that `vᵢ ∧ dσ = dμ`).
#[derive(Clone, Debug)]
pub struct BoundaryQuadrature {
    pub samples: Vec<BoundarySample>,
}

impl BoundaryQuadrature {
    pub fn integrate(&self, mut g: impl FnMut(Point) -> f64) -> f64 {
        self.samples.iter().map(|s| s.weight * g(s.x)).sum()
    }

    pub fn facet_weight(&self, facet: usize) -> f64 {
        self.samples
            .iter()
            .filter(|s| s.facet == facet)
            .map(|s| s.weight)
            .sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.samples.iter().map(|s| s.weight).sum()
    }
}

pub fn polygon_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for k in 0..n {
        let a = poly[k];
        let b = poly[(k + 1) % n];
        s += a[0] * b[1] - a[1] * b[0];
    }
    0.5 * s.abs()
}

pub fn segment_distance(x: Point, a: Point, b: Point) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 {
        (((x[0] - a[0]) * d[0] + (x[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let p = [a[0] + t * d[0], a[1] + t * d[1]];
    (x[0] - p[0]).hypot(x[1] - p[1])
}
