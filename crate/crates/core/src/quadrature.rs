//! Interior quadrature over a polytope.
//!
//! [`GridQuadrature`] turns node values into `∫_P g dμ`. Every lattice cell is
//! clipped against `P`. Full cells use the tensor rule `(−1, 13, 13, −1)/24`
//! when the 4×4 block of nodes around them exists and the corner average
//! otherwise. Clipped pieces integrate a least-squares plane through nearby
//! nodes exactly; cells within `1.5h` of a vertex go to their nearest node. The
//! rule is third order for smooth integrands; on the standard triangle and on
//! squares every weight is positive.
//!
//! [`PolygonRule`] is a Gauss rule on the polygon itself, for integrands that
//! can be evaluated at arbitrary points.

use nalgebra::DMatrix;

use crate::grid::Grid;
use crate::linalg::{gauss_legendre, least_squares_operator};
use crate::polytope::{polygon_area, DelzantPolytope, Point};

#[derive(Clone, Debug)]
pub struct GridQuadrature {
    weights: Vec<f64>,
}

impl GridQuadrature {
    pub fn new(grid: &Grid) -> Self {
        let polytope = grid.polytope();
        let h = grid.h();
        let n = grid.n() as i64;
        let mut weights = vec![0.0; grid.len()];
        for j in 0..n {
            for i in 0..n {
                let corners = [[i, j], [i + 1, j], [i + 1, j + 1], [i, j + 1]];
                let square: Vec<Point> = corners.iter().map(|&c| grid.lattice_point(c)).collect();
                let piece = clip_to_polytope(&square, polytope);
                if piece.len() < 3 {
                    continue;
                }
                let area = polygon_area(&piece);
                if area <= 1e-15 * h * h {
                    continue;
                }
                let full = (area - h * h).abs() <= 1e-12 * h * h;
                let (lo, hi) = (square[0], square[2]);
                let at_vertex = polytope.vertices().iter().any(|v| {
                    let dx = (lo[0] - v[0]).max(v[0] - hi[0]).max(0.0);
                    let dy = (lo[1] - v[1]).max(v[1] - hi[1]).max(0.0);
                    dx.hypot(dy) <= VERTEX_RADIUS * h
                });
                let contributions = if at_vertex {
                    vec![(grid.nearest(polygon_centroid(&piece)), area)]
                } else {
                    full.then(|| tensor_weights(grid, [i, j]).or_else(|| corner_weights(grid, &corners)))
                        .flatten()
                        .unwrap_or_else(|| plane_weights(grid, &piece, area))
                };
                for (k, w) in contributions {
                    weights[k] += w;
                }
            }
        }
        Self { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Σₖ wₖ gₖ`, summed in node order so results are reproducible.
    pub fn integrate(&self, field: &[f64]) -> f64 {
        assert_eq!(field.len(), self.weights.len(), "field length must match grid");
        self.weights.iter().zip(field).map(|(w, g)| w * g).sum()
    }

    /// `∫ g dμ` restricted to a node subset.
    pub fn integrate_subset(&self, field: &[f64], nodes: &[usize]) -> f64 {
        nodes.iter().map(|&k| self.weights[k] * field[k]).sum()
    }
}

const PLANE_NODES: usize = 6;
/// Cells this many spacings from a vertex go to their nearest node; below
/// `√2` the plane extrapolation leaves negative weights near oblique vertices.
const VERTEX_RADIUS: f64 = 1.5;
const TENSOR: [f64; 4] = [-1.0 / 24.0, 13.0 / 24.0, 13.0 / 24.0, -1.0 / 24.0];

/// Fourth-order weights for the cell with lower-left corner `origin`, when
/// the 4×4 block of nodes around it is present.
fn tensor_weights(grid: &Grid, origin: [i64; 2]) -> Option<Vec<(usize, f64)>> {
    let h2 = grid.h() * grid.h();
    let mut out = Vec::with_capacity(16);
    for (b, wb) in TENSOR.iter().enumerate() {
        for (a, wa) in TENSOR.iter().enumerate() {
            let k = grid.find([origin[0] + a as i64 - 1, origin[1] + b as i64 - 1])?;
            out.push((k, h2 * wa * wb));
        }
    }
    Some(out)
}

/// Weights for a full cell without a complete 4×4 block: the corner average
/// when all four corners are nodes.
fn corner_weights(grid: &Grid, corners: &[[i64; 2]; 4]) -> Option<Vec<(usize, f64)>> {
    let q = 0.25 * grid.h() * grid.h();
    corners.iter().map(|&idx| grid.find(idx).map(|k| (k, q))).collect()
}

/// `area` times the value at the piece centroid of the least-squares plane
/// through the nearest nodes; the plane extrapolates across the node-free
/// strip along `∂P`.
fn plane_weights(grid: &Grid, piece: &[Point], area: f64) -> Vec<(usize, f64)> {
    let h = grid.h();
    let c = polygon_centroid(piece);
    let nodes = grid.nearest_nodes(c, PLANE_NODES);
    let design = DMatrix::from_fn(nodes.len(), 3, |r, col| {
        let p = grid.point(nodes[r]);
        match col {
            0 => 1.0,
            1 => (p[0] - c[0]) / h,
            _ => (p[1] - c[1]) / h,
        }
    });
    match least_squares_operator(&design) {
        Some(op) => nodes.iter().enumerate().map(|(r, &k)| (k, area * op[(0, r)])).collect(),
        None => vec![(grid.nearest(c), area)],
    }
}

/// Sutherland–Hodgman clipping of a convex polygon against every facet.
pub fn clip_to_polytope(poly: &[Point], polytope: &DelzantPolytope) -> Vec<Point> {
    let mut out = poly.to_vec();
    for facet in polytope.facets() {
        if out.is_empty() {
            break;
        }
        let input = std::mem::take(&mut out);
        let n = input.len();
        for k in 0..n {
            let a = input[k];
            let b = input[(k + 1) % n];
            let (la, lb) = (facet.eval(a), facet.eval(b));
            if la >= 0.0 {
                out.push(a);
            }
            if (la >= 0.0) != (lb >= 0.0) {
                let t = la / (la - lb);
                out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
            }
        }
    }
    out
}

pub fn polygon_centroid(poly: &[Point]) -> Point {
    let n = poly.len();
    let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for k in 0..n {
        let p = poly[k];
        let q = poly[(k + 1) % n];
        let cross = p[0] * q[1] - q[0] * p[1];
        a += cross;
        cx += (p[0] + q[0]) * cross;
        cy += (p[1] + q[1]) * cross;
    }
    if a.abs() < 1e-300 {
        let m = n as f64;
        return [poly.iter().map(|p| p[0]).sum::<f64>() / m, poly.iter().map(|p| p[1]).sum::<f64>() / m];
    }
    [cx / (3.0 * a), cy / (3.0 * a)]
}

/// Gauss quadrature on a convex polygon (fan of collapsed-square rules).
#[derive(Clone, Debug)]
pub struct PolygonRule {
    pub samples: Vec<(Point, f64)>,
}

impl PolygonRule {
    /// `points` Gauss–Legendre nodes per direction on each fan triangle,
    /// further split into `panels²` sub-triangles; exact for polynomials of
    /// degree `2·points − 2`.
    pub fn new(vertices: &[Point], points: usize, panels: usize) -> Self {
        let rule = gauss_legendre(points.max(1));
        let panels = panels.max(1);
        let mut samples = Vec::new();
        let c = polygon_centroid(vertices);
        for k in 0..vertices.len() {
            let a = vertices[k];
            let b = vertices[(k + 1) % vertices.len()];
            for tri in subdivide([c, a, b], panels) {
                push_triangle(&mut samples, tri, &rule);
            }
        }
        Self { samples }
    }

    pub fn on_polytope(p: &DelzantPolytope, points: usize, panels: usize) -> Self {
        Self::new(p.vertices(), points, panels)
    }

    pub fn integrate(&self, mut g: impl FnMut(Point) -> f64) -> f64 {
        self.samples.iter().map(|&(x, w)| w * g(x)).sum()
    }
}

fn subdivide(t: [Point; 3], m: usize) -> Vec<[Point; 3]> {
    let at = |i: usize, j: usize| {
        let (s, r) = (i as f64 / m as f64, j as f64 / m as f64);
        [
            t[0][0] + s * (t[1][0] - t[0][0]) + r * (t[2][0] - t[0][0]),
            t[0][1] + s * (t[1][1] - t[0][1]) + r * (t[2][1] - t[0][1]),
        ]
    };
    let mut out = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..(m - i) {
            out.push([at(i, j), at(i + 1, j), at(i, j + 1)]);
            if i + j + 1 < m {
                out.push([at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)]);
            }
        }
    }
    out
}

fn push_triangle(samples: &mut Vec<(Point, f64)>, t: [Point; 3], rule: &[(f64, f64)]) {
    let e1 = [t[1][0] - t[0][0], t[1][1] - t[0][1]];
    let e2 = [t[2][0] - t[0][0], t[2][1] - t[0][1]];
    let jac = (e1[0] * e2[1] - e1[1] * e2[0]).abs();
    for &(xa, wa) in rule {
        let s = 0.5 * (xa + 1.0);
        for &(xb, wb) in rule {
            let r = 0.5 * (xb + 1.0) * (1.0 - s);
            let w = 0.25 * wa * wb * (1.0 - s) * jac;
            samples.push(([t[0][0] + s * e1[0] + r * e2[0], t[0][1] + s * e1[1] + r * e2[1]], w));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Grid {
        Grid::build(&DelzantPolytope::standard_triangle(), n, 1.5 / n as f64).unwrap()
    }

    #[test]
    fn area_is_exact_and_weights_are_positive() {
        for n in 12..=60 {
            let g = grid(n);
            let q = GridQuadrature::new(&g);
            let one = vec![1.0; g.len()];
            assert!((q.integrate(&one) - 4.5).abs() < 1e-12);
            assert!(q.weights().iter().all(|&w| w > 0.0), "N={n}");
            let x: Vec<f64> = g.nodes().iter().map(|n| n.x[0]).collect();
            assert!(q.integrate(&x).abs() < 4.0 * g.h().powi(3), "N={n}");
        }
        let square = DelzantPolytope::square(1.0);
        let g = Grid::build(&square, 20, 0.05).unwrap();
        let q = GridQuadrature::new(&g);
        assert!(q.weights().iter().all(|&w| w > 0.0));
        assert!((q.weights().iter().sum::<f64>() - polygon_area(square.vertices())).abs() < 1e-12);
    }

    #[test]
    fn third_order_convergence() {
        // ∫_P e^{x+y/2} over the standard triangle, from the polygon rule
        let g_fn = |p: Point| (p[0] + 0.5 * p[1]).exp();
        let exact = PolygonRule::on_polytope(&DelzantPolytope::standard_triangle(), 12, 8).integrate(g_fn);
        let err = |n: usize| {
            let g = grid(n);
            let f: Vec<f64> = g.nodes().iter().map(|p| g_fn(p.x)).collect();
            (GridQuadrature::new(&g).integrate(&f) - exact).abs()
        };
        assert!(err(96) < 5e-5, "{}", err(96));
        let ratio = err(48) / err(96);
        assert!(ratio > 6.0, "ratio {ratio}");
    }

    #[test]
    fn polygon_rule_is_exact_for_polynomials() {
        let p = DelzantPolytope::standard_triangle();
        let rule = PolygonRule::on_polytope(&p, 4, 1);
        assert!((rule.integrate(|_| 1.0) - 4.5).abs() < 1e-13);
        assert!(rule.integrate(|x| x[0]).abs() < 1e-13);
        // ∫ x² = (area/6)·(Σ xᵢ² + Σ_{i<j} xᵢxⱼ) with vertex abscissae −1, −1, 2
        assert!((rule.integrate(|x| x[0] * x[0]) - 2.25).abs() < 1e-12);
    }

    #[test]
    fn clipping_a_square_by_the_hypotenuse() {
        let p = DelzantPolytope::standard_triangle();
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let piece = clip_to_polytope(&sq, &p);
        assert!((polygon_area(&piece) - 0.5).abs() < 1e-15);
        let c = polygon_centroid(&piece);
        assert!((c[0] - 1.0 / 3.0).abs() < 1e-15 && (c[1] - 1.0 / 3.0).abs() < 1e-15);
    }
}
