//! Finite-difference operators on a [`Grid`].
//!
//! Each operator approximates one partial derivative `∂ₓᵃ∂ᵧᵇ` with truncation
//! error of a chosen even order `q` (2 or 4). Stencils are chosen per node in
//! this order:
//!
//! 1. a tensor product of 1-D Fornberg stencils on a box of existing nodes,
//!    preferring the most centered windows, laid out along a lattice
//!    [`Frame`] adapted to the nearest facets;
//! 2. otherwise a least-squares polynomial fit over the nearest nodes
//!    (degree `a + b + q − 1`, at least 3), which keeps the order at corners
//!    where no box fits.
//!
//! Operators are stored in compressed-row form and are applied in parallel.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::{factorial, least_squares_operator, monomials};
use crate::polytope::Point;

pub const MAX_ORDER: usize = 4;

/// Truncation order used unless a caller asks otherwise.
pub const DEFAULT_ACCURACY: usize = 4;

pub fn check_accuracy(accuracy: usize) -> Result<()> {
    if accuracy == 2 || accuracy == 4 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("stencil accuracy must be 2 or 4, got {accuracy}")))
    }
}

/// Fornberg finite-difference weights.
///
/// Returns `c[k][j]`: the weight of sample `j` in the approximation of the
/// `k`-th derivative at `z`, for `k = 0..=m`.
pub fn fornberg(z: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Candidate 1-D windows (inclusive offset ranges) for a derivative of order
/// `d` with truncation order `accuracy`, most centered first. The symmetric
/// window comes first, followed by the shifted `d + accuracy`-point windows
/// containing the node.
fn windows(d: usize, accuracy: usize) -> Vec<(i64, i64)> {
    if d == 0 {
        return vec![(0, 0)];
    }
    let q = (d as i64 + 1) / 2 + accuracy as i64 / 2 - 1;
    let mut out = vec![(-q, q)];
    let len = (d + accuracy) as i64;
    let mut shifted: Vec<(i64, i64)> = (-(len - 1)..=0).map(|s| (s, s + len - 1)).collect();
    shifted.sort_by_key(|&(s, e)| ((s + e).abs(), s + e));
    out.extend(shifted);
    out
}

/// A sparse linear functional on node values.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Stencil {
    pub nodes: Vec<u32>,
    pub weights: Vec<f64>,
}

impl Stencil {
    pub fn apply(&self, field: &[f64]) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&k, &w)| w * field[k as usize])
            .sum()
    }
}

/// Compressed-row derivative operator `∂ₓᵃ∂ᵧᵇ` on a grid.
#[derive(Clone, Debug)]
pub struct DiffOperator {
    order: (usize, usize),
    accuracy: usize,
    offsets: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    fitted: usize,
}

impl DiffOperator {
    pub fn build(grid: &Grid, order: (usize, usize), accuracy: usize) -> Result<Self> {
        let total = order.0 + order.1;
        if total > MAX_ORDER {
            return Err(Error::UnsupportedOrder(total));
        }
        check_accuracy(accuracy)?;
        let rows: Vec<(Stencil, bool)> = (0..grid.len())
            .into_par_iter()
            .map(|k| match tensor_stencil(grid, k, order, accuracy) {
                Some(s) => Ok((s, false)),
                None => fit_stencil(grid, grid.point(k), order, accuracy).map(|s| (s, true)),
            })
            .collect::<Result<_>>()?;
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut fitted = 0;
        offsets.push(0);
        for (s, fit) in rows {
            fitted += usize::from(fit);
            cols.extend(s.nodes);
            vals.extend(s.weights);
            offsets.push(cols.len());
        }
        Ok(Self { order, accuracy, offsets, cols, vals, fitted })
    }

    pub fn order(&self) -> (usize, usize) {
        self.order
    }

    pub fn accuracy(&self) -> usize {
        self.accuracy
    }

    /// Number of nodes that needed the least-squares fallback.
    pub fn fitted_rows(&self) -> usize {
        self.fitted
    }

    pub fn row(&self, k: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.offsets[k], self.offsets[k + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn apply_at(&self, k: usize, field: &[f64]) -> f64 {
        let (c, v) = self.row(k);
        c.iter().zip(v).map(|(&j, &w)| w * field[j as usize]).sum()
    }

    pub fn apply(&self, field: &[f64]) -> Vec<f64> {
        assert_eq!(field.len() + 1, self.offsets.len(), "field length must match grid");
        (0..field.len())
            .into_par_iter()
            .map(|k| self.apply_at(k, field))
            .collect()
    }
}

/// All derivative operators of total order `1..=max_order`.
#[derive(Clone, Debug)]
pub struct DerivativeOperators {
    max_order: usize,
    ops: Vec<DiffOperator>,
}

fn op_index(order: (usize, usize)) -> usize {
    // graded ordering without (0, 0)
    let t = order.0 + order.1;
    t * (t + 1) / 2 + order.1 - 1
}

impl DerivativeOperators {
    pub fn build(grid: &Grid, max_order: usize, accuracy: usize) -> Result<Self> {
        if max_order > MAX_ORDER {
            return Err(Error::UnsupportedOrder(max_order));
        }
        let ops = monomials(max_order)
            .into_iter()
            .skip(1)
            .map(|o| DiffOperator::build(grid, o, accuracy))
            .collect::<Result<_>>()?;
        Ok(Self { max_order, ops })
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn get(&self, order: (usize, usize)) -> &DiffOperator {
        assert!(
            order.0 + order.1 >= 1 && order.0 + order.1 <= self.max_order,
            "operator {order:?} not built"
        );
        &self.ops[op_index(order)]
    }

    pub fn apply(&self, order: (usize, usize), field: &[f64]) -> Vec<f64> {
        self.get(order).apply(field)
    }
}

/// Lattice basis `(e₁, e₂)` in which a node's tensor stencils are laid out.
///
/// Away from `∂P` this is the coordinate basis. Near a single facet with
/// primitive normal `n` it is `(t, w)` with `t ⟂ n` and `⟨n, w⟩ = 1`, so that
/// only the direction in which `Hess u⁻¹` degenerates is one-sided. Near a
/// vertex it is the facet frame of the more oblique facet, or the basis dual
/// to the two normals when neither is.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Frame(pub [[i64; 2]; 2]);

impl Frame {
    pub const AXES: Frame = Frame([[1, 0], [0, 1]]);

    fn facet(n: [i64; 2]) -> Frame {
        let t = [-n[1], n[0]];
        // shortest w with ⟨n, w⟩ = 1; exists because n is primitive
        let r = n[0].abs().max(n[1].abs());
        let w = (-r..=r)
            .flat_map(|a| (-r..=r).map(move |b| [a, b]))
            .filter(|w| n[0] * w[0] + n[1] * w[1] == 1)
            .min_by_key(|w| (w[0].abs() + w[1].abs(), *w))
            .expect("primitive normal");
        Frame([t, w])
    }

    fn vertex(ni: [i64; 2], nj: [i64; 2]) -> Option<Frame> {
        let det = ni[0] * nj[1] - ni[1] * nj[0];
        if det.abs() != 1 {
            return None;
        }
        Some(Frame([[nj[1] * det, -nj[0] * det], [-ni[1] * det, ni[0] * det]]))
    }

    /// The frame used at node `k`.
    pub fn for_node(grid: &Grid, k: usize, accuracy: usize) -> Frame {
        let x = grid.point(k);
        let polytope = grid.polytope();
        let reach = (MAX_ORDER + 1) as f64 / 2.0 + accuracy as f64 / 2.0 - 1.0;
        let reach = reach.floor();
        let near: Vec<usize> = polytope
            .facets()
            .iter()
            .enumerate()
            .filter(|(_, f)| {
                let spread = (f.normal[0].abs() + f.normal[1].abs()) as f64;
                f.eval(x) < grid.h() * (1.0 + reach * spread) - 1e-12
            })
            .map(|(i, _)| i)
            .collect();
        let normal = |i: usize| polytope.facets()[i].normal;
        match near.as_slice() {
            [i] => Frame::facet(normal(*i)),
            [i, j] if polytope.facets_meet(*i, *j) => {
                let (ni, nj) = (normal(*i), normal(*j));
                let spread = |n: [i64; 2]| n[0].abs() + n[1].abs();
                match spread(ni).cmp(&spread(nj)) {
                    std::cmp::Ordering::Greater => Frame::facet(ni),
                    std::cmp::Ordering::Less => Frame::facet(nj),
                    std::cmp::Ordering::Equal => Frame::vertex(ni, nj).unwrap_or(Frame::AXES),
                }
            }
            _ => Frame::AXES,
        }
    }

    /// `(e₁·∇)^α (e₂·∇)^β` expansion of `∂ₓᵃ∂ᵧᵇ`: coefficient of the frame
    /// derivative `(α, a + b − α)` for `α = 0..=a + b`.
    fn expansion(&self, (a, b): (usize, usize)) -> Vec<f64> {
        let [e1, e2] = self.0;
        let det = (e1[0] * e2[1] - e1[1] * e2[0]) as f64;
        // ∇ = M⁻ᵀ (∂₁, ∂₂) with M = [e₁ e₂]
        let cx = [e2[1] as f64 / det, -e1[1] as f64 / det];
        let cy = [-e2[0] as f64 / det, e1[0] as f64 / det];
        // polynomial in (∂₁, ∂₂), indexed by the power of ∂₁
        let mut poly = vec![1.0];
        for (c, times) in [(cx, a), (cy, b)] {
            for _ in 0..times {
                let mut next = vec![0.0; poly.len() + 1];
                for (p, &v) in poly.iter().enumerate() {
                    next[p + 1] += v * c[0];
                    next[p] += v * c[1];
                }
                poly = next;
            }
        }
        poly
    }
}

/// Tensor product of the most centered complete windows along the node's
/// frame, recombined into `∂ₓᵃ∂ᵧᵇ`.
fn tensor_stencil(grid: &Grid, k: usize, order: (usize, usize), accuracy: usize) -> Option<Stencil> {
    let frame = Frame::for_node(grid, k, accuracy);
    if frame == Frame::AXES {
        return frame_stencil(grid, k, frame, order, accuracy);
    }
    let total = order.0 + order.1;
    let mut acc: Vec<(u32, f64)> = Vec::new();
    for (alpha, c) in frame.expansion(order).into_iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let s = frame_stencil(grid, k, frame, (alpha, total - alpha), accuracy)?;
        acc.extend(s.nodes.into_iter().zip(s.weights.into_iter().map(|w| c * w)));
    }
    acc.sort_by_key(|&(q, _)| q);
    let mut out = Stencil::default();
    for (q, w) in acc {
        if out.nodes.last() == Some(&q) {
            *out.weights.last_mut().unwrap() += w;
        } else {
            out.nodes.push(q);
            out.weights.push(w);
        }
    }
    Some(prune(out))
}

/// `(e₁·∇)^α (e₂·∇)^β` from a box of nodes `i·e₁ + j·e₂` around node `k`.
fn frame_stencil(grid: &Grid, k: usize, frame: Frame, order: (usize, usize), accuracy: usize) -> Option<Stencil> {
    let [i0, j0] = grid.node(k).index;
    let [e1, e2] = frame.0;
    let wx = windows(order.0, accuracy);
    let wy = windows(order.1, accuracy);
    let mut pairs: Vec<((i64, i64), (i64, i64))> = Vec::with_capacity(wx.len() * wy.len());
    for &a in &wx {
        for &b in &wy {
            pairs.push((a, b));
        }
    }
    // stable sort keeps symmetric-first preference within equal scores
    pairs.sort_by_key(|((a0, b0), (a1, b1))| (a0 + b0).abs() + (a1 + b1).abs());
    for ((sx, ex), (sy, ey)) in pairs {
        let mut ids = Vec::with_capacity(((ex - sx + 1) * (ey - sy + 1)) as usize);
        let complete = (sy..=ey).all(|dj| {
            (sx..=ex).all(|di| {
                let idx = [i0 + di * e1[0] + dj * e2[0], j0 + di * e1[1] + dj * e2[1]];
                match grid.find(idx) {
                    Some(q) => {
                        ids.push(q as u32);
                        true
                    }
                    None => false,
                }
            })
        });
        if !complete {
            continue;
        }
        let h = grid.h();
        let xs: Vec<f64> = (sx..=ex).map(|d| d as f64 * h).collect();
        let ys: Vec<f64> = (sy..=ey).map(|d| d as f64 * h).collect();
        let cx = &fornberg(0.0, &xs, order.0)[order.0];
        let cy = &fornberg(0.0, &ys, order.1)[order.1];
        let mut weights = Vec::with_capacity(ids.len());
        for wy in cy {
            for wx in cx {
                weights.push(wx * wy);
            }
        }
        return Some(prune(Stencil { nodes: ids, weights }));
    }
    None
}

fn prune(s: Stencil) -> Stencil {
    let scale = s.weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    let (nodes, weights) = s
        .nodes
        .into_iter()
        .zip(s.weights)
        .filter(|(_, w)| w.abs() > 1e-14 * scale)
        .unzip();
    Stencil { nodes, weights }
}

/// Weights of a least-squares polynomial fit around an arbitrary point.
#[derive(Clone, Debug)]
pub struct LocalFit {
    pub nodes: Vec<usize>,
    degree: usize,
    h: f64,
    /// basis × samples
    operator: DMatrix<f64>,
}

impl LocalFit {
    /// Fits a polynomial of total degree `degree` to the nodes nearest `x`.
    pub fn new(grid: &Grid, x: Point, degree: usize) -> Result<Self> {
        let basis = monomials(degree);
        let mut count = (basis.len() * 7).div_ceil(4).max(basis.len() + 4);
        let h = grid.h();
        loop {
            let nodes = grid.nearest_nodes(x, count);
            if nodes.len() < basis.len() {
                return Err(Error::Degenerate(format!(
                    "grid has {} nodes, a degree-{degree} fit needs {}",
                    grid.len(),
                    basis.len()
                )));
            }
            let design = DMatrix::from_fn(nodes.len(), basis.len(), |r, c| {
                let p = grid.point(nodes[r]);
                let (a, b) = basis[c];
                ((p[0] - x[0]) / h).powi(a as i32) * ((p[1] - x[1]) / h).powi(b as i32)
            });
            if let Some(operator) = least_squares_operator(&design) {
                return Ok(Self { nodes, degree, h, operator });
            }
            if nodes.len() == grid.len() {
                return Err(Error::Degenerate(format!(
                    "no unisolvent node set for a degree-{degree} fit near ({}, {})",
                    x[0], x[1]
                )));
            }
            count += 8;
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Stencil for `∂ₓᵃ∂ᵧᵇ` of the fitted polynomial at the fit center.
    pub fn stencil(&self, order: (usize, usize)) -> Stencil {
        let basis = monomials(self.degree);
        let row = basis
            .iter()
            .position(|&o| o == order)
            .expect("order within fit degree");
        let scale = factorial(order.0) * factorial(order.1) / self.h.powi((order.0 + order.1) as i32);
        Stencil {
            nodes: self.nodes.iter().map(|&k| k as u32).collect(),
            weights: (0..self.nodes.len())
                .map(|c| self.operator[(row, c)] * scale)
                .collect(),
        }
    }

    /// `∂ₓᵃ∂ᵧᵇ` of the fit applied to a node field.
    pub fn derivative(&self, order: (usize, usize), field: &[f64]) -> f64 {
        self.stencil(order).apply(field)
    }
}

fn fit_stencil(grid: &Grid, x: Point, order: (usize, usize), accuracy: usize) -> Result<Stencil> {
    let degree = (order.0 + order.1 + accuracy - 1).max(3);
    let fit = LocalFit::new(grid, x, degree)?;
    Ok(fit.stencil(order))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope::DelzantPolytope;

    fn grid(n: usize) -> Grid {
        let h = 3.0 / n as f64;
        Grid::build(&DelzantPolytope::standard_triangle(), n, h / 2.0).unwrap()
    }

    #[test]
    fn fornberg_classic_weights() {
        let c = fornberg(0.0, &[-1.0, 0.0, 1.0], 2);
        assert_eq!(c[1], vec![-0.5, 0.0, 0.5]);
        assert_eq!(c[2], vec![1.0, -2.0, 1.0]);
        let c = fornberg(0.0, &[0.0, 1.0, 2.0], 1);
        assert!((c[1][0] + 1.5).abs() < 1e-15 && (c[1][1] - 2.0).abs() < 1e-15);
        let c = fornberg(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 4);
        for (w, e) in c[4].iter().zip([1.0, -4.0, 6.0, -4.0, 1.0]) {
            assert!((w - e).abs() < 1e-12);
        }
    }

    #[test]
    fn operators_are_exact_on_low_degree_polynomials() {
        let g = grid(24);
        let ops = DerivativeOperators::build(&g, 4, 2).unwrap();
        // the quadratic is reproduced exactly by every stencil
        let quad_value = |x: f64, y: f64| 1.0 + 2.0 * x - y + x * y + 0.5 * y * y;
        let quad: Vec<f64> = g.nodes().iter().map(|n| quad_value(n.x[0], n.x[1])).collect();
        let cubic: Vec<f64> = g
            .nodes()
            .iter()
            .map(|n| quad_value(n.x[0], n.x[1]) + n.x[0] * n.x[0] * n.x[1])
            .collect();
        let check = |f: &[f64], order: (usize, usize), exact: &dyn Fn(f64, f64) -> f64| {
            let d = ops.apply(order, f);
            for (k, n) in g.nodes().iter().enumerate() {
                let e = exact(n.x[0], n.x[1]);
                let tol = 1e-11 / g.h().powi((order.0 + order.1) as i32);
                assert!((d[k] - e).abs() < tol, "{order:?} at {:?}: {} vs {}", n.index, d[k], e);
            }
        };
        check(&quad, (1, 0), &|_, y| 2.0 + y);
        check(&quad, (0, 1), &|x, y| -1.0 + x + y);
        check(&quad, (2, 0), &|_, _| 0.0);
        check(&quad, (1, 1), &|_, _| 1.0);
        check(&quad, (0, 2), &|_, _| 1.0);
        check(&cubic, (2, 1), &|_, _| 2.0);
        check(&cubic, (1, 2), &|_, _| 0.0);
        check(&cubic, (4, 0), &|_, _| 0.0);
        check(&cubic, (2, 2), &|_, _| 0.0);
    }

    #[test]
    fn convergence_order_up_to_the_boundary() {
        let exact = |x: f64, y: f64| (x + 2.0 * y).sin();
        // ∂ₓᵃ∂ᵧᵇ sin(x + 2y) = 2ᵇ sin(x + 2y + (a + b)π/2)
        let deriv = |(a, b): (usize, usize), x: f64, y: f64| {
            2f64.powi(b as i32) * (x + 2.0 * y + (a + b) as f64 * std::f64::consts::FRAC_PI_2).sin()
        };
        for (accuracy, order, min_rate) in [(2, (1, 1), 1.7), (4, (1, 1), 3.5), (4, (2, 2), 3.2)] {
            let err = |n: usize| {
                let g = grid(n);
                let op = DiffOperator::build(&g, order, accuracy).unwrap();
                let f: Vec<f64> = g.nodes().iter().map(|p| exact(p.x[0], p.x[1])).collect();
                let d = op.apply(&f);
                g.nodes()
                    .iter()
                    .enumerate()
                    .map(|(k, p)| (d[k] - deriv(order, p.x[0], p.x[1])).abs())
                    .fold(0.0, f64::max)
            };
            let (e1, e2) = (err(32), err(64));
            let rate = (e1 / e2).log2();
            assert!(rate > min_rate, "q={accuracy} {order:?}: observed order {rate} ({e1:e} → {e2:e})");
        }
    }

    #[test]
    fn rejects_odd_accuracy() {
        assert!(matches!(DiffOperator::build(&grid(12), (1, 0), 3), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn local_fit_interpolates_off_grid() {
        let g = grid(32);
        let f: Vec<f64> = g.nodes().iter().map(|n| (n.x[0] * n.x[1]).exp()).collect();
        let x = [0.123, -0.456];
        let fit = LocalFit::new(&g, x, 5).unwrap();
        let v = fit.derivative((0, 0), &f);
        assert!((v - (x[0] * x[1]).exp()).abs() < 1e-6);
        let dx = fit.derivative((1, 0), &f);
        assert!((dx - x[1] * (x[0] * x[1]).exp()).abs() < 1e-5);
    }

    #[test]
    fn unsupported_order() {
        let g = grid(12);
        assert!(matches!(
            DiffOperator::build(&g, (3, 2), 2),
            Err(Error::UnsupportedOrder(5))
        ));
    }
}
