//! Axis-aligned interior grids on a polytope.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polytope::{DelzantPolytope, Point};

/// Stencil shape available along one axis at a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StencilKind {
    /// At least two contiguous neighbors on both sides.
    Central,
    /// Fewer than two neighbors behind: use points ahead.
    Forward,
    /// Fewer than two neighbors ahead: use points behind.
    Backward,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Node {
    pub index: [i64; 2],
    pub x: Point,
    /// `minᵢ lᵢ(x)`.
    pub delta: f64,
    pub kind: [StencilKind; 2],
}

/// All lattice points `x = anchor + h·(i, j)` of `P` with `minᵢ lᵢ(x) ≥ δ_min`.
///
/// The anchor is the lower-left corner of the bounding box and `h` is the
/// larger bounding-box side divided by `N`, so that refining `N → 2N`
/// maps node `(i, j)` to `(2i, 2j)`.
#[derive(Clone, Debug)]
pub struct Grid {
    polytope: DelzantPolytope,
    n: usize,
    h: f64,
    anchor: Point,
    delta_min: f64,
    nodes: Vec<Node>,
    lookup: Vec<u32>,
}

const NONE: u32 = u32::MAX;

impl Grid {
    pub fn build(polytope: &DelzantPolytope, n: usize, delta_min: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("grid size N must be positive".into()));
        }
        if !(delta_min > 0.0) || !delta_min.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "delta_min must be positive and finite, got {delta_min}"
            )));
        }
        let (lo, hi) = polytope.bounding_box();
        let h = (hi[0] - lo[0]).max(hi[1] - lo[1]) / n as f64;
        let side = n + 1;
        let mut lookup = vec![NONE; side * side];
        let mut nodes = Vec::new();
        for j in 0..=n {
            for i in 0..=n {
                let x = [lo[0] + h * i as f64, lo[1] + h * j as f64];
                let delta = polytope.min_facet_value(x);
                if delta >= delta_min {
                    lookup[j * side + i] = nodes.len() as u32;
                    nodes.push(Node {
                        index: [i as i64, j as i64],
                        x,
                        delta,
                        kind: [StencilKind::Central; 2],
                    });
                }
            }
        }
        if nodes.is_empty() {
            return Err(Error::Degenerate(format!(
                "no lattice point of spacing {h} has min facet value ≥ {delta_min}"
            )));
        }
        let mut grid = Self {
            polytope: polytope.clone(),
            n,
            h,
            anchor: lo,
            delta_min,
            nodes,
            lookup,
        };
        for k in 0..grid.nodes.len() {
            let idx = grid.nodes[k].index;
            let kind = [0, 1].map(|axis| grid.classify(idx, axis));
            grid.nodes[k].kind = kind;
        }
        Ok(grid)
    }

    fn classify(&self, idx: [i64; 2], axis: usize) -> StencilKind {
        let count = |sign: i64| {
            (1..=2)
                .take_while(|&s| {
                    let mut q = idx;
                    q[axis] += sign * s;
                    self.find(q).is_some()
                })
                .count()
        };
        let (back, ahead) = (count(-1), count(1));
        if back >= 2 && ahead >= 2 {
            StencilKind::Central
        } else if back < ahead {
            StencilKind::Forward
        } else {
            StencilKind::Backward
        }
    }

    pub fn polytope(&self) -> &DelzantPolytope {
        &self.polytope
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn anchor(&self) -> Point {
        self.anchor
    }

    pub fn delta_min(&self) -> f64 {
        self.delta_min
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, k: usize) -> &Node {
        &self.nodes[k]
    }

    pub fn point(&self, k: usize) -> Point {
        self.nodes[k].x
    }

    /// Position of the lattice point `(i, j)` (whether or not it is a node).
    pub fn lattice_point(&self, idx: [i64; 2]) -> Point {
        [
            self.anchor[0] + self.h * idx[0] as f64,
            self.anchor[1] + self.h * idx[1] as f64,
        ]
    }

    /// Node number of the lattice point `(i, j)`, if it belongs to the grid.
    pub fn find(&self, idx: [i64; 2]) -> Option<usize> {
        let side = (self.n + 1) as i64;
        if idx[0] < 0 || idx[1] < 0 || idx[0] >= side || idx[1] >= side {
            return None;
        }
        let k = self.lookup[(idx[1] * side + idx[0]) as usize];
        (k != NONE).then_some(k as usize)
    }

    /// Node closest to `x` in the Euclidean sense.
    pub fn nearest(&self, x: Point) -> usize {
        let gi = ((x[0] - self.anchor[0]) / self.h).round() as i64;
        let gj = ((x[1] - self.anchor[1]) / self.h).round() as i64;
        if let Some(k) = self.find([gi, gj]) {
            return k;
        }
        let mut best = (f64::INFINITY, 0);
        for (k, node) in self.nodes.iter().enumerate() {
            let d = (node.x[0] - x[0]).hypot(node.x[1] - x[1]);
            if d < best.0 {
                best = (d, k);
            }
        }
        best.1
    }

    /// The `count` nodes nearest to `x`, closest first.
    pub fn nearest_nodes(&self, x: Point, count: usize) -> Vec<usize> {
        let count = count.min(self.nodes.len());
        let ci = ((x[0] - self.anchor[0]) / self.h).round() as i64;
        let cj = ((x[1] - self.anchor[1]) / self.h).round() as i64;
        let mut radius = 1i64;
        loop {
            let mut found: Vec<(f64, usize)> = Vec::new();
            for j in (cj - radius)..=(cj + radius) {
                for i in (ci - radius)..=(ci + radius) {
                    if let Some(k) = self.find([i, j]) {
                        let p = self.nodes[k].x;
                        found.push(((p[0] - x[0]).hypot(p[1] - x[1]), k));
                    }
                }
            }
            // Every node within distance (radius)·h of x has been seen once
            // the box is large enough; require a margin before trusting order.
            let secure = (radius as f64 - 0.5) * self.h;
            let n_secure = found.iter().filter(|(d, _)| *d <= secure).count();
            if n_secure >= count || found.len() == self.nodes.len() {
                found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                found.truncate(count);
                return found.into_iter().map(|(_, k)| k).collect();
            }
            radius += 1;
        }
    }

    /// Nodes whose Euclidean distance to `∂P` is at least `eps`.
    pub fn eps_region(&self, eps: f64) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&k| self.polytope.distance_to_boundary(self.nodes[k].x) >= eps)
            .collect()
    }

    /// Nodes of `region` having a lattice neighbor (8-neighborhood) outside it.
    pub fn ring(&self, region: &[usize]) -> Vec<usize> {
        let mut inside = vec![false; self.nodes.len()];
        for &k in region {
            inside[k] = true;
        }
        region
            .iter()
            .copied()
            .filter(|&k| {
                let [i, j] = self.nodes[k].index;
                NEIGHBORS8.iter().any(|&(di, dj)| match self.find([i + di, j + dj]) {
                    Some(q) => !inside[q],
                    None => true,
                })
            })
            .collect()
    }

    /// Stable digest of the grid parameters, used to check snapshot compatibility.
    pub fn same_layout(&self, other: &Grid) -> bool {
        self.n == other.n
            && self.delta_min == other.delta_min
            && self.polytope == other.polytope
    }
}

pub const NEIGHBORS8: [(i64, i64); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

impl DelzantPolytope {
    /// `P_ε ∩ grid`: see [`Grid::eps_region`].
    pub fn eps_region(&self, grid: &Grid, eps: f64) -> Vec<usize> {
        grid.eps_region(eps)
    }
}
