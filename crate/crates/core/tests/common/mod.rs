//! Shared fixtures: an independent high-resolution derivative oracle and
//! seeded random perturbations.

#![allow(dead_code)]

use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use calabi_core::potential::guillemin_jet;
use calabi_core::{Correction, DelzantPolytope, InverseHessianJet, Jet, Point};

/// Coarse oracle spacing; the finer level halves it.
pub const ORACLE_H: f64 = 3.0 / 512.0;

/// Central second-order weights for `d^n/dx^n` on offsets `-2..=2`, in units
/// of `h^{-n}`.
const CENTRAL: [[f64; 5]; 5] = [
    [0.0, 0.0, 1.0, 0.0, 0.0],
    [0.0, -0.5, 0.0, 0.5, 0.0],
    [0.0, 1.0, -2.0, 1.0, 0.0],
    [-0.5, 1.0, 0.0, -1.0, 0.5],
    [1.0, -4.0, 6.0, -4.0, 1.0],
];

/// Jet of `f` by tensor-product central differences of step `h`.
pub fn central_jet(f: &impl Fn(Point) -> f64, x: Point, h: f64) -> Jet {
    let mut samples = [[0.0; 5]; 5];
    for (i, row) in samples.iter_mut().enumerate() {
        for (j, s) in row.iter_mut().enumerate() {
            *s = f([x[0] + (i as f64 - 2.0) * h, x[1] + (j as f64 - 2.0) * h]);
        }
    }
    let mut jet = Jet::default();
    for a in 0..5 {
        for b in 0..5 - a {
            let mut acc = 0.0;
            for i in 0..5 {
                for j in 0..5 {
                    acc += CENTRAL[a][i] * CENTRAL[b][j] * samples[i][j];
                }
            }
            jet.d[a][b] = acc / h.powi((a + b) as i32);
        }
    }
    jet
}

/// Richardson extrapolation of two central jets at `h` and `h/2`.
pub fn oracle_correction_jet(f: &impl Fn(Point) -> f64, x: Point, h: f64) -> Jet {
    let coarse = central_jet(f, x, h);
    let fine = central_jet(f, x, 0.5 * h);
    let mut jet = Jet::default();
    for a in 0..5 {
        for b in 0..5 - a {
            jet.d[a][b] = (4.0 * fine.d[a][b] - coarse.d[a][b]) / 3.0;
        }
    }
    jet
}

/// `(D²u)⁻¹` and its first two derivatives from a jet of `u`, written out
/// component by component.
pub fn oracle_inverse_jet(x: Point, u: &Jet) -> InverseHessianJet {
    let g = u.hessian();
    let h = g.try_inverse().expect("oracle Hessian is invertible");
    let dg = [u.d_hessian(0), u.d_hessian(1)];
    let dh = [-h * dg[0] * h, -h * dg[1] * h];
    let mut ddh = [[Matrix2::zeros(); 2]; 2];
    for k in 0..2 {
        for l in 0..2 {
            // ∂_l(−H ∂_k G H) = −∂_l H ∂_k G H − H ∂_k∂_l G H − H ∂_k G ∂_l H
            ddh[k][l] = -dh[l] * dg[k] * h - h * u.dd_hessian(k, l) * h - h * dg[k] * dh[l];
        }
    }
    InverseHessianJet { x, g, h, dh, ddh }
}

/// Oracle inverse-Hessian jet of `½ Σ lᵢ ln lᵢ + f` at `x`.
pub fn oracle_jet(polytope: &DelzantPolytope, f: &impl Fn(Point) -> f64, x: Point) -> InverseHessianJet {
    let g = guillemin_jet(polytope, x, 4).expect("interior point");
    oracle_inverse_jet(x, &g.add(&oracle_correction_jet(f, x, ORACLE_H)))
}

/// Small smooth perturbation: a random cubic plus a Gaussian, with sup norm
/// on the polytope at most about `scale`.
pub fn random_correction(rng: &mut ChaCha8Rng, polytope: &DelzantPolytope, scale: f64) -> Correction {
    let mut terms = Vec::new();
    for (px, py) in [(2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)] {
        let deg = (px + py) as i32;
        terms.push((scale * rng.gen_range(-1.0..1.0) / 2f64.powi(deg), px, py));
    }
    let c = polytope.analytic_center();
    let center = [c[0] + rng.gen_range(-0.5..0.5), c[1] + rng.gen_range(-0.5..0.5)];
    Correction::Sum {
        parts: vec![
            Correction::polynomial(&terms),
            Correction::Gaussian { amplitude: scale * rng.gen_range(-1.0..1.0), center, width: rng.gen_range(0.6..1.2) },
        ],
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform random interior point at distance at least `margin` from `∂P`.
pub fn random_interior_point(rng: &mut ChaCha8Rng, polytope: &DelzantPolytope, margin: f64) -> Point {
    let (lo, hi) = polytope.bounding_box();
    loop {
        let x = [rng.gen_range(lo[0]..hi[0]), rng.gen_range(lo[1]..hi[1])];
        if polytope.contains_interior(x) && polytope.distance_to_boundary(x) >= margin {
            return x;
        }
    }
}
