//! Pointwise curvature of toric and admissible metrics.
//!
//! Everything is computed from an [`InverseHessianJet`]: the matrix
//! `H = (Hess u)⁻¹` with its first and second derivatives in the symplectic
//! coordinates `z`. Derivatives with respect to the dual coordinates `ξ`
//! follow from `∂/∂ξ_k = H_{ka} ∂/∂z_a`.
//!
//! On the admissible metric with a curve base (`m = 1`) and weight
//! `W = ⟨p, z⟩ + c_S`, the metric is `g_{00̄} = W`, `g_{ij̄} = ½H_{ij}`, so the
//! inverse metric is `1/W` and `2G` with `G = Hess u`. The curvature blocks
//! below are normalized so that `2(g^{00̄}Ric_{00̄} + g^{ij̄}Ric_{ij̄})` equals
//! the weighted scalar curvature.

use nalgebra::Matrix2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polytope::{DelzantPolytope, Point};
use crate::potential::SymplecticPotential;

/// Scalar data of an admissible Kähler class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdmissibleClass {
    pub p: [f64; 2],
    #[serde(rename = "c_S")]
    pub c_s: f64,
    #[serde(rename = "scal_S")]
    pub scal_s: f64,
    pub m: u32,
    #[serde(rename = "chi_S", default)]
    pub chi_s: i64,
}

impl AdmissibleClass {
    /// `p(z) ≡ 1`: the plain toric surface.
    pub fn trivial() -> Self {
        Self { p: [0.0, 0.0], c_s: 1.0, scal_s: 0.0, m: 0, chi_s: 0 }
    }

    pub fn curve(p: [f64; 2], c_s: f64, scal_s: f64, chi_s: i64) -> Self {
        Self { p, c_s, scal_s, m: 1, chi_s }
    }

    /// `a = −Scal_S/2`.
    pub fn a(&self) -> f64 {
        -0.5 * self.scal_s
    }

    /// `⟨p, z⟩ + c_S`.
    #[inline]
    pub fn affine(&self, z: Point) -> f64 {
        self.p[0] * z[0] + self.p[1] * z[1] + self.c_s
    }

    /// `p(z) = (⟨p, z⟩ + c_S)^m`.
    #[inline]
    pub fn weight(&self, z: Point) -> f64 {
        self.affine(z).powi(self.m as i32)
    }

    /// Checks finiteness and `p(z) > 0` on `P̄` (at the vertices, where the
    /// affine form is extremal).
    pub fn validate(&self, polytope: &DelzantPolytope) -> Result<()> {
        let finite = self.p.iter().all(|v| v.is_finite()) && self.c_s.is_finite() && self.scal_s.is_finite();
        if !finite {
            return Err(Error::InvalidArgument("class parameters must be finite".into()));
        }
        if self.m == 0 {
            return Ok(());
        }
        for v in polytope.vertices() {
            let w = self.affine(*v);
            if !(w > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "⟨p, z⟩ + c_S = {w} ≤ 0 at vertex ({}, {})",
                    v[0], v[1]
                )));
            }
        }
        Ok(())
    }

    /// `(min, max)` of `⟨p, z⟩ + c_S` over `P̄`.
    pub fn affine_range(&self, polytope: &DelzantPolytope) -> (f64, f64) {
        polytope
            .vertices()
            .iter()
            .map(|v| self.affine(*v))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), w| (lo.min(w), hi.max(w)))
    }
}

/// `H = (Hess u)⁻¹` with `dh[k] = ∂_k H` and `ddh[k][l] = ∂_k∂_l H` at `x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InverseHessianJet {
    pub x: Point,
    /// `G = Hess u`.
    pub g: Matrix2<f64>,
    pub h: Matrix2<f64>,
    pub dh: [Matrix2<f64>; 2],
    pub ddh: [[Matrix2<f64>; 2]; 2],
}

type T3 = [[[f64; 2]; 2]; 2];
type T4 = [[[[f64; 2]; 2]; 2]; 2];

impl InverseHessianJet {
    /// Abreu's formula `R = −Σ (H^{ij})_{,ij}`.
    pub fn abreu_scalar(&self) -> f64 {
        let mut r = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                r -= self.ddh[i][j][(i, j)];
            }
        }
        r
    }

    /// `|Rm|²` of the fiber: `¼ Σ H^{ij}_{,kl} H^{kl}_{,ij}`.
    pub fn fiber_rm2(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        s += self.ddh[k][l][(i, j)] * self.ddh[i][j][(k, l)];
                    }
                }
            }
        }
        0.25 * s
    }

    /// `(div H)_r = Σ_s ∂_s H^{rs}`.
    pub fn div(&self) -> [f64; 2] {
        [
            self.dh[0][(0, 0)] + self.dh[1][(0, 1)],
            self.dh[0][(1, 0)] + self.dh[1][(1, 1)],
        ]
    }

    /// `H3[i][j][k] = ∂H_{ij}/∂ξ_k` (totally symmetric).
    pub fn h3(&self) -> T3 {
        let mut t = [[[0.0; 2]; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    t[i][j][k] = (0..2).map(|a| self.h[(k, a)] * self.dh[a][(i, j)]).sum();
                }
            }
        }
        t
    }

    /// `H4[i][j][k][l] = ∂²H_{ij}/∂ξ_k∂ξ_l` (totally symmetric).
    pub fn h4(&self) -> T4 {
        let mut t = [[[[0.0; 2]; 2]; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        let mut s = 0.0;
                        for b in 0..2 {
                            for a in 0..2 {
                                s += self.h[(l, b)]
                                    * (self.dh[b][(k, a)] * self.dh[a][(i, j)]
                                        + self.h[(k, a)] * self.ddh[a][b][(i, j)]);
                            }
                        }
                        t[i][j][k][l] = s;
                    }
                }
            }
        }
        t
    }
}

/// Weighted (admissible) scalar curvature
/// `R = Scal_S/(⟨p,z⟩+c_S) − p(z)⁻¹ Σ ∂_r∂_s(p(z) H^{rs})`.
pub fn weighted_scalar_from(jet: &InverseHessianJet, cls: &AdmissibleClass) -> f64 {
    let w = cls.affine(jet.x);
    let m = cls.m as f64;
    let p = nalgebra::Vector2::new(cls.p[0], cls.p[1]);
    let php = p.dot(&(jet.h * p));
    let div = jet.div();
    let p_div = p[0] * div[0] + p[1] * div[1];
    cls.scal_s / w - m * (m - 1.0) * php / (w * w) - 2.0 * m * p_div / w + jet.abreu_scalar()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RmBlocks {
    pub rm_00_00: f64,
    pub rm_00_ij: [[f64; 2]; 2],
    pub rm_ij_kl: T4,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RicBlocks {
    pub ric_00: f64,
    pub ric_ij: [[f64; 2]; 2],
}

/// Pointwise curvature record.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvatureSample {
    pub x: Point,
    pub weight: f64,
    pub r_fiber: f64,
    pub r_weighted: f64,
    pub rm2_fiber: f64,
    /// Present for curve bases (`m = 1`).
    pub rm_blocks: Option<RmBlocks>,
    pub ric_blocks: Option<RicBlocks>,
    pub rm2_total: f64,
}

impl CurvatureSample {
    /// `2(g^{00̄}Ric_{00̄} + g^{ij̄}Ric_{ij̄})`, when blocks are present.
    pub fn ricci_trace(&self, g: &Matrix2<f64>) -> Option<f64> {
        let ric = self.ric_blocks?;
        let w = self.weight;
        let mut t = ric.ric_00 / w;
        for i in 0..2 {
            for j in 0..2 {
                t += 2.0 * g[(i, j)] * ric.ric_ij[i][j];
            }
        }
        Some(2.0 * t)
    }
}

/// Curvature blocks of the admissible metric (`m = 1`).
pub fn blocks_from(jet: &InverseHessianJet, cls: &AdmissibleClass) -> Result<(RmBlocks, RicBlocks, f64)> {
    if cls.m != 1 {
        return Err(Error::InvalidArgument(format!(
            "admissible curvature blocks need a curve base (m = 1), got m = {}",
            cls.m
        )));
    }
    let w = cls.affine(jet.x);
    let g = jet.g;
    let h = jet.h;
    let p = nalgebra::Vector2::new(cls.p[0], cls.p[1]);
    let hp = h * p;
    let q = p.dot(&hp);
    let h3 = jet.h3();
    let h4 = jet.h4();

    let rm_00_00 = -cls.a() * w - q;

    let mut mixed = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let m = -(p[0] * h3[0][i][j] + p[1] * h3[1][i][j]) + hp[i] * hp[j] / w;
            mixed[i][j] = m;
        }
    }
    let rm_00_ij = mixed.map(|row| row.map(|m| 0.25 * m));

    let mut rm_ij_kl = [[[[0.0; 2]; 2]; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    let mut quad = 0.0;
                    for s in 0..2 {
                        for t in 0..2 {
                            quad += g[(s, t)] * h3[s][j][l] * h3[i][t][k];
                        }
                    }
                    rm_ij_kl[i][j][k][l] = 0.125 * (-h4[i][j][k][l] + quad);
                }
            }
        }
    }

    // Ric = g^{kl̄} Rm_{··kl̄} with g^{00̄} = 1/W and g^{kl̄} = 2G_{kl}.
    let mut ric_00 = rm_00_00 / w;
    for k in 0..2 {
        for l in 0..2 {
            ric_00 += 2.0 * g[(k, l)] * rm_00_ij[k][l];
        }
    }
    let mut ric_ij = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let mut s = rm_00_ij[i][j] / w;
            for k in 0..2 {
                for l in 0..2 {
                    s += 2.0 * g[(k, l)] * rm_ij_kl[i][j][k][l];
                }
            }
            ric_ij[i][j] = s;
        }
    }

    // |Rm|²: the 00̄00̄ term, four placements of the mixed block, the fiber.
    let mut ggmm = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    ggmm += g[(i, k)] * g[(j, l)] * mixed[i][j] * mixed[k][l];
                }
            }
        }
    }
    let rm2_total = rm_00_00 * rm_00_00 / w.powi(4) + ggmm / (w * w) + jet.fiber_rm2();

    Ok((
        RmBlocks { rm_00_00, rm_00_ij, rm_ij_kl },
        RicBlocks { ric_00, ric_ij },
        rm2_total,
    ))
}

/// Full curvature record from an inverse-Hessian jet.
pub fn sample_from(jet: &InverseHessianJet, cls: &AdmissibleClass) -> Result<CurvatureSample> {
    let rm2_fiber = jet.fiber_rm2();
    let (rm_blocks, ric_blocks, rm2_total) = if cls.m == 1 {
        let (rm, ric, total) = blocks_from(jet, cls)?;
        (Some(rm), Some(ric), total)
    } else {
        (None, None, rm2_fiber)
    };
    Ok(CurvatureSample {
        x: jet.x,
        weight: cls.weight(jet.x),
        r_fiber: jet.abreu_scalar(),
        r_weighted: weighted_scalar_from(jet, cls),
        rm2_fiber,
        rm_blocks,
        ric_blocks,
        rm2_total,
    })
}

pub fn abreu_scalar(u: &SymplecticPotential, k: usize) -> Result<f64> {
    Ok(u.inverse_hessian_jet(k)?.abreu_scalar())
}

pub fn weighted_scalar(u: &SymplecticPotential, cls: &AdmissibleClass, k: usize) -> Result<f64> {
    Ok(weighted_scalar_from(&u.inverse_hessian_jet(k)?, cls))
}

pub fn fiber_riemann_norm(u: &SymplecticPotential, k: usize) -> Result<f64> {
    Ok(u.inverse_hessian_jet(k)?.fiber_rm2())
}

pub fn admissible_blocks(u: &SymplecticPotential, cls: &AdmissibleClass, k: usize) -> Result<CurvatureSample> {
    if cls.m != 1 {
        return Err(Error::InvalidArgument(format!(
            "admissible curvature blocks need a curve base (m = 1), got m = {}",
            cls.m
        )));
    }
    sample_from(&u.inverse_hessian_jet(k)?, cls)
}

/// Curvature records at every node.
pub fn curvature_field(u: &SymplecticPotential, cls: &AdmissibleClass) -> Result<Vec<CurvatureSample>> {
    let jets = u.inverse_hessian_field()?;
    jets.par_iter().map(|j| sample_from(j, cls)).collect()
}

/// Curvature record at an arbitrary interior point.
pub fn sample_at(u: &SymplecticPotential, cls: &AdmissibleClass, x: Point) -> Result<CurvatureSample> {
    sample_from(&u.inverse_hessian_jet_at(x)?, cls)
}

/// Right-hand side of the pointwise `|Rm|²` bound for the Fubini–Study fiber:
/// `W⁻²(Scal_S² + 90p₁⁴/W² + (4p₁ + 24p₁²/W)²) + 4/3`.
pub fn control_rm_rhs(cls: &AdmissibleClass, x: Point) -> Result<f64> {
    if cls.m != 1 {
        return Err(Error::InvalidArgument("the |Rm|² bound is stated for m = 1".into()));
    }
    let w = cls.affine(x);
    let p1 = cls.p[0];
    let lin = 4.0 * p1 + 24.0 * p1 * p1 / w;
    Ok((cls.scal_s * cls.scal_s + 90.0 * p1.powi(4) / (w * w) + lin * lin) / (w * w) + 4.0 / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{fs_inverse_hessian, Correction, DerivativeProvider, Domain};
    use std::sync::Arc;

    fn domain(n: usize) -> Arc<Domain> {
        Domain::new(&DelzantPolytope::standard_triangle(), n, 1.5 / n as f64).unwrap()
    }

    #[test]
    fn fs_golden_values() {
        let u = SymplecticPotential::guillemin(domain(24));
        for s in curvature_field(&u, &AdmissibleClass::trivial()).unwrap() {
            assert!((s.r_fiber - 4.0).abs() < 1e-10);
            assert!((s.rm2_fiber - 4.0 / 3.0).abs() < 1e-10);
            assert_eq!(s.r_weighted, s.r_fiber);
            assert!(fs_inverse_hessian(s.x).unwrap()[(0, 0)] < 3.0);
        }
    }

    #[test]
    fn weighted_scalar_reduces() {
        let u = SymplecticPotential::guillemin(domain(24));
        let cls = AdmissibleClass::curve([0.0, 0.0], 7.0, 1.0, 2);
        for k in (0..u.grid().len()).step_by(11) {
            let r = weighted_scalar(&u, &cls, k).unwrap();
            assert!((r - (1.0 / 7.0 + 4.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn mixed_blocks_vanish_without_twist() {
        let u = SymplecticPotential::guillemin(domain(12));
        let cls = AdmissibleClass::curve([0.0, 0.0], 3.0, -1.0, -2);
        let s = admissible_blocks(&u, &cls, 10).unwrap();
        let rm = s.rm_blocks.unwrap();
        assert_eq!(rm.rm_00_ij, [[0.0; 2]; 2]);
        let first = rm.rm_00_00.powi(2) / s.weight.powi(4);
        assert!((first - 1.0 / (4.0 * 9.0)).abs() < 1e-15);
    }

    #[test]
    fn ricci_trace_is_weighted_scalar() {
        let d = domain(12);
        let corr = Correction::Gaussian { amplitude: 0.03, center: [0.1, 0.2], width: 0.5 };
        let u = SymplecticPotential::from_correction(d, corr, DerivativeProvider::Analytic);
        for cls in [
            AdmissibleClass::curve([1.0, 1.0], 12.0, -1.0, -2),
            AdmissibleClass::curve([2.0, 1.0], 30.0, 1.0, 2),
        ] {
            for k in (0..u.grid().len()).step_by(7) {
                let jet = u.inverse_hessian_jet(k).unwrap();
                let s = sample_from(&jet, &cls).unwrap();
                let t = s.ricci_trace(&jet.g).unwrap();
                assert!((t - s.r_weighted).abs() < 1e-9 * s.r_weighted.abs().max(1.0), "{t} vs {}", s.r_weighted);
            }
        }
    }

    #[test]
    fn rm_tensor_symmetries() {
        let d = domain(12);
        let corr = Correction::polynomial(&[(0.02, 3, 1), (0.01, 0, 4)]);
        let u = SymplecticPotential::from_correction(d, corr, DerivativeProvider::Analytic);
        let jet = u.inverse_hessian_jet(20).unwrap();
        let h3 = jet.h3();
        let h4 = jet.h4();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    assert!((h3[i][j][k] - h3[k][i][j]).abs() < 1e-12);
                    assert!((h3[i][j][k] - h3[j][k][i]).abs() < 1e-12);
                    for l in 0..2 {
                        assert!((h4[i][j][k][l] - h4[k][l][i][j]).abs() < 1e-10);
                        assert!((h4[i][j][k][l] - h4[i][k][j][l]).abs() < 1e-10);
                    }
                }
            }
        }
        let s = sample_from(&jet, &AdmissibleClass::curve([1.0, 1.0], 12.0, -1.0, -2)).unwrap();
        let rm = s.rm_blocks.unwrap().rm_ij_kl;
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        assert!((rm[i][j][k][l] - rm[k][l][i][j]).abs() < 1e-10);
                    }
                }
            }
        }
        assert!(s.rm2_total >= s.rm2_fiber);
    }

    #[test]
    fn control_rm_example() {
        let cls = AdmissibleClass::curve([1.0, 1.0], 12.0, -1.0, -2);
        let v = control_rm_rhs(&cls, [-1.0, -1.0]).unwrap();
        let expect = (1.0 + 0.9 + 6.4f64 * 6.4) / 100.0 + 4.0 / 3.0;
        assert!((v - expect).abs() < 1e-14);
        assert!((v - 1.7619).abs() < 1e-4);
        assert!(v < 0.5 + 4.0 / 3.0);
    }

    #[test]
    fn control_rm_holds_on_fs() {
        let u = SymplecticPotential::guillemin(domain(24));
        for cls in [
            AdmissibleClass::curve([1.0, 1.0], 12.0, -1.0, -2),
            AdmissibleClass::curve([3.0, 2.0], 36.0, 1.0, 2),
            AdmissibleClass::curve([5.0, 1.0], 70.0, 0.0, 0),
        ] {
            for s in curvature_field(&u, &cls).unwrap() {
                assert!(s.rm2_total <= control_rm_rhs(&cls, s.x).unwrap());
            }
        }
    }

    #[test]
    fn class_json() {
        let cls: AdmissibleClass =
            serde_json::from_str(r#"{"p":[1,1],"c_S":12,"scal_S":-1,"m":1,"chi_S":-2}"#).unwrap();
        assert_eq!(cls, AdmissibleClass::curve([1.0, 1.0], 12.0, -1.0, -2));
        assert!(serde_json::from_str::<AdmissibleClass>(r#"{"p":[1,1],"c_S":12,"scal_S":-1,"m":1,"x":0}"#).is_err());
    }
}
