//! Integral quantities: class constants, Calabi energy, dissipation.

use serde::Serialize;

use crate::curvature::{curvature_field, AdmissibleClass, CurvatureSample, InverseHessianJet};
use crate::error::{Error, Result};
use crate::polytope::DelzantPolytope;
use crate::potential::SymplecticPotential;
use crate::quadrature::PolygonRule;

/// Quantities that depend only on the polytope and the class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClassConstants {
    /// `∫_P dμ`.
    pub area: f64,
    /// `∫_P p(z) dμ`.
    pub weighted_volume: f64,
    /// `∫_∂P dσ`.
    pub boundary_measure: f64,
    /// Average weighted scalar curvature `R̄` of the class.
    pub r_bar: f64,
    /// Average scalar curvature of the fiber alone (`2∫_∂P dσ / ∫_P dμ`).
    pub r_bar_fiber: f64,
}

impl ClassConstants {
    pub fn new(polytope: &DelzantPolytope, cls: &AdmissibleClass) -> Self {
        let rule = PolygonRule::on_polytope(polytope, cls.m as usize + 4, 2);
        let boundary = polytope.boundary_quadrature(2, cls.m as usize + 3);
        let area = polytope.area();
        let weighted_volume = rule.integrate(|z| cls.weight(z));
        let base = rule.integrate(|z| cls.weight(z) / cls.affine(z));
        let boundary_weight = boundary.integrate(|z| cls.weight(z));
        let boundary_measure = polytope.boundary_measure();
        Self {
            area,
            weighted_volume,
            boundary_measure,
            r_bar: (cls.scal_s * base + 2.0 * boundary_weight) / weighted_volume,
            r_bar_fiber: 2.0 * boundary_measure / area,
        }
    }
}

/// `R̄ = [Scal_S ∫_P p/(⟨p,z⟩+c_S) dμ + 2∫_∂P p dσ] / ∫_P p dμ`.
pub fn average_scalar(polytope: &DelzantPolytope, cls: &AdmissibleClass) -> f64 {
    ClassConstants::new(polytope, cls).r_bar
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyReport {
    pub area: f64,
    pub weighted_volume: f64,
    pub r_bar: f64,
    /// `∫_P R(u) p dμ` (a class constant).
    pub total_scalar: f64,
    /// `∫_P (R(u) − R̄)² p dμ`.
    pub calabi: f64,
    /// `∫_P |Rm|² p dμ`.
    pub total_rm2: f64,
    /// `∫_P |Rm|²_fiber dμ`.
    pub fiber_rm2_unweighted: f64,
    /// `∫_P u^{ir}u^{js} R_{,ij} R_{,rs} p dμ`, so that `dCa/dt = −2·dissipation`.
    pub dissipation: f64,
    /// `∫_P u^{ij} R_{,ij} p dμ`.
    pub trace_pairing: f64,
    /// `∫_∂P u dσ`.
    pub boundary_u: f64,
    /// `∫_P u² p dμ`.
    pub l2_u: f64,
    /// `∫_P |Rm|²_fiber dμ − ¼ ∫_P (R_fiber − R̄_fiber)² dμ`.
    pub invariant_j: f64,
}

impl EnergyReport {
    /// The literal Cauchy–Schwarz inequality
    /// `dissipation ≥ (∫ u^{ij}R_{,ij} p dμ)² / ∫ p dμ`.
    pub fn cauchy_schwarz_gap(&self) -> f64 {
        self.dissipation - self.trace_pairing * self.trace_pairing / self.weighted_volume
    }
}

/// Node fields shared by energy evaluation and the flow.
#[derive(Clone, Debug)]
pub struct CurvatureFields {
    pub jets: Vec<InverseHessianJet>,
    pub samples: Vec<CurvatureSample>,
}

impl CurvatureFields {
    pub fn compute(u: &SymplecticPotential, cls: &AdmissibleClass) -> Result<Self> {
        let jets = u.inverse_hessian_field()?;
        let samples = jets
            .iter()
            .map(|j| crate::curvature::sample_from(j, cls))
            .collect::<Result<_>>()?;
        Ok(Self { jets, samples })
    }

    pub fn r_weighted(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.r_weighted).collect()
    }
}

/// `∫_P (R − R̄)² p dμ` from a weighted scalar field.
pub fn calabi_energy(u: &SymplecticPotential, cls: &AdmissibleClass, r_bar: f64, r: &[f64]) -> f64 {
    let grid = u.grid();
    let integrand: Vec<f64> = (0..grid.len())
        .map(|k| (r[k] - r_bar).powi(2) * cls.weight(grid.point(k)))
        .collect();
    u.domain().quadrature.integrate(&integrand)
}

/// `∫_P u^{ir}u^{js} R_{,ij} R_{,rs} p dμ` from inverse-Hessian jets and a
/// weighted scalar field.
pub fn dissipation_from(u: &SymplecticPotential, cls: &AdmissibleClass, jets: &[InverseHessianJet], r: &[f64]) -> f64 {
    let grid = u.grid();
    let ops = &u.domain().ops;
    let rxx = ops.apply((2, 0), r);
    let rxy = ops.apply((1, 1), r);
    let ryy = ops.apply((0, 2), r);
    let integrand: Vec<f64> = (0..grid.len())
        .map(|k| {
            let m = jets[k].h * nalgebra::Matrix2::new(rxx[k], rxy[k], rxy[k], ryy[k]);
            (m * m).trace() * cls.weight(grid.point(k))
        })
        .collect();
    u.domain().quadrature.integrate(&integrand)
}

pub fn energy_report(u: &SymplecticPotential, cls: &AdmissibleClass) -> Result<EnergyReport> {
    cls.validate(u.polytope())?;
    let consts = ClassConstants::new(u.polytope(), cls);
    let fields = CurvatureFields::compute(u, cls)?;
    Ok(report_from_fields(u, cls, &consts, &fields))
}

pub fn report_from_fields(
    u: &SymplecticPotential,
    cls: &AdmissibleClass,
    consts: &ClassConstants,
    fields: &CurvatureFields,
) -> EnergyReport {
    let grid = u.grid();
    let quad = &u.domain().quadrature;
    let n = grid.len();
    let weight: Vec<f64> = (0..n).map(|k| cls.weight(grid.point(k))).collect();
    let r = fields.r_weighted();
    let ops = &u.domain().ops;
    let rxx = ops.apply((2, 0), &r);
    let rxy = ops.apply((1, 1), &r);
    let ryy = ops.apply((0, 2), &r);

    let mut total_scalar = vec![0.0; n];
    let mut calabi = vec![0.0; n];
    let mut total_rm2 = vec![0.0; n];
    let mut fiber_rm2 = vec![0.0; n];
    let mut fiber_dev = vec![0.0; n];
    let mut dissipation = vec![0.0; n];
    let mut pairing = vec![0.0; n];
    let mut l2 = vec![0.0; n];
    for k in 0..n {
        let s = &fields.samples[k];
        let h = fields.jets[k].h;
        let rh = nalgebra::Matrix2::new(rxx[k], rxy[k], rxy[k], ryy[k]);
        let m = h * rh;
        total_scalar[k] = s.r_weighted * weight[k];
        calabi[k] = (s.r_weighted - consts.r_bar).powi(2) * weight[k];
        total_rm2[k] = s.rm2_total * weight[k];
        fiber_rm2[k] = s.rm2_fiber;
        fiber_dev[k] = (s.r_fiber - consts.r_bar_fiber).powi(2);
        dissipation[k] = (m * m).trace() * weight[k];
        pairing[k] = m.trace() * weight[k];
        l2[k] = u.u_value(k).powi(2) * weight[k];
    }
    let fiber_int = quad.integrate(&fiber_rm2);
    EnergyReport {
        area: consts.area,
        weighted_volume: consts.weighted_volume,
        r_bar: consts.r_bar,
        total_scalar: quad.integrate(&total_scalar),
        calabi: quad.integrate(&calabi),
        total_rm2: quad.integrate(&total_rm2),
        fiber_rm2_unweighted: fiber_int,
        dissipation: quad.integrate(&dissipation),
        trace_pairing: quad.integrate(&pairing),
        boundary_u: u.boundary_integral(),
        l2_u: quad.integrate(&l2),
        invariant_j: fiber_int - 0.25 * quad.integrate(&fiber_dev),
    }
}

/// `(∫ u0_{ij} u1^{ij} dμ, ∫ u1_{ij} u0^{ij} dμ)`.
pub fn mixed_trace(u0: &SymplecticPotential, u1: &SymplecticPotential) -> Result<(f64, f64)> {
    if !u0.grid().same_layout(u1.grid()) {
        return Err(Error::GridMismatch("potentials live on different grids".into()));
    }
    let n = u0.grid().len();
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    for k in 0..n {
        let g0 = u0.hessian(k)?;
        let g1 = u1.hessian(k)?;
        let x = u0.grid().point(k);
        let inv = |g: nalgebra::Matrix2<f64>| {
            g.try_inverse().ok_or(Error::CurvatureUndefined { at: x, reason: "singular Hessian".into() })
        };
        a[k] = (g0 * inv(g1)?).trace();
        b[k] = (g1 * inv(g0)?).trace();
    }
    let q = &u0.domain().quadrature;
    Ok((q.integrate(&a), q.integrate(&b)))
}

/// Pointwise curvature samples and their unweighted integrals, for quick
/// inspection of a potential without a class.
pub fn fiber_integrals(u: &SymplecticPotential) -> Result<(f64, f64)> {
    let samples = curvature_field(u, &AdmissibleClass::trivial())?;
    let r: Vec<f64> = samples.iter().map(|s| s.r_fiber).collect();
    let rm: Vec<f64> = samples.iter().map(|s| s.rm2_fiber).collect();
    let q = &u.domain().quadrature;
    Ok((q.integrate(&r), q.integrate(&rm)))
}
