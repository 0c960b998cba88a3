//! Yamabe and Sobolev constant certification for the fiber `ℂP²`, the fiber
//! Calabi-energy bound in the `c_S ≥ 12p₁` regime, and a numerical tester
//! for the Sobolev inequality along a flow.
//!
//! Calabi energies entering a certificate are Riemannian: `∫(R − R̄)² dμ_g`
//! over `ℂP²`. A polytope integral converts through
//! [`ClassTopology::riemannian_calabi`].

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::{control_rm_rhs, curvature_field, AdmissibleClass};
use crate::error::{Error, Result};
use crate::polytope::{DelzantPolytope, Point};
use crate::potential::SymplecticPotential;

/// Topological and normalization data of the fiber class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassTopology {
    pub c1_squared: f64,
    /// Riemannian volume of the fiber.
    pub volume: f64,
    pub r_bar: f64,
    pub euler_char_base: i64,
}

impl ClassTopology {
    /// `c₁(O(3))` on `ℂP²` with `R̄ = 4`: `c₁² = 9/2`, `Vol = ½(2π)²·9/2 = 9π²`.
    pub fn o3(euler_char_base: i64) -> Self {
        Self { c1_squared: 4.5, volume: 9.0 * PI * PI, r_bar: 4.0, euler_char_base }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.volume > 0.0 && self.volume.is_finite()) {
            return Err(Error::InvalidArgument(format!("volume must be positive, got {}", self.volume)));
        }
        if !(self.c1_squared > 0.0 && self.c1_squared.is_finite()) {
            return Err(Error::InvalidArgument(format!("c1_squared must be positive, got {}", self.c1_squared)));
        }
        if !self.r_bar.is_finite() {
            return Err(Error::InvalidArgument("r_bar must be finite".into()));
        }
        Ok(())
    }

    /// Largest `ca` with `96π²c₁² − 2(ca + R̄²Vol) ≥ ca`.
    pub fn eq_cs_threshold(&self) -> f64 {
        (96.0 * PI * PI * self.c1_squared - 2.0 * self.r_bar * self.r_bar * self.volume) / 3.0
    }

    /// `max(6, R̄√Vol)`.
    pub fn prefactor(&self) -> f64 {
        f64::max(6.0, self.r_bar * self.volume.sqrt())
    }

    /// Riemannian Calabi energy from `∫_P (R − R̄)² dμ` on a polytope of the
    /// given area (the torus fibers contribute `Vol/area`).
    pub fn riemannian_calabi(&self, polytope_calabi: f64, area: f64) -> f64 {
        polytope_calabi * self.volume / area
    }
}

/// Nominal hypothesis `Ca < 96π²` of the Sobolev estimate; weaker than the
/// `eq_cs` threshold that the estimate actually needs.
pub const NOMINAL_THRESHOLD: f64 = 96.0 * PI * PI;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SobolevCertificate {
    pub ca: f64,
    /// `∫R² dμ = ca + R̄²Vol`.
    pub integral_r2: f64,
    pub eq_cs_satisfied: bool,
    pub eq_cs_threshold: f64,
    pub nominal_threshold: f64,
    pub nominal_threshold_satisfied: bool,
    /// `√(96π²c₁² − 2∫R²)`, absent when the radicand is not positive.
    pub yamabe_lower: Option<f64>,
    /// `‖R − R̄‖_{L²} = √ca`.
    pub calabi_l2: f64,
    pub prefactor: f64,
    pub sobolev_bound: Option<f64>,
    pub derivation_log: String,
}

/// Lower bound of the Yamabe constant of a fiber metric with Calabi energy
/// `ca`. The Sobolev bound is left absent; see [`sobolev_bound`].
pub fn yamabe_lower_bound(ca: f64, topo: &ClassTopology) -> Result<SobolevCertificate> {
    topo.validate()?;
    if !(ca >= 0.0) || !ca.is_finite() {
        return Err(Error::InvalidArgument(format!("Calabi energy must be finite and ≥ 0, got {ca}")));
    }
    let integral_r2 = ca + topo.r_bar * topo.r_bar * topo.volume;
    let radicand = 96.0 * PI * PI * topo.c1_squared - 2.0 * integral_r2;
    let eq_cs_satisfied = radicand >= ca;
    let yamabe_lower = (radicand > 0.0).then(|| radicand.sqrt());
    let mut log = String::new();
    let pi2 = PI * PI;
    let _ = writeln!(log, "ca = {ca:.12e} ({:.9}π²)", ca / pi2);
    let _ = writeln!(
        log,
        "∫R² dμ = ca + R̄²·Vol = {ca:.9e} + {}²·{:.9e} = {integral_r2:.12e}",
        topo.r_bar, topo.volume
    );
    let _ = writeln!(
        log,
        "Y² ≥ 96π²c₁² − 2∫R² = 96π²·{} − 2·{integral_r2:.9e} = {radicand:.12e}",
        topo.c1_squared
    );
    let _ = writeln!(
        log,
        "eq_cs: 96π²c₁² − 2∫R² ≥ ca ⇔ ca ≤ {:.12e} ({:.9}π²): {}",
        topo.eq_cs_threshold(),
        topo.eq_cs_threshold() / pi2,
        if eq_cs_satisfied { "satisfied" } else { "violated" }
    );
    match yamabe_lower {
        Some(y) => {
            let _ = writeln!(log, "Y_lb = {y:.12e} ({:.9}π)", y / PI);
        }
        None => {
            let _ = writeln!(log, "radicand ≤ 0: no Yamabe lower bound");
        }
    }
    let nominal_threshold_satisfied = ca < NOMINAL_THRESHOLD;
    let _ = writeln!(
        log,
        "nominal hypothesis Ca < 96π²: {}; the threshold derived from eq_cs is the one enforced",
        if nominal_threshold_satisfied { "holds" } else { "fails" }
    );
    Ok(SobolevCertificate {
        ca,
        integral_r2,
        eq_cs_satisfied,
        eq_cs_threshold: topo.eq_cs_threshold(),
        nominal_threshold: NOMINAL_THRESHOLD,
        nominal_threshold_satisfied,
        yamabe_lower,
        calabi_l2: ca.sqrt(),
        prefactor: topo.prefactor(),
        sobolev_bound: None,
        derivation_log: log,
    })
}

/// Completes a certificate with `C_s ≤ max(6, R̄√Vol)(Y_lb − √ca)⁻¹`.
///
/// The subtrahend is the `L²` norm `√ca`, not `ca` itself; the log records
/// this.
pub fn sobolev_bound(mut cert: SobolevCertificate, topo: &ClassTopology) -> SobolevCertificate {
    cert.prefactor = topo.prefactor();
    let _ = writeln!(
        cert.derivation_log,
        "prefactor max(6, R̄√Vol) = max(6, {:.9e}) = {:.12e}",
        topo.r_bar * topo.volume.sqrt(),
        cert.prefactor
    );
    cert.sobolev_bound = match cert.yamabe_lower {
        Some(y) if cert.eq_cs_satisfied && y > cert.calabi_l2 => {
            let c = cert.prefactor / (y - cert.calabi_l2);
            let _ = writeln!(
                cert.derivation_log,
                "C_s ≤ prefactor / (Y_lb − √ca) = {:.9e} / ({y:.9e} − {:.9e}) = {c:.12e} \
                 (subtrahend is ‖R − R̄‖_L² = √ca; not Ca itself)",
                cert.prefactor, cert.calabi_l2
            );
            Some(c)
        }
        Some(y) if cert.eq_cs_satisfied => {
            let _ = writeln!(cert.derivation_log, "Y_lb = {y:.9e} ≤ √ca = {:.9e}: no bound", cert.calabi_l2);
            None
        }
        _ => {
            let _ = writeln!(cert.derivation_log, "eq_cs fails: no Sobolev bound");
            None
        }
    };
    cert
}

/// [`yamabe_lower_bound`] followed by [`sobolev_bound`].
pub fn certify(ca: f64, topo: &ClassTopology) -> Result<SobolevCertificate> {
    Ok(sobolev_bound(yamabe_lower_bound(ca, topo)?, topo))
}

/// `∫_P (R_fiber − R̄_fiber)² dμ` of the fiber metric alone.
pub fn fiber_calabi_energy(u: &SymplecticPotential) -> Result<f64> {
    let samples = curvature_field(u, &AdmissibleClass::trivial())?;
    let p = u.polytope();
    let r_bar = 2.0 * p.boundary_measure() / p.area();
    let dev: Vec<f64> = samples.iter().map(|s| (s.r_fiber - r_bar).powi(2)).collect();
    Ok(u.domain().quadrature.integrate(&dev))
}

/// Certificate for the fiber metric of `u`.
pub fn certify_potential(u: &SymplecticPotential, topo: &ClassTopology) -> Result<SobolevCertificate> {
    let ca = topo.riemannian_calabi(fiber_calabi_energy(u)?, u.polytope().area());
    certify(ca.max(0.0), topo)
}

/// Output of the fiber Calabi-energy chain.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FiberEnergyBound {
    /// `[c_S − 2p₁, c_S + 2p₁]`, the range of `p(z)` used by the chain.
    pub weight_range: (f64, f64),
    /// Exact range of `p(z)` over the polytope vertices.
    pub weight_range_vertices: (f64, f64),
    /// Right-hand side of the pointwise `|Rm|²` bound at the smallest weight.
    pub rm2_pointwise: f64,
    /// `½ + 4/3`: the pointwise bound carried through the chain.
    pub rm2_sup: f64,
    /// Upper bound of `∫_X |Rm|² dμ`.
    pub total_rm2_upper: f64,
    /// Upper bound of `∫_P |Rm|²_{ℂP²} dμ` along the flow.
    pub fiber_rm2_integral: f64,
    /// `∫_P |Rm|²_{ℂP²} dμ` at Fubini–Study.
    pub fiber_rm2_initial: f64,
    /// `8π²(fiber_rm2_integral − fiber_rm2_initial)`.
    pub ca_bound: f64,
    pub certificate: SobolevCertificate,
}

/// The fiber Calabi-energy bound for admissible classes with `c_S ≥ 12p₁`
/// over a curve of scalar curvature `±1`, fed into the Sobolev certificate.
pub fn fiber_energy_bound(cls: &AdmissibleClass, topo: &ClassTopology) -> Result<FiberEnergyBound> {
    topo.validate()?;
    let [p1, p2] = cls.p;
    if cls.m != 1 {
        return Err(Error::Regime(format!("requires m = 1, got m = {}", cls.m)));
    }
    if !(p1 >= p2 && p2 >= 1.0) {
        return Err(Error::Regime(format!("requires p₁ ≥ p₂ ≥ 1, got p = ({p1}, {p2})")));
    }
    if !(cls.c_s >= 12.0 * p1) {
        return Err(Error::Regime(format!("requires c_S ≥ 12p₁ = {}, got c_S = {}", 12.0 * p1, cls.c_s)));
    }
    if ![-1.0, 0.0, 1.0].contains(&cls.scal_s) {
        return Err(Error::Regime(format!("requires Scal_S ∈ {{−1, 0, 1}}, got {}", cls.scal_s)));
    }
    let chi = topo.euler_char_base;
    if chi == 0 {
        return Err(Error::Regime(
            "χ(Σ) = 0: the base volume |4πχ(Σ)| vanishes and the normalization degenerates".into(),
        ));
    }
    if cls.scal_s.signum() != (chi as f64).signum() || cls.scal_s == 0.0 {
        return Err(Error::Regime(format!(
            "Scal_S = {} is incompatible with χ(Σ) = {chi} under Gauss–Bonnet",
            cls.scal_s
        )));
    }

    let polytope = DelzantPolytope::standard_triangle();
    let area = polytope.area();
    let weight_range = (cls.c_s - 2.0 * p1, cls.c_s + 2.0 * p1);
    let weight_range_vertices = cls.affine_range(&polytope);
    let mut log = String::new();
    let _ = writeln!(
        log,
        "p(z) ∈ [{}, {}] (vertex values [{}, {}])",
        weight_range.0, weight_range.1, weight_range_vertices.0, weight_range_vertices.1
    );

    // the bound is decreasing in the weight, so evaluate it where p is smallest
    let at_inf = weight_point(cls, weight_range.0);
    let rm2_pointwise = control_rm_rhs(cls, at_inf)?;
    let rm2_sup = 0.5 + 4.0 / 3.0;
    if rm2_pointwise > rm2_sup {
        return Err(Error::Internal(format!("pointwise bound {rm2_pointwise} exceeds ½ + 4/3")));
    }
    let _ = writeln!(log, "sup|Rm|² ≤ {rm2_pointwise:.12} < ½ + 4/3");

    let fiber_volume_factor = (2.0 * PI).powi(2) / 6.0;
    let total_rm2_upper = 4.0 * PI * chi.unsigned_abs() as f64 * fiber_volume_factor * area * weight_range.1 * rm2_sup;
    let fiber_rm2_integral = weight_range.1 / weight_range.0 * area * rm2_sup;
    let fiber_rm2_initial = 4.0 / 3.0 * area;
    let ca_bound = 8.0 * PI * PI * (fiber_rm2_integral - fiber_rm2_initial);
    let _ = writeln!(log, "∫_X |Rm|² dμ < 4π|χ|·(2π)²/3!·{area}·{}·(½ + 4/3) = {total_rm2_upper:.12e}", weight_range.1);
    let _ = writeln!(
        log,
        "∫_P |Rm|²_ℂP² dμ < ({}/{})·{area}·(½ + 4/3) = {fiber_rm2_integral:.12}",
        weight_range.1, weight_range.0
    );
    let _ = writeln!(
        log,
        "Ca < 8π²({fiber_rm2_integral:.12} − {fiber_rm2_initial}) = {ca_bound:.12e} ({:.9}π²)",
        ca_bound / (PI * PI)
    );
    let mut certificate = certify(ca_bound, topo)?;
    certificate.derivation_log = log + &certificate.derivation_log;
    Ok(FiberEnergyBound {
        weight_range,
        weight_range_vertices,
        rm2_pointwise,
        rm2_sup,
        total_rm2_upper,
        fiber_rm2_integral,
        fiber_rm2_initial,
        ca_bound,
        certificate,
    })
}

/// A point where the affine form `⟨p, z⟩ + c_S` takes the value `w`.
fn weight_point(cls: &AdmissibleClass, w: f64) -> Point {
    let [a, b] = cls.p;
    let s = (w - cls.c_s) / (a * a + b * b);
    [a * s, b * s]
}

/// Smooth test function on the closed polytope.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    Constant { value: f64 },
    Affine { gradient: [f64; 2], offset: f64 },
    /// `|x − center|²`.
    Quadratic { center: Point },
    /// `exp(−|x − center|² / (2 width²))`.
    Gaussian { center: Point, width: f64 },
    /// `Π lᵢ(x)`.
    FacetBubble,
}

impl TestFunction {
    /// Constants, affine and quadratic functions, Gaussians of several widths
    /// at the centroid and towards a vertex, and the facet bubble.
    pub fn builtin(polytope: &DelzantPolytope) -> Vec<TestFunction> {
        let c = polytope.vertex_centroid();
        let v = polytope.vertices()[0];
        let toward = [0.5 * (c[0] + v[0]), 0.5 * (c[1] + v[1])];
        let mut out = vec![
            TestFunction::Constant { value: 1.0 },
            TestFunction::Affine { gradient: [1.0, 0.0], offset: 0.0 },
            TestFunction::Affine { gradient: [0.0, 1.0], offset: 2.0 },
            TestFunction::Affine { gradient: [1.0, -1.0], offset: 0.5 },
            TestFunction::Quadratic { center: c },
            TestFunction::Quadratic { center: v },
            TestFunction::FacetBubble,
        ];
        for width in [1.0, 0.5, 0.25] {
            out.push(TestFunction::Gaussian { center: c, width });
            out.push(TestFunction::Gaussian { center: toward, width });
        }
        out
    }

    pub fn value_gradient(&self, polytope: &DelzantPolytope, x: Point) -> (f64, [f64; 2]) {
        match self {
            TestFunction::Constant { value } => (*value, [0.0, 0.0]),
            TestFunction::Affine { gradient, offset } => {
                (gradient[0] * x[0] + gradient[1] * x[1] + offset, *gradient)
            }
            TestFunction::Quadratic { center } => {
                let d = [x[0] - center[0], x[1] - center[1]];
                (d[0] * d[0] + d[1] * d[1], [2.0 * d[0], 2.0 * d[1]])
            }
            TestFunction::Gaussian { center, width } => {
                let d = [x[0] - center[0], x[1] - center[1]];
                let s2 = width * width;
                let g = (-(d[0] * d[0] + d[1] * d[1]) / (2.0 * s2)).exp();
                (g, [-g * d[0] / s2, -g * d[1] / s2])
            }
            TestFunction::FacetBubble => {
                let l = polytope.facet_values(x);
                let value: f64 = l.iter().product();
                let mut grad = [0.0; 2];
                for (i, f) in polytope.facets().iter().enumerate() {
                    let others: f64 = l.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| v).product();
                    grad[0] += f.normal[0] as f64 * others;
                    grad[1] += f.normal[1] as f64 * others;
                }
                (value, grad)
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            TestFunction::Constant { value } => format!("constant({value})"),
            TestFunction::Affine { gradient, offset } => {
                format!("affine({}, {}; {offset})", gradient[0], gradient[1])
            }
            TestFunction::Quadratic { center } => format!("quadratic({:.3}, {:.3})", center[0], center[1]),
            TestFunction::Gaussian { center, width } => {
                format!("gaussian({:.3}, {:.3}; {width})", center[0], center[1])
            }
            TestFunction::FacetBubble => "facet_bubble".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SobolevRatio {
    pub function: String,
    pub l3: f64,
    pub l2: f64,
    pub gradient_l2: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SobolevTest {
    pub ratios: Vec<SobolevRatio>,
    pub worst: f64,
}

/// `max_f ‖f‖_{L³} / (‖f‖_{L²} + ‖∇f‖_{L²})` with measure `p(z) dμ` and
/// `|∇f|² = u^{ij} f_{,i} f_{,j}`.
pub fn sobolev_inequality_test(
    u: &SymplecticPotential,
    cls: &AdmissibleClass,
    functions: &[TestFunction],
) -> Result<SobolevTest> {
    let grid = u.grid();
    let polytope = u.polytope();
    let inverse: Vec<_> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let g = u.hessian(k)?;
            g.try_inverse().ok_or_else(|| Error::CurvatureUndefined {
                at: grid.point(k),
                reason: "singular Hessian".into(),
            })
        })
        .collect::<Result<_>>()?;
    let quad = &u.domain().quadrature;
    let ratios = functions
        .iter()
        .map(|f| {
            let n = grid.len();
            let (mut a3, mut a2, mut ag) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
            for k in 0..n {
                let x = grid.point(k);
                let w = cls.weight(x);
                let (v, d) = f.value_gradient(polytope, x);
                let h = &inverse[k];
                a3[k] = v.abs().powi(3) * w;
                a2[k] = v * v * w;
                ag[k] = (h[(0, 0)] * d[0] * d[0] + 2.0 * h[(0, 1)] * d[0] * d[1] + h[(1, 1)] * d[1] * d[1]) * w;
            }
            let l3 = quad.integrate(&a3).max(0.0).cbrt();
            let l2 = quad.integrate(&a2).max(0.0).sqrt();
            let gradient_l2 = quad.integrate(&ag).max(0.0).sqrt();
            SobolevRatio { function: f.name(), l3, l2, gradient_l2, ratio: l3 / (l2 + gradient_l2) }
        })
        .collect::<Vec<_>>();
    let worst = ratios.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    Ok(SobolevTest { ratios, worst })
}
