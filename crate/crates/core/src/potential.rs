//! Symplectic potentials `u = ½ Σ lᵢ ln lᵢ + f` and their derivatives.
//!
//! The singular Guillemin part is always differentiated in closed form. The
//! smooth correction `f` is either a registered closed form (analytic
//! provider) or a field of node values differentiated by the grid stencils
//! (finite-difference provider).

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::Matrix2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::InverseHessianJet;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::{factorial, sym2_eigenvalues};
use crate::polytope::{BoundarySample, DelzantPolytope, Point};
use crate::quadrature::GridQuadrature;
use crate::stencil::{DerivativeOperators, LocalFit, Stencil, DEFAULT_ACCURACY, MAX_ORDER};

/// Value and partial derivatives `d[a][b] = ∂ₓᵃ∂ᵧᵇ` for `a + b ≤ 4`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub d: [[f64; 5]; 5],
}

impl Jet {
    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.d[a][b]
    }

    pub fn value(&self) -> f64 {
        self.d[0][0]
    }

    pub fn gradient(&self) -> [f64; 2] {
        [self.d[1][0], self.d[0][1]]
    }

    pub fn hessian(&self) -> Matrix2<f64> {
        Matrix2::new(self.d[2][0], self.d[1][1], self.d[1][1], self.d[0][2])
    }

    /// `∂_k` of the Hessian, `k ∈ {0, 1}`.
    pub fn d_hessian(&self, k: usize) -> Matrix2<f64> {
        let (a, b) = if k == 0 { (1, 0) } else { (0, 1) };
        Matrix2::new(
            self.d[2 + a][b],
            self.d[1 + a][1 + b],
            self.d[1 + a][1 + b],
            self.d[a][2 + b],
        )
    }

    /// `∂_k ∂_l` of the Hessian.
    pub fn dd_hessian(&self, k: usize, l: usize) -> Matrix2<f64> {
        let a = usize::from(k == 0) + usize::from(l == 0);
        let b = 2 - a;
        Matrix2::new(
            self.d[2 + a][b],
            self.d[1 + a][1 + b],
            self.d[1 + a][1 + b],
            self.d[a][2 + b],
        )
    }

    pub fn add(&self, other: &Jet) -> Jet {
        let mut out = *self;
        for a in 0..5 {
            for b in 0..5 {
                out.d[a][b] += other.d[a][b];
            }
        }
        out
    }

    /// Largest `|∂^α|` over multi-indices of total order `k`.
    pub fn max_abs_of_order(&self, k: usize) -> f64 {
        (0..=k).map(|a| self.d[a][k - a].abs()).fold(0.0, f64::max)
    }
}

fn check_order(order: usize) -> Result<()> {
    if order > MAX_ORDER {
        Err(Error::UnsupportedOrder(order))
    } else {
        Ok(())
    }
}

/// Closed-form jet of `½ Σ lᵢ ln lᵢ`.
pub fn guillemin_jet(p: &DelzantPolytope, x: Point, order: usize) -> Result<Jet> {
    check_order(order)?;
    let mut jet = Jet::default();
    for facet in p.facets() {
        let l = facet.eval(x);
        if !(l > 0.0) {
            return Err(Error::Domain(x));
        }
        let [v0, v1] = facet.normal_f64();
        let ln = l.ln();
        for total in 0..=order {
            // ∂ᵏ(l ln l)/∂lᵏ: l ln l, ln l + 1, 1/l, −1/l², 2/l³
            let radial = match total {
                0 => l * ln,
                1 => ln + 1.0,
                2 => 1.0 / l,
                3 => -1.0 / (l * l),
                _ => 2.0 / (l * l * l),
            };
            for a in 0..=total {
                let b = total - a;
                jet.d[a][b] += 0.5 * radial * v0.powi(a as i32) * v1.powi(b as i32);
            }
        }
    }
    Ok(jet)
}

/// `(D²v)⁻¹` of the Fubini–Study potential on the standard triangle.
pub fn fs_inverse_hessian(x: Point) -> Result<Matrix2<f64>> {
    let [a, b] = x;
    if !(a > -1.0 && b > -1.0 && a + b < 1.0) {
        return Err(Error::Domain(x));
    }
    let c = 2.0 / 3.0;
    Ok(Matrix2::new(
        c * (2.0 - a) * (1.0 + a),
        -c * (1.0 + a) * (1.0 + b),
        -c * (1.0 + a) * (1.0 + b),
        c * (2.0 - b) * (1.0 + b),
    ))
}

/// One monomial `coeff · xᵖ yᑫ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coeff: f64,
    pub px: u32,
    pub py: u32,
}

/// Closed-form smooth corrections with exact derivatives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Correction {
    Zero,
    Polynomial { terms: Vec<Monomial> },
    /// `A·exp(−|x − c|²/(2w²))`.
    Gaussian { amplitude: f64, center: Point, width: f64 },
    /// `A·exp(1 − 1/(1 − |x − c|²/r²))` inside the disc of radius `r`, zero
    /// outside; smooth and compactly supported.
    Bump { amplitude: f64, center: Point, radius: f64 },
    Sum { parts: Vec<Correction> },
}

fn falling(p: u32, a: usize) -> f64 {
    (0..a as u32).fold(1.0, |acc, k| acc * (p as f64 - k as f64))
}

/// `(−1)ⁿ Heₙ(s)` for the probabilists' Hermite polynomials.
fn gauss_factor(n: usize, s: f64) -> f64 {
    match n {
        0 => 1.0,
        1 => -s,
        2 => s * s - 1.0,
        3 => -s * s * s + 3.0 * s,
        _ => s.powi(4) - 6.0 * s * s + 3.0,
    }
}

impl Correction {
    pub fn polynomial(terms: &[(f64, u32, u32)]) -> Self {
        Correction::Polynomial {
            terms: terms
                .iter()
                .map(|&(coeff, px, py)| Monomial { coeff, px, py })
                .collect(),
        }
    }

    /// The facet bubble `A·∏ lᵢ / max_P ∏ lᵢ`: a polynomial that vanishes on
    /// `∂P` and peaks with value `A` at the analytic center.
    pub fn bump(p: &DelzantPolytope, amplitude: f64) -> Self {
        let center = p.analytic_center();
        let peak: f64 = p.facets().iter().map(|f| f.eval(center)).product();
        // coefficients of ∏ (cᵢ + vᵢ·x), keyed by (px, py)
        let mut poly: BTreeMap<(u32, u32), f64> = BTreeMap::from([((0, 0), 1.0)]);
        for f in p.facets() {
            let [v0, v1] = f.normal_f64();
            let mut next = BTreeMap::new();
            for (&(a, b), &c) in &poly {
                *next.entry((a, b)).or_insert(0.0) += c * f.offset;
                *next.entry((a + 1, b)).or_insert(0.0) += c * v0;
                *next.entry((a, b + 1)).or_insert(0.0) += c * v1;
            }
            poly = next;
        }
        Correction::Polynomial {
            terms: poly
                .into_iter()
                .filter(|&(_, c)| c != 0.0)
                .map(|((px, py), c)| Monomial { coeff: amplitude * c / peak, px, py })
                .collect(),
        }
    }

    /// The same correction multiplied by `s`.
    pub fn clone_scaled(&self, s: f64) -> Correction {
        match self {
            Correction::Zero => Correction::Zero,
            Correction::Polynomial { terms } => Correction::Polynomial {
                terms: terms.iter().map(|t| Monomial { coeff: s * t.coeff, ..*t }).collect(),
            },
            Correction::Gaussian { amplitude, center, width } => {
                Correction::Gaussian { amplitude: s * amplitude, center: *center, width: *width }
            }
            Correction::Bump { amplitude, center, radius } => {
                Correction::Bump { amplitude: s * amplitude, center: *center, radius: *radius }
            }
            Correction::Sum { parts } => Correction::Sum {
                parts: parts.iter().map(|c| c.clone_scaled(s)).collect(),
            },
        }
    }

    pub fn jet(&self, x: Point) -> Jet {
        let mut jet = Jet::default();
        self.accumulate(x, &mut jet);
        jet
    }

    pub fn value(&self, x: Point) -> f64 {
        self.jet(x).value()
    }

    fn accumulate(&self, x: Point, jet: &mut Jet) {
        match self {
            Correction::Zero => {}
            Correction::Polynomial { terms } => {
                for t in terms {
                    for a in 0..=(t.px as usize).min(4) {
                        for b in 0..=(t.py as usize).min(4 - a) {
                            jet.d[a][b] += t.coeff
                                * falling(t.px, a)
                                * falling(t.py, b)
                                * x[0].powi(t.px as i32 - a as i32)
                                * x[1].powi(t.py as i32 - b as i32);
                        }
                    }
                }
            }
            Correction::Gaussian { amplitude, center, width } => {
                let s = (x[0] - center[0]) / width;
                let r = (x[1] - center[1]) / width;
                let g = amplitude * (-0.5 * (s * s + r * r)).exp();
                for a in 0..=4 {
                    for b in 0..=(4 - a) {
                        jet.d[a][b] += g * gauss_factor(a, s) * gauss_factor(b, r)
                            / width.powi((a + b) as i32);
                    }
                }
            }
            Correction::Bump { amplitude, center, radius } => {
                let r2 = radius * radius;
                let (s, t) = (x[0] - center[0], x[1] - center[1]);
                let rho = (s * s + t * t) / r2;
                if rho >= 1.0 {
                    return;
                }
                // ρ is quadratic, so its Taylor expansion is exact
                let mut delta = Taylor::default();
                delta.c[1][0] = 2.0 * s / r2;
                delta.c[0][1] = 2.0 * t / r2;
                delta.c[2][0] = 1.0 / r2;
                delta.c[0][2] = 1.0 / r2;
                let derivs = bump_profile_derivatives(rho);
                let mut power = Taylor::one();
                let mut out = Taylor::default();
                for (k, g) in derivs.iter().enumerate() {
                    out.add_scaled(&power, amplitude * g / factorial(k));
                    power = power.mul(&delta);
                }
                for a in 0..=4 {
                    for b in 0..=(4 - a) {
                        jet.d[a][b] += out.c[a][b] * factorial(a) * factorial(b);
                    }
                }
            }
            Correction::Sum { parts } => {
                for part in parts {
                    part.accumulate(x, jet);
                }
            }
        }
    }
}

/// Bivariate Taylor coefficients truncated at total degree four.
#[derive(Clone, Copy, Debug, Default)]
struct Taylor {
    c: [[f64; 5]; 5],
}

impl Taylor {
    fn one() -> Self {
        let mut t = Self::default();
        t.c[0][0] = 1.0;
        t
    }

    fn mul(&self, other: &Taylor) -> Taylor {
        let mut out = Taylor::default();
        for a in 0..=4 {
            for b in 0..=(4 - a) {
                if self.c[a][b] == 0.0 {
                    continue;
                }
                for p in 0..=(4 - a - b) {
                    for q in 0..=(4 - a - b - p) {
                        out.c[a + p][b + q] += self.c[a][b] * other.c[p][q];
                    }
                }
            }
        }
        out
    }

    fn add_scaled(&mut self, other: &Taylor, s: f64) {
        for a in 0..=4 {
            for b in 0..=(4 - a) {
                self.c[a][b] += s * other.c[a][b];
            }
        }
    }
}

/// `dᵏ/dρᵏ exp(1 − 1/(1 − ρ))` for `k ≤ 4` and `ρ < 1`.
fn bump_profile_derivatives(rho: f64) -> [f64; 5] {
    // g⁽ᵏ⁾ = Pₖ(q)·g with q = 1/(1 − ρ) and P_{k+1} = q²(Pₖ′ − Pₖ)
    let q = 1.0 / (1.0 - rho);
    let g = (1.0 - q).exp();
    let mut poly = vec![1.0];
    let mut out = [0.0; 5];
    for slot in out.iter_mut() {
        let value: f64 = poly.iter().rev().fold(0.0, |acc, c| acc * q + c);
        *slot = value * g;
        let mut next = vec![0.0; poly.len() + 2];
        for (i, &c) in poly.iter().enumerate() {
            if i > 0 {
                next[i + 1] += i as f64 * c;
            }
            next[i + 2] -= c;
        }
        poly = next;
    }
    out
}

/// How derivatives of the correction `f` are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeProvider {
    Analytic,
    FiniteDifference,
}

/// Grid, stencils and quadratures shared by every potential on a grid.
#[derive(Debug)]
pub struct Domain {
    pub grid: Grid,
    /// Truncation order of the finite-difference stencils.
    pub accuracy: usize,
    pub ops: DerivativeOperators,
    pub quadrature: GridQuadrature,
    /// Boundary samples with a stencil extrapolating node values of `f`.
    pub boundary: Vec<(BoundarySample, Stencil)>,
}

impl Domain {
    /// Grid, stencils of order [`DEFAULT_ACCURACY`] and quadrature.
    pub fn new(polytope: &DelzantPolytope, n: usize, delta_min: f64) -> Result<Arc<Self>> {
        Self::with_accuracy(polytope, n, delta_min, DEFAULT_ACCURACY)
    }

    pub fn with_accuracy(polytope: &DelzantPolytope, n: usize, delta_min: f64, accuracy: usize) -> Result<Arc<Self>> {
        Self::from_grid(Grid::build(polytope, n, delta_min)?, accuracy)
    }

    pub fn from_grid(grid: Grid, accuracy: usize) -> Result<Arc<Self>> {
        let ops = DerivativeOperators::build(&grid, MAX_ORDER, accuracy)?;
        let quadrature = GridQuadrature::new(&grid);
        let samples = grid.polytope().boundary_quadrature(grid.n().max(4), 3).samples;
        let boundary = samples
            .into_par_iter()
            .map(|s| {
                let fit = LocalFit::new(&grid, s.x, 3)?;
                Ok((s, fit.stencil((0, 0))))
            })
            .collect::<Result<_>>()?;
        Ok(Arc::new(Self { grid, accuracy, ops, quadrature, boundary }))
    }

    pub fn polytope(&self) -> &DelzantPolytope {
        self.grid.polytope()
    }
}

/// A symplectic potential sampled on a grid.
#[derive(Clone, Debug)]
pub struct SymplecticPotential {
    domain: Arc<Domain>,
    f: Vec<f64>,
    closed_form: Option<Correction>,
    provider: DerivativeProvider,
}

/// Dual coordinates of a point: `ξ = ∇u(x)`, `φ = ⟨x, ξ⟩ − u(x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ComplexDual {
    pub xi: [f64; 2],
    pub phi: f64,
}

impl SymplecticPotential {
    /// The Guillemin potential itself (`f ≡ 0`), with exact derivatives.
    pub fn guillemin(domain: Arc<Domain>) -> Self {
        Self::from_correction(domain, Correction::Zero, DerivativeProvider::Analytic)
    }

    pub fn from_correction(domain: Arc<Domain>, correction: Correction, provider: DerivativeProvider) -> Self {
        let f = domain.grid.nodes().iter().map(|n| correction.value(n.x)).collect();
        Self { domain, f, closed_form: Some(correction), provider }
    }

    /// A potential known only through node values of `f`.
    pub fn from_values(domain: Arc<Domain>, f: Vec<f64>) -> Result<Self> {
        if f.len() != domain.grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                f.len(),
                domain.grid.len()
            )));
        }
        Ok(Self { domain, f, closed_form: None, provider: DerivativeProvider::FiniteDifference })
    }

    /// Same grid, new correction values (finite-difference provider).
    pub fn with_values(&self, f: Vec<f64>) -> Result<Self> {
        Self::from_values(self.domain.clone(), f)
    }

    /// Switches the derivative provider; analytic requires a closed form.
    pub fn with_provider(mut self, provider: DerivativeProvider) -> Result<Self> {
        if provider == DerivativeProvider::Analytic && self.closed_form.is_none() {
            return Err(Error::InvalidArgument(
                "analytic derivatives need a closed-form correction".into(),
            ));
        }
        self.provider = provider;
        Ok(self)
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn grid(&self) -> &Grid {
        &self.domain.grid
    }

    pub fn polytope(&self) -> &DelzantPolytope {
        self.domain.polytope()
    }

    pub fn values(&self) -> &[f64] {
        &self.f
    }

    pub fn provider(&self) -> DerivativeProvider {
        self.provider
    }

    pub fn closed_form(&self) -> Option<&Correction> {
        self.closed_form.as_ref()
    }

    fn analytic(&self) -> Option<&Correction> {
        match self.provider {
            DerivativeProvider::Analytic => self.closed_form.as_ref(),
            DerivativeProvider::FiniteDifference => None,
        }
    }

    /// Jet of the correction `f` at node `k`.
    pub fn correction_jet(&self, k: usize, order: usize) -> Result<Jet> {
        check_order(order)?;
        if let Some(c) = self.analytic() {
            return Ok(self.truncate(c.jet(self.grid().point(k)), order));
        }
        let mut jet = Jet::default();
        jet.d[0][0] = self.f[k];
        for total in 1..=order {
            for a in 0..=total {
                jet.d[a][total - a] = self.domain.ops.get((a, total - a)).apply_at(k, &self.f);
            }
        }
        Ok(jet)
    }

    fn truncate(&self, mut jet: Jet, order: usize) -> Jet {
        for a in 0..5 {
            for b in 0..5 {
                if a + b > order {
                    jet.d[a][b] = 0.0;
                }
            }
        }
        jet
    }

    /// Value and derivatives of `u` at node `k` up to `order`.
    pub fn evaluate(&self, k: usize, order: usize) -> Result<Jet> {
        let g = guillemin_jet(self.polytope(), self.grid().point(k), order)?;
        Ok(g.add(&self.correction_jet(k, order)?))
    }

    /// Jet of `u` at an arbitrary interior point; off-grid correction values
    /// come from a local degree-5 fit when no closed form is in use.
    pub fn evaluate_at(&self, x: Point, order: usize) -> Result<Jet> {
        let g = guillemin_jet(self.polytope(), x, order)?;
        let c = match self.analytic() {
            Some(c) => self.truncate(c.jet(x), order),
            None => {
                let fit = LocalFit::new(self.grid(), x, 5)?;
                let mut jet = Jet::default();
                for total in 0..=order {
                    for a in 0..=total {
                        jet.d[a][total - a] = fit.derivative((a, total - a), &self.f);
                    }
                }
                jet
            }
        };
        Ok(g.add(&c))
    }

    /// `u` at node `k`.
    pub fn u_value(&self, k: usize) -> f64 {
        let x = self.grid().point(k);
        let g: f64 = self
            .polytope()
            .facets()
            .iter()
            .map(|f| {
                let l = f.eval(x);
                0.5 * l * l.ln()
            })
            .sum();
        g + self.f[k]
    }

    /// `∫_∂P u dσ`: the Guillemin part vanishes on `∂P` only facet by facet,
    /// so it is evaluated with the convention `0·ln 0 = 0`.
    pub fn boundary_integral(&self) -> f64 {
        self.domain
            .boundary
            .iter()
            .map(|(s, stencil)| {
                let g: f64 = self
                    .polytope()
                    .facets()
                    .iter()
                    .map(|f| {
                        let l = f.eval(s.x).max(0.0);
                        if l > 0.0 { 0.5 * l * l.ln() } else { 0.0 }
                    })
                    .sum();
                let f = match self.analytic() {
                    Some(c) => c.value(s.x),
                    None => stencil.apply(&self.f),
                };
                s.weight * (g + f)
            })
            .sum()
    }

    /// `Hess u` at node `k`.
    pub fn hessian(&self, k: usize) -> Result<Matrix2<f64>> {
        Ok(self.evaluate(k, 2)?.hessian())
    }

    fn inverse_checked(&self, x: Point, g: Matrix2<f64>) -> Result<Matrix2<f64>> {
        let (lo, hi) = sym2_eigenvalues(&g);
        if !(lo > 1e-12 * hi.abs()) || !lo.is_finite() {
            return Err(Error::CurvatureUndefined {
                at: x,
                reason: format!("Hessian eigenvalues ({lo:.3e}, {hi:.3e}) are not positive definite"),
            });
        }
        g.try_inverse().ok_or_else(|| Error::CurvatureUndefined {
            at: x,
            reason: "singular Hessian".into(),
        })
    }

    /// `H = (Hess u)⁻¹` and its first two derivatives at node `k`, by the
    /// chain rule `∂H = −H ∂G H` from the jet of `u`. With the
    /// finite-difference provider every derivative of `f` up to order four
    /// comes from its own stencil at the domain's accuracy order.
    pub fn inverse_hessian_jet(&self, k: usize) -> Result<InverseHessianJet> {
        let x = self.grid().point(k);
        self.analytic_jet(x, &self.evaluate(k, 4)?)
    }

    /// Inverse-Hessian jets at every node.
    pub fn inverse_hessian_field(&self) -> Result<Vec<InverseHessianJet>> {
        (0..self.grid().len())
            .into_par_iter()
            .map(|k| self.inverse_hessian_jet(k))
            .collect()
    }

    /// Inverse-Hessian jet at an arbitrary interior point (analytic provider
    /// or local fit of `f`), by the chain rule `∂H = −H ∂G H`.
    pub fn inverse_hessian_jet_at(&self, x: Point) -> Result<InverseHessianJet> {
        let jet = self.evaluate_at(x, 4)?;
        self.analytic_jet(x, &jet)
    }

    fn analytic_jet(&self, x: Point, jet: &Jet) -> Result<InverseHessianJet> {
        let g = jet.hessian();
        let h = self.inverse_checked(x, g)?;
        let dg = [jet.d_hessian(0), jet.d_hessian(1)];
        let dh = [-h * dg[0] * h, -h * dg[1] * h];
        let mut ddh = [[Matrix2::zeros(); 2]; 2];
        for k in 0..2 {
            for l in 0..2 {
                ddh[k][l] = h * dg[k] * h * dg[l] * h + h * dg[l] * h * dg[k] * h
                    - h * jet.dd_hessian(k, l) * h;
            }
        }
        Ok(InverseHessianJet { x, g, h, dh, ddh })
    }

    /// Smallest Hessian eigenvalue over a node subset.
    pub fn min_hessian_eigenvalue(&self, nodes: &[usize]) -> Result<f64> {
        nodes
            .par_iter()
            .map(|&k| self.hessian(k).map(|g| sym2_eigenvalues(&g).0))
            .try_reduce(|| f64::INFINITY, |a, b| Ok(a.min(b)))
    }

    /// Legendre dual at an interior point.
    pub fn legendre_dual(&self, x: Point) -> Result<ComplexDual> {
        let jet = self.evaluate_at(x, 1)?;
        let xi = jet.gradient();
        Ok(ComplexDual { xi, phi: x[0] * xi[0] + x[1] * xi[1] - jet.value() })
    }

    /// Solves `∇u(x) = ξ` by damped Newton iteration from `start`.
    pub fn inverse_legendre(&self, xi: [f64; 2], start: Point) -> Result<Point> {
        let residual = |x: Point| -> Result<([f64; 2], Jet)> {
            let jet = self.evaluate_at(x, 2)?;
            let g = jet.gradient();
            Ok(([g[0] - xi[0], g[1] - xi[1]], jet))
        };
        let mut x = start;
        if !self.polytope().contains_interior(x) {
            return Err(Error::Domain(x));
        }
        let (mut r, mut jet) = residual(x)?;
        let scale = 1.0 + xi[0].abs().max(xi[1].abs());
        let max_iter = 100;
        for _ in 0..max_iter {
            let norm = r[0].hypot(r[1]);
            if norm <= 1e-13 * scale {
                return Ok(x);
            }
            let inv = jet.hessian().try_inverse().ok_or(Error::NoConvergence {
                iterations: 0,
                residual: norm,
            })?;
            let dx = -(inv * nalgebra::Vector2::new(r[0], r[1]));
            let mut t = 1.0;
            loop {
                let cand = [x[0] + t * dx[0], x[1] + t * dx[1]];
                if self.polytope().contains_interior(cand) {
                    if let Ok((rc, jc)) = residual(cand) {
                        if rc[0].hypot(rc[1]) < norm || t < 1e-8 {
                            x = cand;
                            r = rc;
                            jet = jc;
                            break;
                        }
                    }
                }
                t *= 0.5;
                if t < 1e-12 {
                    return Err(Error::NoConvergence { iterations: max_iter, residual: norm });
                }
            }
        }
        Err(Error::NoConvergence { iterations: max_iter, residual: r[0].hypot(r[1]) })
    }
}
