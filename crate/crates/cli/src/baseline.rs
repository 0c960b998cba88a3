//! Fubini–Study golden values on the standard triangle.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use serde::Serialize;

use calabi_core::curvature::{curvature_field, AdmissibleClass};
use calabi_core::energy::ClassConstants;
use calabi_core::polytope::{DelzantPolytope, Point};
use calabi_core::potential::{guillemin_jet, Domain, SymplecticPotential};
use calabi_core::sobolev::{certify, ClassTopology};
use calabi_core::Result;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub expected: String,
    pub actual: String,
    pub pass: bool,
}

fn close(name: &str, expected: f64, actual: f64, tol: f64) -> Check {
    Check {
        name: name.into(),
        expected: format!("{expected:.12}"),
        actual: format!("{actual:.12}"),
        pass: (actual - expected).abs() <= tol,
    }
}

fn matrix_close(name: &str, expected: Matrix2<f64>, actual: Matrix2<f64>, tol: f64) -> Check {
    let fmt = |m: Matrix2<f64>| format!("[[{:.6}, {:.6}], [{:.6}, {:.6}]]", m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    Check { name: name.into(), expected: fmt(expected), actual: fmt(actual), pass: (expected - actual).amax() <= tol }
}

fn bound(name: &str, limit: &str, actual: f64, pass: bool) -> Check {
    Check { name: name.into(), expected: limit.into(), actual: format!("{actual:.12}"), pass }
}

/// Runs every check with the given closed form of `(D²v)⁻¹`.
pub fn run_checks(fs_inverse: impl Fn(Point) -> Result<Matrix2<f64>>) -> Result<Vec<Check>> {
    let p = DelzantPolytope::standard_triangle();
    let mut checks = Vec::new();

    let expected_vertices = [[-1.0, -1.0], [-1.0, 2.0], [2.0, -1.0]];
    let found = expected_vertices
        .iter()
        .all(|e| p.vertices().iter().any(|v| (v[0] - e[0]).abs() < 1e-14 && (v[1] - e[1]).abs() < 1e-14));
    checks.push(Check {
        name: "triangle vertices".into(),
        expected: "(-1,-1) (-1,2) (2,-1)".into(),
        actual: format!("{:?}", p.vertices()),
        pass: found && p.vertices().len() == 3,
    });
    checks.push(close("area", 4.5, p.area(), 1e-12));
    checks.push(close("boundary measure", 9.0, p.boundary_measure(), 1e-12));

    let g0 = guillemin_jet(&p, [0.0, 0.0], 2)?.hessian();
    checks.push(matrix_close("Hessian at (0,0)", Matrix2::new(1.0, 0.5, 0.5, 1.0), g0, 1e-12));
    checks.push(close("det Hessian at (0,0)", 0.75, g0.determinant(), 1e-12));
    let h0 = fs_inverse([0.0, 0.0])?;
    let third = 1.0 / 3.0;
    checks.push(matrix_close(
        "inverse Hessian at (0,0)",
        Matrix2::new(4.0 * third, -2.0 * third, -2.0 * third, 4.0 * third),
        h0,
        1e-12,
    ));

    let domain = Domain::new(&p, 48, 1.5 / 48.0)?;
    let grid = &domain.grid;
    let mut inverse_err = 0.0f64;
    let (mut vxx, mut vyy, mut vxy) = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0f64);
    for k in 0..grid.len() {
        let x = grid.point(k);
        let h = fs_inverse(x)?;
        let g = guillemin_jet(&p, x, 2)?.hessian();
        inverse_err = inverse_err.max((h * g - Matrix2::identity()).amax());
        vxx = vxx.max(h[(0, 0)]);
        vyy = vyy.max(h[(1, 1)]);
        vxy = vxy.max(h[(0, 1)].abs());
    }
    checks.push(close("inverse · Hessian = I on N=48", 0.0, inverse_err, 1e-12));
    checks.push(bound("v^xx < 3 on N=48", "< 3", vxx, vxx < 3.0));
    checks.push(bound("v^yy < 3 on N=48", "< 3", vyy, vyy < 3.0));
    checks.push(bound("|v^xy| < 6 on N=48", "< 6", vxy, vxy < 6.0));

    let u = SymplecticPotential::guillemin(domain.clone());
    let samples = curvature_field(&u, &AdmissibleClass::trivial())?;
    let dh_max = u
        .inverse_hessian_field()?
        .iter()
        .map(|j| j.dh[0][(0, 0)].abs())
        .fold(0.0f64, f64::max);
    checks.push(bound("|v^xx_x| ≤ 2 on N=48", "≤ 2", dh_max, dh_max <= 2.0));
    let r_err = samples.iter().map(|s| (s.r_fiber - 4.0).abs()).fold(0.0f64, f64::max);
    let rm_err = samples.iter().map(|s| (s.rm2_fiber - 4.0 / 3.0).abs()).fold(0.0f64, f64::max);
    checks.push(close("max |R − 4| on N=48", 0.0, r_err, 1e-10));
    checks.push(close("max |Rm|² − 4/3| on N=48", 0.0, rm_err, 1e-10));
    let r: Vec<f64> = samples.iter().map(|s| s.r_fiber).collect();
    checks.push(close("∫R dμ", 18.0, domain.quadrature.integrate(&r), 1e-6));

    let consts = ClassConstants::new(&p, &AdmissibleClass::trivial());
    checks.push(close("R̄", 4.0, consts.r_bar, 1e-12));
    let topo = ClassTopology::o3(-2);
    let volume = 0.5 * (2.0 * PI).powi(2) * consts.area;
    checks.push(close("fiber volume / π²", 9.0, volume / (PI * PI), 1e-12));
    checks.push(close("class volume / π²", volume / (PI * PI), topo.volume / (PI * PI), 1e-12));
    let cert = certify(0.0, &topo)?;
    checks.push(close("Yamabe lower bound / π at Ca = 0", 12.0, cert.yamabe_lower.unwrap_or(f64::NAN) / PI, 1e-12));
    checks.push(close("Sobolev bound at Ca = 0", 1.0, cert.sobolev_bound.unwrap_or(f64::NAN), 1e-12));
    checks.push(close("eq_cs threshold / π²", 48.0, topo.eq_cs_threshold() / (PI * PI), 1e-12));
    Ok(checks)
}

pub fn render_table(checks: &[Check]) -> String {
    let width = checks.iter().map(|c| c.name.chars().count()).max().unwrap_or(0);
    let mut out = String::new();
    for c in checks {
        let pad = width - c.name.chars().count();
        out += &format!(
            "{} {}{}  expected {}  actual {}\n",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            " ".repeat(pad),
            c.expected,
            c.actual
        );
    }
    let passed = checks.iter().filter(|c| c.pass).count();
    out += &format!("{passed}/{} checks passed\n", checks.len());
    out
}
