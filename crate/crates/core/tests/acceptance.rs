//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 when
//! any criterion fails.

mod common;

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::Matrix2;

use calabi_core::curvature::{control_rm_rhs, curvature_field, sample_from};
use calabi_core::energy::ClassConstants;
use calabi_core::flow::{run_from, FlowState, MonitorRecord, Observer, RunSettings, StepPolicy, Trajectory};
use calabi_core::potential::{fs_inverse_hessian, guillemin_jet};
use calabi_core::sobolev::{
    certify, certify_potential, fiber_energy_bound, sobolev_inequality_test, ClassTopology, TestFunction,
};
use calabi_core::{
    AdmissibleClass, CurvatureSample, Correction, DelzantPolytope, DerivativeProvider, Domain, Result, SymplecticPotential,
};
use common::*;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, detail }
    }
}

fn triangle() -> DelzantPolytope {
    DelzantPolytope::standard_triangle()
}

fn domain(n: usize) -> std::sync::Arc<Domain> {
    Domain::new(&triangle(), n, 1.5 / n as f64).unwrap()
}

fn o3() -> AdmissibleClass {
    AdmissibleClass::curve([1.0, 1.0], 12.0, -1.0, -2)
}

fn max_abs(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(0.0, |m, v| m.max(v.abs()))
}

fn fs_errors(u: &SymplecticPotential) -> Result<(f64, f64)> {
    let s = curvature_field(u, &AdmissibleClass::trivial())?;
    Ok((
        max_abs(s.iter().map(|s| s.r_fiber - 4.0)),
        max_abs(s.iter().map(|s| s.rm2_fiber - 4.0 / 3.0)),
    ))
}

fn c1_fs_golden() -> Result<Outcome> {
    let (r48, rm48) = fs_errors(&SymplecticPotential::guillemin(domain(48)))?;
    let analytic_ok = r48 <= 1e-10 && rm48 <= 1e-10;
    let fd = |n| SymplecticPotential::guillemin(domain(n)).with_provider(DerivativeProvider::FiniteDifference);
    let (a48, b48) = fs_errors(&fd(48)?)?;
    let (a96, b96) = fs_errors(&fd(96)?)?;
    let e48 = a48.max(b48);
    let e96 = a96.max(b96);
    let ratio = e48 / e96;
    let fd_ok = e96 <= 2e-3 && (3.5..=4.5).contains(&ratio);
    Ok(Outcome::new(
        analytic_ok && fd_ok,
        format!(
            "analytic N=48 |R-4| {r48:.1e} ||Rm|²-4/3| {rm48:.1e}; FD max error N=48 {e48:.1e}, N=96 {e96:.1e}, ratio {ratio:.3}"
        ),
    ))
}

fn c2_hessian_golden() -> Result<Outcome> {
    let p = triangle();
    let g = guillemin_jet(&p, [0.0, 0.0], 2)?.hessian();
    let h = fs_inverse_hessian([0.0, 0.0])?;
    let third = 1.0 / 3.0;
    let g_err = (g - Matrix2::new(1.0, 0.5, 0.5, 1.0)).amax();
    let h_err = (h - Matrix2::new(4.0 * third, -2.0 * third, -2.0 * third, 4.0 * third)).amax();
    let det_err = (g.determinant() - 0.75).abs();
    let jets = SymplecticPotential::guillemin(domain(48)).inverse_hessian_field()?;
    let vxx = max_abs(jets.iter().map(|j| j.h[(0, 0)]));
    let vxy = max_abs(jets.iter().map(|j| j.h[(0, 1)]));
    let vxx_x = max_abs(jets.iter().map(|j| j.dh[0][(0, 0)]));
    let pass = g_err <= 1e-12 && h_err <= 1e-12 && det_err <= 1e-12 && vxx < 3.0 && vxy < 6.0 && vxx_x <= 2.0;
    Ok(Outcome::new(
        pass,
        format!(
            "Hessian err {g_err:.1e}, inverse err {h_err:.1e}, det err {det_err:.1e}; N=48 max |v^xx| {vxx:.4}, |v^xy| {vxy:.4}, |v^xx_x| {vxx_x:.4}"
        ),
    ))
}

fn c3_class_constants() -> Result<Outcome> {
    let p = triangle();
    let d = domain(96);
    let ones = vec![1.0; d.grid.len()];
    let area = d.quadrature.integrate(&ones);
    let boundary = p.boundary_measure();
    let r_bar = ClassConstants::new(&p, &AdmissibleClass::trivial()).r_bar;
    let fiber_volume = 0.5 * (2.0 * PI).powi(2) * area;
    let mut worst = 0.0f64;
    let mut rng = rng(2024);
    let mut corrections = vec![Correction::Zero];
    corrections.extend((0..5).map(|_| random_correction(&mut rng, &p, 0.02)));
    for c in corrections {
        let u = SymplecticPotential::from_correction(d.clone(), c, DerivativeProvider::Analytic);
        let r: Vec<f64> = curvature_field(&u, &AdmissibleClass::trivial())?.iter().map(|s| s.r_fiber).collect();
        worst = worst.max((d.quadrature.integrate(&r) - 18.0).abs());
    }
    let pass = (area - 4.5).abs() <= 1e-6
        && boundary == 9.0
        && (r_bar - 4.0).abs() <= 1e-6
        && (fiber_volume - 9.0 * PI * PI).abs() <= 1e-6
        && worst <= 1e-4;
    Ok(Outcome::new(
        pass,
        format!(
            "area {area:.9}, ∫_∂P dσ {boundary}, R̄ {r_bar:.9}, fiber volume/π² {:.9}; max |∫R dμ - 18| over FS and 5 perturbations {worst:.1e}",
            fiber_volume / (PI * PI)
        ),
    ))
}

fn c4_sobolev_chain() -> Result<Outcome> {
    let topo = ClassTopology::o3(-2);
    let cert = certify(0.0, &topo)?;
    let y = cert.yamabe_lower.unwrap_or(f64::NAN);
    let bound = cert.sobolev_bound.unwrap_or(f64::NAN);
    let y_rel = (y / (12.0 * PI) - 1.0).abs();
    let b_rel = (bound - 1.0).abs();
    let threshold = topo.eq_cs_threshold();
    let t_rel = (threshold / (48.0 * PI * PI) - 1.0).abs();
    let mut last = 0.0;
    let mut monotone = true;
    for i in 0..20 {
        let ca = threshold * i as f64 / 20.0;
        match certify(ca, &topo)?.sobolev_bound {
            Some(b) if b > last || i == 0 => last = b,
            _ => monotone = false,
        }
    }
    Ok(Outcome::new(
        y_rel <= 1e-12 && b_rel <= 1e-12 && t_rel <= 1e-15 && monotone,
        format!(
            "Y_lb/12π - 1 = {y_rel:.1e}, C_s - 1 = {b_rel:.1e}, threshold/48π² - 1 = {t_rel:.1e}, bound increasing at 20 points: {monotone}"
        ),
    ))
}

fn c5_fiber_pipeline() -> Result<Outcome> {
    let topo = ClassTopology::o3(-2);
    let b = fiber_energy_bound(&o3(), &topo)?;
    let integral_err = (b.fiber_rm2_integral - 11.55).abs();
    let ca_err = (b.ca_bound - 44.4 * PI * PI).abs();
    let cert = &b.certificate;
    let own = cert
        .yamabe_lower
        .map(|y| topo.prefactor() / (y - cert.ca.sqrt()))
        .unwrap_or(f64::NAN);
    let sobolev = cert.sobolev_bound.unwrap_or(f64::NAN);
    let pass = b.rm2_pointwise < 0.5 + 4.0 / 3.0
        && integral_err <= 1e-10
        && ca_err <= 1e-10
        && cert.eq_cs_satisfied
        && sobolev.is_finite()
        && (sobolev - own).abs() <= 1e-12 * own;
    Ok(Outcome::new(
        pass,
        format!(
            "sup|Rm|² bound {:.5} < {:.5}, ∫|Rm|² bound err {integral_err:.1e}, Ca bound/π² {:.6}, eq_cs {}, C_s {sobolev:.6}",
            b.rm2_pointwise,
            0.5 + 4.0 / 3.0,
            b.ca_bound / (PI * PI),
            cert.eq_cs_satisfied
        ),
    ))
}

#[derive(Default)]
struct Collect {
    states: Vec<FlowState>,
}

impl Observer for Collect {
    fn snapshot(&mut self, state: &FlowState) -> Result<()> {
        self.states.push(state.clone());
        Ok(())
    }
}

fn flow(correction: Correction, steps: u64, monitor_every: u64, snapshot_every: u64) -> Result<(Trajectory, Vec<FlowState>)> {
    let u = SymplecticPotential::from_correction(domain(48), correction, DerivativeProvider::FiniteDifference);
    let settings = RunSettings {
        max_steps: Some(steps),
        monitor_every,
        snapshot_every,
        policy: StepPolicy::default(),
        ..RunSettings::default()
    };
    let mut collect = Collect::default();
    let t = run_from(FlowState::new(u)?, &AdmissibleClass::trivial(), &settings, &mut collect)?;
    Ok((t, collect.states))
}

fn c6_fixed_point() -> Result<Outcome> {
    let (t, _) = flow(Correction::Zero, 100, 10, u64::MAX)?;
    let f_sup = max_abs(t.final_state.u.values().iter().copied());
    let ca = t.records.iter().map(|r| r.calabi).fold(0.0, f64::max);
    Ok(Outcome::new(
        t.final_state.step_count == 100 && f_sup <= 1e-8 && ca <= 1e-12,
        format!("{} steps to t = {:.3e}: ‖f‖∞ {f_sup:.1e}, max calabi {ca:.1e}", t.final_state.step_count, t.final_state.t),
    ))
}

fn gradient_checks(t: &Trajectory) -> (bool, String) {
    let r: &[MonitorRecord] = &t.records;
    let monotone = r.windows(2).all(|w| w[1].calabi <= w[0].calabi);
    let residual = r.iter().filter_map(|r| r.calabi_rate_residual).fold(0.0, f64::max);
    let j0 = r[0].invariant_j;
    let drift = r.iter().map(|x| ((x.invariant_j - j0) / j0).abs()).fold(0.0, f64::max);
    let positive = r.iter().all(|x| x.positivity_ok);
    let pass = t.final_state.step_count == 200
        && monotone
        && residual <= 0.05
        && drift <= 0.01
        && positive
        && t.violations.is_empty();
    let detail = format!(
        "{} steps to t = {:.3e}: calabi {:.4e} -> {:.4e} nonincreasing {monotone}, max rate residual {residual:.2e}, J drift {drift:.1e}, positivity {positive}, band C {:.3} violations {}",
        t.final_state.step_count,
        t.final_state.t,
        r[0].calabi,
        r[r.len() - 1].calabi,
        t.band.c(),
        t.violations.len()
    );
    (pass, detail)
}

fn c10_sobolev_corroboration(states: &[FlowState]) -> Result<Outcome> {
    let topo = ClassTopology::o3(-2);
    let functions = TestFunction::builtin(&triangle());
    let mut worst_margin = f64::INFINITY;
    let mut worst_ratio = 0.0f64;
    let mut certified = 0;
    for s in states {
        let cert = certify_potential(&s.u, &topo)?;
        let test = sobolev_inequality_test(&s.u, &AdmissibleClass::trivial(), &functions)?;
        worst_ratio = worst_ratio.max(test.worst);
        if let Some(c) = cert.sobolev_bound {
            certified += 1;
            worst_margin = worst_margin.min(c - test.worst);
        }
    }
    Ok(Outcome::new(
        certified == states.len() && !states.is_empty() && worst_margin >= 0.0,
        format!(
            "{certified}/{} states certified, worst ratio {worst_ratio:.4}, smallest margin to the certificate {worst_margin:.4}",
            states.len()
        ),
    ))
}

fn c8_self_consistency() -> Result<Outcome> {
    let p = triangle();
    let d = domain(24);
    let classes = [o3(), AdmissibleClass::curve([1.0, 1.0], 4.0, 0.0, 0), AdmissibleClass::curve([2.0, 1.0], 7.0, 1.0, 2)];
    let mut rng = rng(88);
    let mut worst = 0.0f64;
    for cls in &classes {
        for _ in 0..50 {
            let c = random_correction(&mut rng, &p, 0.03);
            let u = SymplecticPotential::from_correction(d.clone(), c, DerivativeProvider::Analytic);
            let x = random_interior_point(&mut rng, &p, 0.01);
            let jet = u.inverse_hessian_jet_at(x)?;
            let s = sample_from(&jet, cls)?;
            let trace = s.ricci_trace(&jet.g).unwrap_or(f64::NAN);
            worst = worst.max((trace - s.r_weighted).abs() / s.r_weighted.abs().max(1e-300));
        }
    }
    let fs = SymplecticPotential::guillemin(domain(48));
    let mut control_ok = true;
    let mut tightest = f64::INFINITY;
    for cls in [o3(), AdmissibleClass::curve([1.0, 1.0], 20.0, 1.0, 2), AdmissibleClass::curve([2.0, 1.0], 24.0, 0.0, 0)] {
        for s in curvature_field(&fs, &cls)? {
            let rhs = control_rm_rhs(&cls, s.x)?;
            control_ok &= s.rm2_total <= rhs;
            tightest = tightest.min(rhs - s.rm2_total);
        }
    }
    Ok(Outcome::new(
        worst <= 1e-6 && control_ok,
        format!("max relative trace error {worst:.1e} over 150 points; |Rm|² bound holds at every N=48 node: {control_ok} (smallest slack {tightest:.4})"),
    ))
}

/// Agreement to `t` significant digits: relative error at most `5·10⁻ᵗ`.
const THREE_DIGITS: f64 = 5e-3;

fn rm_components(s: &CurvatureSample) -> Vec<f64> {
    let rm = s.rm_blocks.unwrap();
    let mut v = vec![rm.rm_00_00];
    v.extend(rm.rm_00_ij.iter().flatten());
    v.extend(rm.rm_ij_kl.iter().flatten().flatten().flatten());
    v
}

fn ric_components(s: &CurvatureSample) -> Vec<f64> {
    let ric = s.ric_blocks.unwrap();
    let mut v = vec![ric.ric_00];
    v.extend(ric.ric_ij.iter().flatten());
    v
}

/// `‖a − b‖ / ‖b‖`.
fn normwise(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let norm: f64 = b.iter().map(|y| y * y).sum();
    (diff / norm).sqrt()
}

fn c9_oracle() -> Result<Outcome> {
    let p = triangle();
    let d = domain(48);
    let cls = o3();
    let mut rng = rng(512);
    let mut worst: Vec<(&str, f64)> = ["abreu_scalar", "weighted_scalar", "fiber_riemann_norm", "|Rm|²", "Rm blocks", "Ric blocks"]
        .iter()
        .map(|n| (*n, 0.0))
        .collect();
    for _ in 0..10 {
        let c = random_correction(&mut rng, &p, 0.05);
        let f: Vec<f64> = (0..d.grid.len()).map(|k| c.value(d.grid.point(k))).collect();
        let u = SymplecticPotential::from_values(d.clone(), f)?;
        for s in &curvature_field(&u, &cls)? {
            let o = sample_from(&oracle_jet(&p, &|y| c.value(y), s.x), &cls)?;
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
            let errors = [
                rel(s.r_fiber, o.r_fiber),
                rel(s.r_weighted, o.r_weighted),
                rel(s.rm2_fiber, o.rm2_fiber),
                rel(s.rm2_total, o.rm2_total),
                normwise(&rm_components(s), &rm_components(&o)),
                normwise(&ric_components(s), &ric_components(&o)),
            ];
            for (w, e) in worst.iter_mut().zip(errors) {
                w.1 = w.1.max(e);
            }
        }
    }
    let max = worst.iter().map(|w| w.1).fold(0.0, f64::max);
    let detail: Vec<String> = worst.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect();
    Ok(Outcome::new(
        max <= THREE_DIGITS,
        format!("10 potentials at every N=48 node, max relative deviation: {}", detail.join(", ")),
    ))
}

fn main() -> ExitCode {
    type Check = (u32, &'static str, fn() -> Result<Outcome>);
    let checks: [Check; 6] = [
        (1, "FS golden values", c1_fs_golden),
        (2, "Hessian golden matrices", c2_hessian_golden),
        (3, "class constants", c3_class_constants),
        (4, "Yamabe/Sobolev chain", c4_sobolev_chain),
        (5, "fiber energy pipeline", c5_fiber_pipeline),
        (6, "flow fixed point", c6_fixed_point),
    ];
    let mut failures = 0;
    let mut report = |id: u32, name: &str, started: Instant, outcome: std::result::Result<Outcome, String>| {
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(o) => {
                failures += usize::from(!o.pass);
                println!("{} criterion {id:>2} {name} [{secs:.1}s]: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
            }
            Err(e) => {
                failures += 1;
                println!("FAIL criterion {id:>2} {name} [{secs:.1}s]: error {e}");
            }
        }
    };
    for (id, name, check) in checks {
        let started = Instant::now();
        report(id, name, started, check().map_err(|e| e.to_string()));
    }

    let started = Instant::now();
    let run = flow(Correction::bump(&triangle(), 0.05), 200, 1, 20);
    match &run {
        Ok((t, _)) => {
            let (pass, detail) = gradient_checks(t);
            report(7, "gradient-flow properties", started, Ok(Outcome::new(pass, detail)));
        }
        Err(e) => report(7, "gradient-flow properties", started, Err(e.to_string())),
    }
    let started = Instant::now();
    report(8, "curvature self-consistency", started, c8_self_consistency().map_err(|e| e.to_string()));
    let started = Instant::now();
    report(9, "oracle equivalence", started, c9_oracle().map_err(|e| e.to_string()));
    let started = Instant::now();
    let c10 = match &run {
        Ok((_, states)) => c10_sobolev_corroboration(states).map_err(|e| e.to_string()),
        Err(e) => Err(e.to_string()),
    };
    report(10, "Sobolev inequality corroboration", started, c10);

    println!("{} of 10 criteria passed", 10 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
