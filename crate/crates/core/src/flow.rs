//! Explicit time stepping of the Calabi flow `∂f/∂t = R̄ − R(u)` and the
//! monitors recorded along a run.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::path::PathBuf;

use nalgebra::Matrix2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::{weighted_scalar_from, AdmissibleClass};
use crate::energy::{calabi_energy, dissipation_from, report_from_fields, ClassConstants, CurvatureFields, EnergyReport};
use crate::error::{Error, Result};
use crate::grid::{Grid, NEIGHBORS8};
use crate::linalg::sym2_eigenvalues;
use crate::polytope::{DelzantPolytope, Point};
use crate::potential::{guillemin_jet, Correction, DerivativeProvider, Domain, SymplecticPotential};
use crate::stencil::{check_accuracy, DEFAULT_ACCURACY};

#[derive(Clone)]
pub struct FlowState {
    pub t: f64,
    pub u: SymplecticPotential,
    pub dt_last: f64,
    pub step_count: u64,
}

impl std::fmt::Debug for FlowState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FlowState")
            .field("t", &self.t)
            .field("dt_last", &self.dt_last)
            .field("step_count", &self.step_count)
            .field("nodes", &self.u.grid().len())
            .finish()
    }
}

impl FlowState {
    /// Starts a flow at `t = 0`; derivatives are taken by finite differences
    /// from here on.
    pub fn new(u: SymplecticPotential) -> Result<Self> {
        let u = u.with_provider(DerivativeProvider::FiniteDifference)?;
        Ok(Self { t: 0.0, u, dt_last: 0.0, step_count: 0 })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepPolicy {
    pub cfl_sigma: f64,
    pub max_rejections: usize,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self { cfl_sigma: 0.1, max_rejections: 10 }
    }
}

/// One row of the monitor file. Field order is the CSV column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorRecord {
    pub t: f64,
    pub calabi: f64,
    pub dissipation: f64,
    /// `|ΔCa/Δt + 2·dissipation| / max(dissipation, floor)` over the step
    /// ending at this record; absent on the first record.
    pub calabi_rate_residual: Option<f64>,
    pub l2_u: f64,
    pub boundary_u: f64,
    /// Smallest eigenvalue of `Hess u` on `P_ε`.
    pub min_hess_eig: f64,
    pub max_d1: f64,
    pub max_d2: f64,
    pub max_d3: f64,
    pub max_d4: f64,
    /// Grid-graph distance from the boundary ring of `P_ε` to `P_2ε`.
    pub dist_eps: f64,
    /// `max_{P_ε} |Rm|·d²(x, ∂P_ε)`.
    pub q_d2_max: f64,
    pub invariant_j: f64,
    pub positivity_ok: bool,
}

impl MonitorRecord {
    pub const COLUMNS: [&'static str; 15] = [
        "t",
        "calabi",
        "dissipation",
        "calabi_rate_residual",
        "l2_u",
        "boundary_u",
        "min_hess_eig",
        "max_d1",
        "max_d2",
        "max_d3",
        "max_d4",
        "dist_eps",
        "q_d2_max",
        "invariant_j",
        "positivity_ok",
    ];

    pub fn max_derivatives(&self) -> [f64; 4] {
        [self.max_d1, self.max_d2, self.max_d3, self.max_d4]
    }
}

/// Weighted scalar curvature at every node.
pub fn scalar_field(u: &SymplecticPotential, cls: &AdmissibleClass) -> Result<Vec<f64>> {
    let jets = u.inverse_hessian_field()?;
    Ok(jets.par_iter().map(|j| weighted_scalar_from(j, cls)).collect())
}

/// `R̄ − R(u)` at every node.
pub fn rhs(state: &FlowState, cls: &AdmissibleClass) -> Result<Vec<f64>> {
    let r_bar = ClassConstants::new(state.u.polytope(), cls).r_bar;
    Ok(scalar_field(&state.u, cls)?.into_iter().map(|r| r_bar - r).collect())
}

/// `σ h⁴ / (1 + max ‖Hess u⁻¹‖)²`.
pub fn stable_dt(h: f64, max_inverse_norm: f64, sigma: f64) -> f64 {
    sigma * h.powi(4) / (1.0 + max_inverse_norm).powi(2)
}

/// Evaluation of the scalar curvature at an accepted state.
#[derive(Clone, Debug)]
struct Evaluated {
    r: Vec<f64>,
    calabi: f64,
    dissipation: f64,
    max_inverse_norm: f64,
}

/// Single-writer RK4 driver that caches the curvature of the current state.
pub struct Stepper {
    cls: AdmissibleClass,
    consts: ClassConstants,
    policy: StepPolicy,
    current: Evaluated,
    previous: Option<(f64, f64, f64)>,
    rejections: usize,
}

impl Stepper {
    pub fn new(state: &FlowState, cls: &AdmissibleClass, policy: StepPolicy) -> Result<Self> {
        cls.validate(state.u.polytope())?;
        if !(policy.cfl_sigma > 0.0) || !policy.cfl_sigma.is_finite() {
            return Err(Error::InvalidArgument(format!("cfl_sigma must be positive, got {}", policy.cfl_sigma)));
        }
        let consts = ClassConstants::new(state.u.polytope(), cls);
        let current = evaluate(&state.u, cls, &consts)?;
        Ok(Self { cls: *cls, consts, policy, current, previous: None, rejections: 0 })
    }

    pub fn constants(&self) -> &ClassConstants {
        &self.consts
    }

    pub fn calabi(&self) -> f64 {
        self.current.calabi
    }

    pub fn dissipation(&self) -> f64 {
        self.current.dissipation
    }

    /// Total rejected attempts so far.
    pub fn rejections(&self) -> usize {
        self.rejections
    }

    /// The CFL step for the current state.
    pub fn dt(&self, state: &FlowState) -> f64 {
        stable_dt(state.u.grid().h(), self.current.max_inverse_norm, self.policy.cfl_sigma)
    }

    /// `Ca` may grow by this much without rejecting a step: summation
    /// roundoff of `Ca` plus that of a field `R` known to `1e-12·|R̄|`.
    fn energy_floor(&self) -> f64 {
        1e-12 * self.current.calabi + self.consts.weighted_volume * (1e-12 * self.consts.r_bar.abs().max(1.0)).powi(2)
    }

    /// Advances `state` by one accepted step of at most `dt_cap`.
    pub fn step(&mut self, state: &FlowState, dt_cap: Option<f64>) -> Result<FlowState> {
        let mut dt = self.dt(state);
        if let Some(cap) = dt_cap {
            dt = dt.min(cap);
        }
        let k1: Vec<f64> = self.current.r.iter().map(|r| self.consts.r_bar - r).collect();
        let floor = self.energy_floor();
        for _ in 0..self.policy.max_rejections {
            match self.attempt(state, &k1, dt) {
                Ok((u, eval)) if eval.calabi <= self.current.calabi + floor => {
                    self.previous = Some((state.t, self.current.calabi, self.current.dissipation));
                    self.current = eval;
                    return Ok(FlowState { t: state.t + dt, u, dt_last: dt, step_count: state.step_count + 1 });
                }
                Ok(_) => {}
                Err(e) if e.is_numerical() => {}
                Err(e) => return Err(e),
            }
            self.rejections += 1;
            dt *= 0.5;
        }
        Err(Error::Stiff {
            rejections: self.policy.max_rejections,
            t: state.t,
            last_good: Box::new(state.clone()),
        })
    }

    fn attempt(&self, state: &FlowState, k1: &[f64], dt: f64) -> Result<(SymplecticPotential, Evaluated)> {
        let f0 = state.u.values();
        let shifted = |k: &[f64], a: f64| -> Vec<f64> { f0.iter().zip(k).map(|(f, d)| f + a * d).collect() };
        let stage = |f: Vec<f64>| -> Result<Vec<f64>> {
            let u = state.u.with_values(f)?;
            Ok(scalar_field(&u, &self.cls)?.into_iter().map(|r| self.consts.r_bar - r).collect())
        };
        let k2 = stage(shifted(k1, 0.5 * dt))?;
        let k3 = stage(shifted(&k2, 0.5 * dt))?;
        let k4 = stage(shifted(&k3, dt))?;
        let f1: Vec<f64> = (0..f0.len())
            .map(|i| f0[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        if f1.iter().any(|v| !v.is_finite()) {
            return Err(Error::CurvatureUndefined { at: [f64::NAN; 2], reason: "non-finite update".into() });
        }
        let u = state.u.with_values(f1)?;
        let eval = evaluate(&u, &self.cls, &self.consts)?;
        if !eval.calabi.is_finite() {
            return Err(Error::CurvatureUndefined { at: [f64::NAN; 2], reason: "non-finite Calabi energy".into() });
        }
        Ok((u, eval))
    }

    /// `|ΔCa/Δt + (D₀ + D₁)| / max(D₁, floor)` over the last accepted step:
    /// the difference quotient and the trapezoidal dissipation are both
    /// centered at the step midpoint.
    pub fn rate_residual(&self, state: &FlowState) -> Option<f64> {
        let (t0, ca0, d0) = self.previous?;
        let dt = state.t - t0;
        if !(dt > 0.0) {
            return None;
        }
        let rate = (self.current.calabi - ca0) / dt;
        let d1 = self.current.dissipation;
        Some((rate + d0 + d1).abs() / d1.max(RESIDUAL_FLOOR))
    }
}

const RESIDUAL_FLOOR: f64 = 1e-10;

fn evaluate(u: &SymplecticPotential, cls: &AdmissibleClass, consts: &ClassConstants) -> Result<Evaluated> {
    let jets = u.inverse_hessian_field()?;
    let r: Vec<f64> = jets.par_iter().map(|j| weighted_scalar_from(j, cls)).collect();
    let max_inverse_norm = jets.iter().map(|j| sym2_eigenvalues(&j.h).1).fold(0.0, f64::max);
    let calabi = calabi_energy(u, cls, consts.r_bar, &r);
    let dissipation = dissipation_from(u, cls, &jets, &r);
    Ok(Evaluated { r, calabi, dissipation, max_inverse_norm })
}

/// One accepted step from a fresh evaluation of `state`.
pub fn step(state: &FlowState, cls: &AdmissibleClass, policy: StepPolicy) -> Result<FlowState> {
    Stepper::new(state, cls, policy)?.step(state, None)
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Frontier(f64, usize);

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Multi-source Dijkstra on the 8-neighbor grid graph; `edge(k, q)` is the
/// length of the edge between adjacent nodes.
pub fn graph_distances(grid: &Grid, sources: &[usize], edge: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; grid.len()];
    let mut heap = BinaryHeap::new();
    for &s in sources {
        dist[s] = 0.0;
        heap.push(Frontier(0.0, s));
    }
    while let Some(Frontier(d, k)) = heap.pop() {
        if d > dist[k] {
            continue;
        }
        let [i, j] = grid.node(k).index;
        for (di, dj) in NEIGHBORS8 {
            if let Some(q) = grid.find([i + di, j + dj]) {
                let nd = d + edge(k, q);
                if nd < dist[q] {
                    dist[q] = nd;
                    heap.push(Frontier(nd, q));
                }
            }
        }
    }
    dist
}

fn metric_length(dx: Point, g: &Matrix2<f64>) -> f64 {
    let q = g[(0, 0)] * dx[0] * dx[0] + 2.0 * g[(0, 1)] * dx[0] * dx[1] + g[(1, 1)] * dx[1] * dx[1];
    q.max(0.0).sqrt()
}

fn min_over(dist: &[f64], targets: &[usize]) -> Result<f64> {
    let d = targets.iter().map(|&k| dist[k]).fold(f64::INFINITY, f64::min);
    if d.is_finite() {
        Ok(d)
    } else {
        Err(Error::Internal("node sets are not connected in the grid graph".into()))
    }
}

/// Distance between node sets for the metric `hess(x)`, evaluated at edge
/// midpoints.
pub fn riemannian_distance_with(
    grid: &Grid,
    a: &[usize],
    b: &[usize],
    hess: impl Fn(Point) -> Matrix2<f64>,
) -> Result<f64> {
    check_sets(a, b)?;
    let dist = graph_distances(grid, a, |k, q| {
        let (x, y) = (grid.point(k), grid.point(q));
        metric_length([y[0] - x[0], y[1] - x[1]], &hess([0.5 * (x[0] + y[0]), 0.5 * (x[1] + y[1])]))
    });
    min_over(&dist, b)
}

fn check_sets(a: &[usize], b: &[usize]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("distance needs two nonempty node sets".into()));
    }
    Ok(())
}

/// Edge lengths `√(ΔxᵀHess u(mid)Δx)`; the Guillemin part is exact at the
/// midpoint, the correction part averages the two node Hessians.
fn potential_edges(u: &SymplecticPotential) -> Result<impl Fn(usize, usize) -> f64 + '_> {
    let grid = u.grid();
    let hf: Vec<Matrix2<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|k| u.correction_jet(k, 2).map(|j| j.hessian()))
        .collect::<Result<_>>()?;
    Ok(move |k: usize, q: usize| {
        let (x, y) = (grid.point(k), grid.point(q));
        let mid = [0.5 * (x[0] + y[0]), 0.5 * (x[1] + y[1])];
        let g = match guillemin_jet(u.polytope(), mid, 2) {
            Ok(j) => j.hessian() + 0.5 * (hf[k] + hf[q]),
            Err(_) => return f64::INFINITY,
        };
        metric_length([y[0] - x[0], y[1] - x[1]], &g)
    })
}

/// Shortest-path distance between node sets for the metric `Hess u`.
pub fn riemannian_distance(u: &SymplecticPotential, a: &[usize], b: &[usize]) -> Result<f64> {
    check_sets(a, b)?;
    let dist = graph_distances(u.grid(), a, potential_edges(u)?);
    min_over(&dist, b)
}

/// Node sets used by the interior monitors.
#[derive(Clone, Debug)]
pub struct MonitorRegions {
    pub eps: f64,
    pub p_eps: Vec<usize>,
    pub ring: Vec<usize>,
    pub p_2eps: Vec<usize>,
}

impl MonitorRegions {
    pub fn new(grid: &Grid, eps: f64) -> Result<Self> {
        let p_eps = grid.eps_region(eps);
        let p_2eps = grid.eps_region(2.0 * eps);
        if p_2eps.is_empty() {
            return Err(Error::InvalidArgument(format!("epsilon = {eps} leaves no grid node at distance 2ε from the boundary")));
        }
        let ring = grid.ring(&p_eps);
        Ok(Self { eps, p_eps, ring, p_2eps })
    }
}

/// Computes every monitor at `state`.
pub fn monitor(
    state: &FlowState,
    cls: &AdmissibleClass,
    consts: &ClassConstants,
    regions: &MonitorRegions,
) -> Result<(MonitorRecord, EnergyReport)> {
    let u = &state.u;
    let fields = CurvatureFields::compute(u, cls)?;
    let report = report_from_fields(u, cls, consts, &fields);
    let min_hess_eig = u.min_hessian_eigenvalue(&regions.p_eps)?;
    let all: Vec<usize> = (0..u.grid().len()).collect();
    let positivity_ok = u.min_hessian_eigenvalue(&all)? > 0.0;
    let mut max_d = [0.0f64; 4];
    for &k in &regions.p_eps {
        let jet = u.correction_jet(k, 4)?;
        for (order, m) in max_d.iter_mut().enumerate() {
            *m = m.max(jet.max_abs_of_order(order + 1));
        }
    }
    let dist = graph_distances(u.grid(), &regions.ring, potential_edges(u)?);
    let dist_eps = min_over(&dist, &regions.p_2eps)?;
    let q_d2_max = regions
        .p_eps
        .iter()
        .map(|&k| fields.samples[k].rm2_total.max(0.0).sqrt() * dist[k] * dist[k])
        .fold(0.0, f64::max);
    let record = MonitorRecord {
        t: state.t,
        calabi: report.calabi,
        dissipation: report.dissipation,
        calabi_rate_residual: None,
        l2_u: report.l2_u,
        boundary_u: report.boundary_u,
        min_hess_eig,
        max_d1: max_d[0],
        max_d2: max_d[1],
        max_d3: max_d[2],
        max_d4: max_d[3],
        dist_eps,
        q_d2_max,
        invariant_j: report.invariant_j,
        positivity_ok,
    };
    Ok((record, report))
}

/// Interior-estimate band `Hess u ≥ 1/C` and `|∂ᵏf| ≤ C` on `P_ε`, with `C`
/// the smallest constant satisfied at `t = 0` times a slack factor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessBand {
    pub c_initial: f64,
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandViolation {
    pub t: f64,
    pub witness: String,
    pub value: f64,
    pub bound: f64,
}

impl WitnessBand {
    pub fn from_initial(record: &MonitorRecord, slack: f64) -> Self {
        let c = record.max_derivatives().into_iter().fold(1.0 / record.min_hess_eig, f64::max);
        Self { c_initial: c, slack }
    }

    pub fn c(&self) -> f64 {
        self.c_initial * self.slack
    }

    pub fn violations(&self, record: &MonitorRecord) -> Vec<BandViolation> {
        let c = self.c();
        let mut out = Vec::new();
        let mut flag = |witness: String, value: f64, bound: f64, ok: bool| {
            if !ok {
                out.push(BandViolation { t: record.t, witness, value, bound });
            }
        };
        flag("min_hess_eig".into(), record.min_hess_eig, 1.0 / c, record.min_hess_eig >= 1.0 / c);
        for (k, v) in record.max_derivatives().into_iter().enumerate() {
            flag(format!("max_d{}", k + 1), v, c, v <= c);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    None,
    Bump,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    pub kind: PerturbationKind,
    #[serde(default)]
    pub amplitude: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "N")]
    pub n: usize,
    pub delta_min_factor: f64,
    /// Stencil accuracy order, 2 or 4.
    #[serde(default = "default_accuracy")]
    pub accuracy: usize,
}

fn default_accuracy() -> usize {
    DEFAULT_ACCURACY
}

fn default_slack() -> f64 {
    2.0
}

/// JSON run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub polytope: PathBuf,
    pub class: AdmissibleClass,
    pub grid: GridConfig,
    pub perturbation: PerturbationConfig,
    pub t_end: f64,
    pub cfl_sigma: f64,
    pub monitor_every: u64,
    pub snapshot_every: u64,
    pub epsilon: f64,
    pub out_dir: PathBuf,
    #[serde(default = "default_slack")]
    pub band_slack: f64,
    #[serde(default)]
    pub max_steps: Option<u64>,
}

impl RunConfig {
    /// Range checks that do not need the polytope file.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.grid.n < 4 {
            return bad(format!("grid.N must be at least 4, got {}", self.grid.n));
        }
        if !(self.grid.delta_min_factor > 0.0 && self.grid.delta_min_factor <= 1.0) {
            return bad(format!("grid.delta_min_factor must lie in (0, 1], got {}", self.grid.delta_min_factor));
        }
        if check_accuracy(self.grid.accuracy).is_err() {
            return bad(format!("grid.accuracy must be 2 or 4, got {}", self.grid.accuracy));
        }
        if !self.perturbation.amplitude.is_finite() {
            return bad("perturbation.amplitude must be finite".into());
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if !(self.cfl_sigma > 0.0 && self.cfl_sigma <= 1.0) {
            return bad(format!("cfl_sigma must lie in (0, 1], got {}", self.cfl_sigma));
        }
        if self.monitor_every == 0 || self.snapshot_every == 0 {
            return bad("monitor_every and snapshot_every must be positive".into());
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.band_slack >= 1.0) || !self.band_slack.is_finite() {
            return bad(format!("band_slack must be at least 1, got {}", self.band_slack));
        }
        if self.class.m > 1 {
            return bad(format!("class.m must be 0 or 1, got {}", self.class.m));
        }
        Ok(())
    }

    pub fn settings(&self) -> RunSettings {
        RunSettings {
            t_end: self.t_end,
            policy: StepPolicy { cfl_sigma: self.cfl_sigma, ..StepPolicy::default() },
            monitor_every: self.monitor_every,
            snapshot_every: self.snapshot_every,
            epsilon: self.epsilon,
            band_slack: self.band_slack,
            max_steps: self.max_steps,
        }
    }

    /// Builds the grid and the perturbed Guillemin potential at `t = 0`.
    pub fn initial_state(&self, polytope: &DelzantPolytope) -> Result<FlowState> {
        self.validate()?;
        self.class.validate(polytope).map_err(|e| Error::Config(e.to_string()))?;
        let (lo, hi) = polytope.bounding_box();
        let h = (hi[0] - lo[0]).max(hi[1] - lo[1]) / self.grid.n as f64;
        let domain = Domain::with_accuracy(polytope, self.grid.n, self.grid.delta_min_factor * h, self.grid.accuracy)?;
        let correction = match self.perturbation.kind {
            PerturbationKind::None => Correction::Zero,
            PerturbationKind::Bump => Correction::bump(polytope, self.perturbation.amplitude),
        };
        FlowState::new(SymplecticPotential::from_correction(domain, correction, DerivativeProvider::FiniteDifference))
    }
}

/// The numerical part of a run configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunSettings {
    pub t_end: f64,
    pub policy: StepPolicy,
    pub monitor_every: u64,
    pub snapshot_every: u64,
    pub epsilon: f64,
    pub band_slack: f64,
    pub max_steps: Option<u64>,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            t_end: f64::INFINITY,
            policy: StepPolicy::default(),
            monitor_every: 1,
            snapshot_every: u64::MAX,
            epsilon: 0.25,
            band_slack: 2.0,
            max_steps: None,
        }
    }
}

/// Receives records and snapshots as the run produces them.
pub trait Observer {
    fn record(&mut self, _record: &MonitorRecord) -> Result<()> {
        Ok(())
    }

    fn snapshot(&mut self, _state: &FlowState) -> Result<()> {
        Ok(())
    }

    fn violation(&mut self, _violation: &BandViolation) -> Result<()> {
        Ok(())
    }
}

pub struct NullObserver;

impl Observer for NullObserver {}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub records: Vec<MonitorRecord>,
    pub final_state: FlowState,
    pub final_report: EnergyReport,
    pub band: WitnessBand,
    pub violations: Vec<BandViolation>,
    pub rejections: usize,
}

/// Steps from `state` until `t_end` or `max_steps`, monitoring every
/// `monitor_every` accepted steps and at the end.
pub fn run_from(
    state: FlowState,
    cls: &AdmissibleClass,
    settings: &RunSettings,
    observer: &mut dyn Observer,
) -> Result<Trajectory> {
    if settings.monitor_every == 0 || settings.snapshot_every == 0 {
        return Err(Error::InvalidArgument("monitor and snapshot intervals must be positive".into()));
    }
    let regions = MonitorRegions::new(state.u.grid(), settings.epsilon)?;
    let mut stepper = Stepper::new(&state, cls, settings.policy)?;
    let consts = *stepper.constants();
    let (first, mut report) = monitor(&state, cls, &consts, &regions)?;
    let band = WitnessBand::from_initial(&first, settings.band_slack);
    observer.record(&first)?;
    observer.snapshot(&state)?;
    let mut records = vec![first];
    let mut violations = Vec::new();
    let mut state = state;
    let done = |s: &FlowState| {
        s.t >= settings.t_end * (1.0 - 1e-12) || settings.max_steps.is_some_and(|m| s.step_count >= m)
    };
    while !done(&state) {
        let cap = settings.t_end - state.t;
        state = stepper.step(&state, cap.is_finite().then_some(cap))?;
        let last = done(&state);
        if state.step_count % settings.monitor_every == 0 || last {
            let (mut rec, rep) = monitor(&state, cls, &consts, &regions)?;
            rec.calabi_rate_residual = stepper.rate_residual(&state);
            report = rep;
            for v in band.violations(&rec) {
                observer.violation(&v)?;
                violations.push(v);
            }
            observer.record(&rec)?;
            records.push(rec);
        }
        if state.step_count % settings.snapshot_every == 0 || last {
            observer.snapshot(&state)?;
        }
    }
    Ok(Trajectory { records, final_state: state, final_report: report, band, violations, rejections: stepper.rejections() })
}

/// Runs a configuration whose polytope has already been loaded.
pub fn run(
    config: &RunConfig,
    polytope: &DelzantPolytope,
    observer: &mut dyn Observer,
) -> Result<Trajectory> {
    let state = config.initial_state(polytope)?;
    run_from(state, &config.class, &config.settings(), observer)
}
