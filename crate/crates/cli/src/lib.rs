//! Subcommands of the `calabi` binary.

pub mod baseline;

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use calabi_core::curvature::sample_at;
use calabi_core::energy::{energy_report, EnergyReport};
use calabi_core::flow::{run, BandViolation};
use calabi_core::io::{load_class, load_config, load_polytope, read_snapshot, write_snapshot, RunWriter};
use calabi_core::potential::fs_inverse_hessian;
use calabi_core::sobolev::{certify, fiber_energy_bound, ClassTopology};
use calabi_core::{AdmissibleClass, Error, Result};

/// Process exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exit {
    Success = 0,
    CheckFailure = 1,
    ConfigError = 2,
    Numerical = 3,
}

impl Exit {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn for_error(e: &Error) -> Exit {
        match e {
            _ if e.is_numerical() => Exit::Numerical,
            Error::Config(_)
            | Error::Json(_)
            | Error::InvalidPolytope(_)
            | Error::InvalidArgument(_)
            | Error::Degenerate(_)
            | Error::Domain(_)
            | Error::Regime(_)
            | Error::GridMismatch(_)
            | Error::UnsupportedOrder(_) => Exit::ConfigError,
            _ => Exit::CheckFailure,
        }
    }
}

fn print_json(out: &mut dyn Write, value: &impl Serialize) -> Result<()> {
    writeln!(out, "{}", serde_json::to_string_pretty(value)?)?;
    Ok(())
}

pub fn cmd_baseline(out: &mut dyn Write, json: bool) -> Result<Exit> {
    let checks = baseline::run_checks(fs_inverse_hessian)?;
    if json {
        print_json(out, &checks)?;
    } else {
        write!(out, "{}", baseline::render_table(&checks))?;
    }
    Ok(if checks.iter().all(|c| c.pass) { Exit::Success } else { Exit::CheckFailure })
}

#[derive(Serialize)]
struct FlowSummary<'a> {
    out_dir: String,
    steps: u64,
    t: f64,
    records: usize,
    rejections: usize,
    band_c: f64,
    violations: &'a [BandViolation],
    final_report: &'a EnergyReport,
}

pub fn cmd_flow(out: &mut dyn Write, config_path: &Path, json: bool, emit_plots: bool) -> Result<Exit> {
    let config = load_config(config_path)?;
    let polytope = load_polytope(&config.polytope)?;
    let mut writer = RunWriter::create(&config.out_dir, emit_plots)?;
    let result = run(&config, &polytope, &mut writer);
    writer.finish()?;
    let trajectory = match result {
        Ok(t) => t,
        Err(Error::Stiff { rejections, t, last_good }) => {
            let path = config.out_dir.join("snapshots").join("last_good.csv");
            write_snapshot(&path, &last_good.u, last_good.t, last_good.step_count)?;
            return Err(Error::Stiff { rejections, t, last_good });
        }
        Err(e) => return Err(e),
    };
    let summary = FlowSummary {
        out_dir: config.out_dir.display().to_string(),
        steps: trajectory.final_state.step_count,
        t: trajectory.final_state.t,
        records: trajectory.records.len(),
        rejections: trajectory.rejections,
        band_c: trajectory.band.c(),
        violations: &trajectory.violations,
        final_report: &trajectory.final_report,
    };
    if json {
        print_json(out, &summary)?;
    } else {
        let r = summary.final_report;
        writeln!(out, "steps {}  t {:.6e}  records {}  rejections {}", summary.steps, summary.t, summary.records, summary.rejections)?;
        writeln!(out, "calabi {:.9e}  dissipation {:.9e}  R̄ {:.9}", r.calabi, r.dissipation, r.r_bar)?;
        writeln!(out, "total scalar {:.9}  invariant J {:.9}  L² u {:.9}", r.total_scalar, r.invariant_j, r.l2_u)?;
        writeln!(out, "band C {:.6}  violations {}", summary.band_c, summary.violations.len())?;
        writeln!(out, "output in {}", summary.out_dir)?;
    }
    Ok(Exit::Success)
}

fn class_or_trivial(path: Option<&Path>) -> Result<AdmissibleClass> {
    path.map(load_class).unwrap_or(Ok(AdmissibleClass::trivial()))
}

pub fn cmd_curvature(out: &mut dyn Write, snapshot: &Path, at: [f64; 2], class: Option<&Path>) -> Result<Exit> {
    let cls = class_or_trivial(class)?;
    let s = read_snapshot(snapshot)?;
    cls.validate(s.potential.polytope())?;
    if !s.potential.polytope().contains_interior(at) {
        return Err(Error::Domain(at));
    }
    print_json(out, &sample_at(&s.potential, &cls, at)?)?;
    Ok(Exit::Success)
}

pub fn cmd_energy(out: &mut dyn Write, snapshot: &Path, class: Option<&Path>) -> Result<Exit> {
    let cls = class_or_trivial(class)?;
    let s = read_snapshot(snapshot)?;
    print_json(out, &energy_report(&s.potential, &cls)?)?;
    Ok(Exit::Success)
}

pub fn cmd_sobolev_bound(out: &mut dyn Write, ca: f64, class: &Path) -> Result<Exit> {
    let cls = load_class(class)?;
    print_json(out, &certify(ca, &ClassTopology::o3(cls.chi_s))?)?;
    Ok(Exit::Success)
}

pub fn cmd_fiber_bound(out: &mut dyn Write, class: &Path) -> Result<Exit> {
    let cls = load_class(class)?;
    print_json(out, &fiber_energy_bound(&cls, &ClassTopology::o3(cls.chi_s))?)?;
    Ok(Exit::Success)
}
