//! File formats: polytope and class JSON, run configurations, snapshot CSV
//! with a JSON sidecar, and the monitor CSV with optional plot data.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::curvature::AdmissibleClass;
use crate::error::{Error, Result};
use crate::flow::{BandViolation, FlowState, MonitorRecord, Observer, RunConfig};
use crate::polytope::{DelzantPolytope, Facet, PolytopeFile};
use crate::potential::{Domain, SymplecticPotential};

fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {what} {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{what} {}: {e}", path.display())))
}

/// Reads `{"facets": [{"normal": [1, 0], "offset": 1.0}, ...]}` and
/// validates the Delzant conditions.
pub fn load_polytope(path: &Path) -> Result<DelzantPolytope> {
    let file: PolytopeFile = read_json(path, "polytope file")?;
    DelzantPolytope::try_from(file)
}

pub fn save_polytope(path: &Path, polytope: &DelzantPolytope) -> Result<()> {
    let file = PolytopeFile::from(polytope.clone());
    fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

pub fn load_class(path: &Path) -> Result<AdmissibleClass> {
    read_json(path, "class file")
}

/// Reads and range-checks a run configuration. Relative paths inside it
/// are resolved against the configuration's directory.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let mut config: RunConfig = read_json(path, "run config")?;
    let base = path.parent().unwrap_or(Path::new("."));
    if config.polytope.is_relative() {
        config.polytope = base.join(&config.polytope);
    }
    if config.out_dir.is_relative() {
        config.out_dir = base.join(&config.out_dir);
    }
    config.validate()?;
    Ok(config)
}

/// One snapshot row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRow {
    pub i: i64,
    pub j: i64,
    pub x: f64,
    pub y: f64,
    pub f: f64,
}

/// Sidecar describing how to rebuild the grid of a snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotMeta {
    #[serde(rename = "N")]
    pub n: usize,
    pub delta_min: f64,
    pub accuracy: usize,
    pub t: f64,
    pub step: u64,
    pub facets: Vec<Facet>,
    /// SHA-256 of the CSV bytes, hex encoded.
    pub sha256: String,
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn snapshot_csv(u: &SymplecticPotential) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (node, &f) in u.grid().nodes().iter().zip(u.values()) {
        w.serialize(SnapshotRow { i: node.index[0], j: node.index[1], x: node.x[0], y: node.x[1], f })?;
    }
    w.into_inner().map_err(|e| Error::Internal(e.to_string()))
}

/// Writes `i,j,x,y,f` rows to `path` and the sidecar next to it.
pub fn write_snapshot(path: &Path, u: &SymplecticPotential, t: f64, step: u64) -> Result<()> {
    let bytes = snapshot_csv(u)?;
    let meta = SnapshotMeta {
        n: u.grid().n(),
        delta_min: u.grid().delta_min(),
        accuracy: u.domain().accuracy,
        t,
        step,
        facets: u.polytope().facets().to_vec(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    };
    fs::write(path, &bytes)?;
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub meta: SnapshotMeta,
    pub potential: SymplecticPotential,
}

/// Reads a snapshot and its sidecar, rebuilds the grid and checks that the
/// rows match it node for node.
pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let bytes = fs::read(path).map_err(|e| Error::Config(format!("cannot read snapshot {}: {e}", path.display())))?;
    let meta: SnapshotMeta = read_json(&sidecar_path(path), "snapshot sidecar")?;
    let digest = hex::encode(Sha256::digest(&bytes));
    if digest != meta.sha256 {
        return Err(Error::Config(format!(
            "snapshot {} does not match the hash recorded in its sidecar",
            path.display()
        )));
    }
    let polytope = DelzantPolytope::from_facets(meta.facets.clone())?;
    let domain = Domain::with_accuracy(&polytope, meta.n, meta.delta_min, meta.accuracy)?;
    let mut reader = csv::Reader::from_reader(bytes.as_slice());
    let mut f = vec![f64::NAN; domain.grid.len()];
    let mut seen = 0;
    for row in reader.deserialize::<SnapshotRow>() {
        let row = row?;
        let k = domain.grid.find([row.i, row.j]).ok_or_else(|| {
            Error::GridMismatch(format!("row ({}, {}) is not a node of the rebuilt grid", row.i, row.j))
        })?;
        let x = domain.grid.point(k);
        if (x[0] - row.x).abs() > 1e-9 || (x[1] - row.y).abs() > 1e-9 {
            return Err(Error::GridMismatch(format!("row ({}, {}) has coordinates ({}, {})", row.i, row.j, row.x, row.y)));
        }
        if !f[k].is_nan() {
            return Err(Error::GridMismatch(format!("duplicate row ({}, {})", row.i, row.j)));
        }
        f[k] = row.f;
        seen += 1;
    }
    if seen != domain.grid.len() {
        return Err(Error::GridMismatch(format!("{seen} rows for a grid of {} nodes", domain.grid.len())));
    }
    Ok(Snapshot { meta, potential: SymplecticPotential::from_values(domain, f)? })
}

/// Writes the monitor CSV, snapshots and band violations of a run as they
/// are produced, flushing after every record.
pub struct RunWriter {
    out_dir: PathBuf,
    monitor: csv::Writer<File>,
    violations: csv::Writer<File>,
    plots: Option<Vec<BufWriter<File>>>,
}

impl RunWriter {
    pub const MONITOR_FILE: &'static str = "monitor.csv";
    pub const VIOLATIONS_FILE: &'static str = "violations.csv";

    pub fn create(out_dir: &Path, emit_plots: bool) -> Result<Self> {
        fs::create_dir_all(out_dir.join("snapshots"))?;
        let mut monitor = csv::WriterBuilder::new()
            .has_headers(false)
            .from_path(out_dir.join(Self::MONITOR_FILE))?;
        monitor.write_record(MonitorRecord::COLUMNS)?;
        let violations = csv::Writer::from_path(out_dir.join(Self::VIOLATIONS_FILE))?;
        let plots = if emit_plots {
            let dir = out_dir.join("plots");
            fs::create_dir_all(&dir)?;
            let files = MonitorRecord::COLUMNS[1..]
                .iter()
                .map(|c| {
                    let mut w = BufWriter::new(File::create(dir.join(format!("{c}.dat")))?);
                    writeln!(w, "# t {c}")?;
                    Ok(w)
                })
                .collect::<Result<Vec<_>>>()?;
            Some(files)
        } else {
            None
        };
        Ok(Self { out_dir: out_dir.to_path_buf(), monitor, violations, plots })
    }

    pub fn snapshot_path(&self, step: u64) -> PathBuf {
        self.out_dir.join("snapshots").join(format!("snapshot_{step:07}.csv"))
    }

    pub fn finish(mut self) -> Result<()> {
        self.monitor.flush()?;
        self.violations.flush()?;
        if let Some(plots) = &mut self.plots {
            for w in plots {
                w.flush()?;
            }
        }
        Ok(())
    }
}

impl Observer for RunWriter {
    fn record(&mut self, record: &MonitorRecord) -> Result<()> {
        self.monitor.serialize(record)?;
        self.monitor.flush()?;
        if let Some(plots) = &mut self.plots {
            let r = record;
            let values = [
                r.calabi,
                r.dissipation,
                r.calabi_rate_residual.unwrap_or(f64::NAN),
                r.l2_u,
                r.boundary_u,
                r.min_hess_eig,
                r.max_d1,
                r.max_d2,
                r.max_d3,
                r.max_d4,
                r.dist_eps,
                r.q_d2_max,
                r.invariant_j,
                if r.positivity_ok { 1.0 } else { 0.0 },
            ];
            for (w, v) in plots.iter_mut().zip(values) {
                writeln!(w, "{:e} {:e}", r.t, v)?;
            }
        }
        Ok(())
    }

    fn snapshot(&mut self, state: &FlowState) -> Result<()> {
        write_snapshot(&self.snapshot_path(state.step_count), &state.u, state.t, state.step_count)
    }

    fn violation(&mut self, violation: &BandViolation) -> Result<()> {
        self.violations.serialize(violation)?;
        self.violations.flush()?;
        Ok(())
    }
}

/// Reads a monitor CSV back into records.
pub fn read_monitor(path: &Path) -> Result<Vec<MonitorRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header != MonitorRecord::COLUMNS {
        return Err(Error::Config(format!("unexpected monitor header {header:?}")));
    }
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{Correction, DerivativeProvider};

    fn bumped() -> SymplecticPotential {
        let p = DelzantPolytope::standard_triangle();
        let d = Domain::new(&p, 12, 0.125).unwrap();
        let u = SymplecticPotential::from_correction(d, Correction::bump(&p, 0.05), DerivativeProvider::FiniteDifference);
        u.with_provider(DerivativeProvider::FiniteDifference).unwrap()
    }

    #[test]
    fn snapshot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let u = bumped();
        write_snapshot(&path, &u, 0.5, 7).unwrap();
        let s = read_snapshot(&path).unwrap();
        assert_eq!(s.meta.step, 7);
        assert_eq!(s.potential.values(), u.values());
        assert!(s.potential.grid().same_layout(u.grid()));
    }

    #[test]
    fn tampered_snapshot_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        write_snapshot(&path, &bumped(), 0.0, 0).unwrap();
        let mut text = fs::read_to_string(&path).unwrap();
        text.push_str("0,0,0,0,0\n");
        fs::write(&path, text).unwrap();
        assert!(matches!(read_snapshot(&path), Err(Error::Config(_))));
    }

    #[test]
    fn polytope_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        save_polytope(&path, &DelzantPolytope::standard_triangle()).unwrap();
        let p = load_polytope(&path).unwrap();
        assert_eq!(p.vertices().len(), 3);
        fs::write(&path, r#"{"facets": [{"normal": [2, 0], "offset": 1.0}, {"normal": [0, 1], "offset": 1.0}, {"normal": [-1, -1], "offset": 1.0}]}"#).unwrap();
        assert!(load_polytope(&path).is_err());
    }

    #[test]
    fn monitor_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = RunWriter::create(dir.path(), true).unwrap();
        let rec = MonitorRecord {
            t: 0.0,
            calabi: 1.0,
            dissipation: 2.0,
            calabi_rate_residual: None,
            l2_u: 3.0,
            boundary_u: 4.0,
            min_hess_eig: 0.5,
            max_d1: 0.1,
            max_d2: 0.2,
            max_d3: 0.3,
            max_d4: 0.4,
            dist_eps: 0.3,
            q_d2_max: 0.7,
            invariant_j: 6.0,
            positivity_ok: true,
        };
        w.record(&rec).unwrap();
        w.record(&MonitorRecord { t: 1.0, calabi_rate_residual: Some(0.01), ..rec.clone() }).unwrap();
        w.finish().unwrap();
        let back = read_monitor(&dir.path().join(RunWriter::MONITOR_FILE)).unwrap();
        assert_eq!(back[0], rec);
        assert_eq!(back[1].calabi_rate_residual, Some(0.01));
        let plot = fs::read_to_string(dir.path().join("plots/calabi.dat")).unwrap();
        assert_eq!(plot.lines().count(), 3);
    }
}
