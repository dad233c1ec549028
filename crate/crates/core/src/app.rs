//! Command implementations behind the `plateflow` binary.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{parse_config, RunConfig, SnapshotPolicy};
use crate::diagnostics::{convergence_study, ConvergenceReport};
use crate::error::{Error, Result};
use crate::galerkin::{Integrator, Trajectory};
use crate::record::{save_snapshot, save_timeseries, Header, Row, RunRecord};

pub const TIMESERIES_FILE: &str = "timeseries.jsonl";
pub const FINAL_SNAPSHOT_FILE: &str = "final.plwv";
pub const CONVERGENCE_FILE: &str = "convergence.json";

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    parse_config(&text)
}

/// Files written by [`run`] and the trajectory they came from.
#[derive(Debug)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub timeseries: PathBuf,
    pub snapshots: Vec<PathBuf>,
}

/// Integrates `cfg` and writes the time series and snapshots to `out`.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<RunOutput> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    let mut integ = Integrator::new(&cfg.galerkin())?;
    let (eta0, psi0) = cfg.initial_fields();
    let state0 = integ.init_state(&eta0, &psi0)?;
    let mut rows = Vec::new();
    let mut snapshots = Vec::new();
    let mut write_error = None;
    let trajectory = integ.run_observed(&state0, |state, sample| {
        rows.push(Row::from_sample(sample, &cfg.observables));
        if cfg.snapshots == SnapshotPolicy::Samples && write_error.is_none() {
            let path = out.join(format!("snapshot_{:05}.plwv", snapshots.len()));
            match save_snapshot(&path, state) {
                Ok(()) => snapshots.push(path),
                Err(e) => write_error = Some(e),
            }
        }
    })?;
    if let Some(e) = write_error {
        return Err(e);
    }
    if cfg.snapshots == SnapshotPolicy::Final {
        let path = out.join(FINAL_SNAPSHOT_FILE);
        save_snapshot(&path, &trajectory.final_state)?;
        snapshots.push(path);
    }
    let record = RunRecord {
        header: Header::new(cfg, trajectory.status, trajectory.message.clone(), trajectory.steps),
        rows,
    };
    let timeseries = out.join(TIMESERIES_FILE);
    save_timeseries(&timeseries, &record)?;
    Ok(RunOutput { trajectory, timeseries, snapshots })
}

/// Parses a comma-separated list of truncations.
pub fn parse_truncations(text: &str) -> Result<Vec<usize>> {
    let bad = |message: String| Error::Validation { key: "truncations".into(), line: None, message };
    let values = text
        .split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|e| bad(format!("{s:?}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    if values.contains(&0) {
        return Err(bad("truncations must be positive".into()));
    }
    Ok(values)
}

/// Runs the truncation family from the data of `cfg` and writes the report
/// and one summary per member to `out`.
pub fn converge(cfg: &RunConfig, truncations: &[usize], out: &Path) -> Result<ConvergenceReport> {
    let n_max = truncations.iter().copied().max().ok_or_else(|| Error::Validation {
        key: "truncations".into(),
        line: None,
        message: "at least one truncation is required".into(),
    })?;
    let data_cfg = RunConfig { n: n_max, ..cfg.clone() };
    let (eta0, psi0) = data_cfg.initial_fields();
    let report = convergence_study(&eta0, &psi0, &cfg.galerkin(), truncations)?;
    fs::create_dir_all(out)?;
    fs::write(out.join(CONVERGENCE_FILE), to_json(&report)?)?;
    for m in &report.members {
        fs::write(out.join(format!("member_n{}.json", m.n)), to_json(m)?)?;
    }
    Ok(report)
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Format { line: None, message: e.to_string() })
}

/// Table of sup-in-time differences between consecutive truncations.
pub fn format_convergence(report: &ConvergenceReport) -> String {
    let mut out = format!(
        "{:>8} {:>8} {:>16} {:>16}\n",
        "n", "n_fine", "psi H^-1/2", format!("eta H^{}", 2.0 - report.eta_epsilon)
    );
    for p in &report.pairs {
        out.push_str(&format!("{:>8} {:>8} {:>16.6e} {:>16.6e}\n", p.n_coarse, p.n_fine, p.psi_sup, p.eta_sup));
    }
    out
}
