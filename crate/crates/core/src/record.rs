//! Run output: a JSON-lines time series (one header object, then one object
//! per sample) and binary state snapshots.
//!
//! Snapshot layout, little-endian throughout:
//!
//! | bytes | content |
//! |-------|---------|
//! | 4 | magic `PLWV` |
//! | 4 | `u32` format version |
//! | 4 | `u32` truncation `n` |
//! | 8 | `f64` time |
//! | 3 × 16(n+1) | `(re, im)` pairs of `η̂, ψ̂, θ̂` for `ξ = 0..=n` |

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{Observable, RunConfig};
use crate::error::{Error, Result};
use crate::galerkin::{RunStatus, Sample, SurfaceState};
use crate::spectral::SpectralField;

pub const TIMESERIES_VERSION: u32 = 1;
pub const SNAPSHOT_MAGIC: [u8; 4] = *b"PLWV";
pub const SNAPSHOT_VERSION: u32 = 1;

/// First line of a time-series file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    /// Always `"header"`.
    pub kind: String,
    pub format_version: u32,
    pub code_version: String,
    pub config: RunConfig,
    pub status: RunStatus,
    pub message: Option<String>,
    pub steps: usize,
    /// Row keys besides `t`, in file order.
    pub columns: Vec<String>,
}

impl Header {
    pub fn new(config: &RunConfig, status: RunStatus, message: Option<String>, steps: usize) -> Self {
        Self {
            kind: "header".into(),
            format_version: TIMESERIES_VERSION,
            code_version: env!("CARGO_PKG_VERSION").into(),
            config: config.clone(),
            status,
            message,
            steps,
            columns: columns(&config.observables),
        }
    }
}

/// One sample: the time and the selected observables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub t: f64,
    #[serde(flatten)]
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub header: Header,
    pub rows: Vec<Row>,
}

/// Column names contributed by each observable group.
pub fn observable_columns(obs: Observable) -> &'static [&'static str] {
    match obs {
        Observable::Energy => &[
            "energy",
            "energy_kinetic",
            "energy_plate_kinetic",
            "energy_bending",
            "energy_gravity",
            "energy_drift",
        ],
        Observable::Means => &["mean_eta", "mean_psi", "mean_drift_eta", "mean_drift_psi"],
        Observable::Theta => &["theta_residual"],
        Observable::Norms => &["eta_h2", "psi_h1", "g_psi_l2"],
        Observable::Remainder => &["remainder_h_quarter", "remainder_l2"],
        Observable::Iterations => &["cg_iterations"],
    }
}

pub fn columns(observables: &[Observable]) -> Vec<String> {
    let mut sorted = observables.to_vec();
    sorted.sort();
    sorted.dedup();
    sorted.iter().flat_map(|&o| observable_columns(o).iter().map(|s| s.to_string())).collect()
}

impl Row {
    pub fn from_sample(sample: &Sample, observables: &[Observable]) -> Self {
        let mut values = BTreeMap::new();
        for &obs in observables {
            let vals: Vec<f64> = match obs {
                Observable::Energy => vec![
                    sample.energy.total,
                    sample.energy.kinetic,
                    sample.energy.plate_kinetic,
                    sample.energy.bending,
                    sample.energy.gravity,
                    sample.energy_drift,
                ],
                Observable::Means => {
                    vec![sample.mean_eta, sample.mean_psi, sample.mean_drift_eta, sample.mean_drift_psi]
                }
                Observable::Theta => vec![sample.theta_residual],
                Observable::Norms => vec![sample.eta_h2, sample.psi_h1, sample.g_psi_l2],
                Observable::Remainder => vec![sample.remainder_h_quarter, sample.remainder_l2],
                Observable::Iterations => vec![sample.cg_iterations as f64],
            };
            for (name, v) in observable_columns(obs).iter().zip(vals) {
                values.insert(name.to_string(), v);
            }
        }
        Self { t: sample.t, values }
    }

    pub fn get(&self, column: &str) -> Option<f64> {
        if column == "t" {
            Some(self.t)
        } else {
            self.values.get(column).copied()
        }
    }
}

pub fn write_timeseries<W: Write>(mut w: W, record: &RunRecord) -> Result<()> {
    let line = serde_json::to_string(&record.header).map_err(json_error)?;
    writeln!(w, "{line}")?;
    for row in &record.rows {
        let line = serde_json::to_string(row).map_err(json_error)?;
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_timeseries<R: Read>(r: R) -> Result<RunRecord> {
    let mut lines = BufReader::new(r).lines().enumerate();
    let header: Header = loop {
        match lines.next() {
            None => return Err(Error::Format { line: None, message: "empty time series".into() }),
            Some((_, Ok(l))) if l.trim().is_empty() => continue,
            Some((i, l)) => {
                let l = l?;
                let h: Header = serde_json::from_str(&l)
                    .map_err(|e| Error::Format { line: Some(i + 1), message: format!("bad header: {e}") })?;
                if h.kind != "header" {
                    return Err(Error::Format {
                        line: Some(i + 1),
                        message: format!("expected kind \"header\", got {:?}", h.kind),
                    });
                }
                if h.format_version != TIMESERIES_VERSION {
                    return Err(Error::Format {
                        line: Some(i + 1),
                        message: format!(
                            "unsupported format version {} (supported: {TIMESERIES_VERSION})",
                            h.format_version
                        ),
                    });
                }
                break h;
            }
        }
    };
    let mut rows = Vec::new();
    for (i, l) in lines {
        let l = l?;
        if l.trim().is_empty() {
            continue;
        }
        let row: Row = serde_json::from_str(&l)
            .map_err(|e| Error::Format { line: Some(i + 1), message: format!("bad row: {e}") })?;
        rows.push(row);
    }
    Ok(RunRecord { header, rows })
}

pub fn save_timeseries(path: &Path, record: &RunRecord) -> Result<()> {
    write_timeseries(BufWriter::new(File::create(path)?), record)
}

pub fn load_timeseries(path: &Path) -> Result<RunRecord> {
    read_timeseries(File::open(path)?)
}

fn json_error(e: serde_json::Error) -> Error {
    Error::Format { line: None, message: e.to_string() }
}

pub fn write_snapshot<W: Write>(mut w: W, state: &SurfaceState) -> Result<()> {
    let n = u32::try_from(state.n)
        .map_err(|_| Error::Format { line: None, message: format!("truncation {} too large", state.n) })?;
    w.write_all(&SNAPSHOT_MAGIC)?;
    w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
    w.write_all(&n.to_le_bytes())?;
    w.write_all(&state.t.to_le_bytes())?;
    for field in [&state.eta, &state.psi, &state.theta] {
        let padded = field.with_max_mode(state.n);
        for c in padded.coeffs() {
            w.write_all(&c.re.to_le_bytes())?;
            w.write_all(&c.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<SurfaceState> {
    let truncated = |e: std::io::Error| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format { line: None, message: "truncated snapshot".into() },
        _ => Error::Io(e),
    };
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(truncated)?;
    if magic != SNAPSHOT_MAGIC {
        return Err(Error::Format { line: None, message: format!("bad magic {magic:?}, expected \"PLWV\"") });
    }
    let mut u = [0u8; 4];
    r.read_exact(&mut u).map_err(truncated)?;
    let version = u32::from_le_bytes(u);
    if version != SNAPSHOT_VERSION {
        return Err(Error::Format {
            line: None,
            message: format!("unsupported snapshot version {version} (supported: {SNAPSHOT_VERSION})"),
        });
    }
    r.read_exact(&mut u).map_err(truncated)?;
    let n = u32::from_le_bytes(u) as usize;
    let mut f = [0u8; 8];
    let mut read_f64 = |r: &mut R| -> Result<f64> {
        r.read_exact(&mut f).map_err(truncated)?;
        Ok(f64::from_le_bytes(f))
    };
    let t = read_f64(&mut r)?;
    let mut fields = Vec::with_capacity(3);
    for _ in 0..3 {
        let mut coeffs = Vec::with_capacity(n + 1);
        for _ in 0..=n {
            let re = read_f64(&mut r)?;
            let im = read_f64(&mut r)?;
            coeffs.push(Complex64::new(re, im));
        }
        fields.push(SpectralField::from_coeffs(coeffs));
    }
    let theta = fields.pop().expect("three fields");
    let psi = fields.pop().expect("three fields");
    let eta = fields.pop().expect("three fields");
    Ok(SurfaceState { n, t, eta, psi, theta })
}

pub fn save_snapshot(path: &Path, state: &SurfaceState) -> Result<()> {
    write_snapshot(BufWriter::new(File::create(path)?), state)
}

pub fn load_snapshot(path: &Path) -> Result<SurfaceState> {
    read_snapshot(BufReader::new(File::open(path)?))
}
