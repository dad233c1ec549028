//! Run configuration: a TOML document with top-level run settings and the
//! `[dtn]`, `[solver]` and `[initial]` sections. Every key is optional;
//! unknown keys are rejected.
//!
//! ```toml
//! n = 32
//! dt = 5e-4
//! t_end = 1.0
//!
//! [dtn]
//! nz = 257
//!
//! [initial]
//! preset = "random-smooth"
//! seed = 7
//! decay = 0.6
//! ```

use std::path::PathBuf;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::elliptic::DtnConfig;
use crate::error::{Error, Result};
use crate::galerkin::{auto_nx, GalerkinConfig, ResolventMethod};
use crate::spectral::SpectralField;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub n: usize,
    pub g: f64,
    pub dt: f64,
    pub t_end: f64,
    pub sample_interval: f64,
    pub output_dir: PathBuf,
    pub observables: Vec<Observable>,
    pub snapshots: SnapshotPolicy,
    pub dtn: DtnSection,
    pub solver: SolverSection,
    pub initial: InitialData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DtnSection {
    pub depth: f64,
    pub nz: usize,
    /// Horizontal grid; `0` selects the power of two at least `8n`.
    pub nx: usize,
    pub degree: usize,
    pub grading: f64,
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub resolvent: ResolventMethod,
    pub fused: bool,
    pub cfl_constant: f64,
    pub blowup_guard: f64,
}

/// Column groups written to the time series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// Energy breakdown and relative drift.
    Energy,
    /// Means and accumulated mean drift of η, ψ.
    Means,
    /// `‖θ − J_n G(η)ψ‖`
    Theta,
    /// `‖η‖_{H²}`, `‖ψ‖_{H¹}`, `‖G(η)ψ‖_{L²}`
    Norms,
    /// `‖G(η)ψ − |Dₓ|ψ‖` in `H^{−1/4}` and `L²`.
    Remainder,
    /// Strip-solver iterations per sample interval.
    Iterations,
}

impl Observable {
    pub const ALL: [Observable; 6] = [
        Observable::Energy,
        Observable::Means,
        Observable::Theta,
        Observable::Norms,
        Observable::Remainder,
        Observable::Iterations,
    ];
}

/// Which states are written as binary snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotPolicy {
    None,
    Final,
    Samples,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// `η = A cos(kx)`, `ψ = A_ψ cos(kx)`.
    SingleMode,
    /// `η = A cos(k₁x) + ½A sin(k₂x)`, `ψ = A cos(k₂x) + ½A sin(k₁x)`.
    TwoMode,
    /// Seeded coefficients of size `A·decay^|ξ|` for both η and ψ.
    RandomSmooth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialData {
    pub preset: Preset,
    pub amplitude: f64,
    /// ψ amplitude of the single-mode preset.
    pub psi_amplitude: f64,
    /// Mode of the single-mode preset, or the pair of the two-mode preset.
    pub modes: Vec<usize>,
    pub seed: u64,
    pub decay: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 32,
            g: 0.0,
            dt: 5e-4,
            t_end: 1.0,
            sample_interval: 0.05,
            output_dir: PathBuf::from("plateflow-out"),
            observables: Observable::ALL.to_vec(),
            snapshots: SnapshotPolicy::Final,
            dtn: DtnSection::default(),
            solver: SolverSection::default(),
            initial: InitialData::default(),
        }
    }
}

impl Default for DtnSection {
    fn default() -> Self {
        let d = DtnConfig::default();
        Self {
            depth: d.depth,
            nz: d.nz,
            nx: 0,
            degree: d.degree,
            grading: d.grading,
            tol: d.tol,
            max_iter: d.max_iter,
        }
    }
}

impl Default for SolverSection {
    fn default() -> Self {
        let g = GalerkinConfig::new(1);
        Self {
            cg_tol: g.cg_tol,
            cg_max_iter: g.cg_max_iter,
            resolvent: g.resolvent,
            fused: g.fused,
            cfl_constant: g.cfl_constant,
            blowup_guard: g.blowup_guard,
        }
    }
}

impl Default for InitialData {
    fn default() -> Self {
        Self {
            preset: Preset::TwoMode,
            amplitude: 0.05,
            psi_amplitude: 0.0,
            modes: vec![1, 2],
            seed: 1,
            decay: 0.6,
        }
    }
}

impl RunConfig {
    /// The integrator settings this run uses.
    pub fn galerkin(&self) -> GalerkinConfig {
        GalerkinConfig {
            n: self.n,
            g: self.g,
            dt: self.dt,
            t_end: self.t_end,
            dtn: DtnConfig {
                depth: self.dtn.depth,
                nz: self.dtn.nz,
                nx: if self.dtn.nx == 0 { auto_nx(self.n) } else { self.dtn.nx },
                degree: self.dtn.degree,
                grading: self.dtn.grading,
                tol: self.dtn.tol,
                max_iter: self.dtn.max_iter,
            },
            cg_tol: self.solver.cg_tol,
            cg_max_iter: self.solver.cg_max_iter,
            resolvent: self.solver.resolvent,
            fused: self.solver.fused,
            cfl_constant: self.solver.cfl_constant,
            blowup_guard: self.solver.blowup_guard,
            sample_interval: self.sample_interval,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: String| {
            Err(Error::Validation { key: key.to_string(), line: None, message })
        };
        let init = &self.initial;
        if !(init.amplitude.is_finite() && init.psi_amplitude.is_finite()) {
            return bad("initial.amplitude", "must be finite".into());
        }
        match init.preset {
            Preset::SingleMode if init.modes.is_empty() => {
                return bad("initial.modes", "single-mode needs one mode".into());
            }
            Preset::TwoMode if init.modes.len() != 2 => {
                return bad("initial.modes", format!("two-mode needs two modes, got {}", init.modes.len()));
            }
            Preset::RandomSmooth if !(init.decay > 0.0 && init.decay < 1.0) => {
                return bad("initial.decay", format!("must lie in (0, 1), got {}", init.decay));
            }
            _ => {}
        }
        if init.modes.contains(&0) {
            return bad("initial.modes", "modes must be positive".into());
        }
        if self.observables.is_empty() {
            return bad("observables", "select at least one observable".into());
        }
        self.galerkin().validate().map_err(|e| match e {
            Error::Validation { key, line, message } => {
                let key = match key.as_str() {
                    "depth" | "nz" | "nx" | "degree" | "grading" | "tol" | "max_iter" => format!("dtn.{key}"),
                    "cg_tol" | "cg_max_iter" | "resolvent" | "cfl_constant" | "blowup_guard" => {
                        format!("solver.{key}")
                    }
                    _ => key,
                };
                Error::Validation { key, line, message }
            }
            other => other,
        })
    }

    /// Initial `(η₀, ψ₀)` on the band `n`.
    pub fn initial_fields(&self) -> (SpectralField, SpectralField) {
        let n = self.n;
        let init = &self.initial;
        let a = init.amplitude;
        match init.preset {
            Preset::SingleMode => {
                let k = init.modes[0];
                (
                    SpectralField::cos_mode(n, k, a).with_max_mode(n),
                    SpectralField::cos_mode(n, k, init.psi_amplitude).with_max_mode(n),
                )
            }
            Preset::TwoMode => {
                let (k1, k2) = (init.modes[0], init.modes[1]);
                let eta = &SpectralField::cos_mode(n, k1, a) + &SpectralField::sin_mode(n, k2, 0.5 * a);
                let psi = &SpectralField::cos_mode(n, k2, a) + &SpectralField::sin_mode(n, k1, 0.5 * a);
                (eta.with_max_mode(n), psi.with_max_mode(n))
            }
            Preset::RandomSmooth => random_smooth_pair(n, a, init.decay, init.seed),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration serializes")
    }
}

/// Seeded pair of fields with `|û(ξ)| ≲ amplitude·decay^|ξ|` and zero mean.
pub fn random_smooth_pair(n: usize, amplitude: f64, decay: f64, seed: u64) -> (SpectralField, SpectralField) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); n + 1];
        for (k, c) in coeffs.iter_mut().enumerate().skip(1) {
            let scale = 0.5 * amplitude * decay.powi(k as i32);
            *c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale;
        }
        SpectralField::from_coeffs(coeffs)
    };
    let eta = draw();
    let psi = draw();
    (eta, psi)
}

/// Parses and validates a configuration. Errors carry the line of the
/// offending key where it can be located.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    if let Err(e) = text.parse::<toml::Table>() {
        let line = e.span().map(|s| line_of_offset(text, s.start)).unwrap_or(1);
        return Err(Error::Parse { line, message: e.message().to_string() });
    }
    let cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of_offset(text, s.start));
        let key = line.and_then(|l| key_on_line(text, l)).unwrap_or_default();
        Error::Validation { key, line, message: e.message().to_string() }
    })?;
    cfg.validate().map_err(|e| match e {
        Error::Validation { key, message, .. } => {
            let line = line_of_key(text, &key);
            Error::Validation { key, line, message }
        }
        other => other,
    })?;
    Ok(cfg)
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Dotted key assigned on line `line`, qualified by its section.
fn key_on_line(text: &str, line: usize) -> Option<String> {
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let l = raw.trim();
        if let Some(name) = l.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = Some(name.trim().to_string());
        }
        if i + 1 == line {
            let (lhs, _) = l.split_once('=')?;
            let key = lhs.trim();
            return Some(match &section {
                Some(s) => format!("{s}.{key}"),
                None => key.to_string(),
            });
        }
    }
    None
}

/// Line on which `section.key` (or a top-level `key`) is assigned.
fn line_of_key(text: &str, dotted: &str) -> Option<usize> {
    let (section, key) = match dotted.split_once('.') {
        Some((s, k)) => (Some(s), k),
        None => (None, dotted),
    };
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = Some(name.trim().to_string());
            continue;
        }
        let Some((lhs, _)) = line.split_once('=') else { continue };
        let lhs = lhs.trim();
        let matches = match (section, current.as_deref()) {
            (None, None) => lhs == key,
            (Some(s), Some(c)) => c == s && lhs == key,
            (Some(s), None) => lhs == format!("{s}.{key}"),
            _ => false,
        };
        if matches {
            return Some(i + 1);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(parse_config("").unwrap(), RunConfig::default());
    }

    #[test]
    fn top_level_keys_override_defaults() {
        let cfg = parse_config("n = 64\ndt = 1e-3\n").unwrap_err();
        // 1e-3 · 64² exceeds the default stability bound
        assert!(matches!(cfg, Error::Validation { ref key, line: Some(2), .. } if key == "dt"));
        let cfg = parse_config("n = 64\ndt = 5e-4\n").unwrap();
        assert_eq!(cfg.n, 64);
        assert_eq!(cfg.dt, 5e-4);
        assert_eq!(cfg.galerkin().dtn.nx, 512);
        assert_eq!(cfg.t_end, RunConfig::default().t_end);
    }

    #[test]
    fn negative_n_is_rejected_with_key() {
        match parse_config("n = -3").unwrap_err() {
            Error::Validation { key, line, .. } => {
                assert_eq!(key, "n");
                assert_eq!(line, Some(1));
            }
            other => panic!("unexpected {other:?}"),
        }
        match parse_config("t_end = 1.0\nn = 0").unwrap_err() {
            Error::Validation { key, line, .. } => {
                assert_eq!(key, "n");
                assert_eq!(line, Some(2));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse_config("n = 8\n\n[dtn]\nnz = 65\nwidth = 3\n").unwrap_err();
        match err {
            Error::Validation { key, line, message } => {
                assert_eq!(key, "dtn.width");
                assert_eq!(line, Some(5));
                assert!(message.contains("width"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_the_line() {
        match parse_config("n = 8\ndt = = 3\n").unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn section_errors_name_the_section_key() {
        match parse_config("[dtn]\n\nnz = 66\n").unwrap_err() {
            Error::Validation { key, line, .. } => {
                assert_eq!(key, "dtn.nz");
                assert_eq!(line, Some(3));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn round_trip_is_lossless() {
        let mut cfg = RunConfig::default();
        cfg.g = 9.81;
        cfg.dt = 1.0 / 3.0 * 1e-3;
        cfg.dtn.depth = std::f64::consts::PI * 3.0;
        cfg.initial.preset = Preset::RandomSmooth;
        cfg.initial.seed = u64::from(u32::MAX);
        cfg.observables = vec![Observable::Energy, Observable::Theta];
        cfg.solver.resolvent = ResolventMethod::Nested;
        let text = cfg.to_toml();
        assert_eq!(parse_config(&text).unwrap(), cfg);
    }

    #[test]
    fn presets_are_band_limited_and_seeded() {
        let mut cfg = RunConfig { n: 8, ..RunConfig::default() };
        cfg.initial.preset = Preset::RandomSmooth;
        let (a, b) = cfg.initial_fields();
        assert_eq!(a.max_mode(), 8);
        assert_eq!(a.mean(), 0.0);
        assert_eq!(cfg.initial_fields(), (a.clone(), b));
        cfg.initial.seed += 1;
        assert_ne!(cfg.initial_fields().0, a);
        cfg.initial.preset = Preset::SingleMode;
        cfg.initial.modes = vec![3];
        let (eta, psi) = cfg.initial_fields();
        assert!((eta.coeff(3).re - 0.025).abs() < 1e-16);
        assert_eq!(psi.l2_norm(), 0.0);
    }
}
