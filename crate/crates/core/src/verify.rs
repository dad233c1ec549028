//! Self-checks of the solver stack against closed-form values, run by
//! `plateflow verify`.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::config::random_smooth_pair;
use crate::diagnostics::crossing_period;
use crate::elliptic::{DtnConfig, DtnSolver};
use crate::error::{Error, Result};
use crate::galerkin::{linear_frequency, GalerkinConfig, Integrator, ResolventMethod, RunStatus};
use crate::spectral::SpectralField;
use crate::surface::{nonlinear_classical, nonlinear_classical_alt, nonlinear_term, shape_derivative_residual};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    /// Seconds; coarse grids only.
    Quick,
    /// Adds time-integration checks and a reference-resolution run.
    Full,
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quick" => Ok(Level::Quick),
            "full" => Ok(Level::Full),
            other => Err(Error::Validation {
                key: "level".into(),
                line: None,
                message: format!("expected quick or full, got {other:?}"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    AtMost,
    AtLeast,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub bound: Bound,
    pub threshold: f64,
    pub passed: bool,
    /// Error raised while computing the value.
    pub error: Option<String>,
}

impl Check {
    fn evaluate(name: &'static str, bound: Bound, threshold: f64, f: impl FnOnce() -> Result<f64>) -> Self {
        match f() {
            Ok(value) => {
                let passed = match bound {
                    Bound::AtMost => value <= threshold,
                    Bound::AtLeast => value >= threshold,
                };
                Self { name, value, bound, threshold, passed, error: None }
            }
            Err(e) => Self { name, value: f64::NAN, bound, threshold, passed: false, error: Some(e.to_string()) },
        }
    }
}

fn coarse_solver() -> Result<DtnSolver> {
    DtnSolver::new(&DtnConfig { nx: 64, nz: 129, ..DtnConfig::default() })
}

fn curved_surface() -> SpectralField {
    &SpectralField::cos_mode(16, 1, 0.1) + &SpectralField::sin_mode(16, 2, 0.04)
}

fn kappa(k: usize, h: f64) -> f64 {
    k as f64 * (k as f64 * h).tanh()
}

fn small_run_config(n: usize, nx: usize, nz: usize) -> GalerkinConfig {
    let mut cfg = GalerkinConfig::new(n);
    cfg.dtn.nx = nx;
    cfg.dtn.nz = nz;
    cfg
}

fn two_mode(n: usize, a: f64) -> (SpectralField, SpectralField) {
    let eta = &SpectralField::cos_mode(n, 1, a) + &SpectralField::sin_mode(n, 2, 0.5 * a);
    let psi = &SpectralField::cos_mode(n, 2, a) + &SpectralField::sin_mode(n, 1, 0.5 * a);
    (eta, psi)
}

/// Final relative energy drift of a run from the two-mode data.
fn energy_drift(cfg: &GalerkinConfig, amplitude: f64) -> Result<f64> {
    let (eta, psi) = two_mode(cfg.n, amplitude);
    let mut integ = Integrator::new(cfg)?;
    let s0 = integ.init_state(&eta, &psi)?;
    let traj = integ.run(&s0)?;
    if traj.status != RunStatus::Completed {
        return Err(Error::DegenerateInput(traj.message.unwrap_or_default()));
    }
    Ok(traj.samples.last().map(|s| s.energy_drift).unwrap_or(0.0))
}

/// Runs the checks of `level` and returns them in order.
pub fn run_checks(level: Level) -> Vec<Check> {
    use Bound::*;
    let mut checks = vec![
        Check::evaluate("flat symbol relative error", AtMost, 1e-9, || {
            let solver = coarse_solver()?;
            let h = solver.config().depth;
            Ok((1..=16)
                .map(|k| (solver.flat_symbol(k) - kappa(k, h)).abs() / kappa(k, h))
                .fold(0.0, f64::max))
        }),
        Check::evaluate("flat DtN relative error", AtMost, 1e-9, || {
            let solver = coarse_solver()?;
            let h = solver.config().depth;
            let u = &SpectralField::cos_mode(16, 2, 1.0) + &SpectralField::sin_mode(16, 5, 0.5);
            let got = solver.operator(&SpectralField::zeros(16)).apply_dtn(&u)?;
            let want = u.map_modes(|k| kappa(k, h));
            Ok((&got.with_max_mode(16) - &want).l2_norm() / want.l2_norm())
        }),
        Check::evaluate("DtN of a constant", AtMost, 1e-8, || {
            let solver = coarse_solver()?;
            Ok(solver.operator(&curved_surface()).apply_dtn(&SpectralField::constant(16, 1.0))?.l2_norm())
        }),
        Check::evaluate("DtN symmetry defect", AtMost, 1e-8, || {
            let solver = coarse_solver()?;
            let op = solver.operator(&curved_surface());
            let u = &SpectralField::cos_mode(16, 1, 1.0) + &SpectralField::sin_mode(16, 3, 0.3);
            let v = &SpectralField::sin_mode(16, 2, 1.0) + &SpectralField::cos_mode(16, 4, -0.7);
            let gu = op.apply_dtn(&u)?;
            let gv = op.apply_dtn(&v)?;
            Ok((gu.inner(&v) - u.inner(&gv)).abs() / (u.l2_norm() * gv.l2_norm()))
        }),
        Check::evaluate("DtN Rayleigh quotient", AtLeast, 0.0, || {
            let solver = coarse_solver()?;
            let op = solver.operator(&curved_surface());
            let (a, b) = random_smooth_pair(16, 1.0, 0.7, 3);
            let qa = op.apply_dtn(&a)?.inner(&a) / a.inner(&a);
            let qb = op.apply_dtn(&b)?.inner(&b) / b.inner(&b);
            Ok(qa.min(qb))
        }),
        Check::evaluate("shape derivative residual ratio", AtLeast, 3.0, || {
            let solver = coarse_solver()?;
            let eta = curved_surface();
            let psi = &SpectralField::cos_mode(16, 2, 1.0) + &SpectralField::sin_mode(16, 1, 0.5);
            let zeta = SpectralField::cos_mode(16, 3, 1.0);
            let r1 = shape_derivative_residual(&solver, &eta, &psi, &zeta, 1e-2)?;
            let r2 = shape_derivative_residual(&solver, &eta, &psi, &zeta, 5e-3)?;
            Ok(r1 / r2)
        }),
        Check::evaluate("resolvent coupled vs dense", AtMost, 1e-8, || {
            let eta = SpectralField::cos_mode(6, 1, 0.1);
            let rhs = &SpectralField::cos_mode(6, 2, 1.0) + &SpectralField::sin_mode(6, 5, 0.3);
            let mut out = Vec::new();
            for method in [ResolventMethod::Coupled, ResolventMethod::Dense] {
                let mut cfg = small_run_config(6, 32, 65);
                cfg.resolvent = method;
                out.push(Integrator::new(&cfg)?.resolvent_apply(&eta, &rhs)?.u);
            }
            Ok(out[0].max_coeff_diff(&out[1]))
        }),
        Check::evaluate("resolvent contraction", AtMost, 1.0, || {
            let (eta, rhs) = random_smooth_pair(6, 0.2, 0.6, 11);
            let cfg = small_run_config(6, 32, 65);
            Ok(Integrator::new(&cfg)?.resolvent_apply(&eta, &rhs)?.contraction)
        }),
        Check::evaluate("nonlinear term trace forms defect", AtMost, 1e-9, || {
            let solver = coarse_solver()?;
            let eta = curved_surface();
            let op = solver.operator(&eta);
            let psi = &SpectralField::cos_mode(16, 2, 1.0) + &SpectralField::sin_mode(16, 1, 0.4);
            let (phi, _) = op.extend(&psi, None)?;
            let traces = op.traces(&phi);
            let a = nonlinear_classical(&traces, &eta);
            let b = nonlinear_classical_alt(&traces, &eta);
            Ok((&a - &b).l2_norm() / a.l2_norm())
        }),
        Check::evaluate("nonlinear term flow-force defect", AtMost, 1e-6, || {
            let solver = coarse_solver()?;
            let eta = curved_surface();
            let op = solver.operator(&eta);
            let psi = &SpectralField::cos_mode(16, 2, 1.0) + &SpectralField::sin_mode(16, 1, 0.4);
            let (phi, _) = op.extend(&psi, None)?;
            let nt = nonlinear_term(&op, &phi, &op.traces(&phi));
            Ok(nt.discrepancy / nt.classical.l2_norm())
        }),
        Check::evaluate("short run energy drift", AtMost, 1e-7, || {
            let mut cfg = small_run_config(4, 32, 65);
            cfg.dt = 5e-3;
            cfg.t_end = 0.2;
            energy_drift(&cfg, 0.05)
        }),
        Check::evaluate("short run mean and theta defect", AtMost, 1e-7, || {
            let mut cfg = small_run_config(4, 32, 65);
            cfg.dt = 5e-3;
            cfg.t_end = 0.2;
            let (eta, psi) = two_mode(4, 0.05);
            let mut integ = Integrator::new(&cfg)?;
            let s0 = integ.init_state(&eta, &psi)?;
            let traj = integ.run(&s0)?;
            Ok(traj
                .samples
                .iter()
                .map(|s| s.theta_residual.max(s.mean_eta.abs()).max(s.mean_psi.abs()))
                .fold(0.0, f64::max))
        }),
    ];
    if level == Level::Full {
        checks.push(Check::evaluate("RK4 energy drift reduction per halving", AtLeast, 16.0, || {
            let mut cfg = small_run_config(4, 32, 33);
            cfg.t_end = 2.0;
            cfg.dt = 0.04;
            let coarse = energy_drift(&cfg, 0.05)?;
            cfg.dt = 0.02;
            let fine = energy_drift(&cfg, 0.05)?;
            Ok(coarse / fine)
        }));
        checks.push(Check::evaluate("linear period relative error", AtMost, 1e-4, || {
            let mut cfg = small_run_config(4, 16, 33);
            cfg.dt = 2e-3;
            let h = cfg.dtn.depth;
            let period = std::f64::consts::TAU / linear_frequency(1, cfg.g, h);
            let mut integ = Integrator::new(&cfg)?;
            let mut state =
                integ.init_state(&SpectralField::cos_mode(4, 1, 1e-4), &SpectralField::zeros(4))?;
            let steps = (1.4 * period / cfg.dt).ceil() as usize;
            let mut t = vec![0.0];
            let mut y = vec![state.eta.coeff(1).re];
            for i in 1..=steps {
                state = integ.rk4_step(&state)?.0;
                t.push(i as f64 * cfg.dt);
                y.push(state.eta.coeff(1).re);
            }
            let measured = crossing_period(&t, &y)
                .ok_or_else(|| Error::DegenerateInput("fewer than three zero crossings".into()))?;
            Ok((measured - period).abs() / period)
        }));
        checks.push(Check::evaluate("reference resolution energy drift", AtMost, 1e-8, || {
            let mut cfg = GalerkinConfig::new(32);
            cfg.dt = 5e-4;
            cfg.t_end = 0.01;
            energy_drift(&cfg, 0.05)
        }));
    }
    checks
}

/// Fixed-width table of the checks, one per line, with a verdict column.
pub fn format_table(checks: &[Check]) -> String {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  {:>11}  {:>13}  result", "check", "value", "bound");
    for c in checks {
        let bound = match c.bound {
            Bound::AtMost => format!("<= {:.2e}", c.threshold),
            Bound::AtLeast => format!(">= {:.2e}", c.threshold),
        };
        let verdict = if c.passed { "PASS" } else { "FAIL" };
        let _ = write!(out, "{:<width$}  {:>11.3e}  {:>13}  {verdict}", c.name, c.value, bound);
        if let Some(e) = &c.error {
            let _ = write!(out, "  ({e})");
        }
        out.push('\n');
    }
    out
}
