//! The truncated evolution system and its time integration.
//!
//! With `f = (η, ψ, θ)` and `θ = ∂ₜη` the Galerkin system reads
//!
//! ```text
//! ∂ₜη = J_n G(η)ψ
//! ∂ₜψ = R_n(η)[Λ_n(∂ₜη) − J_n(N + Lη)]
//! ∂ₜθ = −∂ₜψ − J_n(N + Lη)
//! ```
//!
//! where `R_n(η) = (I + J_n G(η))⁻¹` on `L²_n`. The default right-hand side
//! folds the `G(η)(B∂ₜη)` part of `Λ_n` into the resolvent solve, so one
//! evaluation costs two strip solves; the unfused path applies `Λ_n` and
//! `R_n` separately and serves as a cross-check.

use std::cell::RefCell;
use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, EnergyBreakdown};
use crate::elliptic::{DtnConfig, DtnSolver, DtnTraces, StripField, SurfaceOperator};
use crate::error::{Error, Result};
use crate::fft;
use crate::krylov::{self, CgSettings, LinearOperator, Preconditioner};
use crate::spectral::{grid_size_at_least, Derivative, GridField, SpectralField};
use crate::surface::{self, lambda_apply, nonlinear_classical, plate_l};

/// How `R_n(η)` is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolventMethod {
    /// One SPD solve on the strip with the surface trace as an unknown.
    Coupled,
    /// Conjugate gradients on `L²_n`, one extension solve per iteration.
    Nested,
    /// Dense assembly of `J_n G(η) J_n` (symmetrized) and Cholesky; `n ≤ 32`.
    Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinConfig {
    /// Truncation index.
    pub n: usize,
    /// Gravity.
    pub g: f64,
    pub dt: f64,
    pub t_end: f64,
    pub dtn: DtnConfig,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub resolvent: ResolventMethod,
    /// Fold `G(η)(B∂ₜη)` into the resolvent solve.
    pub fused: bool,
    /// Upper bound for `dt·n²`.
    pub cfl_constant: f64,
    /// `BlowUp` is raised when `‖η‖ + ‖ψ‖ + ‖θ‖` exceeds this.
    pub blowup_guard: f64,
    /// Time between recorded samples.
    pub sample_interval: f64,
}

impl GalerkinConfig {
    /// Defaults for truncation `n` with the horizontal grid sized to `8n`.
    pub fn new(n: usize) -> Self {
        Self {
            n,
            g: 0.0,
            dt: 1e-3,
            t_end: 1.0,
            dtn: DtnConfig { nx: auto_nx(n), ..DtnConfig::default() },
            cg_tol: 1e-10,
            cg_max_iter: 200,
            resolvent: ResolventMethod::Coupled,
            fused: true,
            cfl_constant: 2.5,
            blowup_guard: 1e6,
            sample_interval: 0.05,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: String| {
            Err(Error::Validation { key: key.to_string(), line: None, message })
        };
        if self.n == 0 {
            return bad("n", "must be positive".into());
        }
        if !(self.g >= 0.0) || !self.g.is_finite() {
            return bad("g", format!("must be finite and ≥ 0, got {}", self.g));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad("dt", format!("must be positive, got {}", self.dt));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return bad("t_end", format!("must be finite and ≥ 0, got {}", self.t_end));
        }
        let cfl = self.dt * (self.n * self.n) as f64;
        if cfl > self.cfl_constant {
            return bad(
                "dt",
                format!("dt·n² = {cfl:.3} exceeds the stability bound {}", self.cfl_constant),
            );
        }
        if !(self.cg_tol > 0.0 && self.cg_tol < 1.0) {
            return bad("cg_tol", format!("must lie in (0, 1), got {}", self.cg_tol));
        }
        if self.cg_max_iter == 0 {
            return bad("cg_max_iter", "must be positive".into());
        }
        if !(self.blowup_guard > 0.0) {
            return bad("blowup_guard", "must be positive".into());
        }
        if !(self.sample_interval > 0.0) {
            return bad("sample_interval", "must be positive".into());
        }
        self.dtn.validate()?;
        if self.dtn.working_band() < self.n {
            return bad(
                "nx",
                format!("nx = {} is too small for n = {}; need nx ≥ 4n", self.dtn.nx, self.n),
            );
        }
        if self.resolvent == ResolventMethod::Dense && self.n > 32 {
            return bad("resolvent", "dense assembly is limited to n ≤ 32".into());
        }
        Ok(())
    }

    fn cg_settings(&self) -> CgSettings {
        CgSettings { tol: self.cg_tol, max_iter: self.cg_max_iter }
    }
}

/// Horizontal grid for truncation `n`: the power of two at least `8n`, and
/// at least 32.
pub fn auto_nx(n: usize) -> usize {
    grid_size_at_least((8 * n).max(32))
}

/// The Galerkin triple at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceState {
    pub n: usize,
    pub t: f64,
    pub eta: SpectralField,
    pub psi: SpectralField,
    pub theta: SpectralField,
}

impl SurfaceState {
    pub fn zeros(n: usize) -> Self {
        let z = SpectralField::zeros(n);
        Self { n, t: 0.0, eta: z.clone(), psi: z.clone(), theta: z }
    }

    /// `‖η‖ + ‖ψ‖ + ‖θ‖` in `L²`.
    pub fn norm(&self) -> f64 {
        self.eta.l2_norm() + self.psi.l2_norm() + self.theta.l2_norm()
    }

    pub fn is_finite(&self) -> bool {
        self.eta.is_finite() && self.psi.is_finite() && self.theta.is_finite()
    }

    fn axpy(&self, a: f64, d: &StateDerivative) -> Self {
        Self {
            n: self.n,
            t: self.t,
            eta: self.eta.axpy(a, &d.d_eta),
            psi: self.psi.axpy(a, &d.d_psi),
            theta: self.theta.axpy(a, &d.d_theta),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateDerivative {
    pub d_eta: SpectralField,
    pub d_psi: SpectralField,
    pub d_theta: SpectralField,
}

/// Outcome of [`Integrator::resolvent_apply`].
#[derive(Debug, Clone)]
pub struct ResolventSolve {
    pub u: SpectralField,
    /// CG iterations of the resolvent problem (zero for dense assembly).
    pub iterations: usize,
    /// `‖u‖ / ‖rhs‖` (zero for a zero right-hand side).
    pub contraction: f64,
}

/// Terminal status of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Blowup,
    SolverFailure,
}

impl std::fmt::Display for RunStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RunStatus::Completed => "completed",
            RunStatus::Blowup => "blowup",
            RunStatus::SolverFailure => "solver_failure",
        })
    }
}

/// Observables recorded at one sample time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub energy: EnergyBreakdown,
    /// `|𝓔(t) − 𝓔(0)| / 𝓔(0)`
    pub energy_drift: f64,
    pub mean_eta: f64,
    pub mean_psi: f64,
    /// Sum over all steps so far of the mean drift removed after each step.
    pub mean_drift_eta: f64,
    pub mean_drift_psi: f64,
    /// `‖θ − J_n G(η)ψ‖_{L²}`
    pub theta_residual: f64,
    pub eta_h2: f64,
    pub psi_h1: f64,
    pub g_psi_l2: f64,
    /// `‖G(η)ψ − |Dₓ|ψ‖` in `H^{−1/4}` and `L²`.
    pub remainder_h_quarter: f64,
    pub remainder_l2: f64,
    /// Strip-solver iterations since the previous sample.
    pub cg_iterations: usize,
}

/// Samples and final state of a run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub status: RunStatus,
    /// Diagnostic for a run that did not complete.
    pub message: Option<String>,
    pub final_state: SurfaceState,
    pub steps: usize,
}

/// Time stepper owning the strip solver and warm starts.
pub struct Integrator {
    cfg: GalerkinConfig,
    solver: Arc<DtnSolver>,
    warm_ext: Option<StripField>,
    warm_res: Option<StripField>,
    iterations: usize,
}

impl Integrator {
    pub fn new(cfg: &GalerkinConfig) -> Result<Self> {
        cfg.validate()?;
        let solver = Arc::new(DtnSolver::new(&cfg.dtn)?);
        Ok(Self::with_solver(cfg, solver))
    }

    /// Reuses an existing solver; its configuration must match `cfg.dtn`.
    pub fn with_solver(cfg: &GalerkinConfig, solver: Arc<DtnSolver>) -> Self {
        Self { cfg: cfg.clone(), solver, warm_ext: None, warm_res: None, iterations: 0 }
    }

    pub fn config(&self) -> &GalerkinConfig {
        &self.cfg
    }

    pub fn solver(&self) -> &DtnSolver {
        &self.solver
    }

    /// Strip-solver iterations accumulated so far.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    fn band(&self) -> usize {
        self.cfg.dtn.working_band()
    }

    /// Extension of `psi` below `op.eta()` with traces, warm-started from
    /// the previous call.
    fn extend(&mut self, op: &SurfaceOperator<'_>, psi: &SpectralField) -> Result<(StripField, DtnTraces)> {
        let (phi, out) = op.extend(psi, self.warm_ext.as_ref())?;
        self.iterations += out.iterations;
        let traces = op.traces(&phi);
        self.warm_ext = Some(phi.clone());
        Ok((phi, traces))
    }

    /// Traces of `ψ` below `η`.
    pub fn traces(&mut self, eta: &SpectralField, psi: &SpectralField) -> Result<DtnTraces> {
        let solver = self.solver.clone();
        let op = solver.operator(eta);
        Ok(self.extend(&op, psi)?.1)
    }

    /// Projects, removes means and sets `θ₀ = J_n G(η₀)ψ₀`.
    pub fn init_state(&mut self, eta0: &SpectralField, psi0: &SpectralField) -> Result<SurfaceState> {
        let n = self.cfg.n;
        let eta = eta0.project(n).with_max_mode(n).remove_mean();
        let psi = psi0.project(n).with_max_mode(n).remove_mean();
        let traces = self.traces(&eta, &psi)?;
        let theta = traces.g_psi.project(n).with_max_mode(n);
        Ok(SurfaceState { n, t: 0.0, eta, psi, theta })
    }

    /// `R_n(η) rhs` with the configured method.
    pub fn resolvent_apply(&mut self, eta: &SpectralField, rhs: &SpectralField) -> Result<ResolventSolve> {
        let n = self.cfg.n;
        let rhs = rhs.project(n).with_max_mode(n);
        let solver = self.solver.clone();
        let op = solver.operator(eta);
        let (u, iterations) = match self.cfg.resolvent {
            ResolventMethod::Coupled => {
                let (u, phi, out) =
                    op.resolvent_coupled(&rhs, n, self.cfg.cg_settings(), self.warm_res.as_ref())?;
                self.warm_res = Some(phi);
                self.iterations += out.iterations;
                (u, out.iterations)
            }
            ResolventMethod::Nested => {
                let (u, outer, inner) = resolvent_nested(&op, &rhs, n, self.cfg.cg_settings())?;
                self.iterations += inner;
                (u, outer)
            }
            ResolventMethod::Dense => (resolvent_dense(&op, &rhs, n)?, 0),
        };
        let r = rhs.l2_norm();
        let contraction = if r > 0.0 { u.l2_norm() / r } else { 0.0 };
        Ok(ResolventSolve { u: u.with_max_mode(n), iterations, contraction })
    }

    /// `∂ₜf` at `state`.
    pub fn rhs_eval(&mut self, state: &SurfaceState) -> Result<StateDerivative> {
        let n = self.cfg.n;
        let band = self.band();
        let solver = self.solver.clone();
        let op = solver.operator(&state.eta);
        let (_, traces) = self.extend(&op, &state.psi)?;
        let d_eta = traces.g_psi.project(n).with_max_mode(n);
        let forcing = (&nonlinear_classical(&traces, &state.eta) + &plate_l(&state.eta, self.cfg.g))
            .project(n)
            .with_max_mode(n);

        let d_psi = if self.cfg.fused && self.cfg.resolvent == ResolventMethod::Coupled {
            let vu = surface::product(&traces.v, &d_eta, band);
            let s = (&vu.derivative(Derivative::Dx).project(n).with_max_mode(n)) - &forcing;
            let lift = surface::product(&traces.b, &d_eta, band);
            let (u, phi, out) =
                op.resolvent_shifted(&s, Some(&lift), n, self.cfg.cg_settings(), self.warm_res.as_ref())?;
            self.iterations += out.iterations;
            self.warm_res = Some(phi);
            u.with_max_mode(n)
        } else {
            let lam = lambda_apply(&op, &traces, &d_eta, n)?;
            self.resolvent_apply(&state.eta, &(&lam - &forcing))?.u
        };
        let d_theta = &(-&d_psi) - &forcing;
        Ok(StateDerivative { d_eta, d_psi, d_theta })
    }

    /// `J_n G(η)(∂ₜψ) − Λ_n(∂ₜη)`: the third row of the augmented system,
    /// equal to `d_theta` in exact arithmetic.
    pub fn d_theta_from_g(&mut self, state: &SurfaceState, d: &StateDerivative) -> Result<SpectralField> {
        let n = self.cfg.n;
        let solver = self.solver.clone();
        let op = solver.operator(&state.eta);
        let (_, traces) = self.extend(&op, &state.psi)?;
        let g = op.apply_dtn(&d.d_psi)?.project(n).with_max_mode(n);
        let lam = lambda_apply(&op, &traces, &d.d_eta, n)?;
        Ok(&g - &lam)
    }

    /// One classical RK4 step followed by mean re-zeroing. Returns the new
    /// state and the mean drift `(η, ψ)` that was removed.
    pub fn rk4_step(&mut self, state: &SurfaceState) -> Result<(SurfaceState, f64, f64)> {
        let dt = self.cfg.dt;
        let k1 = self.rhs_eval(state)?;
        let k2 = self.rhs_eval(&state.axpy(0.5 * dt, &k1))?;
        let k3 = self.rhs_eval(&state.axpy(0.5 * dt, &k2))?;
        let k4 = self.rhs_eval(&state.axpy(dt, &k3))?;
        let combine = |a: &SpectralField, b1: &SpectralField, b2: &SpectralField, b3: &SpectralField, b4: &SpectralField| {
            let mut coeffs = a.coeffs().to_vec();
            for (k, c) in coeffs.iter_mut().enumerate() {
                let inc = b1.coeffs()[k] + (b2.coeffs()[k] + b3.coeffs()[k]) * 2.0 + b4.coeffs()[k];
                *c += inc * (dt / 6.0);
            }
            SpectralField::from_coeffs(coeffs)
        };
        let eta = combine(&state.eta, &k1.d_eta, &k2.d_eta, &k3.d_eta, &k4.d_eta);
        let psi = combine(&state.psi, &k1.d_psi, &k2.d_psi, &k3.d_psi, &k4.d_psi);
        let theta = combine(&state.theta, &k1.d_theta, &k2.d_theta, &k3.d_theta, &k4.d_theta);
        let (drift_eta, drift_psi) = (eta.mean(), psi.mean());
        let next = SurfaceState {
            n: state.n,
            t: state.t + dt,
            eta: eta.remove_mean(),
            psi: psi.remove_mean(),
            theta: theta.remove_mean(),
        };
        let norm = next.norm();
        if !next.is_finite() || norm > self.cfg.blowup_guard {
            return Err(Error::BlowUp { t: next.t, norm });
        }
        Ok((next, drift_eta, drift_psi))
    }

    /// Observables at `state`.
    pub fn sample(&mut self, state: &SurfaceState, e0: Option<f64>, drift: (f64, f64)) -> Result<Sample> {
        let n = self.cfg.n;
        let traces = self.traces(&state.eta, &state.psi)?;
        let energy = diagnostics::energy(state, &traces, self.cfg.g);
        let e0 = e0.unwrap_or(energy.total);
        let energy_drift = if e0 != 0.0 { (energy.total - e0).abs() / e0.abs() } else { energy.total.abs() };
        let theta_residual = (&state.theta - &traces.g_psi.project(n)).l2_norm();
        let remainder = &traces.g_psi - &traces.psi.derivative(Derivative::AbsD);
        let iterations = std::mem::take(&mut self.iterations);
        Ok(Sample {
            t: state.t,
            energy,
            energy_drift,
            mean_eta: state.eta.mean(),
            mean_psi: state.psi.mean(),
            mean_drift_eta: drift.0,
            mean_drift_psi: drift.1,
            theta_residual,
            eta_h2: state.eta.sobolev_norm(2.0, false),
            psi_h1: state.psi.sobolev_norm(1.0, false),
            g_psi_l2: traces.g_psi.l2_norm(),
            remainder_h_quarter: remainder.sobolev_norm(-0.25, false),
            remainder_l2: remainder.l2_norm(),
            cg_iterations: iterations,
        })
    }

    /// Steps from `state0` to `t_end`, sampling every `sample_interval`.
    /// Solver failures and blow-up end the run early with the samples
    /// gathered so far.
    pub fn run(&mut self, state0: &SurfaceState) -> Result<Trajectory> {
        self.run_observed(state0, |_, _| {})
    }

    /// As [`Integrator::run`], handing each sampled state to `observe`.
    pub fn run_observed(
        &mut self,
        state0: &SurfaceState,
        mut observe: impl FnMut(&SurfaceState, &Sample),
    ) -> Result<Trajectory> {
        let dt = self.cfg.dt;
        let total = (self.cfg.t_end / dt).round() as usize;
        let every = ((self.cfg.sample_interval / dt).round() as usize).max(1);
        let first = self.sample(state0, None, (0.0, 0.0))?;
        observe(state0, &first);
        let e0 = first.energy.total;
        let mut samples = vec![first];
        let mut state = state0.clone();
        let mut drift = (0.0, 0.0);
        let mut status = RunStatus::Completed;
        let mut message = None;
        let mut steps = 0;
        while steps < total {
            match self.rk4_step(&state) {
                Ok((next, de, dp)) => {
                    steps += 1;
                    drift.0 += de.abs();
                    drift.1 += dp.abs();
                    state = next;
                    state.t = steps as f64 * dt;
                }
                Err(e) => {
                    status = match e {
                        Error::BlowUp { .. } => RunStatus::Blowup,
                        _ => RunStatus::SolverFailure,
                    };
                    message = Some(e.to_string());
                    break;
                }
            }
            if steps % every == 0 || steps == total {
                match self.sample(&state, Some(e0), drift) {
                    Ok(s) => {
                        observe(&state, &s);
                        samples.push(s);
                    }
                    Err(e) => {
                        status = RunStatus::SolverFailure;
                        message = Some(e.to_string());
                        break;
                    }
                }
            }
        }
        Ok(Trajectory { samples, status, message, final_state: state, steps })
    }
}

/// `θ₀ = J_n G(η₀)ψ₀` and mean-free projections of the data.
pub fn init_state(eta0: &SpectralField, psi0: &SpectralField, cfg: &GalerkinConfig) -> Result<SurfaceState> {
    Integrator::new(cfg)?.init_state(eta0, psi0)
}

/// `R_n(η) rhs`.
pub fn resolvent_apply(eta: &SpectralField, rhs: &SpectralField, cfg: &GalerkinConfig) -> Result<SpectralField> {
    Ok(Integrator::new(cfg)?.resolvent_apply(eta, rhs)?.u)
}

pub fn rhs_eval(state: &SurfaceState, cfg: &GalerkinConfig) -> Result<StateDerivative> {
    Integrator::new(cfg)?.rhs_eval(state)
}

pub fn rk4_step(state: &SurfaceState, cfg: &GalerkinConfig) -> Result<SurfaceState> {
    Ok(Integrator::new(cfg)?.rk4_step(state)?.0)
}

pub fn run_simulation(state0: &SurfaceState, cfg: &GalerkinConfig) -> Result<Trajectory> {
    Integrator::new(cfg)?.run(state0)
}

/// `u + J_n G(η) u` on surface grid rows confined to `L²_n`.
struct ResolventOp<'a, 'b> {
    op: &'b SurfaceOperator<'a>,
    n: usize,
    warm: RefCell<Option<StripField>>,
    failure: RefCell<Option<Error>>,
    iterations: RefCell<usize>,
}

impl LinearOperator for ResolventOp<'_, '_> {
    fn len(&self) -> usize {
        self.op.solver().config().nx
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let nx = x.len();
        let u = GridField::new(x.to_vec()).to_spectral(self.n);
        let warm = self.warm.borrow().clone();
        match self.op.extend(&u, warm.as_ref()) {
            Ok((phi, out)) => {
                *self.iterations.borrow_mut() += out.iterations;
                let g = GridField::new(self.op.dtn_grid(&phi)).to_spectral(self.n);
                let v = &u + &g;
                y.copy_from_slice(v.to_grid(nx).values());
                *self.warm.borrow_mut() = Some(phi);
            }
            Err(e) => {
                y.fill(f64::NAN);
                self.failure.borrow_mut().get_or_insert(e);
            }
        }
    }
}

/// Multiplier `1/(1 + s(ξ))` with the flat DtN symbol, restricted to `L²_n`.
struct FlatResolvent<'a> {
    solver: &'a DtnSolver,
    n: usize,
}

impl Preconditioner for FlatResolvent<'_> {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let nx = r.len();
        let plan = fft::plan(nx);
        let mut s = plan.scratch();
        s.real.copy_from_slice(r);
        plan.forward(&mut s);
        for (k, c) in s.spec.iter_mut().enumerate() {
            *c = if k <= self.n && k < nx / 2 {
                *c / ((1.0 + self.solver.flat_symbol(k)) * nx as f64)
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
        plan.inverse(&mut s);
        z.copy_from_slice(&s.real);
    }
}

fn resolvent_nested(
    op: &SurfaceOperator<'_>,
    rhs: &SpectralField,
    n: usize,
    settings: CgSettings,
) -> Result<(SpectralField, usize, usize)> {
    let nx = op.solver().config().nx;
    let a = ResolventOp {
        op,
        n,
        warm: RefCell::new(None),
        failure: RefCell::new(None),
        iterations: RefCell::new(0),
    };
    let pc = FlatResolvent { solver: op.solver(), n };
    let b = rhs.to_grid(nx).into_values();
    let mut x = vec![0.0; nx];
    let out = krylov::pcg(&a, &pc, &b, &mut x, settings);
    if let Some(e) = a.failure.into_inner() {
        return Err(e);
    }
    if !out.converged {
        return Err(Error::CgStall { iterations: out.iterations, residual: out.relative_residual });
    }
    Ok((GridField::new(x).to_spectral(n), out.iterations, a.iterations.into_inner()))
}

/// Real orthonormal basis of `L²_n`: `1/√2π`, `cos(kx)/√π`, `sin(kx)/√π`.
fn basis_function(i: usize, n: usize) -> SpectralField {
    let k = (i + 1) / 2;
    if i == 0 {
        SpectralField::constant(n, 1.0 / TAU.sqrt())
    } else if i % 2 == 1 {
        SpectralField::cos_mode(n, k, 1.0 / std::f64::consts::PI.sqrt())
    } else {
        SpectralField::sin_mode(n, k, 1.0 / std::f64::consts::PI.sqrt())
    }
}

fn resolvent_dense(op: &SurfaceOperator<'_>, rhs: &SpectralField, n: usize) -> Result<SpectralField> {
    let dim = 2 * n + 1;
    let basis: Vec<SpectralField> = (0..dim).map(|i| basis_function(i, n)).collect();
    let mut a = vec![0.0; dim * dim];
    for j in 0..dim {
        let g = op.apply_dtn(&basis[j])?;
        for i in 0..dim {
            a[i * dim + j] = basis[i].inner(&g);
        }
    }
    for i in 0..dim {
        for j in 0..i {
            let s = 0.5 * (a[i * dim + j] + a[j * dim + i]);
            a[i * dim + j] = s;
            a[j * dim + i] = s;
        }
        a[i * dim + i] += 1.0;
    }
    let mut b: Vec<f64> = basis.iter().map(|e| e.inner(rhs)).collect();
    dense_cholesky_solve(&mut a, &mut b, dim);
    let mut u = SpectralField::zeros(n);
    for (e, c) in basis.iter().zip(&b) {
        u = u.axpy(*c, e);
    }
    Ok(u)
}

/// Solves `A x = b` for symmetric positive definite `A` (overwritten).
fn dense_cholesky_solve(a: &mut [f64], b: &mut [f64], n: usize) {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * n + k] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= a[k * n + i] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
}

/// Linear angular frequency of mode `k`: `ω² = κ(g + k⁴)/(1 + κ)` with
/// `κ = k·tanh(kH)`.
pub fn linear_frequency(k: usize, g: f64, depth: f64) -> f64 {
    let kf = k as f64;
    let kappa = kf * (kf * depth).tanh();
    (kappa * (g + kf.powi(4)) / (1.0 + kappa)).sqrt()
}

/// The energy of a state (one extension solve).
pub fn state_energy(integrator: &mut Integrator, state: &SurfaceState) -> Result<EnergyBreakdown> {
    let traces = integrator.traces(&state.eta, &state.psi)?;
    Ok(diagnostics::energy(state, &traces, integrator.config().g))
}
