//! Energy, operator diagnostics and the truncation-family study.

use serde::{Deserialize, Serialize};

use crate::elliptic::{DtnSolver, DtnTraces};
use crate::error::{Error, Result};
use crate::galerkin::{GalerkinConfig, Integrator, RunStatus, Sample, SurfaceState};
use crate::parallel;
use crate::spectral::{Derivative, SpectralField};

/// The summands of `𝓔 = ½∫ψG(η)ψ + ½∫θ² + ½∫(∂ₓ²η)² + (g/2)∫η²`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub plate_kinetic: f64,
    pub bending: f64,
    pub gravity: f64,
    pub total: f64,
}

pub fn energy(state: &SurfaceState, traces: &DtnTraces, g: f64) -> EnergyBreakdown {
    let kinetic = 0.5 * state.psi.inner(&traces.g_psi);
    let plate_kinetic = 0.5 * state.theta.inner(&state.theta);
    let bending = 0.5 * state.eta.derivative(Derivative::Dx2).l2_norm().powi(2);
    let gravity = 0.5 * g * state.eta.inner(&state.eta);
    EnergyBreakdown {
        kinetic,
        plate_kinetic,
        bending,
        gravity,
        total: kinetic + plate_kinetic + bending + gravity,
    }
}

/// `‖G(η)ψ − |Dₓ|ψ‖_{H^s}`.
pub fn remainder_norm(solver: &DtnSolver, eta: &SpectralField, psi: &SpectralField, s: f64) -> Result<f64> {
    let g = solver.operator(eta).apply_dtn(psi)?;
    Ok((&g - &psi.derivative(Derivative::AbsD)).sobolev_norm(s, false))
}

/// Sobolev indices reported by [`remainder_norm`] by default.
pub const REMAINDER_INDICES: [f64; 2] = [-0.25, 0.0];

/// `‖∂ₓψ‖_{L²} / ‖G(η)ψ‖_{L²}`. Fails when `‖G(η)ψ‖` cannot be told apart
/// from solver error, as for constant `ψ`.
pub fn rellich_ratio(solver: &DtnSolver, eta: &SpectralField, psi: &SpectralField) -> Result<f64> {
    let g = solver.operator(eta).apply_dtn(psi)?;
    let gn = g.l2_norm();
    let scale = psi.l2_norm();
    let floor = 1e3 * solver.config().tol * scale;
    if !(gn > floor) || scale == 0.0 {
        return Err(Error::DegenerateInput(format!(
            "‖G(η)ψ‖ = {gn:.3e} is below the solver floor {floor:.3e}"
        )));
    }
    Ok(psi.derivative(Derivative::Dx).l2_norm() / gn)
}

/// Suprema over a run of the quantities the a priori bounds control.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UniformBounds {
    pub eta_h2: f64,
    pub psi_h1: f64,
    pub g_psi_l2: f64,
    pub remainder_h_quarter: f64,
    pub remainder_l2: f64,
}

pub fn uniform_bounds(samples: &[Sample]) -> UniformBounds {
    samples.iter().fold(UniformBounds::default(), |b, s| UniformBounds {
        eta_h2: b.eta_h2.max(s.eta_h2),
        psi_h1: b.psi_h1.max(s.psi_h1),
        g_psi_l2: b.g_psi_l2.max(s.g_psi_l2),
        remainder_h_quarter: b.remainder_h_quarter.max(s.remainder_h_quarter),
        remainder_l2: b.remainder_l2.max(s.remainder_l2),
    })
}

/// Default `ε` in the `H^{2−ε}` norm of η differences.
pub const ETA_EPSILON: f64 = 0.125;

/// Differences between two consecutive truncations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDifference {
    pub n_coarse: usize,
    pub n_fine: usize,
    /// `‖ψ_fine − ψ_coarse‖_{H^{−1/2}}` per sample time.
    pub psi: Vec<f64>,
    /// `‖η_fine − η_coarse‖_{H^{2−ε}}` per sample time.
    pub eta: Vec<f64>,
    pub psi_sup: f64,
    pub eta_sup: f64,
}

/// Outcome of one member of the family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberSummary {
    pub n: usize,
    pub nx: usize,
    pub status: RunStatus,
    pub message: Option<String>,
    pub bounds: UniformBounds,
    pub max_energy_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub truncations: Vec<usize>,
    pub times: Vec<f64>,
    pub eta_epsilon: f64,
    pub members: Vec<MemberSummary>,
    pub pairs: Vec<PairDifference>,
    /// Sup-in-time ψ differences strictly decrease along the family.
    pub psi_decreasing: bool,
    pub eta_decreasing: bool,
}

impl ConvergenceReport {
    /// All members completed.
    pub fn completed(&self) -> bool {
        self.members.iter().all(|m| m.status == RunStatus::Completed)
    }
}

/// Runs every truncation from the same data on the time grid of `base`
/// (its `n` and `nx` are replaced per member) and compares consecutive
/// members at each sample time. Members run concurrently.
pub fn convergence_study(
    eta0: &SpectralField,
    psi0: &SpectralField,
    base: &GalerkinConfig,
    truncations: &[usize],
) -> Result<ConvergenceReport> {
    if truncations.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Validation {
            key: "truncations".into(),
            line: None,
            message: "must be strictly increasing".into(),
        });
    }
    let configs: Vec<GalerkinConfig> = truncations
        .iter()
        .map(|&n| {
            let mut c = base.clone();
            c.n = n;
            c.dtn.nx = crate::galerkin::auto_nx(n);
            c
        })
        .collect();
    for c in &configs {
        c.validate()?;
    }
    let runs = parallel::map_indexed(configs.len(), |i| run_member(eta0, psi0, &configs[i]));
    let mut members = Vec::with_capacity(runs.len());
    let mut states = Vec::with_capacity(runs.len());
    for (run, c) in runs.into_iter().zip(&configs) {
        let (summary, s) = run?;
        debug_assert_eq!(summary.n, c.n);
        members.push(summary);
        states.push(s);
    }
    let common = states.iter().map(Vec::len).min().unwrap_or(0);
    let times: Vec<f64> = states.first().map(|s| s[..common].iter().map(|x| x.t).collect()).unwrap_or_default();
    let pairs: Vec<PairDifference> = states
        .windows(2)
        .zip(truncations.windows(2))
        .map(|(s, n)| {
            let psi: Vec<f64> = (0..common)
                .map(|k| (&s[1][k].psi - &s[0][k].psi).sobolev_norm(-0.5, false))
                .collect();
            let eta: Vec<f64> = (0..common)
                .map(|k| (&s[1][k].eta - &s[0][k].eta).sobolev_norm(2.0 - ETA_EPSILON, false))
                .collect();
            let sup = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
            PairDifference {
                n_coarse: n[0],
                n_fine: n[1],
                psi_sup: sup(&psi),
                eta_sup: sup(&eta),
                psi,
                eta,
            }
        })
        .collect();
    let decreasing = |f: fn(&PairDifference) -> f64| pairs.windows(2).all(|w| f(&w[1]) < f(&w[0]));
    Ok(ConvergenceReport {
        truncations: truncations.to_vec(),
        times,
        eta_epsilon: ETA_EPSILON,
        psi_decreasing: decreasing(|p| p.psi_sup),
        eta_decreasing: decreasing(|p| p.eta_sup),
        members,
        pairs,
    })
}

fn run_member(
    eta0: &SpectralField,
    psi0: &SpectralField,
    cfg: &GalerkinConfig,
) -> Result<(MemberSummary, Vec<SurfaceState>)> {
    let mut integrator = Integrator::new(cfg)?;
    let state0 = integrator.init_state(eta0, psi0)?;
    let mut states = Vec::new();
    let traj = integrator.run_observed(&state0, |s, _| states.push(s.clone()))?;
    let summary = MemberSummary {
        n: cfg.n,
        nx: cfg.dtn.nx,
        status: traj.status,
        message: traj.message.clone(),
        bounds: uniform_bounds(&traj.samples),
        max_energy_drift: traj.samples.iter().map(|s| s.energy_drift).fold(0.0, f64::max),
    };
    Ok((summary, states))
}

/// Period of an oscillating signal from the spacing of its zero crossings,
/// located by linear interpolation. Needs at least three crossings.
pub fn crossing_period(t: &[f64], y: &[f64]) -> Option<f64> {
    let crossings: Vec<f64> = t
        .windows(2)
        .zip(y.windows(2))
        .filter(|(_, v)| v[0] != v[1] && (v[0] < 0.0) != (v[1] < 0.0))
        .map(|(s, v)| s[0] + (s[1] - s[0]) * v[0] / (v[0] - v[1]))
        .collect();
    if crossings.len() < 3 {
        return None;
    }
    let span = crossings[crossings.len() - 1] - crossings[0];
    Some(2.0 * span / (crossings.len() - 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::DtnConfig;
    use std::f64::consts::PI;

    fn solver() -> DtnSolver {
        DtnSolver::new(&DtnConfig { nx: 64, nz: 129, ..DtnConfig::default() }).unwrap()
    }

    #[test]
    fn energy_of_flat_cosine() {
        let s = solver();
        let h = s.config().depth;
        let state = SurfaceState {
            n: 8,
            t: 0.0,
            eta: SpectralField::zeros(8),
            psi: SpectralField::cos_mode(8, 1, 1.0),
            theta: SpectralField::zeros(8),
        };
        let op = s.operator(&state.eta);
        let (phi, _) = op.extend(&state.psi, None).unwrap();
        let e = energy(&state, &op.traces(&phi), 0.0);
        assert!((e.kinetic - 0.5 * PI * h.tanh()).abs() < 1e-10);
        assert_eq!(e.bending, 0.0);
    }

    #[test]
    fn energy_of_static_surface() {
        let s = solver();
        let state = SurfaceState {
            n: 8,
            t: 0.0,
            eta: SpectralField::cos_mode(8, 2, 1.0),
            psi: SpectralField::zeros(8),
            theta: SpectralField::zeros(8),
        };
        let op = s.operator(&state.eta);
        let (phi, _) = op.extend(&state.psi, None).unwrap();
        let e = energy(&state, &op.traces(&phi), 1.0);
        assert!((e.bending - 8.0 * PI).abs() < 1e-12);
        assert!((e.gravity - 0.5 * PI).abs() < 1e-13);
        assert_eq!(e.kinetic, 0.0);
        assert!((e.total - (e.bending + e.gravity)).abs() < 1e-13);
    }

    #[test]
    fn flat_remainder_is_bottom_truncation_only() {
        let s = solver();
        let h = s.config().depth;
        let psi = SpectralField::cos_mode(16, 1, 1.0);
        let r = remainder_norm(&s, &SpectralField::zeros(16), &psi, 0.0).unwrap();
        let want = (1.0 - h.tanh()) * psi.l2_norm();
        assert!((r - want).abs() < 1e-10);
        assert!(r <= 2.0 * (-2.0 * h).exp() * psi.l2_norm());
        let c = remainder_norm(&s, &SpectralField::cos_mode(16, 1, 0.1), &SpectralField::constant(16, 2.0), 0.0)
            .unwrap();
        assert!(c < 1e-9);
    }

    #[test]
    fn rellich_flat_and_scaling() {
        let s = solver();
        let h = s.config().depth;
        let zero = SpectralField::zeros(16);
        let r = rellich_ratio(&s, &zero, &SpectralField::cos_mode(16, 2, 1.0)).unwrap();
        assert!((r - 1.0 / (2.0 * h).tanh()).abs() < 1e-9);
        let eta = SpectralField::cos_mode(16, 1, 0.1);
        let psi = &SpectralField::cos_mode(16, 2, 1.0) + &SpectralField::sin_mode(16, 3, 0.2);
        let a = rellich_ratio(&s, &eta, &psi).unwrap();
        let b = rellich_ratio(&s, &eta, &psi.scale(7.5)).unwrap();
        assert!((a - b).abs() < 1e-8 * a);
        assert!(matches!(
            rellich_ratio(&s, &eta, &SpectralField::constant(16, 1.0)),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn single_truncation_has_no_pairs() {
        let mut cfg = GalerkinConfig::new(4);
        cfg.dtn.nz = 33;
        cfg.t_end = 0.01;
        cfg.sample_interval = 0.005;
        let eta = SpectralField::cos_mode(4, 1, 1e-3);
        let rep = convergence_study(&eta, &SpectralField::zeros(4), &cfg, &[4]).unwrap();
        assert!(rep.pairs.is_empty());
        assert!(rep.completed());
    }

    #[test]
    fn zero_data_family_has_zero_differences() {
        let mut cfg = GalerkinConfig::new(4);
        cfg.dtn.nz = 33;
        cfg.t_end = 0.004;
        cfg.sample_interval = 0.002;
        let z = SpectralField::zeros(8);
        let rep = convergence_study(&z, &z, &cfg, &[4, 8]).unwrap();
        assert_eq!(rep.pairs.len(), 1);
        assert!(rep.pairs[0].psi.iter().chain(&rep.pairs[0].eta).all(|&d| d == 0.0));
    }

    #[test]
    fn crossing_period_of_a_cosine() {
        let t: Vec<f64> = (0..=4000).map(|i| i as f64 * 0.005).collect();
        let y: Vec<f64> = t.iter().map(|&s| (1.3 * s + 0.2).cos()).collect();
        let p = crossing_period(&t, &y).unwrap();
        assert!((p - std::f64::consts::TAU / 1.3).abs() < 1e-5);
        assert_eq!(crossing_period(&t[..10], &y[..10]), None);
    }
}
