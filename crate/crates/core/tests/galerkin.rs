use plateflow::elliptic::DtnConfig;
use plateflow::galerkin::*;
use plateflow::{Error, SpectralField};

fn small(n: usize) -> GalerkinConfig {
    let mut cfg = GalerkinConfig::new(n);
    cfg.dtn = DtnConfig { nx: 32, nz: 65, ..DtnConfig::default() };
    cfg
}

fn kappa(k: usize, h: f64) -> f64 {
    k as f64 * (k as f64 * h).tanh()
}

#[test]
fn zero_state_is_a_fixed_point() {
    let cfg = small(4);
    let z = SurfaceState::zeros(4);
    let d = rhs_eval(&z, &cfg).unwrap();
    assert_eq!(d.d_eta.l2_norm() + d.d_psi.l2_norm() + d.d_theta.l2_norm(), 0.0);
    let next = rk4_step(&z, &cfg).unwrap();
    assert_eq!(next.norm(), 0.0);
    assert!((next.t - cfg.dt).abs() < 1e-15);
}

#[test]
fn initial_state_is_projected_and_consistent() {
    let cfg = small(4);
    let h = cfg.dtn.depth;
    let eta0 = &SpectralField::constant(8, 0.3) + &SpectralField::cos_mode(8, 6, 1.0);
    let psi0 = SpectralField::cos_mode(8, 1, 1.0);
    let mut integ = Integrator::new(&cfg).unwrap();
    let s = integ.init_state(&SpectralField::constant(8, 0.3), &psi0).unwrap();
    assert_eq!(s.eta.mean(), 0.0);
    assert_eq!(s.eta.max_mode(), 4);
    let want = SpectralField::cos_mode(4, 1, h.tanh());
    assert!((&s.theta - &want).l2_norm() < 1e-9);
    let s = integ.init_state(&eta0, &SpectralField::zeros(4)).unwrap();
    assert_eq!(s.eta.l2_norm(), 0.0);
    assert_eq!(s.theta.l2_norm(), 0.0);
}

#[test]
fn flat_resolvent_is_diagonal() {
    let h = DtnConfig::default().depth;
    let rhs = &(&SpectralField::cos_mode(6, 1, 1.0) + &SpectralField::sin_mode(6, 3, -0.5))
        + &SpectralField::cos_mode(6, 6, 0.25);
    let want = rhs.map_modes(|k| 1.0 / (1.0 + kappa(k, h)));
    for method in [ResolventMethod::Coupled, ResolventMethod::Nested, ResolventMethod::Dense] {
        let mut cfg = small(6);
        cfg.resolvent = method;
        let mut integ = Integrator::new(&cfg).unwrap();
        let out = integ.resolvent_apply(&SpectralField::zeros(6), &rhs).unwrap();
        assert!(out.u.max_coeff_diff(&want) < 1e-9, "{method:?}");
        assert!(out.contraction <= 1.0);
        let zero = integ.resolvent_apply(&SpectralField::zeros(6), &SpectralField::zeros(6)).unwrap();
        assert_eq!(zero.u.l2_norm(), 0.0);
    }
}

#[test]
fn resolvent_methods_agree_on_curved_surface() {
    let eta = &SpectralField::cos_mode(6, 1, 0.1) + &SpectralField::sin_mode(6, 2, 0.05);
    let rhs = &SpectralField::cos_mode(6, 2, 1.0) + &SpectralField::sin_mode(6, 5, 0.3);
    let mut results = Vec::new();
    for method in [ResolventMethod::Coupled, ResolventMethod::Nested, ResolventMethod::Dense] {
        let mut cfg = small(6);
        cfg.resolvent = method;
        let out = Integrator::new(&cfg).unwrap().resolvent_apply(&eta, &rhs).unwrap();
        assert!(out.contraction < 1.0);
        results.push(out.u);
    }
    assert!(results[0].max_coeff_diff(&results[1]) < 1e-8);
    assert!(results[0].max_coeff_diff(&results[2]) < 1e-8);
}

#[test]
fn linearization_matches_mode_algebra() {
    let cfg = small(4);
    let h = cfg.dtn.depth;
    let k = 2;
    let kh = kappa(k, h);
    for eps in [1e-3, 1e-4] {
        let state = SurfaceState {
            n: 4,
            t: 0.0,
            eta: SpectralField::cos_mode(4, k, eps),
            psi: SpectralField::cos_mode(4, k, eps),
            theta: SpectralField::cos_mode(4, k, eps * kh),
        };
        let d = rhs_eval(&state, &cfg).unwrap();
        let d_eta = SpectralField::cos_mode(4, k, eps * kh);
        let d_psi = SpectralField::cos_mode(4, k, -eps * 16.0 / (1.0 + kh));
        assert!(d.d_eta.max_coeff_diff(&d_eta) < 10.0 * eps * eps);
        assert!(d.d_psi.max_coeff_diff(&d_psi) < 100.0 * eps * eps);
        assert!(d.d_eta.mean().abs() < 1e-12);
        assert!(d.d_psi.mean().abs() < 1e-12);
    }
}

fn nonlinear_state(n: usize) -> (SpectralField, SpectralField) {
    let eta = &SpectralField::cos_mode(n, 1, 0.05) + &SpectralField::sin_mode(n, 2, 0.02);
    let psi = &SpectralField::cos_mode(n, 2, 0.05) + &SpectralField::sin_mode(n, 3, 0.01);
    (eta, psi)
}

#[test]
fn fused_and_reference_right_hand_sides_agree() {
    let (eta, psi) = nonlinear_state(8);
    let mut cfg = small(8);
    cfg.dtn.nx = 64;
    let state = Integrator::new(&cfg).unwrap().init_state(&eta, &psi).unwrap();
    let fused = rhs_eval(&state, &cfg).unwrap();
    cfg.fused = false;
    let mut integ = Integrator::new(&cfg).unwrap();
    let reference = integ.rhs_eval(&state).unwrap();
    assert!(fused.d_eta.max_coeff_diff(&reference.d_eta) < 1e-12);
    assert!(fused.d_psi.max_coeff_diff(&reference.d_psi) < 1e-8);
    assert!(fused.d_theta.max_coeff_diff(&reference.d_theta) < 1e-8);
    let g_form = integ.d_theta_from_g(&state, &reference).unwrap();
    assert!(g_form.max_coeff_diff(&reference.d_theta) < 1e-8);
}

#[test]
fn short_run_conserves_invariants() {
    let (eta, psi) = nonlinear_state(4);
    let mut cfg = small(4);
    cfg.dt = 5e-3;
    cfg.t_end = 0.1;
    cfg.sample_interval = 0.05;
    let mut integ = Integrator::new(&cfg).unwrap();
    let s0 = integ.init_state(&eta, &psi).unwrap();
    let traj = integ.run(&s0).unwrap();
    assert_eq!(traj.status, RunStatus::Completed);
    assert_eq!(traj.steps, 20);
    assert_eq!(traj.samples.len(), 3);
    assert!(traj.samples.windows(2).all(|w| w[1].t > w[0].t));
    for s in &traj.samples {
        assert!(s.energy_drift < 1e-7);
        assert!(s.theta_residual < 1e-7);
        assert!(s.mean_eta.abs() + s.mean_psi.abs() < 1e-14);
    }
}

#[test]
fn zero_length_run_has_one_sample() {
    let mut cfg = small(4);
    cfg.t_end = 0.0;
    let s0 = SurfaceState::zeros(4);
    let traj = run_simulation(&s0, &cfg).unwrap();
    assert_eq!(traj.samples.len(), 1);
    assert_eq!(traj.steps, 0);
    assert_eq!(traj.status, RunStatus::Completed);
}

#[test]
fn blow_up_guard_ends_the_run() {
    let (eta, psi) = nonlinear_state(4);
    let mut cfg = small(4);
    cfg.blowup_guard = 1e-3;
    cfg.t_end = 0.01;
    let mut integ = Integrator::new(&cfg).unwrap();
    let s0 = integ.init_state(&eta, &psi).unwrap();
    let traj = integ.run(&s0).unwrap();
    assert_eq!(traj.status, RunStatus::Blowup);
    assert_eq!(traj.samples.len(), 1);
    assert!(traj.message.unwrap().contains("blow-up"));
}

#[test]
fn stability_bound_is_enforced() {
    let mut cfg = small(4);
    cfg.dt = 0.2;
    match cfg.validate() {
        Err(Error::Validation { key, .. }) => assert_eq!(key, "dt"),
        other => panic!("unexpected {other:?}"),
    }
    let mut cfg = small(16);
    cfg.dtn.nx = 32;
    assert!(matches!(cfg.validate(), Err(Error::Validation { key, .. }) if key == "nx"));
}

#[test]
fn linear_frequency_formula() {
    let h = 3.0 * std::f64::consts::PI;
    let w = linear_frequency(1, 0.0, h);
    assert!((w - (h.tanh() / (1.0 + h.tanh())).sqrt()).abs() < 1e-15);
    assert!((linear_frequency(1, 0.0, 1e3) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
}
