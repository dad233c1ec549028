use plateflow::elliptic::*;
use plateflow::spectral::grid_point;
use plateflow::{Error, SpectralField};

fn config() -> DtnConfig {
    DtnConfig { nx: 64, nz: 129, ..DtnConfig::default() }
}

fn curved() -> SpectralField {
    &SpectralField::cos_mode(16, 1, 0.1) + &SpectralField::sin_mode(16, 2, 0.04)
}

#[test]
fn flat_extension_has_cosh_profile() {
    let cfg = config();
    let h = cfg.depth;
    let k = 3.0;
    let phi = solve_extension(&SpectralField::zeros(16), &SpectralField::cos_mode(16, 3, 1.0), &cfg).unwrap();
    assert_eq!((phi.nx(), phi.nz()), (64, 129));
    assert_eq!(phi.z()[0], 0.0);
    assert!((phi.z()[128] + h).abs() < 1e-12);
    let mut worst = 0.0f64;
    for (j, &z) in phi.z().iter().enumerate() {
        for i in 0..64 {
            let want = (k * (z + h)).cosh() / (k * h).cosh() * (k * grid_point(i, 64)).cos();
            worst = worst.max((phi.value(i, j) - want).abs());
        }
    }
    assert!(worst < 1e-8, "{worst:e}");
}

#[test]
fn flat_dtn_matches_symbol() {
    let cfg = config();
    let h = cfg.depth;
    for k in 1..=8usize {
        let got = dtn_apply(&SpectralField::zeros(16), &SpectralField::sin_mode(16, k, 1.0), &cfg).unwrap();
        let kappa = k as f64 * (k as f64 * h).tanh();
        let want = SpectralField::sin_mode(16, k, kappa);
        assert!((&got - &want).l2_norm() < 1e-9 * kappa, "k = {k}");
    }
}

#[test]
fn constants_and_zero_data() {
    let cfg = config();
    let g1 = dtn_apply(&curved(), &SpectralField::constant(16, 2.5), &cfg).unwrap();
    assert!(g1.l2_norm() < 1e-8);
    let g0 = dtn_apply(&curved(), &SpectralField::zeros(16), &cfg).unwrap();
    assert_eq!(g0.l2_norm(), 0.0);
}

#[test]
fn flat_flux_matches_closed_form() {
    let cfg = config();
    let h = cfg.depth;
    let k = 2.0;
    let eta = SpectralField::zeros(16);
    let phi = solve_extension(&eta, &SpectralField::cos_mode(16, 2, 1.0), &cfg).unwrap();
    let flux = vertical_flux(&eta, &phi, &cfg).unwrap();
    let t = (k * h).tanh();
    for (i, f) in flux.values().iter().enumerate() {
        let want = -0.25 * k * t * t * (2.0 * k * grid_point(i, 64)).sin();
        assert!((f - want).abs() < 1e-9, "{i}: {f} vs {want}");
    }
}

#[test]
fn flux_derivative_integrates_to_zero() {
    let cfg = config();
    let eta = curved();
    let psi = &SpectralField::cos_mode(16, 1, 1.0) + &SpectralField::sin_mode(16, 3, 0.5);
    let phi = solve_extension(&eta, &psi, &cfg).unwrap();
    let flux = vertical_flux(&eta, &phi, &cfg).unwrap();
    let n = flux.to_spectral(16).derivative(plateflow::Derivative::Dx);
    assert_eq!(n.mean(), 0.0);
    assert!(flux.to_spectral(16).l2_norm() > 0.0);
}

#[test]
fn operator_is_symmetric_and_nonnegative() {
    let solver = DtnSolver::new(&config()).unwrap();
    let op = solver.operator(&curved());
    let u = &SpectralField::cos_mode(16, 1, 1.0) + &SpectralField::sin_mode(16, 4, 0.3);
    let v = &SpectralField::sin_mode(16, 2, 1.0) + &SpectralField::cos_mode(16, 5, -0.6);
    let gu = op.apply_dtn(&u).unwrap();
    let gv = op.apply_dtn(&v).unwrap();
    assert!((u.inner(&gv) - gu.inner(&v)).abs() < 1e-9 * u.l2_norm() * v.l2_norm());
    assert!(u.inner(&gu) > 0.0 && v.inner(&gv) > 0.0);
}

#[test]
fn extension_satisfies_bottom_condition_and_trace() {
    let cfg = config();
    let eta = curved();
    let psi = &SpectralField::cos_mode(16, 2, 1.0) + &SpectralField::sin_mode(16, 1, 0.4);
    let phi = solve_extension(&eta, &psi, &cfg).unwrap();
    let bottom = phi.bottom_derivative();
    assert!(bottom.iter().all(|d| d.abs() < 2e-5), "{:e}", bottom.iter().fold(0.0f64, |a, b| a.max(b.abs())));
    let top = psi.to_grid(64);
    for (a, b) in phi.row(0).iter().zip(top.values()) {
        assert!((a - b).abs() < 1e-13);
    }
    let tr = traces(&eta, &phi, &cfg).unwrap();
    assert!(tr.cancellation_residual() < 1e-7 * tr.b.l2_norm());
    let eta_x = eta.derivative(plateflow::Derivative::Dx);
    let psi_x = psi.derivative(plateflow::Derivative::Dx);
    let v = &psi_x - &plateflow::surface::product(&tr.b, &eta_x, 16);
    assert!((&tr.v - &v).l2_norm() < 1e-9);
}

#[test]
fn invalid_configurations_are_rejected() {
    let bad = [
        DtnConfig { nz: 66, ..config() },
        DtnConfig { nx: 48, ..config() },
        DtnConfig { depth: -1.0, ..config() },
        DtnConfig { tol: 0.0, ..config() },
    ];
    for cfg in bad {
        assert!(matches!(DtnSolver::new(&cfg), Err(Error::Validation { .. })), "{cfg:?}");
    }
}

#[test]
fn iteration_cap_reports_non_convergence() {
    let cfg = DtnConfig { max_iter: 1, tol: 1e-14, ..config() };
    let eta = &SpectralField::cos_mode(16, 1, 0.3) + &SpectralField::sin_mode(16, 3, 0.1);
    let err = solve_extension(&eta, &SpectralField::cos_mode(16, 5, 1.0), &cfg).unwrap_err();
    assert!(matches!(err, Error::NonConvergence { iterations: 1, .. }), "{err:?}");
}

#[test]
fn depth_truncation_is_negligible_on_curved_surfaces() {
    let eta = curved();
    let psi = &SpectralField::cos_mode(16, 1, 1.0) + &SpectralField::sin_mode(16, 2, 0.5);
    let base = dtn_apply(&eta, &psi, &config()).unwrap();
    let deeper_depth = 4.0 * std::f64::consts::PI;
    let deeper = dtn_apply(&eta, &psi, &DtnConfig { depth: deeper_depth, ..config() }).unwrap();
    let change = (&deeper - &base).l2_norm() / base.l2_norm();
    assert!(change < 1e-6, "{change:e}");
}
