//! Surface nonlinearities and the plate operator.
//!
//! The nonlinear term `N(η, ψ)` is available in its classical trace forms
//! and in the flow-force form `N = ∂ₓ ∫ φ_y φ_x dy`; the latter is an exact
//! derivative and therefore has zero mean by construction.

use crate::elliptic::{DtnSolver, DtnTraces, StripField, SurfaceOperator};
use crate::error::Result;
use crate::spectral::{dealiased_grid, Derivative, GridField, SpectralField};

/// `N(η, ψ)` in both representations.
#[derive(Debug, Clone)]
pub struct NonlinearTerm {
    pub classical: SpectralField,
    pub flow_force: SpectralField,
    /// `‖classical − flow_force‖_{L²}`
    pub discrepancy: f64,
}

/// Evaluates `f` pointwise on a grid that resolves products of the inputs
/// and returns the result truncated to `band`.
fn on_grid(fields: &[&SpectralField], band: usize, f: impl Fn(&[f64]) -> f64) -> SpectralField {
    let n = dealiased_grid(band);
    let grids: Vec<GridField> = fields.iter().map(|u| u.to_grid(n)).collect();
    let mut args = vec![0.0; fields.len()];
    let values = (0..n)
        .map(|j| {
            for (a, g) in args.iter_mut().zip(&grids) {
                *a = g.values()[j];
            }
            f(&args)
        })
        .collect();
    GridField::new(values).to_spectral(band)
}

/// `N = ½V² − ½B² + B V η_x`.
pub fn nonlinear_classical(traces: &DtnTraces, eta: &SpectralField) -> SpectralField {
    let band = traces.b.max_mode();
    let eta_x = eta.derivative(Derivative::Dx);
    on_grid(&[&traces.v, &traces.b, &eta_x], band, |a| {
        let (v, b, ex) = (a[0], a[1], a[2]);
        0.5 * v * v - 0.5 * b * b + b * v * ex
    })
}

/// `N = ½ψ_x² − ½B(G(η)ψ + ψ_x η_x)`, algebraically equal to
/// [`nonlinear_classical`] through the definitions of `B` and `V`.
pub fn nonlinear_classical_alt(traces: &DtnTraces, eta: &SpectralField) -> SpectralField {
    let band = traces.b.max_mode();
    let eta_x = eta.derivative(Derivative::Dx);
    let psi_x = traces.psi.derivative(Derivative::Dx);
    on_grid(&[&psi_x, &traces.b, &traces.g_psi, &eta_x], band, |a| {
        let (px, b, g, ex) = (a[0], a[1], a[2], a[3]);
        0.5 * px * px - 0.5 * b * (g + px * ex)
    })
}

/// `N = ∂ₓF` with `F` the vertical flux of the extension, band-projected
/// before differentiation.
pub fn nonlinear_flow_force(op: &SurfaceOperator<'_>, phi: &StripField) -> SpectralField {
    let band = op.solver().config().working_band();
    op.vertical_flux(phi).to_spectral(band).derivative(Derivative::Dx)
}

/// Both forms of `N` from one extension.
pub fn nonlinear_term(op: &SurfaceOperator<'_>, phi: &StripField, traces: &DtnTraces) -> NonlinearTerm {
    let classical = nonlinear_classical(traces, op.eta());
    let flow_force = nonlinear_flow_force(op, phi);
    let discrepancy = (&classical - &flow_force).l2_norm();
    NonlinearTerm { classical, flow_force, discrepancy }
}

/// `Lη = gη + ∂ₓ⁴η`.
pub fn plate_l(eta: &SpectralField, g: f64) -> SpectralField {
    eta.map_modes(|k| {
        let k2 = (k * k) as f64;
        g + k2 * k2
    })
}

/// `Λ_n u = J_n G(η)(B u) + J_n ∂ₓ(V u)`.
pub fn lambda_apply(
    op: &SurfaceOperator<'_>,
    traces: &DtnTraces,
    u: &SpectralField,
    n: usize,
) -> Result<SpectralField> {
    let band = op.solver().config().working_band();
    let bu = on_grid(&[&traces.b, u], band, |a| a[0] * a[1]);
    let vu = on_grid(&[&traces.v, u], band, |a| a[0] * a[1]);
    let g_bu = op.apply_dtn(&bu)?;
    Ok((&g_bu + &vu.derivative(Derivative::Dx)).project(n).with_max_mode(n))
}

/// `‖[G(η+εζ)ψ − G(η−εζ)ψ]/(2ε) + G(η)(Bζ) + ∂ₓ(Vζ)‖_{L²}`, which vanishes
/// up to `O(ε²)` and discretization error.
pub fn shape_derivative_residual(
    solver: &DtnSolver,
    eta: &SpectralField,
    psi: &SpectralField,
    zeta: &SpectralField,
    eps: f64,
) -> Result<f64> {
    let band = solver.config().working_band();
    let plus = solver.operator(&eta.axpy(eps, zeta)).apply_dtn(psi)?;
    let minus = solver.operator(&eta.axpy(-eps, zeta)).apply_dtn(psi)?;
    let op = solver.operator(eta);
    let (phi, _) = op.extend(psi, None)?;
    let traces = op.traces(&phi);
    let bz = on_grid(&[&traces.b, zeta], band, |a| a[0] * a[1]);
    let vz = on_grid(&[&traces.v, zeta], band, |a| a[0] * a[1]);
    let g_bz = op.apply_dtn(&bz)?;
    let fd = (&plus - &minus).scale(0.5 / eps);
    let residual = &(&fd + &g_bz) + &vz.derivative(Derivative::Dx);
    Ok(residual.l2_norm())
}

/// Product `u·v` truncated to `band`, on a dealiased grid.
pub fn product(u: &SpectralField, v: &SpectralField, band: usize) -> SpectralField {
    on_grid(&[u, v], band, |a| a[0] * a[1])
}
