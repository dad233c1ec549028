//! Harmonic extension below the graph `y = η(x)` and the surface traces
//! `G(η)ψ`, `B`, `V`.
//!
//! The fluid domain is flattened by `z = y − η(x)` onto the strip
//! `𝕋 × [−H, 0]`. With `φ̃(x, z) = φ(x, z + η(x))` the physical gradient is
//! `(φ̃_x − η_x φ̃_z, φ̃_z)` and the Dirichlet energy becomes
//!
//! ```text
//! E(φ̃) = ½ ∫∫ (φ̃_x − η_x φ̃_z)² + φ̃_z² dz dx,
//! ```
//!
//! whose Euler–Lagrange equation is the flattened Laplace equation
//! `∂ₓ²φ̃ + ∂_z²φ̃ = ∂_z(η_x ∂ₓφ̃ − η_x² ∂_zφ̃) + ∂ₓ(η_x ∂_zφ̃)` with a natural
//! (no-flux) bottom condition. The energy is discretized with the spectral
//! derivative and trapezoid rule in `x` and graded spectral elements in `z`,
//! so the discrete operator is symmetric positive semidefinite exactly and
//! `G(η)` is the Schur complement onto the surface row.
//!
//! Linear systems are solved by conjugate gradients preconditioned with the
//! exact inverse of the flat (`η = 0`) operator, which is diagonal in the
//! horizontal Fourier modes and banded in `z`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{self, FftPlan};
use crate::krylov::{self, CgOutcome, CgSettings, LinearOperator, Preconditioner};
use crate::parallel;
use crate::spectral::{Derivative, GridField, SpectralField};
use crate::vertical::VerticalGrid;

/// Discretization and solver settings for the extension problem.
#[derive(Debug, Clone, PartialEq)]
pub struct DtnConfig {
    /// Strip depth `H`.
    pub depth: f64,
    /// Vertical nodes, `z = 0` included.
    pub nz: usize,
    /// Horizontal grid points (power of two).
    pub nx: usize,
    /// Polynomial degree of the vertical elements; `nz − 1` must be a multiple.
    pub degree: usize,
    /// Element grading towards the surface (0 = uniform).
    pub grading: f64,
    /// Relative residual tolerance of the linear solves.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DtnConfig {
    fn default() -> Self {
        Self {
            depth: 3.0 * PI,
            nz: 257,
            nx: 256,
            degree: 4,
            grading: 4.0,
            tol: 1e-11,
            max_iter: 500,
        }
    }
}

impl DtnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: String| {
            Err(Error::Validation { key: key.to_string(), line: None, message })
        };
        if !(self.depth > 0.0) || !self.depth.is_finite() {
            return bad("depth", format!("must be positive, got {}", self.depth));
        }
        if self.nz < 3 {
            return bad("nz", format!("must be at least 3, got {}", self.nz));
        }
        if self.degree == 0 || (self.nz - 1) % self.degree != 0 {
            return bad(
                "nz",
                format!("nz − 1 = {} must be a multiple of degree {}", self.nz - 1, self.degree),
            );
        }
        if self.nx < 8 || !self.nx.is_power_of_two() {
            return bad("nx", format!("must be a power of two ≥ 8, got {}", self.nx));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return bad("tol", format!("must lie in (0, 1), got {}", self.tol));
        }
        if self.max_iter == 0 {
            return bad("max_iter", "must be positive".into());
        }
        if !self.grading.is_finite() || self.grading < 0.0 {
            return bad("grading", format!("must be finite and ≥ 0, got {}", self.grading));
        }
        Ok(())
    }

    /// Band limit of traces returned by the solver, `nx / 4`, so that
    /// quadratic products of traces are alias-free on the `nx` grid.
    pub fn working_band(&self) -> usize {
        self.nx / 4
    }
}

/// Discrete flattened potential `φ̃(x_i, z_j)`, row-major in `z`.
#[derive(Debug, Clone)]
pub struct StripField {
    grid: Arc<VerticalGrid>,
    nx: usize,
    values: Vec<f64>,
}

impl StripField {
    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nz(&self) -> usize {
        self.grid.num_nodes()
    }

    pub fn depth(&self) -> f64 {
        self.grid.depth()
    }

    /// Node depths, `z[0] = 0`.
    pub fn z(&self) -> &[f64] {
        self.grid.z()
    }

    /// `φ̃(x_i, z_j)`.
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.nx..(j + 1) * self.nx]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vertical_grid(&self) -> &VerticalGrid {
        &self.grid
    }

    /// One-sided `∂_zφ̃` at the bottom row, from the last element's polynomial.
    pub fn bottom_derivative(&self) -> Vec<f64> {
        let g = &self.grid;
        let ne = g.num_elements();
        let p = g.degree();
        let d = g.elem_diff(ne - 1);
        let mut out = vec![0.0; self.nx];
        for r in 0..=p {
            let c = d[p][r];
            let row = self.row((ne - 1) * p + r);
            for (o, v) in out.iter_mut().zip(row) {
                *o += c * v;
            }
        }
        out
    }
}

/// Surface traces of the harmonic extension, band-limited to the working band.
#[derive(Debug, Clone)]
pub struct DtnTraces {
    /// The Dirichlet data the traces belong to.
    pub psi: SpectralField,
    /// `G(η)ψ`
    pub g_psi: SpectralField,
    /// `B = (G(η)ψ + η_x ψ_x)/(1 + η_x²)`, the vertical velocity at the surface.
    pub b: SpectralField,
    /// `V = ψ_x − B η_x`, the horizontal velocity at the surface.
    pub v: SpectralField,
    /// `∂_zφ̃` at `z = 0` taken directly from the vertical polynomial;
    /// agrees with `b` up to discretization error.
    pub b_direct: SpectralField,
}

impl DtnTraces {
    /// `‖B_direct − B‖_{L²}`, the residual of the identity
    /// `B (1 + η_x²) = G(η)ψ + η_x ψ_x` with `B` taken from the extension.
    pub fn cancellation_residual(&self) -> f64 {
        (&self.b_direct - &self.b).l2_norm()
    }
}

/// Flat-operator factorizations and plans for one discretization.
///
/// Independent of η, so a single solver serves any number of surfaces and
/// threads. Factorizations for the coupled resolvent problem are built per
/// truncation index on first use behind a mutex.
pub struct DtnSolver {
    cfg: DtnConfig,
    grid: Arc<VerticalGrid>,
    plan: Arc<FftPlan>,
    /// Flat operator per horizontal mode with the surface row pinned.
    dirichlet: Arc<ModeFactors>,
    /// Discrete flat DtN symbol per horizontal mode.
    symbol: Vec<f64>,
    coupled: Mutex<HashMap<usize, Arc<ModeFactors>>>,
}

/// Effective wavenumber of FFT bin `k` (the Nyquist bin is not differentiated).
fn wavenumber(k: usize, nx: usize) -> f64 {
    if k == nx / 2 {
        0.0
    } else {
        k as f64
    }
}

impl DtnSolver {
    pub fn new(cfg: &DtnConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = Arc::new(VerticalGrid::new(cfg.depth, cfg.nz, cfg.degree, cfg.grading));
        let plan = fft::plan(cfg.nx);
        let modes = cfg.nx / 2 + 1;
        let p = grid.degree();
        let symbol = parallel::map_indexed(modes, |k| {
            let kf = wavenumber(k, cfg.nx);
            let full = grid.flat_matrix(kf * kf);
            let inner = full.without_first().cholesky();
            let mut rhs = vec![0.0; cfg.nz - 1];
            for (i, r) in rhs.iter_mut().enumerate().take(p) {
                *r = full.get(i + 1, 0);
            }
            inner.solve_in_place(&mut rhs);
            let mut s = full.get(0, 0);
            for (i, y) in rhs.iter().enumerate().take(p) {
                s -= full.get(0, i + 1) * y;
            }
            s
        });
        let dirichlet = ModeFactors::new(&grid, cfg.nx, |_| false);
        Ok(Self {
            cfg: cfg.clone(),
            grid,
            plan,
            dirichlet: Arc::new(dirichlet),
            symbol,
            coupled: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &DtnConfig {
        &self.cfg
    }

    pub fn vertical_grid(&self) -> &VerticalGrid {
        &self.grid
    }

    /// Discrete flat DtN value for mode `k`, i.e. `G(0)` acting on `cos(kx)`.
    /// Approximates `k·tanh(kH)`.
    pub fn flat_symbol(&self, k: usize) -> f64 {
        self.symbol[k]
    }

    /// The operator for surface `eta`.
    pub fn operator(&self, eta: &SpectralField) -> SurfaceOperator<'_> {
        let nx = self.cfg.nx;
        let eta_x = eta.derivative(Derivative::Dx).to_grid(nx).into_values();
        SurfaceOperator { solver: self, eta: eta.clone(), eta_x }
    }

    fn coupled_factors(&self, n: usize) -> Arc<ModeFactors> {
        let mut map = self.coupled.lock().unwrap_or_else(|e| e.into_inner());
        map.entry(n)
            .or_insert_with(|| Arc::new(ModeFactors::new(&self.grid, self.cfg.nx, |k| k <= n)))
            .clone()
    }

    fn zero_strip(&self) -> StripField {
        StripField {
            grid: self.grid.clone(),
            nx: self.cfg.nx,
            values: vec![0.0; self.cfg.nx * self.cfg.nz],
        }
    }

    /// Spectral `J_n` on one grid row.
    fn project_row(&self, row: &mut [f64], n: usize) {
        let mut s = self.plan.scratch();
        s.real.copy_from_slice(row);
        self.plan.forward(&mut s);
        let scale = 1.0 / self.cfg.nx as f64;
        for (k, c) in s.spec.iter_mut().enumerate() {
            *c = if k <= n && k < self.cfg.nx / 2 { *c * scale } else { Complex64::new(0.0, 0.0) };
        }
        self.plan.inverse(&mut s);
        row.copy_from_slice(&s.real);
    }
}

/// The flattened elliptic operator for one fixed surface `η`.
pub struct SurfaceOperator<'a> {
    solver: &'a DtnSolver,
    eta: SpectralField,
    eta_x: Vec<f64>,
}

impl<'a> SurfaceOperator<'a> {
    pub fn eta(&self) -> &SpectralField {
        &self.eta
    }

    pub fn solver(&self) -> &DtnSolver {
        self.solver
    }

    /// `η_x` on the horizontal grid.
    pub fn eta_x(&self) -> &[f64] {
        &self.eta_x
    }

    fn nx(&self) -> usize {
        self.solver.cfg.nx
    }

    fn nz(&self) -> usize {
        self.solver.cfg.nz
    }

    /// Applies the flat-surface inverse with the surface row pinned, the
    /// preconditioner of [`SurfaceOperator::extend`].
    pub fn precondition(&self, r: &[f64], z: &mut [f64]) {
        let pc = FlatPreconditioner { solver: self.solver, factors: self.solver.dirichlet.clone() };
        pc.apply(r, z);
    }

    /// Gradient of the discrete energy: `y = A φ`.
    ///
    /// Elements are processed in two sweeps (even, then odd) so that no two
    /// concurrently processed elements share a node row.
    pub fn apply_full(&self, phi: &[f64], y: &mut [f64]) {
        let nx = self.nx();
        let grid = &*self.solver.grid;
        let p = grid.degree();
        let ne = grid.num_elements();
        let plan = &*self.solver.plan;

        let mut dx = phi.to_vec();
        parallel::rows_mut_init(&mut dx, nx, || plan.scratch(), |s, _, row| {
            plan.differentiate(row, s)
        });

        let mut px = vec![0.0; phi.len()];
        y.fill(0.0);
        let block = (p + 1) * nx;
        for phase in 0..2 {
            let off = phase * p * nx;
            parallel::paired_chunks_mut(&mut y[off..], &mut px[off..], 2 * p * nx, |c, yc, pc| {
                let e = 2 * c + phase;
                if e < ne {
                    let rows = e * p * nx..e * p * nx + block;
                    self.element_kernel(e, &phi[rows.clone()], &dx[rows], &mut yc[..block], &mut pc[..block]);
                }
            });
        }
        // D_xᵀ = −D_x
        parallel::rows_mut_init(&mut px, nx, || plan.scratch(), |s, _, row| {
            plan.differentiate(row, s)
        });
        for (yi, v) in y.iter_mut().zip(&px) {
            *yi -= v;
        }
    }

    /// Quadrature of one element: adds `D_zᵀ W (φ_z − η_x f_x)` to `y` and
    /// `W f_x` to `px`, with `f_x = φ_x − η_x φ_z`.
    fn element_kernel(&self, e: usize, phi: &[f64], dx: &[f64], y: &mut [f64], px: &mut [f64]) {
        let nx = self.nx();
        let grid = &*self.solver.grid;
        let p = grid.degree();
        let d = grid.elem_diff(e);
        let w = grid.elem_weights(e);
        let eta_x = &self.eta_x[..];
        let mut zs = vec![0.0; (p + 1) * nx];
        for (q, z) in zs.chunks_mut(nx).enumerate() {
            for (r, row) in phi.chunks(nx).enumerate() {
                let c = d[q][r];
                for (zi, v) in z.iter_mut().zip(row) {
                    *zi += c * v;
                }
            }
            let wq = w[q];
            let xrow = &dx[q * nx..(q + 1) * nx];
            let prow = &mut px[q * nx..(q + 1) * nx];
            for (((zi, xi), pi), ex) in z.iter_mut().zip(xrow).zip(prow.iter_mut()).zip(eta_x) {
                let fx = xi - ex * *zi;
                *pi += wq * fx;
                *zi = wq * (*zi - ex * fx);
            }
        }
        for (r, out) in y.chunks_mut(nx).enumerate() {
            for (q, z) in zs.chunks(nx).enumerate() {
                let c = d[q][r];
                for (oi, zi) in out.iter_mut().zip(z) {
                    *oi += c * zi;
                }
            }
        }
    }

    /// Harmonic extension of `psi` with the flat solution as preconditioner.
    /// `warm` seeds the iteration (typically the previous solve).
    pub fn extend(&self, psi: &SpectralField, warm: Option<&StripField>) -> Result<(StripField, CgOutcome)> {
        let nx = self.nx();
        let top = psi.to_grid(nx).into_values();
        let mut lift = vec![0.0; nx * self.nz()];
        lift[..nx].copy_from_slice(&top);
        let mut b = vec![0.0; lift.len()];
        self.apply_full(&lift, &mut b);
        for v in b.iter_mut() {
            *v = -*v;
        }
        b[..nx].fill(0.0);

        let mut x = match warm {
            Some(w) if w.values.len() == lift.len() => w.values.clone(),
            _ => vec![0.0; lift.len()],
        };
        x[..nx].fill(0.0);
        let op = DirichletOp { op: self };
        let pc = FlatPreconditioner { solver: self.solver, factors: self.solver.dirichlet.clone() };
        let cfg = &self.solver.cfg;
        let out = krylov::pcg(&op, &pc, &b, &mut x, CgSettings { tol: cfg.tol, max_iter: cfg.max_iter });
        if !out.converged {
            return Err(Error::NonConvergence { iterations: out.iterations, residual: out.relative_residual });
        }
        x[..nx].copy_from_slice(&top);
        let mut phi = self.solver.zero_strip();
        phi.values = x;
        Ok((phi, out))
    }

    /// `G(η)ψ` on the grid from an extension: the surface row of `Aφ`.
    pub fn dtn_grid(&self, phi: &StripField) -> Vec<f64> {
        let mut y = vec![0.0; phi.values.len()];
        self.apply_full(&phi.values, &mut y);
        y.truncate(self.nx());
        y
    }

    /// Traces `G(η)ψ`, `B`, `V` from an extension of `ψ`.
    pub fn traces(&self, phi: &StripField) -> DtnTraces {
        let nx = self.nx();
        let band = self.solver.cfg.working_band();
        let grid = &*self.solver.grid;
        let g = self.dtn_grid(phi);
        let psi = GridField::new(phi.row(0).to_vec()).to_spectral(band);
        let mut psi_x = phi.row(0).to_vec();
        self.solver.plan.differentiate(&mut psi_x, &mut self.solver.plan.scratch());
        let mut b = vec![0.0; nx];
        let mut v = vec![0.0; nx];
        for i in 0..nx {
            let ex = self.eta_x[i];
            b[i] = (g[i] + ex * psi_x[i]) / (1.0 + ex * ex);
            v[i] = psi_x[i] - b[i] * ex;
        }
        let d = grid.elem_diff(0);
        let mut bd = vec![0.0; nx];
        for r in 0..=grid.degree() {
            let c = d[0][r];
            for (o, val) in bd.iter_mut().zip(phi.row(r)) {
                *o += c * val;
            }
        }
        let spec = |vals: Vec<f64>| GridField::new(vals).to_spectral(band);
        DtnTraces { psi, g_psi: spec(g), b: spec(b), v: spec(v), b_direct: spec(bd) }
    }

    /// `F(x) = ∫_{−H}^0 φ̃_z (φ̃_x − η_x φ̃_z) dz` by element quadrature.
    pub fn vertical_flux(&self, phi: &StripField) -> GridField {
        let nx = self.nx();
        let grid = &*self.solver.grid;
        let p = grid.degree();
        let plan = &*self.solver.plan;
        let mut dx = phi.values.clone();
        parallel::rows_mut_init(&mut dx, nx, || plan.scratch(), |s, _, row| {
            plan.differentiate(row, s)
        });
        let mut f = vec![0.0; nx];
        let mut z = vec![0.0; nx];
        for e in 0..grid.num_elements() {
            let d = grid.elem_diff(e);
            let w = grid.elem_weights(e);
            for q in 0..=p {
                z.fill(0.0);
                for r in 0..=p {
                    let c = d[q][r];
                    for (zi, v) in z.iter_mut().zip(phi.row(e * p + r)) {
                        *zi += c * v;
                    }
                }
                let xrow = &dx[(e * p + q) * nx..(e * p + q + 1) * nx];
                for i in 0..nx {
                    f[i] += w[q] * z[i] * (xrow[i] - self.eta_x[i] * z[i]);
                }
            }
        }
        GridField::new(f)
    }

    /// `G(η)u`, band-limited to the working band.
    pub fn apply_dtn(&self, u: &SpectralField) -> Result<SpectralField> {
        let (phi, _) = self.extend(u, None)?;
        let band = self.solver.cfg.working_band();
        Ok(GridField::new(self.dtn_grid(&phi)).to_spectral(band))
    }

    /// Solves `(I + J_n G(η) J_n) u = rhs` on `L²_n` as one coupled SPD
    /// problem on the strip: minimize `½‖u‖² + E(φ̃) − ⟨rhs, u⟩` over
    /// potentials whose surface trace `u` lies in `L²_n`.
    pub fn resolvent_coupled(
        &self,
        rhs: &SpectralField,
        n: usize,
        settings: CgSettings,
        warm: Option<&StripField>,
    ) -> Result<(SpectralField, StripField, CgOutcome)> {
        self.resolvent_shifted(rhs, None, n, settings, warm)
    }

    /// Solves `u + J_n G(η)(u − f) = rhs` for `u ∈ L²_n`, where the lift `f`
    /// need not lie in `L²_n`. With `f = 0` this is the resolvent problem;
    /// otherwise it equals `u = R_n(η)(rhs + J_n G(η) f)` at the cost of a
    /// single strip solve. The returned strip has `u` on its surface row and
    /// the extension of `u − f` below it; it is a valid warm start for the
    /// next solve.
    pub fn resolvent_shifted(
        &self,
        rhs: &SpectralField,
        lift: Option<&SpectralField>,
        n: usize,
        settings: CgSettings,
        warm: Option<&StripField>,
    ) -> Result<(SpectralField, StripField, CgOutcome)> {
        let nx = self.nx();
        let len = nx * self.nz();
        let mut b = vec![0.0; len];
        if let Some(f) = lift {
            let mut lifted = vec![0.0; len];
            lifted[..nx].copy_from_slice(f.to_grid(nx).values());
            self.apply_full(&lifted, &mut b);
        }
        for (bi, r) in b[..nx].iter_mut().zip(rhs.to_grid(nx).values()) {
            *bi += r;
        }
        self.solver.project_row(&mut b[..nx], n);
        let mut x = match warm {
            Some(w) if w.values.len() == len => w.values.clone(),
            _ => vec![0.0; len],
        };
        self.solver.project_row(&mut x[..nx], n);
        let factors = self.solver.coupled_factors(n);
        let op = CoupledOp { op: self, n };
        let pc = FlatPreconditioner { solver: self.solver, factors };
        let out = krylov::pcg(&op, &pc, &b, &mut x, settings);
        if !out.converged {
            return Err(Error::CgStall { iterations: out.iterations, residual: out.relative_residual });
        }
        let u = GridField::new(x[..nx].to_vec()).to_spectral(n);
        let mut phi = self.solver.zero_strip();
        phi.values = x;
        Ok((u, phi, out))
    }
}

/// `A` restricted to potentials vanishing on the surface row.
struct DirichletOp<'a, 'b> {
    op: &'b SurfaceOperator<'a>,
}

impl LinearOperator for DirichletOp<'_, '_> {
    fn len(&self) -> usize {
        self.op.nx() * self.op.nz()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.op.apply_full(x, y);
        y[..self.op.nx()].fill(0.0);
    }
}

/// `A + e_top e_topᵀ`, with the surface row confined to `L²_n`.
struct CoupledOp<'a, 'b> {
    op: &'b SurfaceOperator<'a>,
    n: usize,
}

impl LinearOperator for CoupledOp<'_, '_> {
    fn len(&self) -> usize {
        self.op.nx() * self.op.nz()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let nx = self.op.nx();
        self.op.apply_full(x, y);
        for i in 0..nx {
            y[i] += x[i];
        }
        self.op.solver.project_row(&mut y[..nx], self.n);
    }
}

/// Band Cholesky factors of the flat operator for every horizontal mode,
/// interleaved by mode so that one sweep solves all modes at once.
///
/// Modes flagged as coupled carry `+1` on the surface diagonal; the others
/// have the surface unknown pinned to zero.
struct ModeFactors {
    nz: usize,
    bw: usize,
    modes: usize,
    /// `l[(i·(bw+1) + d)·modes + k] = L_k(i, i−d)`, with `d = 0` holding
    /// the reciprocal diagonal.
    l: Vec<f64>,
    pinned: Vec<bool>,
}

impl ModeFactors {
    fn new(grid: &VerticalGrid, nx: usize, coupled: impl Fn(usize) -> bool + Sync) -> Self {
        let modes = nx / 2 + 1;
        let nz = grid.num_nodes();
        let factors = parallel::map_indexed(modes, |k| {
            let kf = wavenumber(k, nx);
            let mut m = grid.flat_matrix(kf * kf);
            if coupled(k) {
                m.add(0, 0, 1.0);
            } else {
                m.pin_first();
            }
            m.cholesky()
        });
        let bw = factors[0].bandwidth();
        let w = bw + 1;
        let mut l = vec![0.0; nz * w * modes];
        for (k, f) in factors.iter().enumerate() {
            for i in 0..nz {
                l[(i * w) * modes + k] = 1.0 / f.lower(i, 0);
                for d in 1..=bw {
                    l[(i * w + d) * modes + k] = f.lower(i, d);
                }
            }
        }
        let pinned = (0..modes).map(|k| !coupled(k)).collect();
        Self { nz, bw, modes, l, pinned }
    }

    /// Solves in place on `x[j·modes + k]`.
    fn solve(&self, x: &mut [Complex64]) {
        let (nz, bw, m) = (self.nz, self.bw, self.modes);
        let w = bw + 1;
        for (xk, &p) in x[..m].iter_mut().zip(&self.pinned) {
            if p {
                *xk = Complex64::new(0.0, 0.0);
            }
        }
        for i in 0..nz {
            let (done, rest) = x.split_at_mut(i * m);
            let xi = &mut rest[..m];
            for d in 1..=bw.min(i) {
                let li = &self.l[(i * w + d) * m..(i * w + d + 1) * m];
                let xp = &done[(i - d) * m..(i - d + 1) * m];
                for ((a, &c), b) in xi.iter_mut().zip(li).zip(xp) {
                    *a -= b * c;
                }
            }
            let inv = &self.l[(i * w) * m..(i * w + 1) * m];
            for (a, &c) in xi.iter_mut().zip(inv) {
                *a *= c;
            }
        }
        for i in (0..nz).rev() {
            let (head, tail) = x.split_at_mut((i + 1) * m);
            let xi = &mut head[i * m..];
            for d in 1..=bw.min(nz - 1 - i) {
                let r = i + d;
                let lr = &self.l[(r * w + d) * m..(r * w + d + 1) * m];
                let xr = &tail[(d - 1) * m..d * m];
                for ((a, &c), b) in xi.iter_mut().zip(lr).zip(xr) {
                    *a -= b * c;
                }
            }
            let inv = &self.l[(i * w) * m..(i * w + 1) * m];
            for (a, &c) in xi.iter_mut().zip(inv) {
                *a *= c;
            }
        }
    }
}

/// Exact inverse of the flat operator, mode by mode in `x`.
struct FlatPreconditioner<'a> {
    solver: &'a DtnSolver,
    factors: Arc<ModeFactors>,
}

impl Preconditioner for FlatPreconditioner<'_> {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let nx = self.solver.cfg.nx;
        let modes = nx / 2 + 1;
        let plan = &*self.solver.plan;
        let scale = 1.0 / nx as f64;
        let mut spec = vec![Complex64::new(0.0, 0.0); self.solver.cfg.nz * modes];
        parallel::rows_mut_init(&mut spec, modes, || plan.scratch(), |s, j, out| {
            s.real.copy_from_slice(&r[j * nx..(j + 1) * nx]);
            plan.forward(s);
            for (o, c) in out.iter_mut().zip(&s.spec) {
                *o = c * scale;
            }
        });
        self.factors.solve(&mut spec);
        parallel::rows_mut_init(z, nx, || plan.scratch(), |s, j, out| {
            s.spec.copy_from_slice(&spec[j * modes..(j + 1) * modes]);
            plan.inverse(s);
            out.copy_from_slice(&s.real);
        });
    }
}

/// Harmonic extension of `psi` below `eta`.
pub fn solve_extension(eta: &SpectralField, psi: &SpectralField, cfg: &DtnConfig) -> Result<StripField> {
    let solver = DtnSolver::new(cfg)?;
    let op = solver.operator(eta);
    Ok(op.extend(psi, None)?.0)
}

/// Traces of an extension produced for the same `eta`.
pub fn traces(eta: &SpectralField, phi: &StripField, cfg: &DtnConfig) -> Result<DtnTraces> {
    let solver = DtnSolver::new(cfg)?;
    Ok(solver.operator(eta).traces(phi))
}

/// `F(x) = ∫ φ̃_z (φ̃_x − η_x φ̃_z) dz` for an extension below `eta`.
pub fn vertical_flux(eta: &SpectralField, phi: &StripField, cfg: &DtnConfig) -> Result<GridField> {
    let solver = DtnSolver::new(cfg)?;
    Ok(solver.operator(eta).vertical_flux(phi))
}

/// `G(η)u`.
pub fn dtn_apply(eta: &SpectralField, u: &SpectralField, cfg: &DtnConfig) -> Result<SpectralField> {
    let solver = DtnSolver::new(cfg)?;
    solver.operator(eta).apply_dtn(u)
}
