//! Band-limited real fields on the 2π-periodic line.
//!
//! A [`SpectralField`] stores the Fourier amplitudes
//! `û(ξ) = (2π)⁻¹ ∫ u(x) e^{−iξx} dx` for `ξ = 0..=M`; negative modes are
//! implied by `û(−ξ) = conj(û(ξ))`, so reality holds by construction.
//! Quadratures are trapezoid sums on the uniform grid `x_j = 2πj/N`, which
//! are exact for band-limited integrands.

use std::f64::consts::TAU;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::fft;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Fourier multiplier applied by [`SpectralField::derivative`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Derivative {
    /// `iξ`
    Dx,
    /// `−ξ²`
    Dx2,
    /// `ξ⁴`
    Dx4,
    /// `|ξ|`
    AbsD,
}

/// Grid-space operation evaluated by [`SpectralField::pointwise`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pointwise {
    /// `u·v`
    Mul,
    /// `u / (1 + v²)`
    DivOnePlusSquare,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    coeffs: Vec<Complex64>,
}

/// Real samples on the uniform grid of a power-of-two size.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    values: Vec<f64>,
}

/// Smallest power of two that is at least `n` (and at least 4).
pub fn grid_size_at_least(n: usize) -> usize {
    n.max(4).next_power_of_two()
}

/// Grid size used for products of fields band-limited to `max_mode`.
pub fn dealiased_grid(max_mode: usize) -> usize {
    grid_size_at_least(4 * max_mode.max(1))
}

impl SpectralField {
    pub fn zeros(max_mode: usize) -> Self {
        Self { coeffs: vec![ZERO; max_mode + 1] }
    }

    /// Builds a field from amplitudes for `ξ = 0..=M`. The imaginary part of
    /// the mean mode is dropped.
    pub fn from_coeffs(mut coeffs: Vec<Complex64>) -> Self {
        if coeffs.is_empty() {
            coeffs.push(ZERO);
        }
        coeffs[0].im = 0.0;
        Self { coeffs }
    }

    /// The constant field `c`.
    pub fn constant(max_mode: usize, c: f64) -> Self {
        let mut f = Self::zeros(max_mode);
        f.coeffs[0] = Complex64::new(c, 0.0);
        f
    }

    /// `amp·cos(kx)`.
    pub fn cos_mode(max_mode: usize, k: usize, amp: f64) -> Self {
        let mut f = Self::zeros(max_mode.max(k));
        if k == 0 {
            f.coeffs[0] = Complex64::new(amp, 0.0);
        } else {
            f.coeffs[k] = Complex64::new(0.5 * amp, 0.0);
        }
        f
    }

    /// `amp·sin(kx)`.
    pub fn sin_mode(max_mode: usize, k: usize, amp: f64) -> Self {
        let mut f = Self::zeros(max_mode.max(k));
        if k > 0 {
            f.coeffs[k] = Complex64::new(0.0, -0.5 * amp);
        }
        f
    }

    /// Samples `f` on a fine grid and keeps modes up to `max_mode`.
    pub fn from_fn(max_mode: usize, f: impl Fn(f64) -> f64) -> Self {
        let n = grid_size_at_least(8 * (max_mode + 1));
        GridField::from_fn(n, f).to_spectral(max_mode)
    }

    pub fn max_mode(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Amplitudes for `ξ = 0..=M`.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// `û(ξ)` for any integer ξ; zero outside the band.
    pub fn coeff(&self, xi: i64) -> Complex64 {
        let k = xi.unsigned_abs() as usize;
        match self.coeffs.get(k) {
            Some(c) if xi >= 0 => *c,
            Some(c) => c.conj(),
            None => ZERO,
        }
    }

    /// Sets `û(ξ)` for `ξ ≥ 0` (and implicitly `û(−ξ)`), growing the band if needed.
    pub fn set_coeff(&mut self, xi: usize, value: Complex64) {
        if xi >= self.coeffs.len() {
            self.coeffs.resize(xi + 1, ZERO);
        }
        self.coeffs[xi] = if xi == 0 { Complex64::new(value.re, 0.0) } else { value };
    }

    /// Mean value `(2π)⁻¹∫u`.
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    pub fn remove_mean(mut self) -> Self {
        self.coeffs[0] = ZERO;
        self
    }

    /// Truncates or zero-pads to a new band limit.
    pub fn with_max_mode(&self, max_mode: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(max_mode + 1, ZERO);
        Self { coeffs }
    }

    /// `J_n`: keeps `|ξ| ≤ n` and zeroes the rest; the band limit is unchanged.
    pub fn project(&self, n: usize) -> Self {
        let mut out = self.clone();
        for c in out.coeffs.iter_mut().skip(n + 1) {
            *c = ZERO;
        }
        out
    }

    /// Highest mode with a nonzero amplitude.
    pub fn effective_band(&self) -> usize {
        self.coeffs.iter().rposition(|c| c.norm_sqr() > 0.0).unwrap_or(0)
    }

    pub fn derivative(&self, kind: Derivative) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let xi = k as f64;
                match kind {
                    Derivative::Dx => Complex64::new(-c.im, c.re) * xi,
                    Derivative::Dx2 => c * (-xi * xi),
                    Derivative::Dx4 => c * (xi * xi * xi * xi),
                    Derivative::AbsD => c * xi,
                }
            })
            .collect();
        Self { coeffs }
    }

    /// Applies the real multiplier `m(ξ)` (even in ξ) mode by mode.
    pub fn map_modes(&self, m: impl Fn(usize) -> f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().enumerate().map(|(k, c)| c * m(k)).collect(),
        }
    }

    /// The pairing `∫ u v dx = 2π Σ_ξ û(ξ) conj(v̂(ξ))`.
    pub fn inner(&self, other: &Self) -> f64 {
        let m = self.coeffs.len().min(other.coeffs.len());
        let mut s = self.coeffs[0].re * other.coeffs[0].re;
        for k in 1..m {
            s += 2.0 * (self.coeffs[k] * other.coeffs[k].conj()).re;
        }
        TAU * s
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }

    /// `(2π Σ_ξ (1+ξ²)^s |û(ξ)|²)^{1/2}`; with `homogeneous` the mean is dropped first.
    pub fn sobolev_norm(&self, s: f64, homogeneous: bool) -> f64 {
        let start = usize::from(homogeneous);
        let mut sum = 0.0;
        for (k, c) in self.coeffs.iter().enumerate().skip(start) {
            let w = (1.0 + (k * k) as f64).powf(s);
            let mult = if k == 0 { 1.0 } else { 2.0 };
            sum += mult * w * c.norm_sqr();
        }
        (TAU * sum).sqrt()
    }

    /// Samples on `num_points` grid points. Modes at or above `num_points/2`
    /// are not representable and are dropped.
    pub fn to_grid(&self, num_points: usize) -> GridField {
        let plan = fft::plan(num_points);
        let mut s = plan.scratch();
        self.fill_spectrum(&mut s.spec);
        plan.inverse(&mut s);
        GridField { values: s.real }
    }

    /// Writes `û` into an unnormalized half spectrum ready for an inverse FFT.
    pub(crate) fn fill_spectrum(&self, spec: &mut [Complex64]) {
        let nyq = spec.len() - 1;
        for (k, slot) in spec.iter_mut().enumerate() {
            *slot = if k < nyq { self.coeffs.get(k).copied().unwrap_or(ZERO) } else { ZERO };
        }
    }

    /// Point evaluation by direct summation.
    pub fn evaluate(&self, x: f64) -> f64 {
        let mut v = self.coeffs[0].re;
        for (k, c) in self.coeffs.iter().enumerate().skip(1) {
            let (s, co) = (k as f64 * x).sin_cos();
            v += 2.0 * (c.re * co - c.im * s);
        }
        v
    }

    /// Grid-space product or quotient, evaluated on a grid of at least
    /// `4·max_mode` points and truncated back to the larger input band.
    pub fn pointwise(&self, other: &Self, op: Pointwise) -> Self {
        let band = self.max_mode().max(other.max_mode());
        let n = dealiased_grid(band);
        let u = self.to_grid(n);
        let v = other.to_grid(n);
        let values = u
            .values
            .iter()
            .zip(&v.values)
            .map(|(a, b)| match op {
                Pointwise::Mul => a * b,
                Pointwise::DivOnePlusSquare => a / (1.0 + b * b),
            })
            .collect();
        GridField { values }.to_spectral(band)
    }

    pub fn scale(&self, a: f64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| c * a).collect() }
    }

    /// `self + a·other`, on the larger of the two bands.
    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        let m = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..m)
            .map(|k| {
                let x = self.coeffs.get(k).copied().unwrap_or(ZERO);
                let y = other.coeffs.get(k).copied().unwrap_or(ZERO);
                x + y * a
            })
            .collect();
        Self { coeffs }
    }

    /// Largest absolute coefficient difference.
    pub fn max_coeff_diff(&self, other: &Self) -> f64 {
        let m = self.coeffs.len().max(other.coeffs.len());
        (0..m)
            .map(|k| (self.coeff(k as i64) - other.coeff(k as i64)).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: Self) -> SpectralField {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: Self) -> SpectralField {
        self.axpy(-1.0, rhs)
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, rhs: f64) -> SpectralField {
        self.scale(rhs)
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;
    fn neg(self) -> SpectralField {
        self.scale(-1.0)
    }
}

impl GridField {
    /// Wraps grid samples. The length must be a power of two.
    pub fn new(values: Vec<f64>) -> Self {
        assert!(
            values.len() >= 2 && values.len().is_power_of_two(),
            "grid size must be a power of two, got {}",
            values.len()
        );
        Self { values }
    }

    pub fn zeros(num_points: usize) -> Self {
        Self::new(vec![0.0; num_points])
    }

    pub fn from_fn(num_points: usize, f: impl Fn(f64) -> f64) -> Self {
        Self::new((0..num_points).map(|j| f(grid_point(j, num_points))).collect())
    }

    pub fn num_points(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Coefficients `û(ξ) = N⁻¹ Σ_j u_j e^{−iξx_j}` for `ξ ≤ max_mode`
    /// (modes at or beyond `N/2` are left zero).
    pub fn to_spectral(&self, max_mode: usize) -> SpectralField {
        let n = self.values.len();
        let plan = fft::plan(n);
        let mut s = plan.scratch();
        s.real.copy_from_slice(&self.values);
        plan.forward(&mut s);
        let scale = 1.0 / n as f64;
        let nyq = n / 2;
        let coeffs = (0..=max_mode)
            .map(|k| if k < nyq { s.spec[k] * scale } else { ZERO })
            .collect();
        SpectralField::from_coeffs(coeffs)
    }

    /// Trapezoid-rule integral over one period.
    pub fn integral(&self) -> f64 {
        TAU / self.values.len() as f64 * self.values.iter().sum::<f64>()
    }
}

/// `x_j = 2πj/N`.
pub fn grid_point(j: usize, n: usize) -> f64 {
    TAU * j as f64 / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(rng: &mut ChaCha8Rng, m: usize) -> SpectralField {
        let coeffs = (0..=m)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        SpectralField::from_coeffs(coeffs)
    }

    #[test]
    fn cutoff_keeps_low_modes() {
        let u = SpectralField::from_coeffs(vec![Complex64::new(1.0, 0.0); 6]);
        let p = u.project(3);
        for k in 0..=5 {
            let expect = if k <= 3 { 1.0 } else { 0.0 };
            assert_eq!(p.coeff(k).re, expect);
            assert_eq!(p.coeff(-k).re, expect);
        }
        assert_eq!(p.project(3), p);
    }

    #[test]
    fn projection_is_self_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let u = random_field(&mut rng, 12);
            let v = random_field(&mut rng, 12);
            // ⟨J_n u, v⟩ by explicit summation over ξ = −M..M
            let direct = |a: &SpectralField, b: &SpectralField| {
                (-12i64..=12).map(|xi| (a.coeff(xi) * b.coeff(xi).conj()).re).sum::<f64>() * TAU
            };
            let lhs = direct(&u.project(5), &v);
            let rhs = direct(&u, &v.project(5));
            assert!((lhs - rhs).abs() < 1e-14 * (1.0 + lhs.abs()));
            assert!((u.project(5).inner(&v) - lhs).abs() < 1e-13);
        }
    }

    #[test]
    fn multipliers() {
        let c = SpectralField::cos_mode(8, 3, 1.0).derivative(Derivative::AbsD);
        assert!((c.coeff(3).re - 1.5).abs() < 1e-15);
        let k = SpectralField::constant(4, 2.5);
        assert_eq!(k.derivative(Derivative::Dx).l2_norm(), 0.0);
        assert_eq!(k.derivative(Derivative::AbsD).l2_norm(), 0.0);
        let s = SpectralField::sin_mode(4, 3, 1.0).derivative(Derivative::Dx4);
        assert!((s.evaluate(0.3) - 81.0 * (0.9f64).sin()).abs() < 1e-12);
        let d = SpectralField::sin_mode(4, 2, 1.0).derivative(Derivative::Dx);
        assert!((d.evaluate(0.7) - 2.0 * (1.4f64).cos()).abs() < 1e-13);
        let d2 = SpectralField::cos_mode(4, 2, 1.0).derivative(Derivative::Dx2);
        assert!((d2.evaluate(0.7) + 4.0 * (1.4f64).cos()).abs() < 1e-13);
    }

    #[test]
    fn sobolev_norms() {
        assert_eq!(SpectralField::zeros(5).sobolev_norm(1.5, false), 0.0);
        assert_eq!(SpectralField::constant(5, 3.0).sobolev_norm(0.5, true), 0.0);
        // trapezoid oracle for ∫cos²x, exact for band-limited integrands
        let u = SpectralField::cos_mode(4, 1, 1.0);
        let g = u.to_grid(16);
        let quad: f64 = g.values().iter().map(|v| v * v).sum::<f64>() * TAU / 16.0;
        assert!((u.sobolev_norm(0.0, false) - quad.sqrt()).abs() < 1e-12);
        assert!((u.sobolev_norm(1.0, false) - (2.0 * quad).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn products() {
        let c = SpectralField::cos_mode(4, 1, 1.0);
        let z = SpectralField::zeros(4);
        assert_eq!(c.pointwise(&z, Pointwise::Mul).l2_norm(), 0.0);
        let sq = c.pointwise(&c, Pointwise::Mul);
        assert!((sq.coeff(0).re - 0.5).abs() < 1e-14);
        assert!((sq.coeff(2).re - 0.25).abs() < 1e-14);
        assert!(sq.coeff(1).norm() < 1e-14 && sq.coeff(3).norm() < 1e-14);
        let one = SpectralField::constant(4, 1.0);
        let q = one.pointwise(&z, Pointwise::DivOnePlusSquare);
        assert!((q.coeff(0).re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn absd_is_nonnegative_per_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_field(&mut rng, 16).remove_mean();
        let a = u.derivative(Derivative::AbsD);
        for k in 0..=16i64 {
            assert!((u.coeff(k).conj() * a.coeff(k)).re >= 0.0);
        }
        let v = random_field(&mut rng, 16);
        let lhs = u.derivative(Derivative::AbsD).inner(&v);
        let rhs = u.inner(&v.derivative(Derivative::AbsD));
        assert!((lhs - rhs).abs() < 1e-11 * lhs.abs().max(1.0));
    }

    proptest! {
        #[test]
        fn grid_round_trip(seed in 0u64..1000, m in 0usize..40) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = random_field(&mut rng, m);
            let n = grid_size_at_least(2 * m + 2);
            let back = u.to_grid(n).to_spectral(m);
            prop_assert!(back.max_coeff_diff(&u) < 1e-14 * (m as f64 + 1.0));
        }

        #[test]
        fn parseval(seed in 0u64..1000, m in 1usize..30) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = random_field(&mut rng, m);
            let v = random_field(&mut rng, m);
            let n = grid_size_at_least(2 * m + 2);
            let (gu, gv) = (u.to_grid(n), v.to_grid(n));
            let quad: f64 = gu.values().iter().zip(gv.values()).map(|(a, b)| a * b).sum::<f64>()
                * TAU / n as f64;
            let spec = u.inner(&v);
            prop_assert!((quad - spec).abs() <= 1e-13 * (u.l2_norm() * v.l2_norm()).max(1e-300));
        }

        #[test]
        fn projection_contracts(seed in 0u64..1000, n in 0usize..20) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = random_field(&mut rng, 20);
            prop_assert!(u.project(n).l2_norm() <= u.l2_norm());
            prop_assert_eq!(u.project(n).project(n), u.project(n));
        }
    }
}
