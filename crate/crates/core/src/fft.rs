//! Real FFT plans shared across the crate.
//!
//! Plans are immutable once built and cached per length, so they can be
//! handed to any number of threads.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

/// Forward/inverse real transforms of one length.
pub struct FftPlan {
    len: usize,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
}

/// Per-worker buffers for [`FftPlan`].
pub struct FftScratch {
    pub real: Vec<f64>,
    pub spec: Vec<Complex64>,
    fwd: Vec<Complex64>,
    inv: Vec<Complex64>,
}

fn cache() -> &'static Mutex<HashMap<usize, Arc<FftPlan>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<FftPlan>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Returns the cached plan for `len` points, building it on first use.
pub fn plan(len: usize) -> Arc<FftPlan> {
    assert!(len >= 2 && len.is_power_of_two(), "FFT length must be a power of two, got {len}");
    let mut map = cache().lock().unwrap_or_else(|e| e.into_inner());
    map.entry(len)
        .or_insert_with(|| {
            let mut planner = RealFftPlanner::<f64>::new();
            Arc::new(FftPlan {
                len,
                forward: planner.plan_fft_forward(len),
                inverse: planner.plan_fft_inverse(len),
            })
        })
        .clone()
}

impl FftPlan {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of complex outputs, `len / 2 + 1`.
    pub fn spectrum_len(&self) -> usize {
        self.len / 2 + 1
    }

    pub fn scratch(&self) -> FftScratch {
        FftScratch {
            real: vec![0.0; self.len],
            spec: vec![Complex64::new(0.0, 0.0); self.spectrum_len()],
            fwd: self.forward.make_scratch_vec(),
            inv: self.inverse.make_scratch_vec(),
        }
    }

    /// Unnormalized forward transform of `s.real` into `s.spec`.
    /// `s.real` is clobbered.
    pub fn forward(&self, s: &mut FftScratch) {
        self.forward
            .process_with_scratch(&mut s.real, &mut s.spec, &mut s.fwd)
            .expect("forward FFT buffer sizes");
    }

    /// Unnormalized inverse transform of `s.spec` into `s.real`.
    /// The imaginary parts of the zero and Nyquist bins are discarded.
    pub fn inverse(&self, s: &mut FftScratch) {
        let last = s.spec.len() - 1;
        s.spec[0].im = 0.0;
        s.spec[last].im = 0.0;
        self.inverse
            .process_with_scratch(&mut s.spec, &mut s.real, &mut s.inv)
            .expect("inverse FFT buffer sizes");
    }

    /// Spectral x-derivative of one periodic row, in place.
    /// The Nyquist bin is zeroed so the discrete operator is antisymmetric.
    pub fn differentiate(&self, row: &mut [f64], s: &mut FftScratch) {
        s.real.copy_from_slice(row);
        self.forward(s);
        let scale = 1.0 / self.len as f64;
        let last = s.spec.len() - 1;
        for (k, c) in s.spec.iter_mut().enumerate() {
            *c = if k == last {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(-c.im, c.re) * (k as f64 * scale)
            };
        }
        self.inverse(s);
        row.copy_from_slice(&s.real);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_of_sine_row() {
        let n = 32;
        let p = plan(n);
        let mut s = p.scratch();
        let mut row: Vec<f64> = (0..n)
            .map(|j| (3.0 * std::f64::consts::TAU * j as f64 / n as f64).sin())
            .collect();
        p.differentiate(&mut row, &mut s);
        for (j, v) in row.iter().enumerate() {
            let x = std::f64::consts::TAU * j as f64 / n as f64;
            assert!((v - 3.0 * (3.0 * x).cos()).abs() < 1e-13);
        }
    }

    #[test]
    fn plans_are_shared() {
        assert!(Arc::ptr_eq(&plan(64), &plan(64)));
    }
}
