//! Preconditioned conjugate gradients on flat `f64` vectors.

/// A symmetric linear map on `R^len`.
pub trait LinearOperator {
    fn len(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// An approximation of the inverse of a [`LinearOperator`].
pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

/// No preconditioning.
pub struct Identity;

impl Preconditioner for Identity {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CgSettings {
    /// Relative residual target, measured in the preconditioner norm.
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b` starting from the contents of `x`.
///
/// Convergence is measured in the preconditioner norm,
/// `(rᵀM⁻¹r / bᵀM⁻¹b)^{1/2} ≤ tol`, which is insensitive to the wildly
/// different row scalings of graded discretizations. The residual is
/// recomputed from scratch every 50 iterations.
pub fn pcg<A, P>(a: &A, m: &P, b: &[f64], x: &mut [f64], settings: CgSettings) -> CgOutcome
where
    A: LinearOperator + ?Sized,
    P: Preconditioner + ?Sized,
{
    let n = a.len();
    debug_assert_eq!(b.len(), n);
    debug_assert_eq!(x.len(), n);
    if b.iter().all(|&v| v == 0.0) {
        x.fill(0.0);
        return CgOutcome { iterations: 0, relative_residual: 0.0, converged: true };
    }
    let mut z = vec![0.0; n];
    m.apply(b, &mut z);
    let bnorm = dot(b, &z).max(0.0).sqrt();
    if bnorm == 0.0 {
        x.fill(0.0);
        return CgOutcome { iterations: 0, relative_residual: 0.0, converged: true };
    }
    let target = settings.tol * bnorm;

    let mut r = vec![0.0; n];
    let mut ap = vec![0.0; n];
    a.apply(x, &mut ap);
    for i in 0..n {
        r[i] = b[i] - ap[i];
    }
    m.apply(&r, &mut z);
    let mut rz = dot(&r, &z);
    let mut rnorm = rz.max(0.0).sqrt();
    if rnorm <= target {
        return CgOutcome { iterations: 0, relative_residual: rnorm / bnorm, converged: true };
    }
    let mut p = z.clone();

    for it in 1..=settings.max_iter {
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return CgOutcome { iterations: it, relative_residual: rnorm / bnorm, converged: false };
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
        }
        if it % 50 == 0 {
            a.apply(x, &mut ap);
            for i in 0..n {
                r[i] = b[i] - ap[i];
            }
        } else {
            for i in 0..n {
                r[i] -= alpha * ap[i];
            }
        }
        m.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        rnorm = rz_new.max(0.0).sqrt();
        if rnorm <= target {
            return CgOutcome { iterations: it, relative_residual: rnorm / bnorm, converged: true };
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    CgOutcome { iterations: settings.max_iter, relative_residual: rnorm / bnorm, converged: false }
}
