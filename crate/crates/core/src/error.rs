use thiserror::Error;

/// Errors raised by solvers, integrators and the I/O layer.
#[derive(Debug, Error)]
pub enum Error {
    /// The extension solve did not reach its tolerance.
    #[error("elliptic solve did not converge: relative residual {residual:.3e} after {iterations} iterations")]
    NonConvergence { iterations: usize, residual: f64 },

    /// Conjugate gradients for the resolvent ran out of iterations.
    #[error("resolvent CG stalled: relative residual {residual:.3e} after {iterations} iterations")]
    CgStall { iterations: usize, residual: f64 },

    #[error("blow-up at t = {t}: state norm {norm:.3e} exceeds guard")]
    BlowUp { t: f64, norm: f64 },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid value for `{key}`{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Validation { key: String, line: Option<usize>, message: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("format error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Format { line: Option<usize>, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
