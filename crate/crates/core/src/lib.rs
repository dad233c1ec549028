//! Pseudo-spectral simulation of an inviscid free surface under an elastic
//! plate on the periodic line, with the checks that go with it.

pub mod app;
pub mod config;
pub mod error;
pub mod fft;
pub mod krylov;
pub mod parallel;
pub mod record;
pub mod diagnostics;
pub mod elliptic;
pub mod galerkin;
pub mod spectral;
pub mod surface;
pub mod verify;
pub mod vertical;

pub use error::{Error, Result};
pub use spectral::{Derivative, GridField, Pointwise, SpectralField};
