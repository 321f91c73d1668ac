//! Spectral laboratory for the exponential interaction stochastic quantization
//! equation on the two-dimensional torus.

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod measures;
pub mod random;
pub mod spectral;
pub mod wick;

pub use error::{Error, Result};
pub use random::{OuTrajectory, RngStream};
pub use spectral::{NormSpec, SpectralField, TorusGrid};
pub use wick::{CutoffProfile, WickParams};
