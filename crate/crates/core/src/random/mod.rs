//! Exact Gaussian sampling with reproducible counter-based streams.

mod gaussian;
mod ou;
mod stream;

pub use gaussian::{gff_sample, gff_variance, hermitian_gaussian, wiener_increment};
pub use ou::{
    ou_path, ou_transition, ou_transition_scaled, uniform_times, OuPropagator, OuTrajectory,
    StreamLayout,
};
pub use stream::{purpose, RngStream};
