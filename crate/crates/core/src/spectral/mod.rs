//! Torus geometry, Fourier transforms, norms, heat semigroup and Green kernels.

mod field;
mod green;
mod grid;
mod heat;
mod norms;

pub use field::SpectralField;
pub use green::green_field;
pub use grid::TorusGrid;
pub use heat::{heat_semigroup, heat_semigroup_massless};
pub use norms::{
    besov_norm, besov_sobolev_ratio_range, dyadic_block, l2_norm, norm, sobolev_norm,
    DyadicPartition, NormSpec,
};
