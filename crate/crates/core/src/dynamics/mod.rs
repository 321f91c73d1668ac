//! Time stepping for the cutoff equations, the shifted remainder equation and
//! the nonnegative product.

mod config;
mod path;
mod product;
mod solver;

pub use config::{Equation, Scheme, SqeConfig, DEFAULT_STABILITY_LIMIT, STEP_LEVEL_BOUND};
pub use path::{Decomposition, Diagnostics, SolutionPath};
pub use product::{measure_product, NONNEGATIVITY_TOLERANCE};
pub use solver::{
    constant_path, contraction_check, solve_shifted, solve_sqe_full, solve_sqe_full_on,
    solve_sqe_full_substeps, solve_sqe_projected, solve_sqe_projected_on, ContractionReport,
    OuDriver, ShiftedStepper, SqeStepper, ROUGHNESS_LIMIT,
};

#[cfg(test)]
mod tests;
