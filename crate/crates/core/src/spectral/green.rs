use std::f64::consts::PI;

use ndarray::Zip;
use num_complex::Complex64;

use super::field::SpectralField;
use super::grid::TorusGrid;
use crate::error::{invalid, Result};
use crate::wick::CutoffProfile;

/// Truncated kernel `K^gamma_N(z) = (2pi)^-2 sum_k psi(2^-N k)^2 (1 + |k|^2)^-gamma e^{ik.z}`
/// as a field in `z`. With `gamma = 1` its value at the origin is `C_N`.
pub fn green_field(
    gamma: f64,
    psi: &CutoffProfile,
    level: u32,
    grid: &TorusGrid,
) -> Result<SpectralField> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(invalid("gamma", format!("{gamma} outside (0, 1]")));
    }
    let table = psi.multiplier(level, grid)?;
    let mut coeffs = ndarray::Array2::zeros((grid.modes(), grid.modes()));
    Zip::from(&mut coeffs)
        .and(&table)
        .and(grid.k_squared())
        .for_each(|c, &p, &k2| {
            *c = Complex64::new(p * p * (1.0 + k2).powf(-gamma) / (2.0 * PI), 0.0);
        });
    SpectralField::from_coeffs(grid, coeffs)
}
