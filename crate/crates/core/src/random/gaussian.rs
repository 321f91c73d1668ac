use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::RngStream;
use crate::error::{invalid, Result};
use crate::spectral::{SpectralField, TorusGrid};

/// Centred Gaussian field with `E|u(k)|^2 = variance[k]` and Hermitian symmetry.
///
/// Writing `u = a e_k + b e_-k` in the real basis with `a, b ~ N(0, v)` gives
/// `u(k) = (a - i b) / sqrt(2)`, so real and imaginary parts each carry `v/2`.
/// Self-conjugate grid modes (the origin and the Nyquist modes) are real with
/// variance `v`. Draws are taken in row-major order over the representative of
/// each conjugate pair.
pub fn hermitian_gaussian<R: Rng + ?Sized>(
    grid: &TorusGrid,
    variance: &Array2<f64>,
    rng: &mut R,
) -> SpectralField {
    let m = grid.modes();
    let mut coeffs = Array2::<Complex64>::zeros((m, m));
    for i in 0..m {
        let ci = grid.conjugate_index(i);
        for j in 0..m {
            let cj = grid.conjugate_index(j);
            if (ci, cj) < (i, j) {
                continue;
            }
            let v = variance[[i, j]];
            if (ci, cj) == (i, j) {
                let x: f64 = rng.sample(StandardNormal);
                coeffs[[i, j]] = Complex64::new(x * v.sqrt(), 0.0);
            } else {
                let sd = (v / 2.0).sqrt();
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                let c = Complex64::new(re * sd, im * sd);
                coeffs[[i, j]] = c;
                coeffs[[ci, cj]] = c.conj();
            }
        }
    }
    SpectralField::from_coeffs(grid, coeffs).expect("shape matches grid")
}

/// `(1 + |k|^2)^-1` on the grid.
pub fn gff_variance(grid: &TorusGrid) -> Array2<f64> {
    grid.k_squared().mapv(|k2| 1.0 / (1.0 + k2))
}

/// One draw of the massive free field `mu_0`.
pub fn gff_sample(grid: &TorusGrid, stream: &RngStream) -> SpectralField {
    hermitian_gaussian(grid, &gff_variance(grid), &mut stream.rng())
}

/// Increment of the `L^2` cylindrical Wiener process over a step `dt`:
/// `N(0, dt)` along every real basis direction.
pub fn wiener_increment(grid: &TorusGrid, dt: f64, stream: &RngStream) -> Result<SpectralField> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt", format!("{dt} must be positive")));
    }
    let variance = Array2::from_elem((grid.modes(), grid.modes()), dt);
    Ok(hermitian_gaussian(grid, &variance, &mut stream.rng()))
}
