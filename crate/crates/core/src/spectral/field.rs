use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use ndarray::{Array2, Zip};
use num_complex::Complex64;

use super::grid::TorusGrid;
use crate::error::{Error, Result};

/// Real field on the torus held as Fourier coefficients `u(k) = <u, e_k>` with
/// `e_k(x) = (2pi)^-1 exp(i k.x)`.
///
/// Coefficients are stored in FFT order; index `i` maps to wavenumber
/// [`TorusGrid::wavenumber`]. Hermitian symmetry `u(-k) = conj(u(k))` holds for
/// every field produced by this crate.
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: TorusGrid,
    coeffs: Array2<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: &TorusGrid) -> Self {
        let m = grid.modes();
        Self {
            grid: grid.clone(),
            coeffs: Array2::zeros((m, m)),
        }
    }

    /// Spatially constant field `u = value`.
    pub fn constant(grid: &TorusGrid, value: f64) -> Self {
        let mut f = Self::zeros(grid);
        f.coeffs[[0, 0]] = Complex64::new(2.0 * PI * value, 0.0);
        f
    }

    /// Wraps raw coefficients. The caller is responsible for Hermitian symmetry.
    pub fn from_coeffs(grid: &TorusGrid, coeffs: Array2<Complex64>) -> Result<Self> {
        let m = grid.modes();
        if coeffs.dim() != (m, m) {
            return Err(Error::GridMismatch(m, coeffs.nrows()));
        }
        Ok(Self {
            grid: grid.clone(),
            coeffs,
        })
    }

    /// Forward transform of grid samples.
    pub fn from_physical(grid: &TorusGrid, values: &Array2<f64>) -> Result<Self> {
        let m = grid.modes();
        if values.dim() != (m, m) {
            return Err(Error::GridMismatch(m, values.nrows()));
        }
        if let Some(((i, j), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite(i, j));
        }
        Ok(Self::from_physical_unchecked(grid, values))
    }

    pub(crate) fn from_physical_unchecked(grid: &TorusGrid, values: &Array2<f64>) -> Self {
        let m = grid.modes();
        let scale = 2.0 * PI / (m * m) as f64;
        let mut coeffs = values.mapv(|v| Complex64::new(v, 0.0));
        grid.fft2(&mut coeffs);
        coeffs.mapv_inplace(|c| c * scale);
        Self {
            grid: grid.clone(),
            coeffs,
        }
    }

    /// Inverse transform onto the physical grid.
    pub fn to_physical(&self) -> Array2<f64> {
        let mut data = self.coeffs.clone();
        self.grid.ifft2(&mut data);
        let scale = 1.0 / (2.0 * PI);
        data.mapv(|c| c.re * scale)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &Array2<Complex64> {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Array2<Complex64> {
        self.coeffs
    }

    /// Coefficient at signed wavevector `k`, if it is on the grid.
    pub fn coeff(&self, k: (i64, i64)) -> Option<Complex64> {
        let m = self.grid.modes() as i64;
        let idx = |k: i64| (k >= -m / 2 && k < m / 2).then(|| k.rem_euclid(m) as usize);
        Some(self.coeffs[[idx(k.0)?, idx(k.1)?]])
    }

    /// Spatial mean `(2pi)^-2 int u dx`.
    pub fn mean(&self) -> f64 {
        self.coeffs[[0, 0]].re / (2.0 * PI)
    }

    /// Applies a real Fourier multiplier given as a function of `|k|^2`.
    pub fn map_radial(&self, multiplier: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        Zip::from(&mut out.coeffs)
            .and(self.grid.k_squared())
            .for_each(|c, &k2| *c *= multiplier(k2));
        out
    }

    /// Applies a precomputed real multiplier table (FFT order).
    pub fn apply_multiplier(&self, table: &Array2<f64>) -> Self {
        let mut out = self.clone();
        Zip::from(&mut out.coeffs)
            .and(table)
            .for_each(|c, &w| *c *= w);
        out
    }

    /// Largest violation of `u(-k) = conj(u(k))`.
    pub fn hermitian_defect(&self) -> f64 {
        let m = self.grid.modes();
        let mut worst = 0.0f64;
        for i in 0..m {
            let ci = self.grid.conjugate_index(i);
            for j in 0..m {
                let cj = self.grid.conjugate_index(j);
                worst = worst.max((self.coeffs[[ci, cj]] - self.coeffs[[i, j]].conj()).norm());
            }
        }
        worst
    }

    /// `sum_k |u(k)|^2 w(|k|^2)`.
    pub(crate) fn weighted_energy(&self, weight: impl Fn(f64) -> f64) -> f64 {
        Zip::from(&self.coeffs)
            .and(self.grid.k_squared())
            .fold(0.0, |acc, c, &k2| acc + c.norm_sqr() * weight(k2))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        Zip::from(&self.coeffs)
            .and(&other.coeffs)
            .fold(0.0f64, |acc, a, b| acc.max((a - b).norm()))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            coeffs: self.coeffs.mapv(|c| c * factor),
        }
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(self + other)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(self - other)
    }
}

impl<'a> Add<&'a SpectralField> for &'a SpectralField {
    type Output = SpectralField;

    fn add(self, rhs: &SpectralField) -> SpectralField {
        assert_eq!(self.grid, rhs.grid, "grid mismatch");
        SpectralField {
            grid: self.grid.clone(),
            coeffs: &self.coeffs + &rhs.coeffs,
        }
    }
}

impl<'a> Sub<&'a SpectralField> for &'a SpectralField {
    type Output = SpectralField;

    fn sub(self, rhs: &SpectralField) -> SpectralField {
        assert_eq!(self.grid, rhs.grid, "grid mismatch");
        SpectralField {
            grid: self.grid.clone(),
            coeffs: &self.coeffs - &rhs.coeffs,
        }
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;

    fn mul(self, rhs: f64) -> SpectralField {
        self.scaled(rhs)
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;

    fn neg(self) -> SpectralField {
        self.scaled(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    fn grid(m: usize) -> TorusGrid {
        TorusGrid::new(m).unwrap()
    }

    #[test]
    fn constant_one_has_zero_mode_two_pi() {
        let g = grid(8);
        let f = SpectralField::from_physical(&g, &Array2::ones((8, 8))).unwrap();
        assert!((f.coeffs()[[0, 0]] - Complex64::new(2.0 * PI, 0.0)).norm() < 1e-13);
        let rest: f64 = f.coeffs().iter().skip(1).map(|c| c.norm()).sum();
        assert!(rest < 1e-12);
    }

    #[test]
    fn real_basis_cosine_coefficients() {
        // cos(x1) / (sqrt(2) pi) is the real basis element for k = (1, 0)
        let g = grid(16);
        let v = Array2::from_shape_fn((16, 16), |(i, j)| g.point(i, j).0.cos() / (SQRT_2 * PI));
        let f = SpectralField::from_physical(&g, &v).unwrap();
        for (k, want) in [((1, 0), 1.0 / SQRT_2), ((-1, 0), 1.0 / SQRT_2), ((0, 1), 0.0)] {
            let c = f.coeff(k).unwrap();
            assert!((c.re - want).abs() < 1e-13 && c.im.abs() < 1e-13, "{k:?} {c}");
        }
    }

    #[test]
    fn zero_field_is_zero() {
        let g = grid(8);
        let f = SpectralField::from_physical(&g, &Array2::zeros((8, 8))).unwrap();
        assert!(f.coeffs().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn rejects_non_finite() {
        let g = grid(8);
        let mut v = Array2::zeros((8, 8));
        v[[2, 3]] = f64::NAN;
        assert!(matches!(
            SpectralField::from_physical(&g, &v),
            Err(Error::NonFinite(2, 3))
        ));
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = SpectralField::zeros(&grid(8));
        let b = SpectralField::zeros(&grid(16));
        assert!(matches!(a.try_add(&b), Err(Error::GridMismatch(8, 16))));
    }

    #[test]
    fn constant_round_trips_and_mean() {
        let g = grid(8);
        let f = SpectralField::constant(&g, 3.5);
        assert!((f.mean() - 3.5).abs() < 1e-15);
        assert!(f.to_physical().iter().all(|v| (v - 3.5).abs() < 1e-14));
    }
}
