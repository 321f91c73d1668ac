use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform `M x M` collocation grid on `[0, 2pi)^2` with mode set `[-M/2, M/2)^2`.
///
/// Cloning is cheap: the FFT plans and wavenumber tables are shared.
#[derive(Clone)]
pub struct TorusGrid {
    inner: Arc<GridInner>,
}

struct GridInner {
    modes: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    wavenumbers: Vec<i64>,
    k_squared: Array2<f64>,
}

impl TorusGrid {
    pub fn new(modes: usize) -> Result<Self> {
        if modes < 8 || !modes.is_power_of_two() {
            return Err(Error::InvalidGrid(modes));
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(modes);
        let inverse = planner.plan_fft_inverse(modes);
        let wavenumbers: Vec<i64> = (0..modes)
            .map(|i| {
                if i < modes / 2 {
                    i as i64
                } else {
                    i as i64 - modes as i64
                }
            })
            .collect();
        let k_squared = Array2::from_shape_fn((modes, modes), |(i, j)| {
            let (a, b) = (wavenumbers[i], wavenumbers[j]);
            (a * a + b * b) as f64
        });
        Ok(Self {
            inner: Arc::new(GridInner {
                modes,
                forward,
                inverse,
                wavenumbers,
                k_squared,
            }),
        })
    }

    /// Modes per dimension `M`.
    pub fn modes(&self) -> usize {
        self.inner.modes
    }

    pub fn points(&self) -> usize {
        self.inner.modes * self.inner.modes
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.inner.modes as f64
    }

    /// Area element of the grid quadrature.
    pub fn cell_area(&self) -> f64 {
        let h = self.spacing();
        h * h
    }

    /// Signed wavenumber stored at array index `i`.
    pub fn wavenumber(&self, i: usize) -> i64 {
        self.inner.wavenumbers[i]
    }

    pub fn wavevector(&self, i: usize, j: usize) -> (i64, i64) {
        (self.inner.wavenumbers[i], self.inner.wavenumbers[j])
    }

    /// `|k|^2` for every stored mode, in FFT order.
    pub fn k_squared(&self) -> &Array2<f64> {
        &self.inner.k_squared
    }

    /// Largest `|k|` present on the grid.
    pub fn max_wavenumber(&self) -> f64 {
        (self.inner.modes as f64 / 2.0) * 2f64.sqrt()
    }

    /// Array index of the mode `-k`.
    pub fn conjugate_index(&self, i: usize) -> usize {
        (self.inner.modes - i) % self.inner.modes
    }

    /// Physical coordinates of grid point `(i, j)`.
    pub fn point(&self, i: usize, j: usize) -> (f64, f64) {
        let h = self.spacing();
        (i as f64 * h, j as f64 * h)
    }

    /// Grid quadrature of a function sampled on the grid.
    pub fn integrate(&self, values: &Array2<f64>) -> f64 {
        values.sum() * self.cell_area()
    }

    /// Unnormalised forward 2D DFT.
    pub(crate) fn fft2(&self, data: &mut Array2<Complex64>) {
        self.transform(data, &self.inner.forward);
    }

    /// Unnormalised inverse 2D DFT.
    pub(crate) fn ifft2(&self, data: &mut Array2<Complex64>) {
        self.transform(data, &self.inner.inverse);
    }

    fn transform(&self, data: &mut Array2<Complex64>, plan: &Arc<dyn Fft<f64>>) {
        debug_assert_eq!(data.dim(), (self.modes(), self.modes()));
        if !data.is_standard_layout() {
            *data = data.as_standard_layout().into_owned();
        }
        plan.process(data.as_slice_mut().expect("standard layout"));
        let mut transposed = data.t().as_standard_layout().into_owned();
        plan.process(transposed.as_slice_mut().expect("standard layout"));
        data.assign(&transposed.t());
    }

    pub(crate) fn check_same(&self, other: &TorusGrid) -> Result<()> {
        if self.modes() == other.modes() {
            Ok(())
        } else {
            Err(Error::GridMismatch(self.modes(), other.modes()))
        }
    }
}

impl PartialEq for TorusGrid {
    fn eq(&self, other: &Self) -> bool {
        self.modes() == other.modes()
    }
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid").field("modes", &self.modes()).finish()
    }
}
