use std::f64::consts::PI;

use ndarray::Array2;
use serde::Serialize;

use super::cutoff::{renorm_constant, CutoffProfile};
use crate::error::{invalid, Error, Result};
use crate::random::OuTrajectory;
use crate::spectral::{sobolev_norm, SpectralField, TorusGrid};

/// Largest exponent accepted before a replica is flagged as overflowing.
pub const OVERFLOW_EXPONENT: f64 = 700.0;

/// Charge, level, regularity and the derived renormalization constant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WickParams {
    pub alpha: f64,
    pub level: u32,
    pub beta: f64,
    /// `C_N` for the profile and grid the parameters were built with.
    pub c_n: f64,
}

impl WickParams {
    pub fn new(
        alpha: f64,
        level: u32,
        beta: f64,
        psi: &CutoffProfile,
        grid: &TorusGrid,
    ) -> Result<Self> {
        let bound = (4.0 * PI).sqrt();
        if !(alpha.abs() < bound) {
            return Err(invalid("alpha", format!("|{alpha}| must be below sqrt(4 pi)")));
        }
        let floor = alpha * alpha / (4.0 * PI);
        if !(beta > floor && beta < 1.0) {
            return Err(invalid("beta", format!("{beta} outside ({floor}, 1)")));
        }
        Ok(Self {
            alpha,
            level,
            beta,
            c_n: renorm_constant(psi, level, grid)?,
        })
    }

    /// Smallest admissible `beta` plus half the gap to 1; a neutral default.
    pub fn default_beta(alpha: f64) -> f64 {
        let floor = alpha * alpha / (4.0 * PI);
        0.5 * (floor + 1.0)
    }
}

/// Precomputed `exp_N(alpha phi) = exp(alpha P_N phi - alpha^2 C_N / 2)` on one grid.
#[derive(Clone, Debug)]
pub struct WickExp {
    params: WickParams,
    projector: Array2<f64>,
    /// Constant subtracted in the exponent, `alpha^2 C / 2`.
    shift: f64,
}

impl WickExp {
    pub fn new(params: WickParams, psi: &CutoffProfile, grid: &TorusGrid) -> Result<Self> {
        Ok(Self {
            params,
            projector: psi.multiplier(params.level, grid)?,
            shift: params.alpha * params.alpha * params.c_n / 2.0,
        })
    }

    /// Same projector but renormalized with `factor * C_N`. Only used to build
    /// deliberately mis-renormalized controls.
    pub fn with_constant_factor(mut self, factor: f64) -> Self {
        self.shift = self.params.alpha * self.params.alpha * self.params.c_n * factor / 2.0;
        self
    }

    pub fn params(&self) -> &WickParams {
        &self.params
    }

    /// `psi(2^-N k)` table.
    pub fn projector(&self) -> &Array2<f64> {
        &self.projector
    }

    pub fn project(&self, field: &SpectralField) -> SpectralField {
        field.apply_multiplier(&self.projector)
    }

    /// Exponent `alpha u - alpha^2 C/2` applied to physical values of an
    /// already projected field.
    pub fn exp_of_projected(&self, projected: &Array2<f64>) -> Result<Array2<f64>> {
        let a = self.params.alpha;
        let top = projected
            .iter()
            .fold(f64::NEG_INFINITY, |m, &u| m.max(a * u));
        if !(top - self.shift <= OVERFLOW_EXPONENT) {
            return Err(Error::Overflow {
                exponent: top - self.shift,
            });
        }
        Ok(projected.mapv(|u| (a * u - self.shift).exp()))
    }

    /// Physical grid values of `exp_N(alpha phi)`.
    pub fn physical(&self, field: &SpectralField) -> Result<Array2<f64>> {
        self.exp_of_projected(&self.project(field).to_physical())
    }

    pub fn field(&self, field: &SpectralField) -> Result<SpectralField> {
        let values = self.physical(field)?;
        Ok(SpectralField::from_physical_unchecked(field.grid(), &values))
    }
}

/// `exp(alpha P_N phi - alpha^2 C_N / 2)` evaluated on the physical grid.
/// Fails with [`Error::Overflow`] instead of clamping.
pub fn wick_exp_gff(
    field: &SpectralField,
    params: &WickParams,
    psi: &CutoffProfile,
) -> Result<SpectralField> {
    WickExp::new(*params, psi, field.grid())?.field(field)
}

/// `E[exp_N(alpha phi)(x) exp_N(alpha phi)(y)] = exp(alpha^2 K^1_N(x - y))`,
/// summing the kernel directly over grid modes.
pub fn analytic_wick_cov(
    params: &WickParams,
    psi: &CutoffProfile,
    grid: &TorusGrid,
    x: (f64, f64),
    y: (f64, f64),
) -> Result<f64> {
    let table = psi.multiplier(params.level, grid)?;
    let (z1, z2) = (x.0 - y.0, x.1 - y.1);
    let m = grid.modes();
    let mut k = 0.0;
    for i in 0..m {
        for j in 0..m {
            let p = table[[i, j]];
            if p == 0.0 {
                continue;
            }
            let (k1, k2) = grid.wavevector(i, j);
            let phase = k1 as f64 * z1 + k2 as f64 * z2;
            k += p * p * phase.cos() / (1.0 + (k1 * k1 + k2 * k2) as f64);
        }
    }
    k /= 4.0 * PI * PI;
    Ok((params.alpha * params.alpha * k).exp())
}

/// `exp_N(alpha X_t)` at every time of an OU trajectory.
pub fn wick_exp_ou(
    traj: &OuTrajectory,
    params: &WickParams,
    psi: &CutoffProfile,
) -> Result<Vec<SpectralField>> {
    let w = WickExp::new(*params, psi, traj.grid())?;
    traj.states().iter().map(|x| w.field(x)).collect()
}

/// Trapezoid rule on an arbitrary increasing time grid.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    assert_eq!(times.len(), values.len());
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// `L^2([0,T]; H^s)` norm with the trapezoid rule in time.
pub fn time_l2_sobolev(times: &[f64], fields: &[SpectralField], s: f64) -> f64 {
    let sq: Vec<f64> = fields.iter().map(|f| sobolev_norm(f, s).powi(2)).collect();
    trapezoid(times, &sq).sqrt()
}

/// Mean of `values` over the grid, i.e. `(2pi)^-2 int f dx`.
pub(crate) fn grid_mean(values: &Array2<f64>) -> f64 {
    values.mean().unwrap_or(0.0)
}

#[cfg(test)]
fn min_value(values: &Array2<f64>) -> f64 {
    values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
}
