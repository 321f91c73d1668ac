use ndarray::{Array2, Zip};

use crate::error::{Error, Result};
use crate::spectral::{heat_semigroup_massless, SpectralField};

/// Values below this count as negative forcing.
pub const NONNEGATIVITY_TOLERANCE: f64 = -1e-10;

pub(crate) fn check_nonnegative(values: &Array2<f64>) -> Result<()> {
    let min = values.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    if min < NONNEGATIVITY_TOLERANCE || min.is_nan() {
        Err(Error::NegativeForcing { min })
    } else {
        Ok(())
    }
}

/// Grid values of `e^{lambda Delta} xi`; `lambda = 0` returns `xi` itself.
pub(crate) fn mollified_values(xi: &SpectralField, scale: f64) -> Result<Array2<f64>> {
    if scale == 0.0 {
        Ok(xi.to_physical())
    } else {
        Ok(heat_semigroup_massless(xi, scale)?.to_physical())
    }
}

/// `M(f, xi)`: pointwise product of `f` with the heat-mollified `e^{lambda Delta} xi`
/// on the physical grid. At grid resolution a nonnegative distribution is a
/// nonnegative function, so `lambda = 0` gives the plain product.
pub fn measure_product(
    f: &SpectralField,
    xi: &SpectralField,
    mollifier_scale: f64,
) -> Result<SpectralField> {
    f.grid().check_same(xi.grid())?;
    check_nonnegative(&xi.to_physical())?;
    let mut values = mollified_values(xi, mollifier_scale)?;
    Zip::from(&mut values)
        .and(&f.to_physical())
        .for_each(|x, &g| *x *= g);
    Ok(SpectralField::from_physical_unchecked(f.grid(), &values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::TorusGrid;

    fn positive(g: &TorusGrid) -> SpectralField {
        let v = Array2::from_shape_fn((g.modes(), g.modes()), |(i, j)| {
            let (x, y) = g.point(i, j);
            (x.sin() + (2.0 * y).cos()).exp()
        });
        SpectralField::from_physical(g, &v).unwrap()
    }

    #[test]
    fn unit_multiplier() {
        let g = TorusGrid::new(16).unwrap();
        let xi = positive(&g);
        let one = SpectralField::constant(&g, 1.0);
        assert!(measure_product(&one, &xi, 0.0).unwrap().max_abs_diff(&xi) < 1e-12);
        let smooth = heat_semigroup_massless(&xi, 0.05).unwrap();
        assert!(measure_product(&one, &xi, 0.05).unwrap().max_abs_diff(&smooth) < 1e-12);
    }

    #[test]
    fn zero_forcing() {
        let g = TorusGrid::new(16).unwrap();
        let out = measure_product(&positive(&g), &SpectralField::zeros(&g), 0.1).unwrap();
        assert!(out.coeffs().iter().all(|c| c.norm() < 1e-15));
    }

    #[test]
    fn rejects_negative_forcing() {
        let g = TorusGrid::new(16).unwrap();
        let xi = SpectralField::constant(&g, -0.5);
        assert!(matches!(
            measure_product(&positive(&g), &xi, 0.0),
            Err(Error::NegativeForcing { .. })
        ));
    }
}
