use super::field::SpectralField;
use crate::error::{invalid, Result};

/// `e^{t(Delta - 1)/2} u`: multiplies `u(k)` by `exp(-(1 + |k|^2) t / 2)`.
pub fn heat_semigroup(field: &SpectralField, t: f64) -> Result<SpectralField> {
    check_time(t)?;
    Ok(field.map_radial(|k2| (-(1.0 + k2) * t / 2.0).exp()))
}

/// Massless `e^{t Delta} u`: multiplier `exp(-|k|^2 t)`.
pub fn heat_semigroup_massless(field: &SpectralField, t: f64) -> Result<SpectralField> {
    check_time(t)?;
    Ok(field.map_radial(|k2| (-k2 * t).exp()))
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(invalid("t", format!("semigroup time {t} must be finite and >= 0")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{sobolev_norm, TorusGrid};
    use ndarray::Array2;
    use num_complex::Complex64;

    fn bumpy(g: &TorusGrid) -> SpectralField {
        let m = g.modes();
        let v = Array2::from_shape_fn((m, m), |(i, j)| {
            let (x, y) = g.point(i, j);
            x.sin() * (2.0 * y).cos() + 0.3 * (5.0 * x - 3.0 * y).sin() + 0.2
        });
        SpectralField::from_physical(g, &v).unwrap()
    }

    #[test]
    fn time_zero_is_identity() {
        let g = TorusGrid::new(16).unwrap();
        let f = bumpy(&g);
        assert_eq!(heat_semigroup(&f, 0.0).unwrap().max_abs_diff(&f), 0.0);
        assert_eq!(heat_semigroup_massless(&f, 0.0).unwrap().max_abs_diff(&f), 0.0);
    }

    #[test]
    fn semigroup_law() {
        let g = TorusGrid::new(32).unwrap();
        let f = bumpy(&g);
        let ab = heat_semigroup(&heat_semigroup(&f, 0.3).unwrap(), 0.45).unwrap();
        let c = heat_semigroup(&f, 0.75).unwrap();
        assert!(ab.max_abs_diff(&c) < 1e-12);
    }

    #[test]
    fn constant_decays_to_inverse_e() {
        let g = TorusGrid::new(8).unwrap();
        let f = heat_semigroup(&SpectralField::constant(&g, 1.0), 2.0).unwrap();
        let want = (-1.0f64).exp();
        assert!(f.to_physical().iter().all(|v| (v - want).abs() < 1e-14));
        let massless = heat_semigroup_massless(&SpectralField::constant(&g, 1.0), 2.0).unwrap();
        assert!((massless.coeffs()[[0, 0]] - Complex64::new(2.0 * std::f64::consts::PI, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn contracts_sobolev_norms() {
        let g = TorusGrid::new(16).unwrap();
        let f = bumpy(&g);
        for s in [-1.0, 0.0, 1.5] {
            for t in [0.01, 0.5, 3.0] {
                let lhs = sobolev_norm(&heat_semigroup(&f, t).unwrap(), s);
                assert!(lhs <= (-t / 2.0).exp() * sobolev_norm(&f, s) * (1.0 + 1e-14));
            }
        }
    }

    #[test]
    fn negative_time_rejected() {
        let g = TorusGrid::new(8).unwrap();
        let f = SpectralField::zeros(&g);
        assert!(heat_semigroup(&f, -0.1).is_err());
        assert!(heat_semigroup_massless(&f, f64::NAN).is_err());
    }
}
