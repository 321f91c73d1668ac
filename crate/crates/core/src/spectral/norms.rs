//! Fractional Sobolev norms and Littlewood-Paley Besov norms.
//!
//! Sums run over the modes stored on the grid. Fields used with these norms are
//! expected to be band-limited or to have tails below the caller's tolerance.

use serde::{Deserialize, Serialize};

use super::field::SpectralField;
use crate::error::{invalid, Result};

/// Which norm to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NormSpec {
    /// `H^s`, i.e. `p = q = 2` with the `(1 + |k|^2)^s` weight.
    Sobolev { s: f64 },
    /// `B^s_{p,q}`; `f64::INFINITY` encodes `p = inf` or `q = inf`.
    Besov { s: f64, p: f64, q: f64 },
}

impl NormSpec {
    pub fn besov(s: f64, p: f64, q: f64) -> Result<Self> {
        check_index("p", p)?;
        check_index("q", q)?;
        Ok(NormSpec::Besov { s, p, q })
    }

    pub fn regularity(&self) -> f64 {
        match *self {
            NormSpec::Sobolev { s } | NormSpec::Besov { s, .. } => s,
        }
    }
}

fn check_index(name: &'static str, v: f64) -> Result<()> {
    if v >= 1.0 && !v.is_nan() {
        Ok(())
    } else {
        Err(invalid(name, format!("integrability index {v} outside [1, inf]")))
    }
}

/// `sqrt(sum_k (1 + |k|^2)^s |u(k)|^2)`.
pub fn sobolev_norm(field: &SpectralField, s: f64) -> f64 {
    if s == 0.0 {
        return field.weighted_energy(|_| 1.0).sqrt();
    }
    field.weighted_energy(|k2| (1.0 + k2).powf(s)).sqrt()
}

/// `L^2(Lambda)` norm; equal to `sobolev_norm(field, 0)`.
pub fn l2_norm(field: &SpectralField) -> f64 {
    sobolev_norm(field, 0.0)
}

/// Dispatches on the norm kind.
pub fn norm(field: &SpectralField, spec: &NormSpec) -> Result<f64> {
    match *spec {
        NormSpec::Sobolev { s } => Ok(sobolev_norm(field, s)),
        NormSpec::Besov { .. } => besov_norm(field, spec),
    }
}

/// Radial smooth dyadic partition of unity `(chi, rho)`.
///
/// `chi = 1` on `|x| <= 3/4`, vanishes for `|x| >= 4/3`, and descends through the
/// smooth step `f(t) / (f(t) + f(1 - t))` with `f(t) = exp(-1/t)`, the standard
/// bump-function construction. `rho(x) = chi(x/2) - chi(x)`, so `rho` is supported
/// in `3/4 <= |x| <= 8/3` and `chi + sum_j rho(2^-j x) = 1` telescopes exactly.
#[derive(Clone, Copy, Debug, Default)]
pub struct DyadicPartition;

impl DyadicPartition {
    /// Stamped into reports so measured constants can be traced to this construction.
    pub const VERSION: &'static str = "lp-bump-v1";
    pub const INNER: f64 = 3.0 / 4.0;
    pub const OUTER: f64 = 4.0 / 3.0;

    pub fn chi(&self, r: f64) -> f64 {
        if r <= Self::INNER {
            1.0
        } else if r >= Self::OUTER {
            0.0
        } else {
            1.0 - smooth_step((r - Self::INNER) / (Self::OUTER - Self::INNER))
        }
    }

    pub fn rho(&self, r: f64) -> f64 {
        self.chi(r / 2.0) - self.chi(r)
    }

    /// `rho_{-1} = chi`, `rho_j = rho(2^-j .)`.
    pub fn block(&self, j: i32, r: f64) -> f64 {
        if j < 0 {
            self.chi(r)
        } else {
            self.rho(r / f64::powi(2.0, j))
        }
    }

    /// Highest block index that can touch a mode of modulus at most `k_max`.
    pub fn last_block(&self, k_max: f64) -> i32 {
        let mut j = 0;
        while Self::INNER * f64::powi(2.0, j) <= k_max {
            j += 1;
        }
        j - 1
    }

    /// Block indices whose multiplier is nonzero at `|k| = r`.
    pub fn blocks_containing(&self, r: f64) -> Vec<i32> {
        (-1..=self.last_block(r).max(0))
            .filter(|&j| self.block(j, r) > 0.0)
            .collect()
    }
}

fn smooth_step(t: f64) -> f64 {
    let f = |t: f64| if t <= 0.0 { 0.0 } else { (-1.0 / t).exp() };
    let a = f(t);
    a / (a + f(1.0 - t))
}

/// Littlewood-Paley block `Delta_j u` as a field.
pub fn dyadic_block(field: &SpectralField, j: i32) -> SpectralField {
    let lp = DyadicPartition;
    field.map_radial(|k2| lp.block(j, k2.sqrt()))
}

/// `|| { 2^{js} ||Delta_j u||_{L^p} }_{j >= -1} ||_{l^q}`.
///
/// `p = 2` blocks use Parseval; other `p` use grid quadrature of the inverse
/// transform of each block.
pub fn besov_norm(field: &SpectralField, spec: &NormSpec) -> Result<f64> {
    let NormSpec::Besov { s, p, q } = *spec else {
        return Err(invalid("spec", "besov_norm needs a Besov norm spec"));
    };
    check_index("p", p)?;
    check_index("q", q)?;
    let lp = DyadicPartition;
    let grid = field.grid();
    let last = lp.last_block(grid.max_wavenumber());
    let mut terms = Vec::with_capacity((last + 2) as usize);
    for j in -1..=last {
        let lp_norm = if p == 2.0 {
            field
                .weighted_energy(|k2| lp.block(j, k2.sqrt()).powi(2))
                .sqrt()
        } else {
            let values = dyadic_block(field, j).to_physical();
            if p.is_infinite() {
                values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
            } else {
                (values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * grid.cell_area())
                    .powf(1.0 / p)
            }
        };
        terms.push(f64::powf(2.0, j as f64 * s) * lp_norm);
    }
    Ok(if q.is_infinite() {
        terms.iter().fold(0.0f64, |m, &t| m.max(t))
    } else {
        terms.iter().map(|t| t.powf(q)).sum::<f64>().powf(1.0 / q)
    })
}

/// Measured equivalence constant between `B^s_{2,2}` and `H^s` on this grid,
/// from an exhaustive sweep over the single-mode weights.
///
/// Returns `(min ratio, max ratio)` of `||e_k||_{B^s_{2,2}} / ||e_k||_{H^s}`;
/// every field's ratio lies in this interval.
pub fn besov_sobolev_ratio_range(grid: &super::TorusGrid, s: f64) -> (f64, f64) {
    let lp = DyadicPartition;
    let last = lp.last_block(grid.max_wavenumber());
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for &k2 in grid.k_squared().iter() {
        let r = k2.sqrt();
        let besov: f64 = (-1..=last)
            .map(|j| f64::powf(2.0, 2.0 * j as f64 * s) * lp.block(j, r).powi(2))
            .sum();
        let ratio = (besov / (1.0 + k2).powf(s)).sqrt();
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::TorusGrid;
    use ndarray::Array2;
    use std::f64::consts::{PI, SQRT_2};

    #[test]
    fn partition_sums_to_one() {
        let lp = DyadicPartition;
        for i in 0..2000 {
            let r = i as f64 * 0.05;
            let total: f64 = (-1..=12).map(|j| lp.block(j, r)).sum();
            assert!((total - 1.0).abs() < 1e-14, "r={r} total={total}");
        }
    }

    #[test]
    fn rho_support() {
        let lp = DyadicPartition;
        assert_eq!(lp.rho(0.74), 0.0);
        assert_eq!(lp.rho(2.67), 0.0);
        assert!(lp.rho(1.5) > 0.0);
        assert!((0..400).all(|i| (0.0..=1.0).contains(&lp.rho(i as f64 * 0.01))));
    }

    #[test]
    fn single_mode_touches_at_most_two_blocks() {
        let lp = DyadicPartition;
        for j in 0..6 {
            let lo = 0.75 * f64::powi(2.0, j);
            let hi = 8.0 / 3.0 * f64::powi(2.0, j);
            for t in 0..=50 {
                let r = lo + (hi - lo) * t as f64 / 50.0;
                let blocks = lp.blocks_containing(r);
                assert!(blocks.len() <= 2, "r={r} {blocks:?}");
                if blocks.len() == 2 {
                    assert_eq!(blocks[1] - blocks[0], 1);
                }
            }
        }
    }

    #[test]
    fn sobolev_examples() {
        let g = TorusGrid::new(16).unwrap();
        let one = SpectralField::constant(&g, 1.0);
        for s in [-1.5, 0.0, 0.7, 2.0] {
            assert!((sobolev_norm(&one, s) - 2.0 * PI).abs() < 1e-12);
        }
        let v = Array2::from_shape_fn((16, 16), |(i, j)| g.point(i, j).0.cos() / (SQRT_2 * PI));
        let e10 = SpectralField::from_physical(&g, &v).unwrap();
        assert!((sobolev_norm(&e10, 1.0) - SQRT_2).abs() < 1e-12);
        assert_eq!(sobolev_norm(&SpectralField::zeros(&g), 0.3), 0.0);
    }

    #[test]
    fn besov_of_zero_is_zero() {
        let g = TorusGrid::new(16).unwrap();
        let z = SpectralField::zeros(&g);
        for (p, q) in [(1.0, 1.0), (2.0, 2.0), (f64::INFINITY, 3.0), (4.0, f64::INFINITY)] {
            let spec = NormSpec::besov(-0.5, p, q).unwrap();
            assert_eq!(besov_norm(&z, &spec).unwrap(), 0.0);
        }
    }

    #[test]
    fn besov_rejects_bad_indices() {
        assert!(NormSpec::besov(0.0, 0.5, 2.0).is_err());
        assert!(NormSpec::besov(0.0, 2.0, f64::NAN).is_err());
        let g = TorusGrid::new(8).unwrap();
        let f = SpectralField::constant(&g, 1.0);
        let bad = NormSpec::Besov { s: 0.0, p: 2.0, q: 0.0 };
        assert!(besov_norm(&f, &bad).is_err());
        assert!(besov_norm(&f, &NormSpec::Sobolev { s: 0.0 }).is_err());
    }

    #[test]
    fn besov_two_two_parseval_matches_quadrature_route() {
        // p = 2 via Parseval against p = 2 via physical quadrature
        let g = TorusGrid::new(32).unwrap();
        let v = Array2::from_shape_fn((32, 32), |(i, j)| {
            let (x, y) = g.point(i, j);
            (3.0 * x).sin() + 0.5 * (x + 4.0 * y).cos() + 0.1 * (9.0 * y).cos()
        });
        let f = SpectralField::from_physical(&g, &v).unwrap();
        let parseval = besov_norm(&f, &NormSpec::besov(0.4, 2.0, 2.0).unwrap()).unwrap();
        let lp = DyadicPartition;
        let last = lp.last_block(g.max_wavenumber());
        let quad: f64 = (-1..=last)
            .map(|j| {
                let b = dyadic_block(&f, j).to_physical();
                f64::powf(2.0, 0.8 * j as f64) * g.integrate(&b.mapv(|x| x * x))
            })
            .sum::<f64>()
            .sqrt();
        assert!((parseval - quad).abs() < 1e-10 * parseval);
    }
}
