use std::f64::consts::PI;
use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spectral::{SpectralField, TorusGrid};

/// Radial Fourier cutoff `psi`, evaluated as `psi(2^-N k)` at level `N`.
#[derive(Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CutoffProfile {
    /// Indicator of the closed disc `|x| <= radius`.
    Sharp { radius: f64 },
    /// `exp(-|x|^2)`.
    Gaussian,
    /// `psi = 1` on every grid mode, so the grid itself is the only cutoff and
    /// the level is ignored. Not admissible; a reference device for tests.
    GridIdentity,
    /// Caller-supplied radial profile, assumed to vanish for `|x| > support`.
    #[serde(skip)]
    Custom {
        name: &'static str,
        eval: fn(f64) -> f64,
        support: f64,
        theta: f64,
        decay: f64,
    },
}

/// Sampled admissibility record for a profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Admissibility {
    pub theta: f64,
    pub decay: f64,
    /// `sup |x|^-theta |psi(x) - 1|` over the sample set.
    pub origin_sup: f64,
    /// `sup |x|^decay |psi(x)|` over the sample set.
    pub tail_sup: f64,
    pub within_unit_interval: bool,
}

impl Admissibility {
    pub fn is_admissible(&self) -> bool {
        self.within_unit_interval
            && self.origin_sup.is_finite()
            && self.tail_sup.is_finite()
            && self.theta > 0.0
            && self.theta < 1.0
            && self.decay >= 4.0
    }
}

/// Below this the Gaussian profile squared is under `1e-13`, so modes past
/// `4 * 2^N` carry nothing at double precision.
const GAUSSIAN_RADIUS: f64 = 4.0;

impl CutoffProfile {
    pub const fn sharp() -> Self {
        CutoffProfile::Sharp { radius: 1.0 }
    }

    pub const fn gaussian() -> Self {
        CutoffProfile::Gaussian
    }

    pub fn name(&self) -> &'static str {
        match self {
            CutoffProfile::Sharp { .. } => "sharp",
            CutoffProfile::Gaussian => "smooth",
            CutoffProfile::GridIdentity => "grid",
            CutoffProfile::Custom { name, .. } => name,
        }
    }

    /// `psi` at radius `r = |x|`.
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            CutoffProfile::Sharp { radius } => {
                if r <= radius {
                    1.0
                } else {
                    0.0
                }
            }
            CutoffProfile::Gaussian => (-r * r).exp(),
            CutoffProfile::GridIdentity => 1.0,
            CutoffProfile::Custom { eval, support, .. } => {
                if r > support {
                    0.0
                } else {
                    eval(r)
                }
            }
        }
    }

    /// Rate of `psi -> 1` at the origin recorded for admissibility.
    /// The Gaussian profile actually gives 2; the record is clipped below 1.
    pub fn theta(&self) -> f64 {
        match *self {
            CutoffProfile::Sharp { .. } | CutoffProfile::Gaussian | CutoffProfile::GridIdentity => {
                0.99
            }
            CutoffProfile::Custom { theta, .. } => theta,
        }
    }

    /// Tail decay power `m`.
    pub fn decay(&self) -> f64 {
        match *self {
            CutoffProfile::Sharp { .. } | CutoffProfile::Gaussian => 4.0,
            CutoffProfile::GridIdentity => 0.0,
            CutoffProfile::Custom { decay, .. } => decay,
        }
    }

    /// Radius past which `psi^2` is negligible.
    pub fn effective_radius(&self) -> f64 {
        match *self {
            CutoffProfile::Sharp { radius } => radius,
            CutoffProfile::Gaussian => GAUSSIAN_RADIUS,
            CutoffProfile::GridIdentity => 0.0,
            CutoffProfile::Custom { support, .. } => support,
        }
    }

    /// Samples the admissibility conditions on log-spaced radii in `[1e-6, 1e4]`.
    pub fn admissibility(&self) -> Admissibility {
        let (theta, decay) = (self.theta(), self.decay());
        let mut origin_sup = 0.0f64;
        let mut tail_sup = 0.0f64;
        let mut within = true;
        for i in 0..=1000 {
            let r = 10f64.powf(-6.0 + 10.0 * i as f64 / 1000.0);
            let v = self.eval(r);
            within &= (0.0..=1.0).contains(&v);
            origin_sup = origin_sup.max((v - 1.0).abs() / r.powf(theta));
            tail_sup = tail_sup.max(r.powf(decay) * v);
        }
        within &= self.eval(0.0) == 1.0;
        Admissibility {
            theta,
            decay,
            origin_sup,
            tail_sup,
            within_unit_interval: within,
        }
    }

    /// Rejects levels whose effective support is not resolved by the grid:
    /// `2^N * effective_radius <= M/2`.
    pub fn check_level(&self, level: u32, grid: &TorusGrid) -> Result<()> {
        let reach = f64::powi(2.0, level as i32) * self.effective_radius();
        if level > 30 || reach > (grid.modes() / 2) as f64 {
            Err(Error::LevelTooHigh {
                level,
                modes: grid.modes(),
            })
        } else {
            Ok(())
        }
    }

    /// `psi(2^-N k)` for every grid mode, FFT order.
    pub fn multiplier(&self, level: u32, grid: &TorusGrid) -> Result<Array2<f64>> {
        self.check_level(level, grid)?;
        if *self == CutoffProfile::GridIdentity {
            return Ok(Array2::ones(grid.k_squared().dim()));
        }
        let scale = f64::powi(2.0, -(level as i32));
        Ok(grid.k_squared().mapv(|k2| self.eval(k2.sqrt() * scale)))
    }

    /// `(4pi^2)^-1 sum psi(2^-N k)^2 / (1 + |k|^2)` over modes missing from the
    /// grid: exact for compactly supported profiles, an upper bound for the
    /// Gaussian one.
    pub fn tail_bound(&self, level: u32, grid: &TorusGrid) -> f64 {
        let half = (grid.modes() / 2) as i64;
        let scale = f64::powi(2.0, level as i32);
        match *self {
            CutoffProfile::GridIdentity => 0.0,
            CutoffProfile::Sharp { radius: support } | CutoffProfile::Custom { support, .. } => {
                let reach = support * scale;
                if reach < half as f64 {
                    return 0.0;
                }
                if reach > (8 * half) as f64 {
                    return f64::INFINITY;
                }
                let r = reach.floor() as i64;
                let on_grid = |k: i64| (-half..half).contains(&k);
                let mut tail = 0.0;
                for k1 in -r..=r {
                    for k2 in -r..=r {
                        if on_grid(k1) && on_grid(k2) {
                            continue;
                        }
                        let k2sum = (k1 * k1 + k2 * k2) as f64;
                        let p = self.eval(k2sum.sqrt() / scale);
                        tail += p * p / (1.0 + k2sum);
                    }
                }
                tail / (4.0 * PI * PI)
            }
            CutoffProfile::Gaussian => {
                // (2pi)^-1 int_edge^inf exp(-2 r^2 / 4^N) / r dr = E1(x) / (4pi), E1(x) <= e^-x / x
                let edge = half as f64;
                let x = 2.0 * edge * edge / (scale * scale);
                (-x).exp() / x / (4.0 * PI)
            }
        }
    }
}

impl Default for CutoffProfile {
    fn default() -> Self {
        CutoffProfile::sharp()
    }
}

impl PartialEq for CutoffProfile {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (CutoffProfile::Sharp { radius: a }, CutoffProfile::Sharp { radius: b }) => a == b,
            (CutoffProfile::Gaussian, CutoffProfile::Gaussian) => true,
            (CutoffProfile::GridIdentity, CutoffProfile::GridIdentity) => true,
            (
                CutoffProfile::Custom { name: a, support: sa, .. },
                CutoffProfile::Custom { name: b, support: sb, .. },
            ) => a == b && sa == sb,
            _ => false,
        }
    }
}

impl fmt::Debug for CutoffProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CutoffProfile::Sharp { radius } => write!(f, "Sharp {{ radius: {radius} }}"),
            CutoffProfile::Gaussian => write!(f, "Gaussian"),
            CutoffProfile::GridIdentity => write!(f, "GridIdentity"),
            CutoffProfile::Custom { name, support, .. } => {
                write!(f, "Custom {{ name: {name:?}, support: {support} }}")
            }
        }
    }
}

impl std::str::FromStr for CutoffProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sharp" => Ok(CutoffProfile::sharp()),
            "smooth" | "gaussian" => Ok(CutoffProfile::gaussian()),
            other => Err(invalid("cutoff.kind", format!("unknown profile {other:?}"))),
        }
    }
}

/// `P_N u`: multiplies `u(k)` by `psi(2^-N k)`.
pub fn apply_pn(field: &SpectralField, psi: &CutoffProfile, level: u32) -> Result<SpectralField> {
    let table = psi.multiplier(level, field.grid())?;
    Ok(field.apply_multiplier(&table))
}

/// `C_N = (4pi^2)^-1 sum_k psi(2^-N k)^2 / (1 + |k|^2)` over grid modes.
pub fn renorm_constant(psi: &CutoffProfile, level: u32, grid: &TorusGrid) -> Result<f64> {
    const TAIL_TOLERANCE: f64 = 1e-8;
    let table = psi.multiplier(level, grid)?;
    let tail = psi.tail_bound(level, grid);
    if tail > TAIL_TOLERANCE {
        return Err(Error::TruncationTail {
            tail,
            tolerance: TAIL_TOLERANCE,
        });
    }
    let sum = ndarray::Zip::from(&table)
        .and(grid.k_squared())
        .fold(0.0, |acc, &p, &k2| acc + p * p / (1.0 + k2));
    Ok(sum / (4.0 * PI * PI))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sharp_level_zero_constant() {
        let g = TorusGrid::new(16).unwrap();
        let c = renorm_constant(&CutoffProfile::sharp(), 0, &g).unwrap();
        assert_abs_diff_eq!(c, 3.0 / (4.0 * PI * PI), epsilon = 1e-15);
        assert_abs_diff_eq!(c, 0.075991, epsilon = 1e-6);
    }

    #[test]
    fn origin_only_profile() {
        let g = TorusGrid::new(16).unwrap();
        let tiny = CutoffProfile::Sharp { radius: 0.5 };
        let c = renorm_constant(&tiny, 0, &g).unwrap();
        assert_abs_diff_eq!(c, 1.0 / (4.0 * PI * PI), epsilon = 1e-16);
    }

    #[test]
    fn sharp_constant_grows_logarithmically() {
        // sum_{|k| <= R} (1 + |k|^2)^-1 ~ 2pi log R, so C_N - N log2 / (2pi) stays bounded
        let g = TorusGrid::new(256).unwrap();
        let rest: Vec<f64> = (0..=6)
            .map(|n| {
                renorm_constant(&CutoffProfile::sharp(), n, &g).unwrap()
                    - n as f64 * 2f64.ln() / (2.0 * PI)
            })
            .collect();
        let spread = rest.iter().cloned().fold(f64::MIN, f64::max)
            - rest.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 0.1, "{rest:?}");
        assert!((rest[6] - rest[5]).abs() < 0.01);
    }

    #[test]
    fn level_guard() {
        let g = TorusGrid::new(64).unwrap();
        assert!(CutoffProfile::sharp().check_level(5, &g).is_ok());
        assert!(CutoffProfile::sharp().check_level(6, &g).is_err());
        assert!(CutoffProfile::gaussian().check_level(3, &g).is_ok());
        assert!(matches!(
            CutoffProfile::gaussian().check_level(4, &g),
            Err(Error::LevelTooHigh { level: 4, modes: 64 })
        ));
    }

    #[test]
    fn sharp_disc_touching_the_edge_has_a_tail() {
        // the disc |k| <= 32 contains (32, 0) and (0, 32), which a 64-grid cannot hold
        let g = TorusGrid::new(64).unwrap();
        let tail = CutoffProfile::sharp().tail_bound(5, &g);
        assert!((tail - 2.0 / 1025.0 / (4.0 * PI * PI)).abs() < 1e-15);
        assert!(matches!(
            renorm_constant(&CutoffProfile::sharp(), 5, &g),
            Err(Error::TruncationTail { .. })
        ));
        let g = TorusGrid::new(128).unwrap();
        assert_eq!(CutoffProfile::sharp().tail_bound(5, &g), 0.0);
    }

    #[test]
    fn gaussian_tail_is_negligible_when_resolved() {
        let g = TorusGrid::new(64).unwrap();
        assert!(CutoffProfile::gaussian().tail_bound(3, &g) < 1e-15);
        assert!(renorm_constant(&CutoffProfile::gaussian(), 3, &g).is_ok());
    }

    #[test]
    fn default_profiles_are_admissible() {
        for p in [CutoffProfile::sharp(), CutoffProfile::gaussian()] {
            let a = p.admissibility();
            assert!(a.is_admissible(), "{p:?} {a:?}");
        }
        let bad = CutoffProfile::Custom {
            name: "ramp",
            eval: |r| 2.0 - r,
            support: 2.0,
            theta: 0.5,
            decay: 4.0,
        };
        assert!(!bad.admissibility().is_admissible());
    }

    #[test]
    fn sharp_full_level_is_identity_on_band_limited() {
        let g = TorusGrid::new(16).unwrap();
        let v = Array2::from_shape_fn((16, 16), |(i, j)| {
            let (x, y) = g.point(i, j);
            (3.0 * x).cos() + (2.0 * x - 5.0 * y).sin()
        });
        let f = SpectralField::from_physical(&g, &v).unwrap();
        let p = apply_pn(&f, &CutoffProfile::sharp(), 3).unwrap();
        assert!(p.max_abs_diff(&f) < 1e-15);
    }

    #[test]
    fn parses_kinds() {
        assert_eq!("sharp".parse::<CutoffProfile>().unwrap(), CutoffProfile::sharp());
        assert_eq!("Smooth".parse::<CutoffProfile>().unwrap(), CutoffProfile::gaussian());
        assert!("box".parse::<CutoffProfile>().is_err());
    }
}
