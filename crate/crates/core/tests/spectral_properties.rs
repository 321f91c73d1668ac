use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use sqlab_core::random::hermitian_gaussian;
use sqlab_core::spectral::{besov_norm, besov_sobolev_ratio_range, heat_semigroup, l2_norm, sobolev_norm};
use sqlab_core::wick::apply_pn;
use sqlab_core::{CutoffProfile, NormSpec, SpectralField, TorusGrid};

/// Random field supported on `|k| <= band` with unit-order coefficients.
fn band_limited(grid: &TorusGrid, band: f64, seed: u64) -> SpectralField {
    let var = grid.k_squared().mapv(|k2| if k2 <= band * band { 1.0 } else { 0.0 });
    hermitian_gaussian(grid, &var, &mut ChaCha20Rng::seed_from_u64(seed))
}

fn rough(grid: &TorusGrid, seed: u64) -> SpectralField {
    let var = Array2::from_elem((grid.modes(), grid.modes()), 1.0);
    hermitian_gaussian(grid, &var, &mut ChaCha20Rng::seed_from_u64(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn parseval_matches_grid_quadrature(seed in any::<u64>(), band in 1.0f64..7.0) {
        let g = TorusGrid::new(16).unwrap();
        let u = band_limited(&g, band, seed);
        let values = u.to_physical();
        let quad = g.integrate(&values.mapv(|v| v * v));
        let s0 = sobolev_norm(&u, 0.0).powi(2);
        prop_assert!((s0 - quad).abs() <= 1e-10 * quad.max(1.0));
        prop_assert!((l2_norm(&u) - quad.sqrt()).abs() <= 1e-10 * quad.sqrt().max(1.0));
    }

    #[test]
    fn operations_preserve_hermitian_symmetry(seed in any::<u64>(), t in 0.0f64..2.0, level in 0u32..3) {
        let g = TorusGrid::new(32).unwrap();
        let u = rough(&g, seed);
        prop_assert!(u.hermitian_defect() == 0.0);
        prop_assert!(heat_semigroup(&u, t).unwrap().hermitian_defect() <= 1e-15);
        prop_assert!(apply_pn(&u, &CutoffProfile::sharp(), level).unwrap().hermitian_defect() <= 1e-15);
        prop_assert!(apply_pn(&u, &CutoffProfile::gaussian(), level).unwrap().hermitian_defect() <= 1e-15);
        let back = SpectralField::from_physical(&g, &u.to_physical()).unwrap();
        prop_assert!(back.hermitian_defect() <= 1e-12);
        prop_assert!(back.max_abs_diff(&u) <= 1e-12);
    }

    #[test]
    fn heat_flow_contracts_sobolev_norms(seed in any::<u64>(), t in 0.0f64..3.0, s in -2.0f64..2.0) {
        let g = TorusGrid::new(16).unwrap();
        let u = rough(&g, seed);
        let lhs = sobolev_norm(&heat_semigroup(&u, t).unwrap(), s);
        prop_assert!(lhs <= (-t / 2.0).exp() * sobolev_norm(&u, s) * (1.0 + 1e-12));
    }

    #[test]
    fn besov_two_two_within_measured_sobolev_bracket(seed in any::<u64>(), s in -1.5f64..1.5) {
        let g = TorusGrid::new(32).unwrap();
        let u = rough(&g, seed);
        let (lo, hi) = besov_sobolev_ratio_range(&g, s);
        let ratio = besov_norm(&u, &NormSpec::besov(s, 2.0, 2.0).unwrap()).unwrap() / sobolev_norm(&u, s);
        prop_assert!(ratio >= lo * (1.0 - 1e-12) && ratio <= hi * (1.0 + 1e-12), "{lo} <= {ratio} <= {hi}");
    }

    #[test]
    fn cutoff_profiles_are_even_and_in_unit_interval(x in -50.0f64..50.0, y in -50.0f64..50.0) {
        for psi in [CutoffProfile::sharp(), CutoffProfile::gaussian()] {
            let r = x.hypot(y);
            let v = psi.eval(r);
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(v, psi.eval((-x).hypot(-y)));
            prop_assert!(r.powi(4) * v < 1e6);
        }
    }
}

#[test]
fn heat_semigroup_law_holds_on_a_rough_field() {
    let g = TorusGrid::new(64).unwrap();
    let u = rough(&g, 11);
    let a = heat_semigroup(&heat_semigroup(&u, 0.3).unwrap(), 0.45).unwrap();
    let b = heat_semigroup(&u, 0.75).unwrap();
    assert!(a.max_abs_diff(&b) < 1e-12);
}

#[test]
fn zero_field_has_zero_norms() {
    let g = TorusGrid::new(16).unwrap();
    let z = SpectralField::zeros(&g);
    assert_eq!(sobolev_norm(&z, -0.7), 0.0);
    for (p, q) in [(2.0, 2.0), (1.0, f64::INFINITY), (f64::INFINITY, 3.0)] {
        assert_eq!(besov_norm(&z, &NormSpec::besov(0.5, p, q).unwrap()).unwrap(), 0.0);
    }
}
