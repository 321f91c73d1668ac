use proptest::prelude::*;

use sqlab_core::experiments::suites::{cauchy_gff, cauchy_ou};
use sqlab_core::random::{gff_sample, purpose};
use sqlab_core::spectral::{green_field, sobolev_norm};
use sqlab_core::wick::{hermite, hermite_series, renorm_constant, wick_exp_gff};
use sqlab_core::{CutoffProfile, RngStream, TorusGrid, WickParams};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn wick_exponential_is_positive(seed in any::<u64>(), alpha in -3.0f64..3.0, level in 0u32..4) {
        let g = TorusGrid::new(64).unwrap();
        let psi = CutoffProfile::sharp();
        let p = WickParams::new(alpha, level, WickParams::default_beta(alpha), &psi, &g).unwrap();
        let phi = gff_sample(&g, &RngStream::new(seed, purpose::SCRATCH));
        let w = wick_exp_gff(&phi, &p, &psi).unwrap().to_physical();
        prop_assert!(w.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn renormalization_constant_is_recorded(alpha in -3.5f64..3.5, level in 0u32..4) {
        let g = TorusGrid::new(64).unwrap();
        for psi in [CutoffProfile::sharp(), CutoffProfile::gaussian()] {
            if psi.check_level(level, &g).is_err() {
                continue;
            }
            let p = WickParams::new(alpha, level, WickParams::default_beta(alpha), &psi, &g).unwrap();
            prop_assert_eq!(p.c_n, renorm_constant(&psi, level, &g).unwrap());
            prop_assert!(p.c_n >= 0.0);
            prop_assert!(p.beta > alpha * alpha / (4.0 * std::f64::consts::PI) && p.beta < 1.0);
        }
    }

    #[test]
    fn generating_series_matches_closed_form(alpha in -1.5f64..1.5, x in -3.0f64..3.0, sigma in 0.0f64..2.0) {
        let closed = (alpha * x - alpha * alpha * sigma / 2.0).exp();
        let series = hermite_series(alpha, x, sigma, 40).unwrap();
        prop_assert!((series - closed).abs() <= 1e-10 * closed.max(1.0));
    }

    #[test]
    fn hermite_scaling(n in 0usize..10, x in -3.0f64..3.0, sigma in 0.01f64..4.0) {
        // H_n(x; s) = s^{n/2} H_n(x / sqrt(s); 1)
        let a = hermite(n, x, sigma).unwrap();
        let b = sigma.powf(n as f64 / 2.0) * hermite(n, x / sigma.sqrt(), 1.0).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
    }
}

#[test]
fn alpha_bound_is_enforced() {
    let g = TorusGrid::new(16).unwrap();
    let psi = CutoffProfile::sharp();
    assert!(WickParams::new(3.55, 1, 0.99, &psi, &g).is_err());
    assert!(WickParams::new(1.0, 1, 0.05, &psi, &g).is_err());
    assert!(WickParams::new(1.0, 1, 1.0, &psi, &g).is_err());
}

#[test]
fn kernel_at_origin_is_the_renormalization_constant() {
    let g = TorusGrid::new(64).unwrap();
    for level in 0..4 {
        let psi = CutoffProfile::sharp();
        let k = green_field(1.0, &psi, level, &g).unwrap().to_physical()[[0, 0]];
        assert!((k - renorm_constant(&psi, level, &g).unwrap()).abs() < 1e-12);
    }
}

/// Sharp and Gaussian cutoffs, same noise: their difference shrinks with `N`.
#[test]
fn cutoff_choice_washes_out() {
    let g = TorusGrid::new(128).unwrap();
    let (sharp, smooth) = (CutoffProfile::sharp(), CutoffProfile::gaussian());
    let alpha = 1.0;
    let beta = 0.5;
    let replicas = 30;
    let mut means = Vec::new();
    for level in 1..=4 {
        let ps = WickParams::new(alpha, level, beta, &sharp, &g).unwrap();
        let pg = WickParams::new(alpha, level, beta, &smooth, &g).unwrap();
        let total: f64 = (0..replicas)
            .map(|r| {
                let phi = gff_sample(&g, &RngStream::new(4, purpose::ENSEMBLE).for_replica(r));
                let a = wick_exp_gff(&phi, &ps, &sharp).unwrap();
                let b = wick_exp_gff(&phi, &pg, &smooth).unwrap();
                sobolev_norm(&(&a - &b), -beta).powi(2)
            })
            .sum();
        means.push(total / replicas as f64);
    }
    assert!(means.windows(2).all(|w| w[1] < w[0]), "{means:?}");
}

#[test]
fn gff_and_path_sweeps_decay() {
    let g = TorusGrid::new(64).unwrap();
    let s = cauchy_gff(&g, 1.0, 0.5, 3, 40, 2).unwrap();
    assert!(s.lambda > 0.0 && s.gaps.windows(2).all(|w| w[1].mean < w[0].mean), "{s:?}");
    let p = cauchy_ou(&g, 1.0, 0.5, 3, 0.5, 0.05, 20, 2).unwrap();
    assert!(p.lambda > 0.0 && p.gaps.windows(2).all(|w| w[1].mean < w[0].mean), "{p:?}");
}
