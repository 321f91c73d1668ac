use std::f64::consts::PI;

use proptest::prelude::*;

use sqlab_core::experiments::suites::partition_check;
use sqlab_core::measures::{ess, normalize_log_weights, resample_stationary, Estimate, Proposal, WeightedEnsemble};
use sqlab_core::random::{gff_sample, purpose};
use sqlab_core::spectral::sobolev_norm;
use sqlab_core::{CutoffProfile, RngStream, TorusGrid, WickParams};

fn params(grid: &TorusGrid, alpha: f64, level: u32) -> WickParams {
    WickParams::new(alpha, level, WickParams::default_beta(alpha), &CutoffProfile::sharp(), grid).unwrap()
}

/// `int phi(a) exp(-kappa e^{s a}) da`: conditioning on the zero mode and
/// applying Jensen to the rest gives this lower bound on the partition function.
fn zero_mode_lower_bound(alpha: f64) -> f64 {
    let s = alpha / (2.0 * PI);
    let kappa = 4.0 * PI * PI * (-alpha * alpha / (8.0 * PI * PI)).exp();
    let f = |a: f64| (-a * a / 2.0).exp() / (2.0 * PI).sqrt() * (-kappa * (s * a).exp()).exp();
    let (lo, hi, n) = (-12.0, 12.0, 24_000);
    let h = (hi - lo) / n as f64;
    let mut total = f(lo) + f(hi);
    for i in 1..n {
        total += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    total * h / 3.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn weights_lie_in_unit_interval(seed in any::<u64>(), alpha in -2.0f64..2.0, tilted in any::<bool>()) {
        let g = TorusGrid::new(16).unwrap();
        let proposal = if tilted { Proposal::ZeroModeTilted } else { Proposal::FreeField };
        let e = WeightedEnsemble::draw(&g, &params(&g, alpha, 1), &CutoffProfile::sharp(), 64, proposal, &RngStream::new(seed, purpose::ENSEMBLE)).unwrap();
        prop_assert!(e.weights().iter().all(|&w| w > 0.0 && w <= 1.0));
        prop_assert!(e.weights().iter().any(|&w| w == 1.0));
        let n = e.ess();
        prop_assert!((1.0..=64.0 + 1e-9).contains(&n));
    }

    #[test]
    fn self_normalized_means_ignore_weight_scale(logs in prop::collection::vec(-30.0f64..0.0, 2..50), shift in -50.0f64..50.0) {
        let values: Vec<f64> = (0..logs.len()).map(|i| (i as f64).sin()).collect();
        let mean = |ls: &[f64]| {
            let w = normalize_log_weights(ls);
            let total: f64 = w.iter().sum();
            (w.iter().zip(&values).map(|(w, v)| w * v).sum::<f64>() / total, ess(&w))
        };
        let shifted: Vec<f64> = logs.iter().map(|l| l + shift).collect();
        let (a, ea) = mean(&logs);
        let (b, eb) = mean(&shifted);
        prop_assert!((a - b).abs() <= 1e-12);
        prop_assert!((ea - eb).abs() <= 1e-9 * ea);
    }
}

#[test]
fn partition_function_respects_zero_mode_bound() {
    let g = TorusGrid::new(32).unwrap();
    for alpha in [0.5, 1.0, 1.5] {
        let p = partition_check(&g, alpha, 2, 4000, 17).unwrap();
        let bound = zero_mode_lower_bound(alpha);
        assert!(bound >= (-4.0 * PI * PI).exp());
        assert!(p.estimate.mean >= bound - 3.0 * p.estimate.std_error, "alpha {alpha}: {:?} vs {bound}", p.estimate);
        assert!(p.max_weight <= 1.0);
    }
    assert!((zero_mode_lower_bound(0.0) / (-4.0 * PI * PI).exp() - 1.0).abs() < 1e-10);
}

#[test]
fn partition_estimate_is_pinned() {
    let g = TorusGrid::new(32).unwrap();
    let p = partition_check(&g, 1.0, 2, 500, 3).unwrap();
    assert_eq!(p.estimate.count, 500);
    assert!((p.estimate.mean / 1.0656826972637132e-13 - 1.0).abs() < 1e-9, "{:e}", p.estimate.mean);
}

#[test]
fn resampled_draws_reproduce_weighted_moments() {
    let g = TorusGrid::new(32).unwrap();
    let p = params(&g, 1.0, 2);
    let e = WeightedEnsemble::draw(&g, &p, &CutoffProfile::sharp(), 4000, Proposal::ZeroModeTilted, &RngStream::new(5, purpose::ENSEMBLE)).unwrap();
    let h = e.evaluate(|f| sobolev_norm(f, -1.0).powi(2));
    let weighted = e.weighted_mean(&h);
    let r = resample_stationary(&e, 4000, &RngStream::new(5, purpose::RESAMPLE)).unwrap();
    let resampled = Estimate::from_samples(&r.fields.iter().map(|f| sobolev_norm(f, -1.0).powi(2)).collect::<Vec<_>>());
    // weighted estimate has error about sigma / sqrt(ESS); resampling adds sigma / sqrt(count)
    let tol = 3.0 * resampled.std_error * (1.0 + 4000.0 / r.ess).sqrt();
    assert!((resampled.mean - weighted).abs() <= tol, "{resampled:?} vs {weighted}");
}

#[test]
fn effective_sample_size_falls_with_charge() {
    let g = TorusGrid::new(32).unwrap();
    let ess_at = |alpha: f64| {
        let p = params(&g, alpha, 2);
        WeightedEnsemble::draw(&g, &p, &CutoffProfile::sharp(), 2000, Proposal::ZeroModeTilted, &RngStream::new(8, purpose::ENSEMBLE))
            .unwrap()
            .ess()
    };
    let values: Vec<f64> = [0.5, 1.0, 1.5].iter().map(|&a| ess_at(a)).collect();
    assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
}

#[test]
fn free_field_ensemble_regenerates_its_draws() {
    let g = TorusGrid::new(16).unwrap();
    let s = RngStream::new(1, purpose::ENSEMBLE);
    let e = WeightedEnsemble::draw(&g, &params(&g, 1.0, 1), &CutoffProfile::sharp(), 8, Proposal::FreeField, &s).unwrap();
    for i in 0..8 {
        assert_eq!(e.sample(i).max_abs_diff(&gff_sample(&g, &s.for_replica(i as u64))), 0.0);
    }
}
