use super::*;
use crate::error::Error;
use crate::random::{gff_sample, ou_path, purpose, RngStream};
use crate::spectral::{heat_semigroup, SpectralField, TorusGrid};
use crate::wick::{wick_exp_ou, CutoffProfile, WickParams};

fn config(grid: &TorusGrid, alpha: f64, level: u32, eq: Equation, horizon: f64, dt: f64) -> SqeConfig {
    let psi = CutoffProfile::sharp();
    let params = WickParams::new(alpha, level, WickParams::default_beta(alpha), &psi, grid).unwrap();
    SqeConfig::new(horizon, dt, eq, params, psi)
}

fn smooth_datum(grid: &TorusGrid, amp: f64) -> SpectralField {
    let m = grid.modes();
    let v = ndarray::Array2::from_shape_fn((m, m), |(i, j)| {
        let (x, y) = grid.point(i, j);
        amp * (x.sin() + 0.5 * (x + 2.0 * y).cos())
    });
    SpectralField::from_physical(grid, &v).unwrap()
}

#[test]
fn zero_forcing_is_heat_flow() {
    let g = TorusGrid::new(16).unwrap();
    let cfg = config(&g, 1.0, 1, Equation::Shifted, 0.5, 0.05);
    let u = smooth_datum(&g, 0.7);
    let chi = constant_path(&g, 0.0, cfg.steps() + 1);
    let path = solve_shifted(&u, &chi, &cfg).unwrap();
    for (t, y) in path.times.iter().zip(&path.states) {
        assert!(y.max_abs_diff(&heat_semigroup(&u, *t).unwrap()) < 1e-12, "t={t}");
    }
}

/// Classical RK4 for `u' = -u/2 - (alpha/2) c e^{alpha u}`.
fn rk4_reference(alpha: f64, c: f64, horizon: f64) -> f64 {
    let f = |u: f64| -u / 2.0 - 0.5 * alpha * c * (alpha * u).exp();
    let n = 20_000;
    let h = horizon / n as f64;
    let mut u = 0.0;
    for _ in 0..n {
        let k1 = f(u);
        let k2 = f(u + 0.5 * h * k1);
        let k3 = f(u + 0.5 * h * k2);
        let k4 = f(u + h * k3);
        u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    u
}

#[test]
fn homogeneous_forcing_matches_scalar_ode() {
    // first-order scheme: extrapolate dt -> 0 from dt and dt/2 (Richardson)
    let g = TorusGrid::new(8).unwrap();
    let (alpha, c) = (1.2, 0.8);
    let reference = rk4_reference(alpha, c, 1.0);
    let run = |dt: f64| {
        let cfg = config(&g, alpha, 0, Equation::Shifted, 1.0, dt);
        let chi = constant_path(&g, c, cfg.steps() + 1);
        let path = solve_shifted(&SpectralField::zeros(&g), &chi, &cfg).unwrap();
        let v = path.final_state().to_physical();
        assert!(v.iter().all(|x| (x - v[[0, 0]]).abs() < 1e-13));
        v[[0, 0]]
    };
    let (a, b) = (run(1e-3), run(5e-4));
    let extrapolated = 2.0 * b - a;
    assert!((extrapolated - reference).abs() < 1e-6, "{extrapolated} vs {reference}");
    assert!((b - reference).abs() < 1e-3);
}

#[test]
fn comparison_principle_single_run() {
    let g = TorusGrid::new(32).unwrap();
    let cfg = config(&g, 1.0, 2, Equation::Shifted, 1.0, 0.01);
    let x0 = gff_sample(&g, &RngStream::new(4, purpose::SCRATCH));
    let traj = ou_path(&x0, &cfg.times().unwrap(), &RngStream::new(4, purpose::DRIVING_NOISE)).unwrap();
    let chi = wick_exp_ou(&traj, &cfg.params, &cfg.psi).unwrap();
    let path = solve_shifted(&SpectralField::zeros(&g), &chi, &cfg).unwrap();
    for y in &path.states {
        assert!(y.to_physical().iter().all(|&v| v <= 1e-12));
    }
}

#[test]
fn rough_datum_rejected() {
    let g = TorusGrid::new(32).unwrap();
    let cfg = config(&g, 1.0, 1, Equation::Shifted, 0.1, 0.05);
    let rough = gff_sample(&g, &RngStream::new(1, purpose::SCRATCH));
    let chi = constant_path(&g, 1.0, cfg.steps() + 1);
    assert!(matches!(
        solve_shifted(&rough, &chi, &cfg),
        Err(Error::RoughInitialDatum { .. })
    ));
}

#[test]
fn negative_forcing_rejected() {
    let g = TorusGrid::new(16).unwrap();
    let cfg = config(&g, 1.0, 1, Equation::Shifted, 0.1, 0.05);
    let chi = constant_path(&g, -1.0, cfg.steps() + 1);
    assert!(matches!(
        solve_shifted(&SpectralField::zeros(&g), &chi, &cfg),
        Err(Error::NegativeForcing { .. })
    ));
}

#[test]
fn stability_guard_trips() {
    let g = TorusGrid::new(16).unwrap();
    let cfg = config(&g, 1.0, 1, Equation::Shifted, 0.5, 0.5);
    let chi = constant_path(&g, 100.0, cfg.steps() + 1);
    assert!(matches!(
        solve_shifted(&SpectralField::zeros(&g), &chi, &cfg),
        Err(Error::StepStability { step: 0, .. })
    ));
}

#[test]
fn alpha_zero_full_is_projected_ou() {
    let g = TorusGrid::new(32).unwrap();
    let cfg = config(&g, 0.0, 2, Equation::Full, 0.2, 0.02);
    let phi = gff_sample(&g, &RngStream::new(8, purpose::INITIAL_DATUM));
    let stream = RngStream::new(8, purpose::DRIVING_NOISE);
    let path = solve_sqe_full(&phi, &cfg, &stream).unwrap();
    let ou = ou_path(&phi, &cfg.times().unwrap(), &stream).unwrap();
    let table = cfg.psi.multiplier(2, &g).unwrap();
    for (s, x) in path.states.iter().zip(ou.states()) {
        assert!(s.max_abs_diff(&x.apply_multiplier(&table)) < 1e-12);
    }
    assert!(path.decomposition_residual().unwrap() < 1e-12);
}

#[test]
fn alpha_zero_projected_is_ou() {
    let g = TorusGrid::new(16).unwrap();
    let cfg = config(&g, 0.0, 1, Equation::Projected, 0.2, 0.05);
    let phi = gff_sample(&g, &RngStream::new(2, purpose::INITIAL_DATUM));
    let stream = RngStream::new(2, purpose::DRIVING_NOISE);
    let path = solve_sqe_projected(&phi, &cfg, &stream).unwrap();
    let ou = ou_path(&phi, &cfg.times().unwrap(), &stream).unwrap();
    for (s, x) in path.states.iter().zip(ou.states()) {
        assert!(s.max_abs_diff(x) < 1e-12);
    }
    assert!(path.decomposition.is_none());
}

#[test]
fn stored_trajectory_matches_driver() {
    let g = TorusGrid::new(16).unwrap();
    let cfg = config(&g, 1.0, 1, Equation::Full, 0.2, 0.02);
    let phi = gff_sample(&g, &RngStream::new(3, purpose::INITIAL_DATUM));
    let stream = RngStream::new(3, purpose::DRIVING_NOISE);
    let a = solve_sqe_full(&phi, &cfg, &stream).unwrap();
    let traj = ou_path(&phi, &cfg.times().unwrap(), &stream).unwrap();
    let b = solve_sqe_full_on(&traj, &cfg).unwrap();
    assert!(a.final_state().max_abs_diff(b.final_state()) < 1e-12);
}

#[test]
fn substeps_share_the_brownian_path() {
    let g = TorusGrid::new(16).unwrap();
    let phi = gff_sample(&g, &RngStream::new(3, purpose::INITIAL_DATUM));
    let stream = RngStream::new(3, purpose::DRIVING_NOISE);
    let mut fine = OuDriver::new(phi.clone(), 0.05, 1, stream).unwrap();
    let mut coarse = OuDriver::new(phi, 0.1, 2, stream).unwrap();
    for _ in 0..4 {
        fine.advance();
        fine.advance();
        coarse.advance();
        assert!(fine.state().max_abs_diff(coarse.state()) < 1e-13);
    }
}

#[test]
fn identity_projector_makes_equations_coincide() {
    let g = TorusGrid::new(16).unwrap();
    let psi = CutoffProfile::GridIdentity;
    let params = WickParams::new(0.8, 1, 0.5, &psi, &g).unwrap();
    let phi = gff_sample(&g, &RngStream::new(5, purpose::INITIAL_DATUM));
    let stream = RngStream::new(5, purpose::DRIVING_NOISE);
    let full = solve_sqe_full(&phi, &SqeConfig::new(0.2, 0.02, Equation::Full, params, psi), &stream).unwrap();
    let proj = solve_sqe_projected(
        &phi,
        &SqeConfig::new(0.2, 0.02, Equation::Projected, params, psi),
        &stream,
    )
    .unwrap();
    assert!(full.final_state().max_abs_diff(proj.final_state()) < 1e-12);
}

#[test]
fn contraction_identical_data_zero_gap() {
    let g = TorusGrid::new(16).unwrap();
    let cfg = config(&g, 1.0, 1, Equation::Shifted, 0.5, 0.05);
    let chi = constant_path(&g, 1.0, cfg.steps() + 1);
    let u = smooth_datum(&g, 0.1);
    let r = contraction_check(&u, &u, &chi, &cfg).unwrap();
    assert!(r.gaps.iter().all(|&x| x == 0.0));
    assert!(r.is_contracting(0.0));
}

#[test]
fn contraction_constant_offset() {
    let g = TorusGrid::new(16).unwrap();
    let cfg = config(&g, 1.0, 1, Equation::Shifted, 1.0, 0.01);
    let chi = constant_path(&g, 1.0, cfg.steps() + 1);
    let r = contraction_check(
        &SpectralField::zeros(&g),
        &SpectralField::constant(&g, 0.1),
        &chi,
        &cfg,
    )
    .unwrap();
    let last = *r.gaps.last().unwrap();
    assert!(last <= (-0.5f64).exp() * r.gaps[0] * 1.05);
    assert!(r.is_contracting(0.01));
}

#[test]
fn config_validation() {
    let g = TorusGrid::new(32).unwrap();
    assert!(config(&g, 1.0, 1, Equation::Full, 1.0, 0.3).validate().is_err());
    assert!(config(&g, 1.0, 3, Equation::Full, 1.0, 0.5).validate().is_err());
    assert!(config(&g, 1.0, 3, Equation::Full, 1.0, 0.05).validate().is_ok());
    let cfg = config(&g, 1.0, 1, Equation::Projected, 0.2, 0.05);
    let phi = SpectralField::zeros(&g);
    assert!(solve_sqe_full(&phi, &cfg, &RngStream::new(0, 0)).is_err());
}

#[test]
fn measure_product_bound_on_a_few_draws() {
    let g = TorusGrid::new(32).unwrap();
    let psi = CutoffProfile::sharp();
    let params = WickParams::new(1.0, 2, 0.5, &psi, &g).unwrap();
    for r in 0..5 {
        let phi = gff_sample(&g, &RngStream::new(6, purpose::SCRATCH).for_replica(r));
        let xi = crate::wick::wick_exp_gff(&phi, &params, &psi).unwrap();
        let f = smooth_datum(&g, 1.0);
        let fmax = f.to_physical().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let lhs = crate::spectral::sobolev_norm(&measure_product(&f, &xi, 0.0).unwrap(), -0.5);
        let rhs = fmax * crate::spectral::sobolev_norm(&xi, -0.5);
        assert!(lhs <= 4.0 * rhs, "{lhs} {rhs}");
    }
}
