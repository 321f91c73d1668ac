//! Monte Carlo experiments shared by the command-line driver and the test suites.
//!
//! Every function is deterministic in its `seed`: replica `i` reads stream id `i`
//! of a fixed purpose, replicas run in parallel and are reduced in index order.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{
    contraction_check, solve_sqe_full_substeps, solve_shifted, Equation, OuDriver, SqeConfig, SqeStepper,
};
use crate::error::{Error, Result};
use crate::measures::{
    invariance_test, linear_fit, resample_stationary, Estimate, InvarianceReport, ObservableSet, Proposal,
    WeightedEnsemble,
};
use crate::random::{gff_sample, ou_path, purpose, uniform_times, OuPropagator, RngStream};
use crate::spectral::{
    besov_sobolev_ratio_range, heat_semigroup, sobolev_norm, SpectralField, TorusGrid,
};
use crate::wick::{analytic_wick_cov, hermite, trapezoid, CutoffProfile, WickExp, WickParams};

fn replica_stream(seed: u64, p: u32, r: usize) -> RngStream {
    RngStream::new(seed, p).for_replica(r as u64)
}

fn sq_gap(a: &SpectralField, b: &SpectralField, s: f64) -> f64 {
    sobolev_norm(&(a - b), s).powi(2)
}

/// `lambda` and `c` in `gap_N ~ c 2^{-lambda N}` by least squares on `log2`.
pub fn fit_dyadic_rate(levels: &[u32], gaps: &[f64]) -> (f64, f64) {
    let x: Vec<f64> = levels.iter().map(|&n| n as f64).collect();
    let y: Vec<f64> = gaps.iter().map(|g| g.log2()).collect();
    let (a, b) = linear_fit(&x, &y);
    (-b, a.exp2())
}

// ---------------------------------------------------------------------------
// Hermite polynomials and Wick moments

#[derive(Clone, Debug, Serialize)]
pub struct HermiteCheck {
    pub correlation: f64,
    pub n: usize,
    pub m: usize,
    pub exact: f64,
    pub estimate: Estimate,
    pub z: f64,
}

/// `E[H_n(X;1) H_m(Y;1)]` for standard Gaussians with correlation `r`, against
/// `delta_{nm} n! r^n`.
pub fn hermite_orthogonality(max_degree: usize, correlations: &[f64], draws: usize, seed: u64) -> Result<Vec<HermiteCheck>> {
    let mut out = Vec::new();
    for (ci, &r) in correlations.iter().enumerate() {
        let mut rng = RngStream::new(seed, purpose::SCRATCH + 1).child(ci as u64).rng();
        let mut table = vec![vec![Vec::with_capacity(draws); max_degree + 1]; max_degree + 1];
        let orth = (1.0 - r * r).max(0.0).sqrt();
        for _ in 0..draws {
            let x: f64 = rng.sample(StandardNormal);
            let e: f64 = rng.sample(StandardNormal);
            let y = r * x + orth * e;
            let hx: Vec<f64> = (0..=max_degree).map(|n| hermite(n, x, 1.0)).collect::<Result<_>>()?;
            let hy: Vec<f64> = (0..=max_degree).map(|n| hermite(n, y, 1.0)).collect::<Result<_>>()?;
            for n in 0..=max_degree {
                for m in 0..=max_degree {
                    table[n][m].push(hx[n] * hy[m]);
                }
            }
        }
        for n in 0..=max_degree {
            for m in 0..=max_degree {
                let exact = if n == m {
                    (1..=n).map(|i| i as f64).product::<f64>() * r.powi(n as i32)
                } else {
                    0.0
                };
                let estimate = Estimate::from_samples(&table[n][m]);
                out.push(HermiteCheck {
                    correlation: r,
                    n,
                    m,
                    exact,
                    z: estimate.z_against(exact),
                    estimate,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct WickMomentCheck {
    pub level: u32,
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub exact: f64,
    pub estimate: Estimate,
    pub z: f64,
}

/// Point values of `exp_N(alpha phi)` at grid indices over `draws` GFF samples.
fn wick_point_samples(
    grid: &TorusGrid,
    params: &WickParams,
    psi: &CutoffProfile,
    points: &[(usize, usize)],
    draws: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let wick = WickExp::new(*params, psi, grid)?;
    (0..draws)
        .into_par_iter()
        .map(|r| {
            let phi = gff_sample(grid, &replica_stream(seed, purpose::ENSEMBLE, r));
            let v = wick.physical(&phi)?;
            Ok(points.iter().map(|&(i, j)| v[[i, j]]).collect())
        })
        .collect()
}

/// `E exp_N(alpha phi)(x) = 1` at the origin of the grid for each level.
pub fn wick_mean(grid: &TorusGrid, alpha: f64, levels: &[u32], draws: usize, seed: u64) -> Result<Vec<WickMomentCheck>> {
    let psi = CutoffProfile::sharp();
    levels
        .iter()
        .map(|&n| {
            let p = WickParams::new(alpha, n, WickParams::default_beta(alpha), &psi, grid)?;
            let s = wick_point_samples(grid, &p, &psi, &[(0, 0)], draws, seed ^ u64::from(n))?;
            let estimate = Estimate::from_samples(&s.iter().map(|v| v[0]).collect::<Vec<_>>());
            Ok(WickMomentCheck {
                level: n,
                x: (0.0, 0.0),
                y: (0.0, 0.0),
                exact: 1.0,
                z: estimate.z_against(1.0),
                estimate,
            })
        })
        .collect()
}

/// `E[exp_N(x) exp_N(y)]` against the closed form at fixed grid-point pairs.
pub fn wick_covariance(
    grid: &TorusGrid,
    alpha: f64,
    level: u32,
    pairs: &[((usize, usize), (usize, usize))],
    draws: usize,
    seed: u64,
) -> Result<Vec<WickMomentCheck>> {
    let psi = CutoffProfile::sharp();
    let p = WickParams::new(alpha, level, WickParams::default_beta(alpha), &psi, grid)?;
    let points: Vec<(usize, usize)> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    let samples = wick_point_samples(grid, &p, &psi, &points, draws, seed)?;
    pairs
        .iter()
        .enumerate()
        .map(|(q, &(a, b))| {
            let (x, y) = (grid.point(a.0, a.1), grid.point(b.0, b.1));
            let exact = analytic_wick_cov(&p, &psi, grid, x, y)?;
            let prods: Vec<f64> = samples.iter().map(|v| v[2 * q] * v[2 * q + 1]).collect();
            let estimate = Estimate::from_samples(&prods);
            Ok(WickMomentCheck {
                level,
                x,
                y,
                exact,
                z: estimate.z_against(exact),
                estimate,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Cauchy decay of the Wick exponential in the cutoff level

#[derive(Clone, Debug, Serialize)]
pub struct CauchySweep {
    pub alpha: f64,
    pub beta: f64,
    /// `N` such that the gap compares levels `N` and `N + 1`.
    pub levels: Vec<u32>,
    /// `E ||exp_{N+1} - exp_N||^2_{H^-beta}`, sharp profile.
    pub gaps: Vec<Estimate>,
    /// Same with the Gaussian profile.
    pub smooth_gaps: Vec<Estimate>,
    pub lambda: f64,
    pub prefactor: f64,
    pub smooth_lambda: f64,
    /// `E ||exp^sharp_{Nmax} - exp^smooth_{Nmax}||^2_{H^-beta}`.
    pub cross_profile_gap: Estimate,
    /// Largest absolute difference met; exactly zero at `alpha = 0`.
    pub max_abs_difference: f64,
    #[serde(skip)]
    pub rows: Vec<Vec<f64>>,
}

impl CauchySweep {
    pub const COLUMNS: [&'static str; 4] = ["replica", "level", "sharp_gap_sq", "smooth_gap_sq"];
}

/// Common-noise sweep over `N = 1..=max_level` on the GFF: one draw per replica
/// is renormalized at every level with both profiles.
pub fn cauchy_gff(grid: &TorusGrid, alpha: f64, beta: f64, max_level: u32, replicas: usize, seed: u64) -> Result<CauchySweep> {
    if max_level < 2 {
        return Err(Error::Config("Cauchy sweep needs at least two levels".into()));
    }
    let sharp = CutoffProfile::sharp();
    let smooth = CutoffProfile::gaussian();
    let build = |psi: &CutoffProfile| -> Result<Vec<WickExp>> {
        (1..=max_level)
            .map(|n| WickExp::new(WickParams::new(alpha, n, beta, psi, grid)?, psi, grid))
            .collect()
    };
    let (ws, wg) = (build(&sharp)?, build(&smooth)?);
    let per_replica: Vec<(Vec<Vec<f64>>, f64, f64)> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let phi = gff_sample(grid, &replica_stream(seed, purpose::ENSEMBLE, r));
            let es: Vec<SpectralField> = ws.iter().map(|w| w.field(&phi)).collect::<Result<_>>()?;
            let eg: Vec<SpectralField> = wg.iter().map(|w| w.field(&phi)).collect::<Result<_>>()?;
            let mut rows = Vec::new();
            let mut max_diff = 0.0f64;
            for i in 0..es.len() - 1 {
                max_diff = max_diff.max(es[i + 1].max_abs_diff(&es[i]));
                rows.push(vec![
                    r as f64,
                    (i + 1) as f64,
                    sq_gap(&es[i + 1], &es[i], -beta),
                    sq_gap(&eg[i + 1], &eg[i], -beta),
                ]);
            }
            let last = es.len() - 1;
            Ok((rows, sq_gap(&es[last], &eg[last], -beta), max_diff))
        })
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<f64>> = per_replica.iter().flat_map(|p| p.0.clone()).collect();
    let levels: Vec<u32> = (1..max_level).collect();
    let gaps_for = |col: usize| -> Vec<Estimate> {
        levels
            .iter()
            .map(|&n| {
                let xs: Vec<f64> = rows.iter().filter(|r| r[1] == n as f64).map(|r| r[col]).collect();
                Estimate::from_samples(&xs)
            })
            .collect()
    };
    let gaps = gaps_for(2);
    let smooth_gaps = gaps_for(3);
    let (lambda, prefactor) = fit_dyadic_rate(&levels, &gaps.iter().map(|e| e.mean).collect::<Vec<_>>());
    let (smooth_lambda, _) = fit_dyadic_rate(&levels, &smooth_gaps.iter().map(|e| e.mean).collect::<Vec<_>>());
    let cross: Vec<f64> = per_replica.iter().map(|p| p.1).collect();
    Ok(CauchySweep {
        alpha,
        beta,
        levels,
        gaps,
        smooth_gaps,
        lambda,
        prefactor,
        smooth_lambda,
        cross_profile_gap: Estimate::from_samples(&cross),
        max_abs_difference: per_replica.iter().fold(0.0f64, |m, p| m.max(p.2)),
        rows,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PathCauchySweep {
    pub levels: Vec<u32>,
    /// `E ||exp_{N+1}(X) - exp_N(X)||^2_{L^2([0,T]; H^-beta)}`.
    pub gaps: Vec<Estimate>,
    pub lambda: f64,
    pub max_abs_difference: f64,
}

/// The same sweep along stationary OU paths, trapezoid rule in time.
#[allow(clippy::too_many_arguments)]
pub fn cauchy_ou(
    grid: &TorusGrid,
    alpha: f64,
    beta: f64,
    max_level: u32,
    horizon: f64,
    dt: f64,
    replicas: usize,
    seed: u64,
) -> Result<PathCauchySweep> {
    let psi = CutoffProfile::sharp();
    let ws: Vec<WickExp> = (1..=max_level)
        .map(|n| WickExp::new(WickParams::new(alpha, n, beta, &psi, grid)?, &psi, grid))
        .collect::<Result<_>>()?;
    let times = uniform_times(horizon, dt)?;
    let per_replica: Vec<(Vec<f64>, f64)> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let x0 = gff_sample(grid, &replica_stream(seed, purpose::INITIAL_DATUM, r));
            let traj = ou_path(&x0, &times, &replica_stream(seed, purpose::DRIVING_NOISE, r))?;
            let mut series = vec![Vec::with_capacity(times.len()); ws.len() - 1];
            let mut max_diff = 0.0f64;
            for x in traj.states() {
                let es: Vec<SpectralField> = ws.iter().map(|w| w.field(x)).collect::<Result<_>>()?;
                for i in 0..es.len() - 1 {
                    max_diff = max_diff.max(es[i + 1].max_abs_diff(&es[i]));
                    series[i].push(sq_gap(&es[i + 1], &es[i], -beta));
                }
            }
            Ok((series.iter().map(|s| trapezoid(&times, s)).collect(), max_diff))
        })
        .collect::<Result<_>>()?;
    let levels: Vec<u32> = (1..max_level).collect();
    let gaps: Vec<Estimate> = (0..levels.len())
        .map(|i| Estimate::from_samples(&per_replica.iter().map(|p| p.0[i]).collect::<Vec<_>>()))
        .collect();
    let (lambda, _) = fit_dyadic_rate(&levels, &gaps.iter().map(|e| e.mean).collect::<Vec<_>>());
    Ok(PathCauchySweep {
        levels,
        gaps,
        lambda,
        max_abs_difference: per_replica.iter().fold(0.0f64, |m, p| m.max(p.1)),
    })
}

// ---------------------------------------------------------------------------
// Ornstein-Uhlenbeck process

#[derive(Clone, Debug, Serialize)]
pub struct OuStationarity {
    pub transitions: usize,
    pub dt: f64,
    /// Per dyadic shell: `(shell index, E |X(k)|^2 (1 + |k|^2))` with its error.
    /// Shell `-1` is the zero mode, shell `j >= 0` holds `2^j <= |k| < 2^{j+1}`.
    pub shells: Vec<(i32, Estimate, f64)>,
    pub max_abs_z: f64,
    /// `max |v(dt) - (d(dt/2)^2 v(dt/2) + v(dt/2))|` over modes.
    pub half_step_identity_error: f64,
}

fn shell_of(k2: f64) -> i32 {
    if k2 == 0.0 {
        -1
    } else {
        k2.sqrt().log2().floor() as i32
    }
}

/// Starts from `mu_0`, applies `transitions` exact steps and compares the
/// normalized mode variances, pooled per dyadic shell, with 1.
pub fn ou_stationarity(grid: &TorusGrid, dt: f64, transitions: usize, replicas: usize, seed: u64) -> Result<OuStationarity> {
    let prop = OuPropagator::new(grid, dt)?;
    let shell_count = (shell_of(grid.max_wavenumber().powi(2)) + 2) as usize;
    let per_replica: Vec<Vec<f64>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let stream = replica_stream(seed, purpose::DRIVING_NOISE, r);
            let mut x = gff_sample(grid, &replica_stream(seed, purpose::INITIAL_DATUM, r));
            for n in 0..transitions {
                x = prop.step(&x, 1.0, &stream.child(n as u64));
            }
            // mean of normalized |X(k)|^2 over the modes of each shell
            let mut sums = vec![0.0; shell_count];
            let mut counts = vec![0usize; shell_count];
            for (c, &k2) in x.coeffs().iter().zip(grid.k_squared().iter()) {
                let s = (shell_of(k2) + 1) as usize;
                sums[s] += c.norm_sqr() * (1.0 + k2);
                counts[s] += 1;
            }
            sums.iter().zip(&counts).map(|(s, &c)| if c > 0 { s / c as f64 } else { f64::NAN }).collect()
        })
        .collect();
    let mut shells = Vec::new();
    let mut max_abs_z = 0.0f64;
    for s in 0..shell_count {
        let xs: Vec<f64> = per_replica.iter().map(|v| v[s]).collect();
        if xs[0].is_nan() {
            continue;
        }
        let e = Estimate::from_samples(&xs);
        let z = e.z_against(1.0);
        max_abs_z = max_abs_z.max(z.abs());
        shells.push((s as i32 - 1, e, z));
    }
    let half = OuPropagator::new(grid, dt / 2.0)?;
    let mut err = 0.0f64;
    for ((v, d2), v2) in prop
        .noise_variance()
        .iter()
        .zip(half.decay().iter())
        .zip(half.noise_variance().iter())
    {
        err = err.max((v - (d2 * d2 * v2 + v2)).abs());
    }
    Ok(OuStationarity {
        transitions,
        dt,
        shells,
        max_abs_z,
        half_step_identity_error: err,
    })
}

// ---------------------------------------------------------------------------
// Shifted equation: sign and contraction

fn sqe_config(grid: &TorusGrid, alpha: f64, level: u32, eq: Equation, horizon: f64, dt: f64) -> Result<SqeConfig> {
    let psi = CutoffProfile::sharp();
    let params = WickParams::new(alpha, level, WickParams::default_beta(alpha), &psi, grid)?;
    Ok(SqeConfig::new(horizon, dt, eq, params, psi))
}

/// Forcing `exp_N(alpha X)` along a stationary OU path for replica `r`.
fn forcing_path(config: &SqeConfig, grid: &TorusGrid, seed: u64, r: usize) -> Result<Vec<SpectralField>> {
    let x0 = gff_sample(grid, &replica_stream(seed, purpose::INITIAL_DATUM, r));
    let traj = ou_path(&x0, &config.times()?, &replica_stream(seed, purpose::DRIVING_NOISE, r))?;
    crate::wick::wick_exp_ou(&traj, &config.params, &config.psi)
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonCheck {
    pub replicas: usize,
    pub points_checked: usize,
    /// Grid values with `sign(alpha) Y > 0`.
    pub violations: usize,
    /// Largest `sign(alpha) Y` met.
    pub max_signed_value: f64,
}

/// `Y` from `upsilon = 0` driven by `exp_N(alpha X)` must satisfy `sign(alpha) Y <= 0`.
#[allow(clippy::too_many_arguments)]
pub fn comparison_principle(
    grid: &TorusGrid,
    alpha: f64,
    level: u32,
    horizon: f64,
    dt: f64,
    replicas: usize,
    seed: u64,
) -> Result<ComparisonCheck> {
    let config = sqe_config(grid, alpha, level, Equation::Shifted, horizon, dt)?;
    let sign = alpha.signum();
    let per: Vec<(usize, usize, f64)> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let chi = forcing_path(&config, grid, seed, r)?;
            let path = solve_shifted(&SpectralField::zeros(grid), &chi, &config)?;
            let mut bad = 0;
            let mut top = f64::NEG_INFINITY;
            let mut count = 0;
            for y in &path.states {
                for &v in y.to_physical().iter() {
                    let sv = sign * v;
                    top = top.max(sv);
                    bad += usize::from(sv > 0.0);
                    count += 1;
                }
            }
            Ok((count, bad, top))
        })
        .collect::<Result<_>>()?;
    Ok(ComparisonCheck {
        replicas,
        points_checked: per.iter().map(|p| p.0).sum(),
        violations: per.iter().map(|p| p.1).sum(),
        max_signed_value: per.iter().fold(f64::NEG_INFINITY, |m, p| m.max(p.2)),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ContractionSweep {
    pub replicas: usize,
    /// Worst relative growth per unit time of `e^{t/2} ||Y^1 - Y^2||`.
    pub max_growth_rate: f64,
    /// Worst `e^{T/2} gap(T) / gap(0)`.
    pub worst_ratio: f64,
}

/// Two smooth random data (heat-smoothed GFF draws) per replica, one forcing.
#[allow(clippy::too_many_arguments)]
pub fn contraction_sweep(
    grid: &TorusGrid,
    alpha: f64,
    level: u32,
    horizon: f64,
    dt: f64,
    replicas: usize,
    seed: u64,
) -> Result<ContractionSweep> {
    let config = sqe_config(grid, alpha, level, Equation::Shifted, horizon, dt)?;
    let reports: Vec<_> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let chi = forcing_path(&config, grid, seed, r)?;
            let s = replica_stream(seed, purpose::SCRATCH, r);
            let u1 = heat_semigroup(&gff_sample(grid, &s.child(1)), 0.5)?;
            let u2 = heat_semigroup(&gff_sample(grid, &s.child(2)), 0.5)?;
            contraction_check(&u1, &u2, &chi, &config)
        })
        .collect::<Result<_>>()?;
    Ok(ContractionSweep {
        replicas,
        max_growth_rate: reports.iter().fold(f64::NEG_INFINITY, |m, r| m.max(r.max_growth_rate)),
        worst_ratio: reports.iter().fold(0.0f64, |m, r| m.max(r.worst_ratio)),
    })
}

// ---------------------------------------------------------------------------
// Full equation: decomposition residual and level convergence

#[derive(Clone, Debug, Serialize)]
pub struct DecompositionOrder {
    pub dt: f64,
    /// Mean over replicas of `sup_t ||Phi - (P_N X + Y)||_{H^-eps}` at `dt`.
    pub residual: Estimate,
    /// The same at `dt / 2`, on the same Brownian path.
    pub residual_half: Estimate,
    /// `log2(residual / residual_half)`.
    pub order: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn decomposition_order(
    grid: &TorusGrid,
    alpha: f64,
    level: u32,
    horizon: f64,
    dt: f64,
    epsilon: f64,
    replicas: usize,
    seed: u64,
) -> Result<DecompositionOrder> {
    let mut coarse = sqe_config(grid, alpha, level, Equation::Full, horizon, dt)?;
    coarse.epsilon = epsilon;
    coarse.record_stride = usize::MAX;
    let fine = coarse.with_dt(dt / 2.0);
    let pairs: Vec<(f64, f64)> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let phi = gff_sample(grid, &replica_stream(seed, purpose::INITIAL_DATUM, r));
            let stream = replica_stream(seed, purpose::DRIVING_NOISE, r);
            let a = solve_sqe_full_substeps(&phi, &coarse, &stream, 2)?;
            let b = solve_sqe_full_substeps(&phi, &fine, &stream, 1)?;
            Ok((
                a.decomposition_residual().unwrap_or(f64::NAN),
                b.decomposition_residual().unwrap_or(f64::NAN),
            ))
        })
        .collect::<Result<_>>()?;
    let residual = Estimate::from_samples(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
    let residual_half = Estimate::from_samples(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
    Ok(DecompositionOrder {
        dt,
        order: (residual.mean / residual_half.mean).log2(),
        residual,
        residual_half,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelGaps {
    /// `N` such that the gap compares `N` and `N + 1`.
    pub levels: Vec<u32>,
    /// Mean of `sup_t ||Phi^{N+1}_t - Phi^N_t||_{H^-eps}` over successful replicas.
    pub gaps: Vec<Estimate>,
    pub failed_replicas: usize,
    pub strictly_decreasing: bool,
    /// Per successful replica, the sup-in-time gap at each level.
    pub per_replica: Vec<Vec<f64>>,
    #[serde(skip)]
    pub rows: Vec<Vec<f64>>,
}

impl LevelGaps {
    pub const COLUMNS: [&'static str; 4] = ["replica", "level", "t", "gap"];
}

/// Runs the full equation at every level `1..=max_level` on one initial datum
/// and one noise path per replica, stepping all levels together.
#[allow(clippy::too_many_arguments)]
pub fn sqe_level_gaps(
    grid: &TorusGrid,
    alpha: f64,
    max_level: u32,
    horizon: f64,
    dt: f64,
    epsilon: f64,
    replicas: usize,
    seed: u64,
) -> Result<LevelGaps> {
    let configs: Vec<SqeConfig> = (1..=max_level)
        .map(|n| {
            let c = sqe_config(grid, alpha, n, Equation::Full, horizon, dt)?;
            c.validate()?;
            Ok(c)
        })
        .collect::<Result<_>>()?;
    let steps = configs[0].steps();
    let outcomes: Vec<Result<(Vec<f64>, Vec<Vec<f64>>)>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let phi = gff_sample(grid, &replica_stream(seed, purpose::INITIAL_DATUM, r));
            let mut driver = OuDriver::new(phi.clone(), dt, 1, replica_stream(seed, purpose::DRIVING_NOISE, r))?;
            let mut steppers: Vec<SqeStepper> = configs
                .iter()
                .map(|c| SqeStepper::new(WickExp::new(c.params, &c.psi, grid)?.project(&phi), c))
                .collect::<Result<_>>()?;
            let mut sup = vec![0.0f64; steppers.len() - 1];
            let mut rows = Vec::new();
            for n in 0..=steps {
                if n > 0 {
                    let inc = driver.advance();
                    for s in &mut steppers {
                        s.advance(&inc)?;
                    }
                }
                for i in 0..sup.len() {
                    let g = sobolev_norm(&(steppers[i + 1].state() - steppers[i].state()), -epsilon);
                    sup[i] = sup[i].max(g);
                    rows.push(vec![r as f64, (i + 1) as f64, n as f64 * dt, g]);
                }
            }
            Ok((sup, rows))
        })
        .collect();
    let mut failed = 0;
    let mut sups = Vec::new();
    let mut rows = Vec::new();
    for o in outcomes {
        match o {
            Ok((s, r)) => {
                sups.push(s);
                rows.extend(r);
            }
            Err(Error::Overflow { .. } | Error::StepStability { .. }) => failed += 1,
            Err(e) => return Err(e),
        }
    }
    if sups.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let levels: Vec<u32> = (1..max_level).collect();
    let gaps: Vec<Estimate> = (0..levels.len())
        .map(|i| Estimate::from_samples(&sups.iter().map(|s| s[i]).collect::<Vec<_>>()))
        .collect();
    let strictly_decreasing = gaps.windows(2).all(|w| w[1].mean < w[0].mean);
    Ok(LevelGaps {
        levels,
        gaps,
        failed_replicas: failed,
        strictly_decreasing,
        per_replica: sups,
        rows,
    })
}

// ---------------------------------------------------------------------------
// Gibbs measure: partition function and invariance

#[derive(Clone, Debug, Serialize)]
pub struct PartitionCheck {
    pub alpha: f64,
    pub level: u32,
    pub draws: usize,
    pub estimate: Estimate,
    pub max_weight: f64,
    pub min_weight: f64,
    pub overflowed: usize,
    /// `e^{-4 pi^2}`, the Jensen lower bound.
    pub jensen_bound: f64,
    pub ess: f64,
}

pub fn partition_check(grid: &TorusGrid, alpha: f64, level: u32, draws: usize, seed: u64) -> Result<PartitionCheck> {
    let psi = CutoffProfile::sharp();
    let p = WickParams::new(alpha, level, WickParams::default_beta(alpha), &psi, grid)?;
    let e = WeightedEnsemble::draw(grid, &p, &psi, draws, Proposal::FreeField, &RngStream::new(seed, purpose::ENSEMBLE))?;
    let raw: Vec<f64> = e.log_weights().iter().map(|l| l.exp()).collect();
    Ok(PartitionCheck {
        alpha,
        level,
        draws,
        estimate: e.estimate_partition(),
        max_weight: raw.iter().fold(0.0f64, |m, &w| m.max(w)),
        min_weight: raw.iter().fold(f64::INFINITY, |m, &w| m.min(w)),
        overflowed: e.overflowed(),
        jensen_bound: (-4.0 * PI * PI).exp(),
        ess: e.ess(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct InvarianceRun {
    pub ensemble_size: usize,
    pub ess: f64,
    pub report: InvarianceReport,
    /// Same replicas with `C_N / 2` in the drift.
    pub control: Option<InvarianceReport>,
}

/// Importance-resamples `replicas` initial fields from `mu_N` (zero-mode tilted
/// proposal, `ensemble_size` draws) and runs the invariance test, optionally
/// with the mis-renormalized control.
#[allow(clippy::too_many_arguments)]
pub fn invariance_run(
    grid: &TorusGrid,
    alpha: f64,
    level: u32,
    horizon: f64,
    dt: f64,
    epsilon: f64,
    replicas: usize,
    ensemble_size: usize,
    with_control: bool,
    seed: u64,
) -> Result<InvarianceRun> {
    let mut config = sqe_config(grid, alpha, level, Equation::Projected, horizon, dt)?;
    config.epsilon = epsilon;
    config.record_stride = usize::MAX;
    let ensemble = WeightedEnsemble::draw(
        grid,
        &config.params,
        &config.psi,
        ensemble_size,
        Proposal::ZeroModeTilted,
        &RngStream::new(seed, purpose::PROPOSAL),
    )?;
    let initial = resample_stationary(&ensemble, replicas, &RngStream::new(seed, purpose::RESAMPLE))?;
    let obs = ObservableSet::new(&config.params, &config.psi, grid, epsilon)?;
    let noise = RngStream::new(seed, purpose::DRIVING_NOISE);
    let report = invariance_test(&initial.fields, &config, &obs, &noise)?;
    let control = if with_control {
        let mut wrong = config;
        wrong.drift_constant_factor = 0.5;
        Some(invariance_test(&initial.fields, &wrong, &obs, &noise)?)
    } else {
        None
    };
    Ok(InvarianceRun {
        ensemble_size,
        ess: initial.ess,
        report,
        control,
    })
}

// ---------------------------------------------------------------------------
// Norm equivalences and heat-semigroup bounds

#[derive(Clone, Debug, Serialize)]
pub struct BesovRatio {
    pub s: f64,
    pub min: f64,
    pub max: f64,
    /// Bounds implied by the partition geometry alone.
    pub lower_bound: f64,
    pub upper_bound: f64,
}

/// Single-mode `B^s_{2,2} / H^s` ratios. A block `j` touching `|k| = r` has
/// `2^{2j} / (1 + r^2)` in `[81/1600, 16/9]`, and the squared blocks at `r`
/// sum to between `1/2` and `1`, which brackets every ratio.
pub fn besov_ratios(grid: &TorusGrid, orders: &[f64]) -> Vec<BesovRatio> {
    let (qlo, qhi): (f64, f64) = (81.0 / 1600.0, 16.0 / 9.0);
    orders
        .iter()
        .map(|&s| {
            let (min, max) = besov_sobolev_ratio_range(grid, s);
            let (a, b) = (qlo.powf(s), qhi.powf(s));
            BesovRatio {
                s,
                min,
                max,
                lower_bound: (0.5 * a.min(b)).sqrt(),
                upper_bound: a.max(b).sqrt(),
            }
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct SmoothingSweep {
    pub s: f64,
    pub delta: f64,
    /// `max t^delta ||e^{tA} u||_{H^{s+2 delta}}` over unit `H^s` fields and times.
    pub smoothing_max: f64,
    /// `sup_x x^delta e^{-x/2}`, the exact multiplier bound.
    pub smoothing_bound: f64,
    /// `max t^-delta ||(e^{tA} - 1) u||_{H^{s-2 delta}}`.
    pub difference_max: f64,
    /// `sup_x x^-delta (1 - e^{-x/2}) <= 2^-delta`.
    pub difference_bound: f64,
    /// Spread `max/min` of the per-time maxima of the smoothing ratio.
    pub smoothing_spread: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct HeatBounds {
    pub fields: usize,
    pub times: Vec<f64>,
    pub sweeps: Vec<SmoothingSweep>,
    /// `max |e^{(t+s)A} u - e^{tA} e^{sA} u|` over the sweep.
    pub semigroup_error: f64,
}

/// Heat-semigroup smoothing and difference ratios over `fields` random unit
/// `H^s` fields and `t = 2^-10, ..., 1`.
pub fn heat_bounds(grid: &TorusGrid, s: f64, deltas: &[f64], fields: usize, seed: u64) -> Result<HeatBounds> {
    let times: Vec<f64> = (0..=10).rev().map(|j| f64::powi(2.0, -j)).collect();
    // white-ish fields with a random spectral slope, normalized in H^s
    let us: Vec<SpectralField> = (0..fields)
        .map(|r| {
            let st = replica_stream(seed, purpose::SCRATCH + 2, r);
            let slope: f64 = st.child(1).rng().random_range(-1.0..1.5);
            let white = gff_sample(grid, &st).map_radial(|k2| (1.0 + k2).powf(0.5 - slope / 2.0));
            let n = sobolev_norm(&white, s);
            white.scaled(1.0 / n)
        })
        .collect();
    let mut sweeps = Vec::new();
    for &delta in deltas {
        let mut per_time = vec![0.0f64; times.len()];
        let mut diff_max = 0.0f64;
        for u in &us {
            for (ti, &t) in times.iter().enumerate() {
                let h = heat_semigroup(u, t)?;
                per_time[ti] = per_time[ti].max(t.powf(delta) * sobolev_norm(&h, s + 2.0 * delta));
                let d = sobolev_norm(&(&h - u), s - 2.0 * delta);
                diff_max = diff_max.max(t.powf(-delta) * d);
            }
        }
        let smoothing_max = per_time.iter().fold(0.0f64, |m, &v| m.max(v));
        let smoothing_min = per_time.iter().fold(f64::INFINITY, |m, &v| m.min(v));
        sweeps.push(SmoothingSweep {
            s,
            delta,
            smoothing_max,
            smoothing_bound: if delta == 0.0 { 1.0 } else { (2.0 * delta / std::f64::consts::E).powf(delta) },
            difference_max: diff_max,
            difference_bound: f64::powf(2.0, -delta),
            smoothing_spread: smoothing_max / smoothing_min,
        })
    }
    let mut semigroup_error = 0.0f64;
    for u in us.iter().take(20) {
        for &(a, b) in &[(0.25, 0.5), (2f64.powi(-10), 0.125), (1.0, 1.0)] {
            let one = heat_semigroup(u, a + b)?;
            let two = heat_semigroup(&heat_semigroup(u, a)?, b)?;
            semigroup_error = semigroup_error.max(one.max_abs_diff(&two));
        }
    }
    Ok(HeatBounds {
        fields,
        times,
        sweeps,
        semigroup_error,
    })
}
