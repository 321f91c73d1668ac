use ndarray::{Array2, Zip};

use super::config::{Equation, Scheme, SqeConfig};
use super::path::{Decomposition, Diagnostics, SolutionPath};
use super::product::{check_nonnegative, mollified_values};
use crate::error::{invalid, Error, Result};
use crate::random::{OuPropagator, OuTrajectory, RngStream};
use crate::spectral::{sobolev_norm, SpectralField, TorusGrid};
use crate::wick::{WickExp, OVERFLOW_EXPONENT};

/// Fraction of the `H^{2-beta}` energy allowed in the shell `|k| > M/4`
/// before an initial datum counts as unresolved.
pub const ROUGHNESS_LIMIT: f64 = 0.5;

fn check_smooth_datum(upsilon: &SpectralField, beta: f64) -> Result<()> {
    let s = 2.0 - beta;
    let edge = (upsilon.grid().modes() / 4) as f64;
    let mut total = 0.0;
    let mut top = 0.0;
    Zip::from(upsilon.coeffs())
        .and(upsilon.grid().k_squared())
        .for_each(|c, &k2| {
            let e = c.norm_sqr() * (1.0 + k2).powf(s);
            total += e;
            if k2 > edge * edge {
                top += e;
            }
        });
    if !total.is_finite() {
        return Err(Error::RoughInitialDatum {
            s,
            fraction: f64::NAN,
        });
    }
    if total > 0.0 && top / total > ROUGHNESS_LIMIT {
        return Err(Error::RoughInitialDatum {
            s,
            fraction: top / total,
        });
    }
    Ok(())
}

fn step_weights(grid: &TorusGrid, dt: f64, scheme: Scheme) -> Array2<f64> {
    grid.k_squared().mapv(|k2| {
        let lambda = (1.0 + k2) / 2.0;
        match scheme {
            Scheme::ExponentialEuler => -(-lambda * dt).exp_m1() / lambda,
            Scheme::SemiImplicit => dt / (1.0 + lambda * dt),
        }
    })
}

/// Lawson-type mild step for the shifted equation
/// `Y <- e^{A dt} [Y - (alpha/2) dt M(e^{alpha Y}, chi)]`, `A = (Delta - 1)/2`.
///
/// With `alpha Y <= 0` at the grid points and nonnegative `chi`, the bracket keeps
/// the sign of `-alpha`; the spectral semigroup then carries it forward.
#[derive(Clone, Debug)]
pub struct ShiftedStepper {
    alpha: f64,
    dt: f64,
    decay: Array2<f64>,
    stability_limit: f64,
    state: SpectralField,
    steps: usize,
    max_product: f64,
}

impl ShiftedStepper {
    pub fn new(init: SpectralField, alpha: f64, dt: f64, stability_limit: f64) -> Result<Self> {
        let prop = OuPropagator::new(init.grid(), dt)?;
        Ok(Self {
            alpha,
            dt,
            decay: prop.decay().clone(),
            stability_limit,
            state: init,
            steps: 0,
            max_product: 0.0,
        })
    }

    pub fn state(&self) -> &SpectralField {
        &self.state
    }

    pub fn max_stability_product(&self) -> f64 {
        self.max_product
    }

    /// Advances one step with the (already mollified) forcing values `chi` at
    /// the current time.
    pub fn advance(&mut self, chi: &Array2<f64>) -> Result<()> {
        let a = self.alpha;
        let mut values = self.state.to_physical();
        let top = values.iter().fold(f64::NEG_INFINITY, |m, &y| m.max(a * y));
        if !(top <= OVERFLOW_EXPONENT) {
            return Err(Error::Overflow { exponent: top });
        }
        let mut forcing_max = 0.0f64;
        Zip::from(&mut values).and(chi).for_each(|y, &c| {
            let f = (a * *y).exp() * c;
            forcing_max = forcing_max.max(f);
            *y -= 0.5 * a * self.dt * f;
        });
        let product = self.dt * 0.5 * a * a * forcing_max;
        self.max_product = self.max_product.max(product);
        if product > self.stability_limit {
            return Err(Error::StepStability {
                step: self.steps,
                product,
            });
        }
        let grid = self.state.grid().clone();
        self.state = SpectralField::from_physical_unchecked(&grid, &values).apply_multiplier(&self.decay);
        self.steps += 1;
        Ok(())
    }
}

/// Direct stepper for the full and projected equations:
/// `Phi <- e^{A dt} Phi + w(A) N(Phi) + noise`.
#[derive(Clone, Debug)]
pub struct SqeStepper {
    equation: Equation,
    wick: WickExp,
    alpha: f64,
    dt: f64,
    decay: Array2<f64>,
    weight: Array2<f64>,
    stability_limit: f64,
    state: SpectralField,
    steps: usize,
    max_product: f64,
}

impl SqeStepper {
    /// `phi0` is used as given; callers apply `P_N` for the full equation.
    pub fn new(phi0: SpectralField, config: &SqeConfig) -> Result<Self> {
        if config.equation == Equation::Shifted {
            return Err(invalid("equation", "use ShiftedStepper for the shifted equation"));
        }
        let grid = phi0.grid().clone();
        let wick = WickExp::new(config.params, &config.psi, &grid)?
            .with_constant_factor(config.drift_constant_factor);
        let prop = OuPropagator::new(&grid, config.dt)?;
        Ok(Self {
            equation: config.equation,
            wick,
            alpha: config.params.alpha,
            dt: config.dt,
            decay: prop.decay().clone(),
            weight: step_weights(&grid, config.dt, config.scheme),
            stability_limit: config.stability_limit,
            state: phi0,
            steps: 0,
            max_product: 0.0,
        })
    }

    pub fn state(&self) -> &SpectralField {
        &self.state
    }

    pub fn wick(&self) -> &WickExp {
        &self.wick
    }

    pub fn max_stability_product(&self) -> f64 {
        self.max_product
    }

    /// Advances with the exact unprojected OU increment `X_{n+1} - e^{A dt} X_n`.
    pub fn advance(&mut self, increment: &SpectralField) -> Result<()> {
        let grid = self.state.grid().clone();
        let (argument, noise_filter) = match self.equation {
            Equation::Full => (self.state.to_physical(), Some(self.wick.projector())),
            _ => (self.wick.project(&self.state).to_physical(), None),
        };
        let e = self.wick.exp_of_projected(&argument)?;
        let emax = e.iter().fold(0.0f64, |m, &v| m.max(v));
        let product = self.dt * 0.5 * self.alpha * self.alpha * emax;
        self.max_product = self.max_product.max(product);
        if product > self.stability_limit {
            return Err(Error::StepStability {
                step: self.steps,
                product,
            });
        }
        let mut drift = SpectralField::from_physical_unchecked(&grid, &e);
        if self.equation == Equation::Projected {
            drift = self.wick.project(&drift);
        }
        let half_alpha = 0.5 * self.alpha;
        let coeffs = self.state.coeffs_mut();
        Zip::from(coeffs)
            .and(drift.coeffs())
            .and(&self.decay)
            .and(&self.weight)
            .for_each(|phi, &n, &d, &w| *phi = *phi * d - n * (half_alpha * w));
        match noise_filter {
            Some(p) => Zip::from(self.state.coeffs_mut())
                .and(increment.coeffs())
                .and(p)
                .for_each(|phi, &dw, &q| *phi += dw * q),
            None => Zip::from(self.state.coeffs_mut())
                .and(increment.coeffs())
                .for_each(|phi, &dw| *phi += dw),
        }
        self.steps += 1;
        Ok(())
    }
}

/// Exact OU path generated step by step, optionally from a finer time grid.
///
/// With `substeps = s`, each call draws `s` fine increments from
/// `stream.child(fine index)` and combines them, so a run at `dt` and a run at
/// `dt / s` see the same Brownian path. With `s = 1` the states coincide with
/// [`crate::random::ou_path`] for the same stream.
#[derive(Clone, Debug)]
pub struct OuDriver {
    fine: OuPropagator,
    coarse_decay: Array2<f64>,
    substeps: usize,
    stream: RngStream,
    state: SpectralField,
    fine_index: u64,
}

impl OuDriver {
    pub fn new(x0: SpectralField, dt: f64, substeps: usize, stream: RngStream) -> Result<Self> {
        if substeps == 0 {
            return Err(invalid("substeps", "must be >= 1"));
        }
        let fine = OuPropagator::new(x0.grid(), dt / substeps as f64)?;
        let coarse_decay = fine.decay().mapv(|d| d.powi(substeps as i32));
        Ok(Self {
            fine,
            coarse_decay,
            substeps,
            stream,
            state: x0,
            fine_index: 0,
        })
    }

    pub fn state(&self) -> &SpectralField {
        &self.state
    }

    /// Moves to the next coarse time and returns the increment
    /// `X_{n+1} - e^{A dt} X_n`.
    pub fn advance(&mut self) -> SpectralField {
        let grid = self.state.grid().clone();
        let mut incr = SpectralField::zeros(&grid);
        for _ in 0..self.substeps {
            let noise = self.fine.noise(&grid, &self.stream.child(self.fine_index));
            self.fine_index += 1;
            Zip::from(incr.coeffs_mut())
                .and(noise.coeffs())
                .and(self.fine.decay())
                .for_each(|a, &b, &d| *a = *a * d + b);
        }
        Zip::from(self.state.coeffs_mut())
            .and(incr.coeffs())
            .and(&self.coarse_decay)
            .for_each(|x, &b, &d| *x = *x * d + b);
        incr
    }
}

fn increments_from(traj: &OuTrajectory, dt: f64) -> Result<Vec<SpectralField>> {
    let prop = OuPropagator::new(traj.grid(), dt)?;
    Ok(traj
        .states()
        .windows(2)
        .map(|w| {
            let mut inc = w[1].clone();
            Zip::from(inc.coeffs_mut())
                .and(w[0].coeffs())
                .and(prop.decay())
                .for_each(|a, &b, &d| *a -= b * d);
            inc
        })
        .collect())
}

fn check_times(traj: &OuTrajectory, config: &SqeConfig) -> Result<()> {
    let times = config.times()?;
    if traj.len() != times.len()
        || traj
            .times()
            .iter()
            .zip(&times)
            .any(|(a, b)| (a - b).abs() > 1e-9 * config.horizon)
    {
        return Err(invalid(
            "trajectory",
            "trajectory times must match the configured time grid; subsample first",
        ));
    }
    Ok(())
}

struct Recorder {
    stride: usize,
    steps: usize,
    epsilon: f64,
    times: Vec<f64>,
    states: Vec<SpectralField>,
    linear: Vec<SpectralField>,
    remainder: Vec<SpectralField>,
    diagnostics: Diagnostics,
}

impl Recorder {
    fn new(config: &SqeConfig) -> Self {
        Self {
            stride: config.record_stride,
            steps: config.steps(),
            epsilon: config.epsilon,
            times: Vec::new(),
            states: Vec::new(),
            linear: Vec::new(),
            remainder: Vec::new(),
            diagnostics: Diagnostics::default(),
        }
    }

    fn wants(&self, n: usize) -> bool {
        n % self.stride == 0 || n == self.steps
    }

    fn record(&mut self, n: usize, t: f64, state: &SpectralField) {
        if self.wants(n) {
            self.times.push(t);
            self.diagnostics.norms.push(sobolev_norm(state, -self.epsilon));
            self.states.push(state.clone());
        }
    }

    fn record_split(&mut self, n: usize, state: &SpectralField, linear: SpectralField, rem: &SpectralField) {
        let gap = {
            let mut d = state - &linear;
            Zip::from(d.coeffs_mut())
                .and(rem.coeffs())
                .for_each(|a, &b| *a -= b);
            sobolev_norm(&d, -self.epsilon)
        };
        let sup = self.diagnostics.residual_sup.get_or_insert(0.0);
        *sup = sup.max(gap);
        if self.wants(n) {
            self.diagnostics.residuals.push(gap);
            self.linear.push(linear);
            self.remainder.push(rem.clone());
        }
    }

    fn finish(mut self, max_product: f64, split: bool) -> SolutionPath {
        self.diagnostics.max_stability_product = max_product;
        SolutionPath {
            times: self.times,
            states: self.states,
            decomposition: split.then_some(Decomposition {
                linear: self.linear,
                remainder: self.remainder,
            }),
            diagnostics: self.diagnostics,
        }
    }
}

/// Mild solution of the shifted equation
/// `dY = (Delta - 1)/2 Y dt - (alpha/2) M(e^{alpha Y}, chi) dt`, `Y_0 = upsilon`,
/// where `chi_path[n]` is the forcing at `t_n`; `chi_path` must cover every
/// time of the configured grid.
pub fn solve_shifted(
    upsilon: &SpectralField,
    chi_path: &[SpectralField],
    config: &SqeConfig,
) -> Result<SolutionPath> {
    config.validate()?;
    let steps = config.steps();
    if chi_path.len() != steps + 1 {
        return Err(invalid(
            "chi_path",
            format!("{} fields for {} time points", chi_path.len(), steps + 1),
        ));
    }
    check_smooth_datum(upsilon, config.params.beta)?;
    let mut stepper = ShiftedStepper::new(
        upsilon.clone(),
        config.params.alpha,
        config.dt,
        config.stability_limit,
    )?;
    let mut rec = Recorder::new(config);
    rec.record(0, 0.0, stepper.state());
    for (n, chi) in chi_path.iter().take(steps).enumerate() {
        upsilon.grid().check_same(chi.grid())?;
        check_nonnegative(&chi.to_physical())?;
        let values = mollified_values(chi, config.mollifier_scale)?;
        stepper.advance(&values)?;
        rec.record(n + 1, (n + 1) as f64 * config.dt, stepper.state());
    }
    Ok(rec.finish(stepper.max_stability_product(), false))
}

/// Source of the exact OU increments for the direct solvers.
enum Noise<'a> {
    Driver(OuDriver),
    Stored {
        traj: &'a OuTrajectory,
        increments: Vec<SpectralField>,
        index: usize,
    },
}

impl Noise<'_> {
    /// Returns `(X_n, increment)` and moves to `n + 1`.
    fn advance(&mut self) -> (SpectralField, SpectralField) {
        match self {
            Noise::Driver(d) => {
                let x = d.state().clone();
                let inc = d.advance();
                (x, inc)
            }
            Noise::Stored {
                traj,
                increments,
                index,
            } => {
                let out = (traj.states()[*index].clone(), increments[*index].clone());
                *index += 1;
                (out.0, out.1)
            }
        }
    }

    fn current(&self) -> SpectralField {
        match self {
            Noise::Driver(d) => d.state().clone(),
            Noise::Stored { traj, index, .. } => traj.states()[*index].clone(),
        }
    }
}

fn run_full(phi0: &SpectralField, config: &SqeConfig, mut noise: Noise<'_>) -> Result<SolutionPath> {
    let wick = WickExp::new(config.params, &config.psi, phi0.grid())?
        .with_constant_factor(config.drift_constant_factor);
    let mut direct = SqeStepper::new(wick.project(phi0), config)?;
    let mut shifted = ShiftedStepper::new(
        SpectralField::zeros(phi0.grid()),
        config.params.alpha,
        config.dt,
        config.stability_limit,
    )?;
    let mut rec = Recorder::new(config);
    rec.record(0, 0.0, direct.state());
    rec.record_split(0, direct.state(), wick.project(phi0), shifted.state());
    for n in 0..config.steps() {
        let (x, inc) = noise.advance();
        direct.advance(&inc)?;
        shifted.advance(&wick.physical(&x)?)?;
        let t = (n + 1) as f64 * config.dt;
        rec.record(n + 1, t, direct.state());
        rec.record_split(n + 1, direct.state(), wick.project(&noise.current()), shifted.state());
    }
    let product = direct.max_stability_product().max(shifted.max_stability_product());
    Ok(rec.finish(product, true))
}

/// Full cutoff equation
/// `dPhi = (Delta - 1)/2 Phi dt - (alpha/2) exp(alpha Phi - alpha^2 C_N / 2) dt + P_N dW`,
/// `Phi_0 = P_N phi0`, driven by the OU path `X` with `X_0 = phi0` drawn from `stream`.
///
/// `states` holds the direct exponential-Euler (or semi-implicit) integration
/// with exact OU noise. The decomposition holds `P_N X` and the remainder `Y`
/// from [`solve_shifted`] driven by `exp_N(alpha X)`, whose step uses the
/// left-point rule `dt e^{A dt}` for the mild integral instead of `phi_1(A dt)`.
/// Both are first-order consistent, so their gap is a measured `O(dt)` error.
pub fn solve_sqe_full(phi0: &SpectralField, config: &SqeConfig, stream: &RngStream) -> Result<SolutionPath> {
    solve_sqe_full_substeps(phi0, config, stream, 1)
}

/// [`solve_sqe_full`] with the noise drawn on a grid `substeps` times finer
/// than `config.dt`, so runs at `dt` and `dt / 2` can share one Brownian path.
pub fn solve_sqe_full_substeps(
    phi0: &SpectralField,
    config: &SqeConfig,
    stream: &RngStream,
    substeps: usize,
) -> Result<SolutionPath> {
    check_equation(config, Equation::Full)?;
    let driver = OuDriver::new(phi0.clone(), config.dt, substeps, *stream)?;
    run_full(phi0, config, Noise::Driver(driver))
}

/// [`solve_sqe_full`] driven by a stored OU trajectory whose first state is
/// the initial datum and whose times equal the configured grid.
pub fn solve_sqe_full_on(traj: &OuTrajectory, config: &SqeConfig) -> Result<SolutionPath> {
    check_equation(config, Equation::Full)?;
    check_times(traj, config)?;
    let increments = increments_from(traj, config.dt)?;
    run_full(
        &traj.states()[0],
        config,
        Noise::Stored {
            traj,
            increments,
            index: 0,
        },
    )
}

fn check_equation(config: &SqeConfig, want: Equation) -> Result<()> {
    config.validate()?;
    if config.equation != want {
        return Err(invalid(
            "equation",
            format!("config is for {:?}, solver needs {want:?}", config.equation),
        ));
    }
    Ok(())
}

fn run_projected(phi0: &SpectralField, config: &SqeConfig, mut noise: Noise<'_>) -> Result<SolutionPath> {
    let mut stepper = SqeStepper::new(phi0.clone(), config)?;
    let mut rec = Recorder::new(config);
    rec.record(0, 0.0, stepper.state());
    for n in 0..config.steps() {
        let (_, inc) = noise.advance();
        stepper.advance(&inc)?;
        rec.record(n + 1, (n + 1) as f64 * config.dt, stepper.state());
    }
    Ok(rec.finish(stepper.max_stability_product(), false))
}

/// Projected equation
/// `dPhi = (Delta - 1)/2 Phi dt - (alpha/2) P_N exp(alpha P_N Phi - alpha^2 C_N / 2) dt + dW`,
/// `Phi_0 = phi0`, with the exact OU increments drawn from `stream`.
pub fn solve_sqe_projected(
    phi0: &SpectralField,
    config: &SqeConfig,
    stream: &RngStream,
) -> Result<SolutionPath> {
    check_equation(config, Equation::Projected)?;
    let driver = OuDriver::new(phi0.clone(), config.dt, 1, *stream)?;
    run_projected(phi0, config, Noise::Driver(driver))
}

/// [`solve_sqe_projected`] with increments taken from a stored OU trajectory.
/// Only the increments are used; the trajectory's own initial state is ignored.
pub fn solve_sqe_projected_on(
    phi0: &SpectralField,
    traj: &OuTrajectory,
    config: &SqeConfig,
) -> Result<SolutionPath> {
    check_equation(config, Equation::Projected)?;
    check_times(traj, config)?;
    let increments = increments_from(traj, config.dt)?;
    run_projected(
        phi0,
        config,
        Noise::Stored {
            traj,
            increments,
            index: 0,
        },
    )
}

/// Result of [`contraction_check`].
#[derive(Clone, Debug, serde::Serialize)]
pub struct ContractionReport {
    pub times: Vec<f64>,
    /// `||Y^1_t - Y^2_t||_{L^2}`.
    pub gaps: Vec<f64>,
    /// `e^{t/2} ||Y^1_t - Y^2_t||_{L^2}`.
    pub scaled: Vec<f64>,
    /// Largest relative increase of `scaled` per unit time between recorded times.
    pub max_growth_rate: f64,
    /// `max_t scaled_t / scaled_0`.
    pub worst_ratio: f64,
}

impl ContractionReport {
    /// `e^{t/2} ||Z_t||` nonincreasing within `tolerance` per unit time.
    pub fn is_contracting(&self, tolerance: f64) -> bool {
        self.max_growth_rate <= tolerance
    }
}

/// Runs [`solve_shifted`] from two data with one forcing path and reports the
/// `L^2` gap, which the energy identity forces to decay like `e^{-t/2}`.
pub fn contraction_check(
    upsilon1: &SpectralField,
    upsilon2: &SpectralField,
    chi_path: &[SpectralField],
    config: &SqeConfig,
) -> Result<ContractionReport> {
    let a = solve_shifted(upsilon1, chi_path, config)?;
    let b = solve_shifted(upsilon2, chi_path, config)?;
    let gaps: Vec<f64> = a
        .states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| sobolev_norm(&(x - y), 0.0))
        .collect();
    let scaled: Vec<f64> = gaps
        .iter()
        .zip(&a.times)
        .map(|(g, t)| g * (t / 2.0).exp())
        .collect();
    let mut max_growth_rate = 0.0f64;
    for (w, t) in scaled.windows(2).zip(a.times.windows(2)) {
        if w[0] > 0.0 {
            max_growth_rate = max_growth_rate.max((w[1] / w[0] - 1.0) / (t[1] - t[0]));
        } else if w[1] > 0.0 {
            max_growth_rate = f64::INFINITY;
        }
    }
    let worst_ratio = if scaled[0] > 0.0 {
        scaled.iter().fold(0.0f64, |m, &s| m.max(s / scaled[0]))
    } else if scaled.iter().all(|&s| s == 0.0) {
        1.0
    } else {
        f64::INFINITY
    };
    Ok(ContractionReport {
        times: a.times,
        gaps,
        scaled,
        max_growth_rate,
        worst_ratio,
    })
}

/// Constant-in-space forcing helper used by tests and experiments.
pub fn constant_path(grid: &TorusGrid, value: f64, len: usize) -> Vec<SpectralField> {
    vec![SpectralField::constant(grid, value); len]
}
