use ndarray::{Array2, Zip};
use rayon::prelude::*;
use serde::Serialize;

use super::stats::{ols_intercept, Estimate};
use crate::dynamics::{Equation, OuDriver, SqeConfig, SqeStepper};
use crate::error::{invalid, Error, Result};
use crate::random::RngStream;
use crate::spectral::{heat_semigroup, SpectralField, TorusGrid};
use crate::wick::{grid_mean, CutoffProfile, WickExp, WickParams};

/// The fixed observables compared at `t = 0` and `t = T`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Observable {
    /// `||phi||_{H^{-epsilon}}`.
    NegativeNorm,
    /// `||phi||^2_{H^{-epsilon}}`.
    NegativeNormSquared,
    /// Real part of the zero mode `phi(0)`.
    ZeroMode,
    ZeroModeSquared,
    /// Spatial mean of `exp_N(alpha phi)`.
    WickMean,
}

impl Observable {
    pub const ALL: [Observable; 5] = [
        Observable::NegativeNorm,
        Observable::NegativeNormSquared,
        Observable::ZeroMode,
        Observable::ZeroModeSquared,
        Observable::WickMean,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Observable::NegativeNorm => "h_neg_norm",
            Observable::NegativeNormSquared => "h_neg_norm_sq",
            Observable::ZeroMode => "zero_mode",
            Observable::ZeroModeSquared => "zero_mode_sq",
            Observable::WickMean => "wick_mean",
        }
    }
}

/// Evaluator for [`Observable::ALL`]. The Wick mean always uses the correct
/// `C_N`, whatever constant the dynamics runs with.
#[derive(Clone, Debug)]
pub struct ObservableSet {
    epsilon: f64,
    wick: WickExp,
}

impl ObservableSet {
    pub fn new(params: &WickParams, psi: &CutoffProfile, grid: &TorusGrid, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(invalid("epsilon", "must be > 0"));
        }
        Ok(Self {
            epsilon,
            wick: WickExp::new(*params, psi, grid)?,
        })
    }

    fn neg_weight(&self, k2: f64) -> f64 {
        (1.0 + k2).powf(-self.epsilon)
    }

    pub fn evaluate(&self, field: &SpectralField) -> Result<[f64; 5]> {
        let sq = field.weighted_energy(|k2| self.neg_weight(k2));
        let a = field.coeffs()[[0, 0]].re;
        let mean = grid_mean(&self.wick.physical(field)?);
        Ok([sq.sqrt(), sq, a, a * a, mean])
    }
}

/// Statistics for one observable.
#[derive(Clone, Debug, Serialize)]
pub struct ObservableResult {
    pub observable: Observable,
    pub initial: Estimate,
    pub terminal: Estimate,
    /// Plain paired differences `f(Phi_T) - f(Phi_0)`.
    pub paired: Estimate,
    pub paired_z: f64,
    /// Paired difference with the linear-flow control variates removed.
    pub adjusted: Estimate,
    pub z: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct InvarianceReport {
    pub replicas: usize,
    pub horizon: f64,
    pub drift_constant_factor: f64,
    pub control_variates: usize,
    pub results: Vec<ObservableResult>,
    /// `max |z|` over the control-variate adjusted scores.
    pub max_abs_z: f64,
}

impl InvarianceReport {
    pub fn passes(&self, threshold: f64) -> bool {
        self.max_abs_z <= threshold
    }
}

/// Conditional moments of the linear flow `Y_T = e^{AT} phi0 + Z_T` given `phi0`.
struct LinearMoments {
    horizon: f64,
    /// `(1 - e^{-(1+k^2)T}) / (1 + k^2)`, the variance of each mode of `Z_T`.
    variance: Array2<f64>,
    /// `sum (1+k^2)^{-epsilon} v_k`.
    weighted_trace: f64,
    /// `alpha^2 / 2` times the variance of `P_N Z_T(x)`.
    wick_boost: f64,
}

impl LinearMoments {
    fn new(obs: &ObservableSet, grid: &TorusGrid, horizon: f64) -> Self {
        let variance = grid.k_squared().mapv(|k2| -(-(1.0 + k2) * horizon).exp_m1() / (1.0 + k2));
        let weighted_trace = Zip::from(&variance)
            .and(grid.k_squared())
            .fold(0.0, |acc, &v, &k2| acc + obs.neg_weight(k2) * v);
        let projected_var = Zip::from(&variance)
            .and(obs.wick.projector())
            .fold(0.0, |acc, &v, &p| acc + p * p * v)
            / (4.0 * std::f64::consts::PI.powi(2));
        let alpha = obs.wick.params().alpha;
        Self {
            horizon,
            variance,
            weighted_trace,
            wick_boost: 0.5 * alpha * alpha * projected_var,
        }
    }

    /// Centred control variates for observables 2..5 from the linear endpoint.
    fn control_variates(&self, obs: &ObservableSet, phi0: &SpectralField, y: &SpectralField) -> Result<[f64; 4]> {
        let m = heat_semigroup(phi0, self.horizon)?;
        let fy = obs.evaluate(y)?;
        let m_sq = m.weighted_energy(|k2| obs.neg_weight(k2));
        let m0 = m.coeffs()[[0, 0]].re;
        let v0 = self.variance[[0, 0]];
        let boost = self.wick_boost.exp();
        let e_wick = grid_mean(&obs.wick.physical(&m)?) * boost;
        Ok([
            fy[1] - (m_sq + self.weighted_trace),
            fy[2] - m0,
            fy[3] - (m0 * m0 + v0),
            fy[4] - e_wick,
        ])
    }
}

struct ReplicaOutcome {
    initial: [f64; 5],
    terminal: [f64; 5],
    cv: [f64; 4],
}

fn run_replica(
    phi0: &SpectralField,
    config: &SqeConfig,
    obs: &ObservableSet,
    moments: &LinearMoments,
    stream: RngStream,
) -> Result<ReplicaOutcome> {
    let mut stepper = SqeStepper::new(phi0.clone(), config)?;
    let mut linear = OuDriver::new(phi0.clone(), config.dt, 1, stream)?;
    for _ in 0..config.steps() {
        let inc = linear.advance();
        stepper.advance(&inc)?;
    }
    Ok(ReplicaOutcome {
        initial: obs.evaluate(phi0)?,
        terminal: obs.evaluate(stepper.state())?,
        cv: moments.control_variates(obs, phi0, linear.state())?,
    })
}

/// Runs the projected dynamics from each initial field (replica `i` driven by
/// `stream.for_replica(i)`) and compares the observables at `0` and `T`.
///
/// The score for each observable is the paired mean difference after
/// regressing on control variates built from the `alpha = 0` flow with the
/// same noise, whose conditional means given `Phi_0` are known in closed form.
/// Under invariance every adjusted mean is zero.
pub fn invariance_test(
    initial: &[SpectralField],
    config: &SqeConfig,
    observables: &ObservableSet,
    stream: &RngStream,
) -> Result<InvarianceReport> {
    if config.equation != Equation::Projected {
        return Err(invalid("equation", "invariance is tested on the projected equation"));
    }
    config.validate()?;
    let first = initial.first().ok_or(Error::EmptyEnsemble)?;
    let moments = LinearMoments::new(observables, first.grid(), config.horizon);
    let outcomes: Vec<ReplicaOutcome> = initial
        .par_iter()
        .enumerate()
        .map(|(i, phi0)| run_replica(phi0, config, observables, &moments, stream.for_replica(i as u64)))
        .collect::<Result<_>>()?;

    let column = |f: &dyn Fn(&ReplicaOutcome) -> f64| outcomes.iter().map(f).collect::<Vec<f64>>();
    let regressors: Vec<Vec<f64>> = (0..4)
        .map(|j| column(&|o| o.cv[j]))
        .filter(|c| {
            let mean = c.iter().sum::<f64>() / c.len() as f64;
            c.iter().any(|x| (x - mean).abs() > 1e-300)
        })
        .collect();

    let mut results = Vec::with_capacity(5);
    for (j, observable) in Observable::ALL.into_iter().enumerate() {
        let a = column(&|o| o.initial[j]);
        let b = column(&|o| o.terminal[j]);
        let d = column(&|o| o.terminal[j] - o.initial[j]);
        let paired = Estimate::from_samples(&d);
        let adjusted = ols_intercept(&d, &regressors);
        results.push(ObservableResult {
            observable,
            initial: Estimate::from_samples(&a),
            terminal: Estimate::from_samples(&b),
            paired_z: paired.z_against(0.0),
            paired,
            z: adjusted.z_against(0.0),
            adjusted,
        });
    }
    let max_abs_z = results.iter().fold(0.0f64, |m, r| m.max(r.z.abs()));
    Ok(InvarianceReport {
        replicas: initial.len(),
        horizon: config.horizon,
        drift_constant_factor: config.drift_constant_factor,
        control_variates: regressors.len(),
        results,
        max_abs_z,
    })
}
