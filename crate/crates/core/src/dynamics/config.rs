use serde::Serialize;

use crate::error::{invalid, Result};
use crate::random::uniform_times;
use crate::wick::{CutoffProfile, WickParams};

/// Weight given to the frozen nonlinearity over one step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// `phi_1(A dt) = (1 - e^{-lambda dt}) / lambda` per mode.
    #[default]
    ExponentialEuler,
    /// `dt / (1 + lambda dt)` per mode.
    SemiImplicit,
}

impl std::str::FromStr for Scheme {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exponential-euler" | "exp-euler" | "etd1" => Ok(Scheme::ExponentialEuler),
            "semi-implicit" | "semiimplicit" => Ok(Scheme::SemiImplicit),
            other => Err(invalid("sqe.scheme", format!("unknown scheme {other:?}"))),
        }
    }
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::ExponentialEuler => "exponential-euler",
            Scheme::SemiImplicit => "semi-implicit",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Equation {
    /// Projected noise and datum, unprojected exponential.
    Full,
    /// Unprojected noise and datum, `P_N` on both sides of the exponential.
    Projected,
    /// Deterministic remainder driven by a given nonnegative path.
    Shifted,
}

/// Bound on `dt * 4^N` accepted by [`SqeConfig::validate`].
pub const STEP_LEVEL_BOUND: f64 = 16.0;

/// Default bound on `dt * (alpha^2 / 2) * max(nonlinearity)` checked every step.
pub const DEFAULT_STABILITY_LIMIT: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SqeConfig {
    pub horizon: f64,
    pub dt: f64,
    pub scheme: Scheme,
    pub equation: Equation,
    pub params: WickParams,
    pub psi: CutoffProfile,
    /// Heat-mollification time for the nonnegative product; 0 is the raw grid product.
    pub mollifier_scale: f64,
    /// Diagnostics are reported in `H^{-epsilon}`.
    pub epsilon: f64,
    pub stability_limit: f64,
    /// Keep every `record_stride`-th state in the returned path.
    pub record_stride: usize,
    /// Multiplies `C_N` in the drift. Anything but 1 deliberately breaks the
    /// renormalization; it exists for negative controls.
    pub drift_constant_factor: f64,
}

impl SqeConfig {
    pub fn new(horizon: f64, dt: f64, equation: Equation, params: WickParams, psi: CutoffProfile) -> Self {
        Self {
            horizon,
            dt,
            scheme: Scheme::default(),
            equation,
            params,
            psi,
            mollifier_scale: 0.0,
            epsilon: 0.25,
            stability_limit: DEFAULT_STABILITY_LIMIT,
            record_stride: 1,
            drift_constant_factor: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        uniform_times(self.horizon, self.dt)?;
        let level_product = self.dt * f64::powi(4.0, self.params.level as i32);
        if level_product > STEP_LEVEL_BOUND {
            return Err(invalid(
                "dt",
                format!("dt * 4^N = {level_product} above {STEP_LEVEL_BOUND}"),
            ));
        }
        if !(self.mollifier_scale >= 0.0) {
            return Err(invalid("mollifier_scale", "must be >= 0"));
        }
        if !(self.epsilon > 0.0) {
            return Err(invalid("epsilon", "must be > 0"));
        }
        if !(self.stability_limit > 0.0) {
            return Err(invalid("stability_limit", "must be > 0"));
        }
        if self.record_stride == 0 {
            return Err(invalid("record_stride", "must be >= 1"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn times(&self) -> Result<Vec<f64>> {
        uniform_times(self.horizon, self.dt)
    }

    pub fn with_dt(self, dt: f64) -> Self {
        Self { dt, ..self }
    }
}
