use ndarray::{Array2, Zip};
use serde::Serialize;

use super::gaussian::hermitian_gaussian;
use super::RngStream;
use crate::error::{invalid, Error, Result};
use crate::spectral::{SpectralField, TorusGrid};

/// Exact one-step law of `dX = (Delta - 1)/2 X dt + dW` on a fixed step.
#[derive(Clone, Debug)]
pub struct OuPropagator {
    dt: f64,
    decay: Array2<f64>,
    noise_variance: Array2<f64>,
}

impl OuPropagator {
    pub fn new(grid: &TorusGrid, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", format!("{dt} must be positive")));
        }
        let decay = grid.k_squared().mapv(|k2| (-(1.0 + k2) * dt / 2.0).exp());
        // (1 - e^{-(1+|k|^2) dt}) / (1 + |k|^2) without cancellation at small dt
        let noise_variance = grid
            .k_squared()
            .mapv(|k2| -(-(1.0 + k2) * dt).exp_m1() / (1.0 + k2));
        Ok(Self {
            dt,
            decay,
            noise_variance,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `exp(-(1 + |k|^2) dt / 2)` per mode.
    pub fn decay(&self) -> &Array2<f64> {
        &self.decay
    }

    /// `E|noise(k)|^2` per mode.
    pub fn noise_variance(&self) -> &Array2<f64> {
        &self.noise_variance
    }

    /// Noise term of one step drawn from `stream`.
    pub fn noise(&self, grid: &TorusGrid, stream: &RngStream) -> SpectralField {
        hermitian_gaussian(grid, &self.noise_variance, &mut stream.rng())
    }

    /// Deterministic part of the step plus `noise_scale` times the noise.
    pub fn step(&self, state: &SpectralField, noise_scale: f64, stream: &RngStream) -> SpectralField {
        let mut next = state.apply_multiplier(&self.decay);
        if noise_scale != 0.0 {
            let noise = self.noise(state.grid(), stream);
            Zip::from(next.coeffs_mut())
                .and(noise.coeffs())
                .for_each(|a, &b| *a += b * noise_scale);
        }
        next
    }
}

/// Exact OU transition over `dt`.
pub fn ou_transition(state: &SpectralField, dt: f64, stream: &RngStream) -> Result<SpectralField> {
    ou_transition_scaled(state, dt, 1.0, stream)
}

/// [`ou_transition`] with the noise multiplied by `noise_scale`; `0` gives the
/// pure decay `exp(-(1 + |k|^2) dt / 2)`.
pub fn ou_transition_scaled(
    state: &SpectralField,
    dt: f64,
    noise_scale: f64,
    stream: &RngStream,
) -> Result<SpectralField> {
    Ok(OuPropagator::new(state.grid(), dt)?.step(state, noise_scale, stream))
}

/// Time-indexed OU states with the stream that drove them.
/// Step `j` (from `times[j]` to `times[j+1]`) uses `stream.child(j)`.
#[derive(Clone, Debug)]
pub struct OuTrajectory {
    times: Vec<f64>,
    states: Vec<SpectralField>,
    stream: RngStream,
}

#[derive(Clone, Debug, Serialize)]
pub struct StreamLayout {
    pub stream: RngStream,
    pub steps: usize,
    pub rule: &'static str,
}

impl OuTrajectory {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[SpectralField] {
        &self.states
    }

    pub fn stream(&self) -> &RngStream {
        &self.stream
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn grid(&self) -> &TorusGrid {
        self.states[0].grid()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }

    /// Every `stride`-th state. An exact OU path stays exact under subsampling,
    /// which is how coarser time steps share the noise of a finer one.
    pub fn subsample(&self, stride: usize) -> Result<Self> {
        if stride == 0 || (self.times.len() - 1) % stride != 0 {
            return Err(invalid(
                "stride",
                format!("{stride} does not divide {} steps", self.times.len() - 1),
            ));
        }
        Ok(Self {
            times: self.times.iter().step_by(stride).copied().collect(),
            states: self.states.iter().step_by(stride).cloned().collect(),
            stream: self.stream,
        })
    }

    pub fn layout(&self) -> StreamLayout {
        StreamLayout {
            stream: self.stream,
            steps: self.times.len() - 1,
            rule: "step j draws from stream.child(j)",
        }
    }
}

/// Uniform time grid `0, dt, ..., T` with `round(T/dt)` steps.
pub fn uniform_times(horizon: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && horizon > 0.0 && dt <= horizon) {
        return Err(invalid("dt", format!("need 0 < dt={dt} <= T={horizon}")));
    }
    let steps = (horizon / dt).round() as usize;
    if ((steps as f64) * dt - horizon).abs() > 1e-9 * horizon {
        return Err(invalid("dt", format!("T={horizon} is not a multiple of dt={dt}")));
    }
    Ok((0..=steps).map(|j| j as f64 * dt).collect())
}

/// Chains exact transitions along `times`.
pub fn ou_path(init: &SpectralField, times: &[f64], stream: &RngStream) -> Result<OuTrajectory> {
    if times.first() != Some(&0.0) || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidTimes);
    }
    let grid = init.grid();
    let mut states = Vec::with_capacity(times.len());
    states.push(init.clone());
    let mut prop: Option<OuPropagator> = None;
    for (j, w) in times.windows(2).enumerate() {
        let dt = w[1] - w[0];
        if prop.as_ref().is_none_or(|p| (p.dt - dt).abs() > 1e-15 * dt) {
            prop = Some(OuPropagator::new(grid, dt)?);
        }
        let next = prop
            .as_ref()
            .expect("set above")
            .step(&states[j], 1.0, &stream.child(j as u64));
        states.push(next);
    }
    Ok(OuTrajectory {
        times: times.to_vec(),
        states,
        stream: *stream,
    })
}
