use std::f64::consts::PI;

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::stats::Estimate;
use crate::error::{Error, Result};
use crate::random::{gff_sample, RngStream};
use crate::spectral::{SpectralField, TorusGrid};
use crate::wick::{CutoffProfile, WickExp, WickParams};

/// Resampling refuses ensembles whose effective sample size is below this.
pub const MIN_ESS: f64 = 50.0;

/// `log(dmu_N/dmu_0)` up to the normalization: `-int exp_N(alpha phi) dx`.
///
/// Returns `-inf` when the exponent overflows, which is the limit of the weight.
pub fn log_rn_weight(wick: &WickExp, field: &SpectralField) -> f64 {
    match wick.physical(field) {
        Ok(v) => -field.grid().integrate(&v),
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Unnormalized density `exp(-int exp_N(alpha phi) dx)`, always in `[0, 1]`.
pub fn rn_weight(field: &SpectralField, params: &WickParams, psi: &CutoffProfile) -> Result<f64> {
    let wick = WickExp::new(*params, psi, field.grid())?;
    Ok(log_rn_weight(&wick, field).exp())
}

/// Sampling distribution for the importance ensemble.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Proposal {
    /// Plain draws from `mu_0`.
    #[default]
    FreeField,
    /// `mu_0` on the nonzero modes; the zero mode `a` is drawn from
    /// `q(a) ~ exp(-a^2/2 - kappa e^{s a})`, the exact weight of a constant
    /// shift averaged over the other modes. This removes most weight
    /// degeneracy, which otherwise comes from the zero mode.
    ZeroModeTilted,
}

/// Tabulated zero-mode proposal. The density is piecewise constant on the
/// table cells, so the importance ratio is exact at any table resolution.
#[derive(Clone, Debug)]
struct ZeroModeTilt {
    lo: f64,
    h: f64,
    cdf: Vec<f64>,
}

impl ZeroModeTilt {
    const HALF_WIDTH: f64 = 16.0;
    const CELLS: usize = 16_000;

    fn new(params: &WickParams, psi: &CutoffProfile) -> Self {
        let psi0 = psi.eval(0.0);
        let s = params.alpha * psi0 / (2.0 * PI);
        // E[int exp_N | zero mode a] = 4 pi^2 e^{s a} e^{-alpha^2 psi(0)^2 / (8 pi^2)}
        let kappa = 4.0 * PI * PI * (-params.alpha.powi(2) * psi0 * psi0 / (8.0 * PI * PI)).exp();
        let lo = -Self::HALF_WIDTH;
        let h = 2.0 * Self::HALF_WIDTH / Self::CELLS as f64;
        let g = |a: f64| (-a * a / 2.0 - kappa * (s * a).exp()).exp();
        let mut cdf = Vec::with_capacity(Self::CELLS + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        for i in 0..Self::CELLS {
            let a = lo + i as f64 * h;
            acc += 0.5 * h * (g(a) + g(a + h));
            cdf.push(acc);
        }
        for c in &mut cdf {
            *c /= acc;
        }
        Self { lo, h, cdf }
    }

    /// Draw `a` and return it with `log(phi_{0,1}(a) / q(a))`.
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let u: f64 = rng.random();
        let cell = self.cdf.partition_point(|&c| c <= u).clamp(1, self.cdf.len() - 1) - 1;
        let mass = self.cdf[cell + 1] - self.cdf[cell];
        let frac = if mass > 0.0 { (u - self.cdf[cell]) / mass } else { 0.5 };
        let a = self.lo + (cell as f64 + frac) * self.h;
        let log_q = (mass / self.h).ln();
        let log_p = -a * a / 2.0 - 0.5 * (2.0 * PI).ln();
        (a, log_p - log_q)
    }
}

#[derive(Clone, Debug)]
enum Storage {
    Stored(Vec<SpectralField>),
    /// Samples are regenerated from `stream.for_replica(i)` on demand.
    Regenerate {
        grid: TorusGrid,
        stream: RngStream,
        tilt: Option<ZeroModeTilt>,
    },
}

/// Samples carrying importance weights for `mu_N` relative to their proposal.
#[derive(Clone, Debug)]
pub struct WeightedEnsemble {
    storage: Storage,
    proposal: Proposal,
    log_rn: Vec<f64>,
    log_ratio: Vec<f64>,
    log_weights: Vec<f64>,
    weights: Vec<f64>,
    overflowed: usize,
}

fn draw_one(grid: &TorusGrid, stream: &RngStream, tilt: Option<&ZeroModeTilt>) -> (SpectralField, f64) {
    let mut field = gff_sample(grid, stream);
    match tilt {
        None => (field, 0.0),
        Some(t) => {
            let (a, log_ratio) = t.draw(&mut stream.child(0).rng());
            field.coeffs_mut()[[0, 0]] = Complex64::new(a, 0.0);
            (field, log_ratio)
        }
    }
}

impl WeightedEnsemble {
    /// Draws `count` samples from `proposal`, replica `i` from `stream.for_replica(i)`.
    /// Fields are not kept; [`WeightedEnsemble::sample`] regenerates them.
    pub fn draw(
        grid: &TorusGrid,
        params: &WickParams,
        psi: &CutoffProfile,
        count: usize,
        proposal: Proposal,
        stream: &RngStream,
    ) -> Result<Self> {
        if count == 0 {
            return Err(Error::EmptyEnsemble);
        }
        let wick = WickExp::new(*params, psi, grid)?;
        let tilt = (proposal == Proposal::ZeroModeTilted).then(|| ZeroModeTilt::new(params, psi));
        let pairs: Vec<(f64, f64)> = (0..count as u64)
            .into_par_iter()
            .map(|i| {
                let (f, ratio) = draw_one(grid, &stream.for_replica(i), tilt.as_ref());
                (log_rn_weight(&wick, &f), ratio)
            })
            .collect();
        let (log_rn, log_ratio) = pairs.into_iter().unzip();
        Ok(Self::assemble(
            Storage::Regenerate {
                grid: grid.clone(),
                stream: *stream,
                tilt,
            },
            proposal,
            log_rn,
            log_ratio,
        ))
    }

    /// Weights given fields, taken to be draws from `mu_0`.
    pub fn from_fields(fields: Vec<SpectralField>, params: &WickParams, psi: &CutoffProfile) -> Result<Self> {
        let first = fields.first().ok_or(Error::EmptyEnsemble)?;
        let wick = WickExp::new(*params, psi, first.grid())?;
        for f in &fields {
            first.grid().check_same(f.grid())?;
        }
        let log_rn: Vec<f64> = fields.par_iter().map(|f| log_rn_weight(&wick, f)).collect();
        let log_ratio = vec![0.0; fields.len()];
        Ok(Self::assemble(Storage::Stored(fields), Proposal::FreeField, log_rn, log_ratio))
    }

    fn assemble(storage: Storage, proposal: Proposal, log_rn: Vec<f64>, log_ratio: Vec<f64>) -> Self {
        let log_weights: Vec<f64> = log_rn.iter().zip(&log_ratio).map(|(a, b)| a + b).collect();
        let weights = normalize_log_weights(&log_weights);
        let overflowed = log_rn.iter().filter(|x| **x == f64::NEG_INFINITY).count();
        Self {
            storage,
            proposal,
            log_rn,
            log_ratio,
            log_weights,
            weights,
            overflowed,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn proposal(&self) -> Proposal {
        self.proposal
    }

    pub fn sample(&self, i: usize) -> SpectralField {
        match &self.storage {
            Storage::Stored(v) => v[i].clone(),
            Storage::Regenerate { grid, stream, tilt } => {
                draw_one(grid, &stream.for_replica(i as u64), tilt.as_ref()).0
            }
        }
    }

    /// Log importance weights `log(dmu_N/dq)` up to one additive constant.
    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Weights rescaled so the largest is 1; all lie in `[0, 1]`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Samples whose Wick exponent overflowed; their weight is 0.
    pub fn overflowed(&self) -> usize {
        self.overflowed
    }

    /// `(sum w)^2 / sum w^2`.
    pub fn ess(&self) -> f64 {
        ess(&self.weights)
    }

    /// Self-normalized estimate of `E_{mu_N} f`, with `f` evaluated on each sample.
    pub fn weighted_mean(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.len());
        let total: f64 = self.weights.iter().sum();
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum::<f64>() / total
    }

    /// Evaluates `f` on every sample in order, in parallel.
    pub fn evaluate<F>(&self, f: F) -> Vec<f64>
    where
        F: Fn(&SpectralField) -> f64 + Sync,
    {
        (0..self.len()).into_par_iter().map(|i| f(&self.sample(i))).collect()
    }

    /// Unbiased estimate of `Z_N = E_{mu_0} exp(-int exp_N)`.
    pub fn estimate_partition(&self) -> Estimate {
        let xs: Vec<f64> = self
            .log_rn
            .iter()
            .zip(&self.log_ratio)
            .map(|(a, b)| (a + b).exp())
            .collect();
        Estimate::from_samples(&xs)
    }
}

/// `exp(l - max l)`; all zero only if every entry is `-inf`.
pub fn normalize_log_weights(log_weights: &[f64]) -> Vec<f64> {
    let top = log_weights.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    if top == f64::NEG_INFINITY {
        return vec![0.0; log_weights.len()];
    }
    log_weights.iter().map(|x| (x - top).exp()).collect()
}

pub fn ess(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().sum();
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    if s2 > 0.0 {
        s * s / s2
    } else {
        0.0
    }
}

/// Unweighted draws approximating `mu_N`.
#[derive(Clone, Debug)]
pub struct Resampled {
    pub fields: Vec<SpectralField>,
    /// Ensemble index behind each field.
    pub indices: Vec<usize>,
    pub ess: f64,
}

/// Multinomial resampling of `count` fields. Fails with [`Error::LowEss`]
/// when the ensemble's effective sample size is below [`MIN_ESS`].
pub fn resample_stationary(ensemble: &WeightedEnsemble, count: usize, stream: &RngStream) -> Result<Resampled> {
    if ensemble.is_empty() || count == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let e = ensemble.ess();
    if !(e >= MIN_ESS) {
        return Err(Error::LowEss {
            ess: e,
            threshold: MIN_ESS,
        });
    }
    let dist = WeightedIndex::new(ensemble.weights()).map_err(|err| Error::Config(err.to_string()))?;
    let mut rng = stream.rng();
    let indices: Vec<usize> = (0..count).map(|_| dist.sample(&mut rng)).collect();
    let fields = indices.par_iter().map(|&i| ensemble.sample(i)).collect();
    Ok(Resampled {
        fields,
        indices,
        ess: e,
    })
}
