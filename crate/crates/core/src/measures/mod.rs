//! Importance-weighted Gibbs ensembles and the invariance test.

mod ensemble;
mod invariance;
mod stats;

pub use ensemble::{
    ess, log_rn_weight, normalize_log_weights, resample_stationary, rn_weight, Proposal, Resampled,
    WeightedEnsemble, MIN_ESS,
};
pub use invariance::{invariance_test, InvarianceReport, Observable, ObservableResult, ObservableSet};
pub use stats::{linear_fit, ols_intercept, Estimate};
