//! Hermite polynomials, cutoff profiles, renormalization and Wick exponentials.

mod cutoff;
mod exp;
mod hermite;

pub use cutoff::{apply_pn, renorm_constant, Admissibility, CutoffProfile};
pub use exp::{
    analytic_wick_cov, time_l2_sobolev, trapezoid, wick_exp_gff, wick_exp_ou, WickExp,
    WickParams, OVERFLOW_EXPONENT,
};
pub(crate) use exp::grid_mean;
pub use hermite::{hermite, hermite_series, HERMITE_MAX_DEGREE};
