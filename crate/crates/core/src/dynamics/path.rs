use serde::Serialize;

use crate::spectral::SpectralField;

/// `Phi = P_N X + Y` at the recorded times.
#[derive(Clone, Debug)]
pub struct Decomposition {
    /// `P_N X`.
    pub linear: Vec<SpectralField>,
    /// `Y`, the solution of the shifted equation driven by `exp_N(alpha X)`.
    pub remainder: Vec<SpectralField>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Diagnostics {
    /// `H^{-epsilon}` norm of the state at each recorded time.
    pub norms: Vec<f64>,
    /// Largest `dt * (alpha^2/2) * max(nonlinearity)` met along the path.
    pub max_stability_product: f64,
    /// `||Phi - (P_N X + Y)||_{H^{-epsilon}}` at each recorded time.
    pub residuals: Vec<f64>,
    /// Supremum of the residual over every step, not only recorded ones.
    pub residual_sup: Option<f64>,
}

/// Output of a solver. `states` always holds the directly integrated solution.
///
/// The direct and the split routes use different quadratures of the mild
/// integral (see [`crate::dynamics::solve_sqe_full`]), so `P_N X + Y` matches
/// `states` to first order in `dt`, not to round-off.
#[derive(Clone, Debug)]
pub struct SolutionPath {
    pub times: Vec<f64>,
    pub states: Vec<SpectralField>,
    pub decomposition: Option<Decomposition>,
    pub diagnostics: Diagnostics,
}

impl SolutionPath {
    pub fn final_state(&self) -> &SpectralField {
        self.states.last().expect("paths are never empty")
    }

    /// `sup_t ||Phi - (P_N X + Y)||_{H^{-epsilon}}` if a decomposition was recorded.
    pub fn decomposition_residual(&self) -> Option<f64> {
        self.diagnostics.residual_sup
    }
}
