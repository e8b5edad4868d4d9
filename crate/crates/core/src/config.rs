use serde::{Deserialize, Serialize};

/// Every numerical threshold used by the crate, in one place.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Probability blocks must sum to one within this.
    pub normalization: f64,
    /// Marginal differences above this flag a behavior as signaling.
    pub no_signaling: f64,
    /// Phase-1 optimum above this declares an LP infeasible.
    pub lp_feasibility: f64,
    /// A CHSH variant counts as violated when it exceeds 2 by more than this.
    pub facet: f64,
    /// Slack for closed-form inequality tests (instrumental, Boole-Bell, entropic, interval order).
    pub inequality: f64,
    /// Interior point stops once the duality gap is below this.
    pub sdp_gap: f64,
    /// Interior point stops once primal and dual residuals are below this.
    pub sdp_feasibility: f64,
    /// Smallest admissible eigenvalue of a returned moment matrix.
    pub psd: f64,
    pub sdp_max_iterations: usize,
    /// Simplex pivot budget is this factor times (rows + columns).
    pub lp_pivot_factor: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            normalization: 1e-12,
            no_signaling: 1e-9,
            lp_feasibility: 1e-9,
            facet: 1e-9,
            inequality: 1e-12,
            sdp_gap: 1e-6,
            sdp_feasibility: 1e-7,
            psd: 1e-7,
            sdp_max_iterations: 200,
            lp_pivot_factor: 50,
        }
    }
}
