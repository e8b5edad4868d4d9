use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used to map errors onto process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed or out-of-domain input.
    Input,
    /// Well-formed input that no model in the relevant polytope can produce.
    Infeasible,
    /// A numerical engine failed to finish.
    Solver,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{what}: entries must be non-negative (found {value})")]
    NegativeProbability { what: &'static str, value: f64 },

    #[error("{what}: block sums to {sum}, expected 1")]
    NotNormalized { what: &'static str, sum: f64 },

    #[error("{name} = {value} outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("interval lower end {lo} exceeds upper end {hi}")]
    InvertedInterval { lo: f64, hi: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("simplex exceeded {limit} pivots")]
    IterationLimit { limit: usize },

    #[error("interior point method did not converge in {iterations} iterations (gap {gap:e}, infeasibility {infeasibility:e})")]
    SdpNotConverged {
        iterations: usize,
        gap: f64,
        infeasibility: f64,
    },

    #[error("sdp numerical breakdown: {0}")]
    SdpBreakdown(String),

    #[error("observed table is outside the instrumental-variable polytope (phase-1 residual {residual:e})")]
    InfeasibleTable { residual: f64 },

    #[error("experimental and observational data admit no common causal model: {0}")]
    Inconsistent(String),

    #[error("conditioning event {0} has zero probability")]
    ZeroProbability(&'static str),

    #[error("behavior is signaling; operation requires a no-signaling behavior")]
    Signaling,

    #[error("{0} is not Hermitian")]
    NonHermitian(&'static str),

    #[error("{0}")]
    InvalidObservable(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("entropy vector incomplete: expected {expected} entries for n = {n}, got {got}")]
    IncompleteEntropyVector { n: usize, expected: usize, got: usize },

    #[error("basis enumeration would visit {bases} bases (limit {limit})")]
    CombinatorialBlowup { bases: u128, limit: u128 },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InfeasibleTable { .. } | Error::Inconsistent(_) => ErrorClass::Infeasible,
            Error::IterationLimit { .. }
            | Error::SdpNotConverged { .. }
            | Error::SdpBreakdown(_)
            | Error::CombinatorialBlowup { .. } => ErrorClass::Solver,
            _ => ErrorClass::Input,
        }
    }

    /// Stable machine-readable identifier.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NegativeProbability { .. } => "negative_probability",
            Error::NotNormalized { .. } => "not_normalized",
            Error::Domain { .. } => "domain",
            Error::InvertedInterval { .. } => "inverted_interval",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::IterationLimit { .. } => "lp_iteration_limit",
            Error::SdpNotConverged { .. } => "sdp_not_converged",
            Error::SdpBreakdown(_) => "sdp_breakdown",
            Error::InfeasibleTable { .. } => "infeasible_table",
            Error::Inconsistent(_) => "inconsistent_data",
            Error::ZeroProbability(_) => "zero_probability",
            Error::Signaling => "signaling",
            Error::NonHermitian(_) => "non_hermitian",
            Error::InvalidObservable(_) => "invalid_observable",
            Error::InvalidState(_) => "invalid_state",
            Error::IncompleteEntropyVector { .. } => "incomplete_entropy_vector",
            Error::CombinatorialBlowup { .. } => "combinatorial_blowup",
        }
    }
}
