//! Crate-wide error type.

use thiserror::Error;

/// Default relative tolerance for order checks and validation reports.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty input: a measure needs at least one atom")]
    EmptyInput,
    #[error("non-positive or non-finite weight {weight} at location {location}")]
    NonPositiveWeight { location: f64, weight: f64 },
    #[error("non-finite atom location {location}")]
    NonFiniteLocation { location: f64 },
    #[error("weights sum to {sum}, not 1 (pass normalize to rescale)")]
    UnnormalizedWeights { sum: f64 },
    #[error("quantile level {u} outside (0, 1]")]
    OutOfRange { u: f64 },
    #[error("invalid Wasserstein index rho = {rho} (need rho >= 1)")]
    InvalidRho { rho: f64 },
    #[error("means differ: {mean1} vs {mean2}")]
    UnequalMeans { mean1: f64, mean2: f64 },
    #[error("measures are identical; the construction needs mu != nu")]
    IdenticalMeasures,
    #[error("stochastic order violated: {context}")]
    OrderViolation { context: &'static str },
    #[error("quantile difference changes sign more than once")]
    SingleSignChangeViolation,
    #[error("no valid flip window found")]
    NoValidWindow,
    #[error("parameters were built against different marginals")]
    FingerprintMismatch,
    #[error("masses differ: {lhs} vs {rhs}")]
    MassMismatch { lhs: f64, rhs: f64 },
    #[error("kernel branch condition violated on ({lo}, {hi}]: target {target} vs x = {x}")]
    KernelBranchViolation { lo: f64, hi: f64, x: f64, target: f64 },
    #[error("problem size {size} exceeds the solver limit {limit}")]
    SizeLimit { size: usize, limit: usize },
    #[error("numerical failure in the simplex solver: {context}")]
    NumericalFailure { context: &'static str },
    #[error("support violation: {context}")]
    SupportViolation { context: &'static str },
    #[error("unknown distribution `{name}`")]
    UnknownDistribution { name: String },
}

pub type Result<T> = std::result::Result<T, Error>;
