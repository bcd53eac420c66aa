//! Failure modes shared by the estimation routines.

use thiserror::Error;

/// Errors produced by the friction estimators.
///
/// Estimators distinguish between *unusable input* (too few observations, a
/// degenerate wage distribution) and *estimation failure* (an optimiser that
/// does not converge, a regression whose coefficients violate the sign
/// restrictions the model imposes). Callers that batch over many segments
/// typically skip the offending segment and record the error.
#[derive(Debug, Error)]
pub enum EstimationError {
    /// Fewer observations than the estimator can work with.
    #[error("not enough observations: {n} available, {required} required")]
    NotEnoughData { n: usize, required: usize },

    /// All wages equal, zero spells, or another degenerate configuration.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// The tenure-on-rank regression produced coefficients outside the
    /// admissible region: the intercept must be positive and the slope
    /// non-negative for the friction parameters to be well defined.
    #[error(
        "regression coefficients violate sign restrictions: \
         intercept = {beta0:.6}, slope = {beta1:.6}"
    )]
    SignRestriction { beta0: f64, beta1: f64 },

    /// An iterative fit ran out of iterations before meeting its tolerance.
    #[error("optimiser failed to converge after {iterations} iterations (|grad| = {grad_norm:.3e})")]
    NonConvergence { iterations: usize, grad_norm: f64 },

    /// A matrix inversion required for standard errors failed.
    #[error("singular information matrix: {0}")]
    SingularInformation(String),

    /// The likelihood or one of its building blocks evaluated to a
    /// non-finite value at the requested point.
    #[error("non-finite objective at {context}")]
    NonFiniteObjective { context: String },

    /// Invalid settings passed to an estimator.
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
}
