//! Estimation of labour-market friction parameters and employer wage-setting
//! power from labour-force survey microdata.
//!
//! The library is organised around a steady-state job-search model in which
//! employed workers receive outside offers at rate `lambda` and lose their job
//! at rate `delta`. The ratio `k = lambda / delta` summarises how easily
//! workers can climb the wage ladder; the separation hazard faced by a worker
//! employed at wage `w` is
//!
//! ```text
//! theta(w) = delta + lambda * (1 - F(w))
//! ```
//!
//! where `F` is the distribution of offered wages. Because better-paid workers
//! are harder to poach, elapsed job tenure is informative about `k` and
//! `delta`, and several routes to those parameters are provided:
//!
//! * [`semiparametric`] — regress elapsed tenure on the empirical rank of the
//!   wage (ordinary or robust least squares) and read the frictions off the
//!   intercept and slope.
//! * [`parametric`] — maximum likelihood on (possibly censored) tenure spells
//!   using the hazard above.
//! * [`unconditional`] — fits that do not use wages at all: grouped employment
//!   durations against the model-implied stock density, and a point-mass
//!   mixture for unemployment durations.
//!
//! On top of the frictions, [`monopsony`] computes a wage-setting power index
//! `mu` in `[0, 1]` that compares the observed mean wage with the lowest wage
//! the market supports, and decomposes its variation across worker segments.
//!
//! [`sim`] contains a steady-state simulator used to validate every estimator
//! end-to-end: it draws wages and spells from known parameters so that
//! recovery can be checked against the truth. [`ingest`] loads survey extracts
//! described by a manifest file and partitions them into segments.

pub mod error;
pub mod estock;
pub mod ingest;
pub mod model;
pub mod monopsony;
pub mod optim;
pub mod parametric;
pub mod semiparametric;
pub mod sim;
pub mod special;
pub mod unconditional;

pub use error::EstimationError;
pub use model::{
    EmpiricalWageDistribution, EstimatorMethod, FitDiagnostics, FitFlag, FrictionEstimate,
    GroupedDurations, ModelError, MonopsonyResult, Observation, SegmentKey,
    UnemploymentMixtureEstimate,
};
