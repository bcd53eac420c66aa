//! Core domain types: observations, segments, estimates, and the
//! wage-setting power index.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Violations of the structural invariants the domain types enforce.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("wage must be positive and finite, got {0}")]
    InvalidWage(f64),

    #[error("elapsed spell must be non-negative and finite, got {0}")]
    InvalidSpell(f64),

    #[error("weight must be positive and finite, got {0}")]
    InvalidWeight(f64),

    #[error("friction parameters inconsistent: k = {k}, lambda/delta = {ratio}")]
    InconsistentRates { k: f64, ratio: f64 },

    #[error("rate must be positive and finite: {name} = {value}")]
    InvalidRate { name: &'static str, value: f64 },

    #[error("confidence interval [{lo}, {hi}] does not bracket point estimate {point}")]
    InvertedInterval { lo: f64, hi: f64, point: f64 },

    #[error("mean wage {mean} is below the wage floor {floor}")]
    MeanBelowFloor { mean: f64, floor: f64 },

    #[error("class boundaries must be ascending and non-negative: {0}")]
    BadBoundaries(String),

    #[error("grouped data needs {expected} frequencies for {expected} classes, got {got}")]
    FrequencyMismatch { expected: usize, got: usize },

    #[error("grouped data has zero total frequency")]
    EmptyGroups,

    #[error("empty sample")]
    EmptySample,
}

/// One worker record after ingestion: the current wage, how long the current
/// labour-market state has lasted, and the survey weight.
///
/// `elapsed_spell` is *elapsed* duration — time since the spell began, not the
/// (unobserved) completed length. For employed workers this is tenure in the
/// current job; for unemployed workers it is the time since the last job
/// ended. `censored` marks spells whose recorded length is a lower bound
/// (interviews truncate the spell, or the survey top-codes long tenures).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub wage: f64,
    pub elapsed_spell: f64,
    pub censored: bool,
    pub weight: f64,
    pub segment: SegmentKey,
}

impl Observation {
    /// Builds an observation, rejecting non-finite or out-of-domain values.
    pub fn new(
        wage: f64,
        elapsed_spell: f64,
        censored: bool,
        weight: f64,
        segment: SegmentKey,
    ) -> Result<Self, ModelError> {
        if !wage.is_finite() || wage <= 0.0 {
            return Err(ModelError::InvalidWage(wage));
        }
        if !elapsed_spell.is_finite() || elapsed_spell < 0.0 {
            return Err(ModelError::InvalidSpell(elapsed_spell));
        }
        if !weight.is_finite() || weight <= 0.0 {
            return Err(ModelError::InvalidWeight(weight));
        }
        Ok(Self {
            wage,
            elapsed_spell,
            censored,
            weight,
            segment,
        })
    }
}

/// The cell of the sample a worker belongs to.
///
/// Segments are the unit at which frictions and wage-setting power are
/// estimated: workers compete within a segment, not across segments. The key
/// orders lexicographically so that maps keyed by it iterate deterministically.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
pub struct SegmentKey {
    pub sector: String,
    pub education: String,
    pub age_band: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<i32>,
}

impl SegmentKey {
    /// Compact single-line label, used in reports and file names.
    pub fn label(&self) -> String {
        let mut parts = vec![
            self.sector.clone(),
            self.education.clone(),
            self.age_band.clone(),
        ];
        if let Some(r) = &self.region {
            parts.push(r.clone());
        }
        if let Some(g) = &self.gender {
            parts.push(g.clone());
        }
        if let Some(y) = self.year {
            parts.push(y.to_string());
        }
        parts.retain(|p| !p.is_empty());
        if parts.is_empty() {
            "all".to_string()
        } else {
            parts.join("|")
        }
    }
}

impl fmt::Display for SegmentKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Which route produced a friction estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorMethod {
    /// Tenure-on-wage-rank regression, ordinary least squares.
    Semiparametric,
    /// Tenure-on-wage-rank regression, robust (Huber) least squares.
    SemiparametricRobust,
    /// Maximum likelihood on censored tenure spells.
    Parametric,
    /// Maximum likelihood on interval-censored (grouped) tenure spells.
    GroupedInterval,
    /// Maximum likelihood on grouped durations without wage information.
    GroupedEstock,
}

impl fmt::Display for EstimatorMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EstimatorMethod::Semiparametric => "semiparametric",
            EstimatorMethod::SemiparametricRobust => "semiparametric_robust",
            EstimatorMethod::Parametric => "parametric",
            EstimatorMethod::GroupedInterval => "grouped_interval",
            EstimatorMethod::GroupedEstock => "grouped_estock",
        };
        f.write_str(s)
    }
}

/// Quality warnings attached to an estimate instead of rejecting it outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitFlag {
    /// Standard errors are large relative to the point estimate.
    HighVariance,
    /// The point estimate sits outside the range the model can plausibly
    /// produce (e.g. `k` at its cap), usually because the data carry little
    /// information about it.
    Implausible,
    /// The objective is nearly flat in some direction; the reported point is
    /// one of many that fit almost equally well.
    WeakIdentification,
    /// A primary routine failed and a simpler fallback supplied the result.
    Fallback,
    /// Standard errors could not be computed (singular information matrix).
    SeUnavailable,
    /// Multiple starts of the optimiser disagreed on the optimum.
    Multimodal,
}

/// Bookkeeping about how a fit went, carried alongside the estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_likelihood: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Point estimates of the friction parameters with optional uncertainty.
///
/// The three parameters are linked by `k = lambda / delta`; the constructor
/// enforces that identity so a consumer can rely on any two of them. `lambda`
/// is the arrival rate of outside offers to employed workers, `delta` the
/// exogenous job-destruction rate, and `k` their ratio — the expected number
/// of outside offers received during an employment spell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrictionEstimate {
    pub k: f64,
    pub delta: f64,
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub se_k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub se_delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub se_lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci_k: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci_delta: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci_lambda: Option<(f64, f64)>,
    /// Nominal coverage of the intervals, e.g. `0.95`.
    pub ci_level: f64,
    pub method: EstimatorMethod,
    /// Censoring threshold applied to the spells, when one was imposed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub censor_level: Option<f64>,
    pub n_obs: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<FitFlag>,
    pub diagnostics: FitDiagnostics,
}

/// Relative tolerance for the `k = lambda / delta` identity.
const RATE_IDENTITY_RTOL: f64 = 1e-8;

impl FrictionEstimate {
    /// Builds an estimate from `delta` and `lambda`, deriving `k`.
    /// Uncertainty fields start empty; estimators fill them in and then call
    /// [`FrictionEstimate::validate`].
    pub fn from_rates(
        delta: f64,
        lambda: f64,
        method: EstimatorMethod,
        n_obs: usize,
    ) -> Result<Self, ModelError> {
        if !delta.is_finite() || delta <= 0.0 {
            return Err(ModelError::InvalidRate {
                name: "delta",
                value: delta,
            });
        }
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(ModelError::InvalidRate {
                name: "lambda",
                value: lambda,
            });
        }
        Ok(Self {
            k: lambda / delta,
            delta,
            lambda,
            se_k: None,
            se_delta: None,
            se_lambda: None,
            ci_k: None,
            ci_delta: None,
            ci_lambda: None,
            ci_level: 0.95,
            method,
            censor_level: None,
            n_obs,
            flags: Vec::new(),
            diagnostics: FitDiagnostics::default(),
        })
    }

    /// Checks the internal consistency of the estimate: the rate identity and
    /// that every interval brackets its point estimate.
    pub fn validate(&self) -> Result<(), ModelError> {
        let ratio = self.lambda / self.delta;
        let scale = self.k.abs().max(1.0);
        if !(self.k - ratio).abs().le(&(RATE_IDENTITY_RTOL * scale)) {
            return Err(ModelError::InconsistentRates { k: self.k, ratio });
        }
        for (point, ci) in [
            (self.k, self.ci_k),
            (self.delta, self.ci_delta),
            (self.lambda, self.ci_lambda),
        ] {
            if let Some((lo, hi)) = ci {
                if lo > point || hi < point {
                    return Err(ModelError::InvertedInterval { lo, hi, point });
                }
            }
        }
        Ok(())
    }

    /// True when the estimate carries any quality warning.
    pub fn is_flagged(&self) -> bool {
        !self.flags.is_empty()
    }
}

/// Two-sided normal confidence interval around a point estimate.
pub(crate) fn normal_ci(point: f64, se: f64, level: f64) -> (f64, f64) {
    let z = normal_quantile(0.5 + level / 2.0);
    (point - z * se, point + z * se)
}

/// Standard normal quantile function.
pub(crate) fn normal_quantile(p: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::standard().inverse_cdf(p)
}

/// Weighted mean of `values` with weights `w` (assumed positive).
pub(crate) fn weighted_mean(values: &[f64], w: &[f64]) -> f64 {
    let sw: f64 = w.iter().sum();
    values
        .iter()
        .zip(w)
        .map(|(v, wi)| v * wi)
        .sum::<f64>()
        / sw
}

/// Empirical distribution of observed wages within a segment.
///
/// Cdf values use mid-ranks — the value attached to a wage is the fraction of
/// weight strictly below it plus half the weight tied with it — which keeps
/// every value strictly inside `(0, 1)` and treats ties symmetrically. The
/// wage floor is the lowest observed wage that is not an outlier: on the log
/// scale, the smallest observation at or above `Q1 - 1.5 * (Q3 - Q1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalWageDistribution {
    /// Distinct wages, ascending.
    wages: Vec<f64>,
    /// Mid-rank cdf value for each distinct wage.
    cdf: Vec<f64>,
    /// Total weight strictly below each distinct wage, as a fraction.
    below: Vec<f64>,
    floor_wage: f64,
    n: usize,
}

impl EmpiricalWageDistribution {
    /// Builds the distribution from raw wages and weights.
    pub fn from_weighted(wages: &[f64], weights: &[f64]) -> Result<Self, ModelError> {
        if wages.is_empty() {
            return Err(ModelError::EmptySample);
        }
        debug_assert_eq!(wages.len(), weights.len());
        for (&w, &wt) in wages.iter().zip(weights) {
            if !w.is_finite() || w <= 0.0 {
                return Err(ModelError::InvalidWage(w));
            }
            if !wt.is_finite() || wt <= 0.0 {
                return Err(ModelError::InvalidWeight(wt));
            }
        }
        let mut order: Vec<usize> = (0..wages.len()).collect();
        order.sort_by(|&a, &b| wages[a].total_cmp(&wages[b]));
        let total: f64 = weights.iter().sum();

        let mut distinct = Vec::new();
        let mut cdf = Vec::new();
        let mut below = Vec::new();
        let mut cum = 0.0;
        let mut i = 0;
        while i < order.len() {
            let w = wages[order[i]];
            let mut tie_weight = 0.0;
            let mut j = i;
            while j < order.len() && wages[order[j]] == w {
                tie_weight += weights[order[j]];
                j += 1;
            }
            distinct.push(w);
            below.push(cum / total);
            cdf.push((cum + 0.5 * tie_weight) / total);
            cum += tie_weight;
            i = j;
        }

        let floor_wage = wage_floor(wages)?;
        Ok(Self {
            wages: distinct,
            cdf,
            below,
            floor_wage,
            n: wages.len(),
        })
    }

    /// Convenience constructor with unit weights.
    pub fn from_wages(wages: &[f64]) -> Result<Self, ModelError> {
        Self::from_weighted(wages, &vec![1.0; wages.len()])
    }

    /// Mid-rank cdf evaluated at `w`: weight strictly below `w` plus half the
    /// weight exactly at `w`, as a fraction of total weight.
    pub fn value_at(&self, w: f64) -> f64 {
        match self.wages.binary_search_by(|x| x.total_cmp(&w)) {
            Ok(i) => self.cdf[i],
            Err(i) => {
                if i == self.wages.len() {
                    1.0
                } else {
                    self.below[i]
                }
            }
        }
    }

    /// Lowest non-outlier wage observed in the segment.
    pub fn floor_wage(&self) -> f64 {
        self.floor_wage
    }

    /// Distinct observed wages, ascending.
    pub fn support(&self) -> &[f64] {
        &self.wages
    }

    /// Mid-rank cdf values aligned with [`Self::support`].
    pub fn cdf_values(&self) -> &[f64] {
        &self.cdf
    }

    /// Number of observations the distribution was built from.
    pub fn n(&self) -> usize {
        self.n
    }
}

/// Lowest wage that survives the boxplot outlier rule on the log scale:
/// the smallest observation at or above `Q1 - 1.5 * IQR` of log wages.
///
/// Quartiles use linear interpolation of order statistics (the common
/// "type 7" definition). Weights are ignored here on purpose — the rule
/// detects outlying *observations*, and a large survey weight does not make a
/// recorded wage any less anomalous. The returned value is the surviving
/// observation itself (not a back-transformed log), so rescaling every wage
/// by a common factor rescales the floor by exactly that factor.
pub fn wage_floor(wages: &[f64]) -> Result<f64, ModelError> {
    if wages.is_empty() {
        return Err(ModelError::EmptySample);
    }
    for &w in wages {
        if !w.is_finite() || w <= 0.0 {
            return Err(ModelError::InvalidWage(w));
        }
    }
    let mut sorted = wages.to_vec();
    sorted.sort_by(f64::total_cmp);
    let logs: Vec<f64> = sorted.iter().map(|w| w.ln()).collect();
    let q1 = quantile_sorted(&logs, 0.25);
    let q3 = quantile_sorted(&logs, 0.75);
    let fence = q1 - 1.5 * (q3 - q1);
    let idx = logs
        .iter()
        .position(|&x| x >= fence)
        // fence <= q1 <= max, so some observation always qualifies
        .expect("fence below first quartile");
    Ok(sorted[idx])
}

/// Type-7 quantile of pre-sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Grouped duration data: class lower bounds and the count in each class.
///
/// Class `j` covers `(boundaries[j], boundaries[j+1]]`; the final class is
/// open-ended. The first lower bound is typically zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedDurations {
    boundaries: Vec<f64>,
    frequencies: Vec<u64>,
}

impl GroupedDurations {
    pub fn new(boundaries: Vec<f64>, frequencies: Vec<u64>) -> Result<Self, ModelError> {
        if boundaries.len() < 2 {
            return Err(ModelError::BadBoundaries(format!(
                "need at least two classes, got {}",
                boundaries.len()
            )));
        }
        if boundaries.len() != frequencies.len() {
            return Err(ModelError::FrequencyMismatch {
                expected: boundaries.len(),
                got: frequencies.len(),
            });
        }
        if boundaries[0] < 0.0 || !boundaries[0].is_finite() {
            return Err(ModelError::BadBoundaries(format!(
                "first lower bound must be finite and non-negative, got {}",
                boundaries[0]
            )));
        }
        for pair in boundaries.windows(2) {
            if !(pair[1].is_finite() && pair[1] > pair[0]) {
                return Err(ModelError::BadBoundaries(format!(
                    "{} does not exceed {}",
                    pair[1], pair[0]
                )));
            }
        }
        if frequencies.iter().sum::<u64>() == 0 {
            return Err(ModelError::EmptyGroups);
        }
        Ok(Self {
            boundaries,
            frequencies,
        })
    }

    /// Discretises raw spells onto the given class lower bounds.
    pub fn from_spells(spells: &[f64], boundaries: Vec<f64>) -> Result<Self, ModelError> {
        let mut frequencies = vec![0u64; boundaries.len()];
        for &t in spells {
            if !t.is_finite() || t < 0.0 {
                return Err(ModelError::InvalidSpell(t));
            }
            // partition_point returns the number of lower bounds < t, i.e.
            // the 1-based class index; a spell exactly on a bound belongs to
            // the class below it (classes are (lo, hi]).
            let idx = boundaries.partition_point(|&b| b < t).max(1) - 1;
            frequencies[idx] += 1;
        }
        Self::new(boundaries, frequencies)
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn frequencies(&self) -> &[u64] {
        &self.frequencies
    }

    pub fn n_classes(&self) -> usize {
        self.boundaries.len()
    }

    pub fn total(&self) -> u64 {
        self.frequencies.iter().sum()
    }

    /// Upper bound of class `j`, or `None` for the open-ended last class.
    pub fn upper(&self, j: usize) -> Option<f64> {
        self.boundaries.get(j + 1).copied()
    }
}

/// Result of fitting the point-mass mixture to unemployment durations.
///
/// A fraction `pi` of the unemployed never transitions into employment; the
/// rest exit at rate `lambda0`. When an employment rate is supplied, the
/// job-destruction rate implied by flow balance is reported as well.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnemploymentMixtureEstimate {
    /// Share of long-term non-transitioning unemployed, in `[0, 1]`.
    pub pi: f64,
    /// Exit rate from unemployment for the transitioning share.
    pub lambda0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub se_pi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub se_lambda0: Option<f64>,
    /// Job-destruction rate implied by a steady unemployment rate, when one
    /// was provided: `delta = lambda0 * U * (1 - pi) / (1 - U)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub implied_delta: Option<f64>,
    pub n_obs: u64,
    pub diagnostics: FitDiagnostics,
}

/// Wage-setting power of employers over one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonopsonyResult {
    pub segment: SegmentKey,
    /// The power index `mu` in `[0, 1]`.
    pub mu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub se_mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci_mu: Option<(f64, f64)>,
    /// Weighted mean observed wage in the segment.
    pub mean_wage: f64,
    /// Lowest non-outlier wage in the segment.
    pub floor_wage: f64,
    /// Friction estimate the index was computed from.
    pub frictions: FrictionEstimate,
    pub n_obs: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<FitFlag>,
}

/// Wage-setting power index.
///
/// Compares what workers earn on average with what they would earn at the two
/// extremes of labour-market competition. With mean wage `m`, wage floor `f`
/// and friction ratio `k`:
///
/// ```text
/// mu = (m - f) / ((1 + k) * m - f)
/// ```
///
/// `mu = 0` when employers have no power (frictionless market, `k` large) and
/// `mu = 1` when workers are paid the floor regardless of frictions. The
/// index falls monotonically in `k`: more outside offers per job spell mean
/// less room to mark wages down.
pub fn mu_index(mean_wage: f64, floor_wage: f64, k: f64) -> Result<f64, ModelError> {
    if !mean_wage.is_finite() || mean_wage <= 0.0 {
        return Err(ModelError::InvalidWage(mean_wage));
    }
    if !floor_wage.is_finite() || floor_wage <= 0.0 {
        return Err(ModelError::InvalidWage(floor_wage));
    }
    if !k.is_finite() || k < 0.0 {
        return Err(ModelError::InvalidRate { name: "k", value: k });
    }
    if mean_wage < floor_wage {
        return Err(ModelError::MeanBelowFloor {
            mean: mean_wage,
            floor: floor_wage,
        });
    }
    let spread = mean_wage - floor_wage;
    if spread == 0.0 {
        return Ok(0.0);
    }
    Ok(spread / ((1.0 + k) * mean_wage - floor_wage))
}
