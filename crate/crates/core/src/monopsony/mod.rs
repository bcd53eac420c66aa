//! Wage-setting power: the `mu` index per segment and across segments.
//!
//! With frictions `k`, mean observed wage `m`, and the lowest non-outlier
//! wage `f` as the operative wage floor, the index
//!
//! ```text
//! mu = (m - f) / ((1 + k) m - f)
//! ```
//!
//! measures how much of the gap between pay and the floor employers keep for
//! themselves: `0` in a frictionless market, `1` when workers are captive.
//! Everything in `mu` is estimable from one segment's observations — `k` from
//! the tenure regression (or likelihood), `m` and `f` from the wages — so the
//! sampling error of the whole pipeline is captured by a nonparametric
//! bootstrap that redraws workers and re-estimates all three ingredients per
//! replicate.
//!
//! [`decompose`] then regresses the per-segment indices on segment
//! characteristics to show where wage-setting power concentrates.

mod decompose;

pub use decompose::{
    decompose, CoefficientRow, DecompositionResult, DecompositionSettings,
};

use crate::error::EstimationError;
use crate::model::{
    mu_index, quantile_sorted, wage_floor, weighted_mean, FitFlag, FrictionEstimate,
    MonopsonyResult, Observation, SegmentKey,
};
use crate::parametric::{fit_mle, MleSettings};
use crate::semiparametric::{fit_linear, fit_linear_robust, MIN_OBSERVATIONS};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Which route supplies `k` inside the index (and inside every bootstrap
/// replicate).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MuEstimator {
    #[default]
    Semiparametric,
    SemiparametricRobust,
    /// Censored-spell maximum likelihood; falls back to the semiparametric
    /// route (flagged) when the likelihood fit fails.
    Parametric,
}

/// Tuning for [`segment_mu`].
#[derive(Debug, Clone, Copy)]
pub struct MonopsonySettings {
    /// Bootstrap replicates for the standard error; `0` disables the
    /// bootstrap entirely.
    pub bootstrap: usize,
    pub seed: u64,
    pub estimator: MuEstimator,
}

impl Default for MonopsonySettings {
    fn default() -> Self {
        Self {
            bootstrap: 500,
            seed: 0,
            estimator: MuEstimator::Semiparametric,
        }
    }
}

/// Fits `k` by the configured route. The boolean reports whether the
/// parametric route fell back to the regression.
fn fit_k(
    observations: &[Observation],
    estimator: MuEstimator,
) -> Result<(FrictionEstimate, bool), EstimationError> {
    match estimator {
        MuEstimator::Semiparametric => fit_linear(observations).map(|(e, _)| (e, false)),
        MuEstimator::SemiparametricRobust => {
            fit_linear_robust(observations).map(|(e, _)| (e, false))
        }
        MuEstimator::Parametric => match fit_mle(observations, &MleSettings::default()) {
            Ok(e) => Ok((e, false)),
            Err(_) => fit_linear(observations).map(|(e, _)| (e, true)),
        },
    }
}

/// Index value for one (possibly resampled) set of observations.
fn mu_of(observations: &[Observation], estimator: MuEstimator) -> Option<f64> {
    let (frictions, _) = fit_k(observations, estimator).ok()?;
    let wages: Vec<f64> = observations.iter().map(|o| o.wage).collect();
    let weights: Vec<f64> = observations.iter().map(|o| o.weight).collect();
    let mean = weighted_mean(&wages, &weights);
    let floor = wage_floor(&wages).ok()?;
    mu_index(mean, floor, frictions.k).ok()
}

/// Wage-setting power of one segment, with bootstrap uncertainty.
///
/// The bootstrap redraws observations with replacement and repeats the whole
/// estimation — ranks, regression, mean, floor — so the reported standard
/// error reflects every estimated ingredient, not just the wage average.
/// Replicates where the re-estimation fails (e.g. a resample violating the
/// sign restrictions) are dropped and counted in the notes. Results are
/// deterministic in `settings.seed` and independent of thread scheduling.
pub fn segment_mu(
    observations: &[Observation],
    settings: &MonopsonySettings,
) -> Result<MonopsonyResult, EstimationError> {
    if observations.len() < MIN_OBSERVATIONS {
        return Err(EstimationError::NotEnoughData {
            n: observations.len(),
            required: MIN_OBSERVATIONS,
        });
    }
    let (frictions, fell_back) = fit_k(observations, settings.estimator)?;
    let wages: Vec<f64> = observations.iter().map(|o| o.wage).collect();
    let weights: Vec<f64> = observations.iter().map(|o| o.weight).collect();
    let mean_wage = weighted_mean(&wages, &weights);
    let floor_wage =
        wage_floor(&wages).map_err(|e| EstimationError::DegenerateInput(e.to_string()))?;
    let mu = mu_index(mean_wage, floor_wage, frictions.k)
        .map_err(|e| EstimationError::DegenerateInput(e.to_string()))?;

    let mut flags = Vec::new();
    if fell_back {
        flags.push(FitFlag::Fallback);
    }

    let n = observations.len();
    let mut notes: Vec<String> = Vec::new();
    let (se_mu, ci_mu) = if settings.bootstrap == 0 {
        (None, None)
    } else {
        let replicates: Vec<Option<f64>> = (0..settings.bootstrap)
            .into_par_iter()
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
                rng.set_stream(r as u64);
                let resample: Vec<Observation> = (0..n)
                    .map(|_| {
                        let o = &observations[rng.random_range(0..n)];
                        // the segment key plays no role in the refit; an
                        // empty one avoids cloning strings n times per draw
                        Observation {
                            wage: o.wage,
                            elapsed_spell: o.elapsed_spell,
                            censored: o.censored,
                            weight: o.weight,
                            segment: SegmentKey::default(),
                        }
                    })
                    .collect();
                mu_of(&resample, settings.estimator)
            })
            .collect();
        let mut values: Vec<f64> = replicates.iter().filter_map(|v| *v).collect();
        let failures = settings.bootstrap - values.len();
        if failures > 0 {
            notes.push(format!(
                "{failures} of {} bootstrap replicates failed to re-estimate",
                settings.bootstrap
            ));
        }
        if values.len() < 10 {
            flags.push(FitFlag::SeUnavailable);
            (None, None)
        } else {
            values.sort_by(f64::total_cmp);
            let m = values.len() as f64;
            let mean_rep = values.iter().sum::<f64>() / m;
            let var = values
                .iter()
                .map(|v| (v - mean_rep) * (v - mean_rep))
                .sum::<f64>()
                / (m - 1.0);
            let ci = (
                quantile_sorted(&values, 0.025),
                quantile_sorted(&values, 0.975),
            );
            (Some(var.sqrt()), Some(ci))
        }
    };

    let mut result = MonopsonyResult {
        segment: observations[0].segment.clone(),
        mu,
        se_mu,
        ci_mu,
        mean_wage,
        floor_wage,
        frictions,
        n_obs: n,
        flags,
    };
    if !notes.is_empty() {
        result.frictions.diagnostics.notes.extend(notes);
    }
    Ok(result)
}

/// Runs [`segment_mu`] over every segment of a partitioned sample, in
/// deterministic key order. Failed segments are reported alongside the
/// successes instead of aborting the batch.
pub fn segment_mu_all(
    segments: &BTreeMap<SegmentKey, Vec<Observation>>,
    settings: &MonopsonySettings,
) -> Vec<(SegmentKey, Result<MonopsonyResult, EstimationError>)> {
    segments
        .iter()
        .map(|(key, obs)| (key.clone(), segment_mu(obs, settings)))
        .collect()
}

/// Employment-weighted average of segment indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateMu {
    pub mu: f64,
    /// Propagated from the segment standard errors when all are available,
    /// treating segments as independent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub se: Option<f64>,
    pub n_segments: usize,
    pub total_obs: usize,
}

/// Aggregates segment results, weighting each segment by its observation
/// count. Returns `None` on an empty slice.
pub fn aggregate_mu(results: &[MonopsonyResult]) -> Option<AggregateMu> {
    if results.is_empty() {
        return None;
    }
    let total: usize = results.iter().map(|r| r.n_obs).sum();
    let w_total = total as f64;
    let mu = results
        .iter()
        .map(|r| r.mu * r.n_obs as f64)
        .sum::<f64>()
        / w_total;
    let se = results
        .iter()
        .map(|r| r.se_mu.map(|s| (r.n_obs as f64 / w_total * s).powi(2)))
        .sum::<Option<f64>>()
        .map(f64::sqrt);
    Some(AggregateMu {
        mu,
        se,
        n_segments: results.len(),
        total_obs: total,
    })
}
