//! Regression decomposition of wage-setting power across segments.
//!
//! Each segment contributes one data point: its index `mu` and its
//! characteristics (sector, education, age band, region, gender, year). A
//! weighted least-squares regression of `mu` on dummy variables for those
//! characteristics — one level per dimension held out as the reference —
//! splits the variation into interpretable shifts: "manufacturing runs 5
//! points above services", "power declined after 2015", and so on. Year can
//! enter either as per-year dummies or as a linear trend.
//!
//! Segments are weighted by their observation counts by default, so
//! precisely estimated segments count for more. Perfectly collinear dummies
//! (two characteristics that always move together) are detected up front and
//! reported by name instead of producing arbitrary coefficients.

use crate::error::EstimationError;
use crate::model::MonopsonyResult;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use std::collections::BTreeSet;

/// Options for [`decompose`].
#[derive(Debug, Clone, Copy)]
pub struct DecompositionSettings {
    /// Replace per-year dummies with a linear trend in the year.
    pub trend: bool,
    /// Weight segments by observation count (unweighted otherwise).
    pub weighted: bool,
}

impl Default for DecompositionSettings {
    fn default() -> Self {
        Self {
            trend: false,
            weighted: true,
        }
    }
}

/// One regression term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub term: String,
    pub estimate: f64,
    pub std_err: f64,
    pub t_stat: f64,
    pub p_value: f64,
}

/// Output of [`decompose`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionResult {
    pub terms: Vec<CoefficientRow>,
    /// Reference levels absorbed into the intercept, as `dimension=level`.
    pub baselines: Vec<String>,
    pub r_squared: f64,
    pub n_segments: usize,
    /// Residual degrees of freedom.
    pub df: usize,
    pub weighted: bool,
}

impl DecompositionResult {
    /// Plain-text table of the regression, for terminal output.
    pub fn render_table(&self) -> String {
        let name_width = self
            .terms
            .iter()
            .map(|t| t.term.len())
            .max()
            .unwrap_or(4)
            .max("term".len());
        let mut out = String::new();
        out.push_str(&format!(
            "{:<name_width$}  {:>10}  {:>10}  {:>8}  {:>8}\n",
            "term", "estimate", "std_err", "t_stat", "p_value"
        ));
        out.push_str(&"-".repeat(name_width + 44));
        out.push('\n');
        for t in &self.terms {
            out.push_str(&format!(
                "{:<name_width$}  {:>10.4}  {:>10.4}  {:>8.2}  {:>8.3}\n",
                t.term, t.estimate, t.std_err, t.t_stat, t.p_value
            ));
        }
        if !self.baselines.is_empty() {
            out.push_str(&format!("reference: {}\n", self.baselines.join(", ")));
        }
        out.push_str(&format!(
            "r_squared = {:.4}, segments = {}, residual df = {}\n",
            self.r_squared, self.n_segments, self.df
        ));
        out
    }
}

/// The segment dimensions a dummy can be built from, in display order.
const DIMENSIONS: [&str; 6] = ["sector", "education", "age_band", "region", "gender", "year"];

fn level_of(result: &MonopsonyResult, dimension: &str) -> String {
    let key = &result.segment;
    let text = match dimension {
        "sector" => key.sector.clone(),
        "education" => key.education.clone(),
        "age_band" => key.age_band.clone(),
        "region" => key.region.clone().unwrap_or_default(),
        "gender" => key.gender.clone().unwrap_or_default(),
        "year" => key.year.map(|y| y.to_string()).unwrap_or_default(),
        _ => unreachable!("unknown dimension"),
    };
    if text.is_empty() {
        "unspecified".to_string()
    } else {
        text
    }
}

/// Decomposes segment-level `mu` into characteristic shifts.
pub fn decompose(
    results: &[MonopsonyResult],
    settings: &DecompositionSettings,
) -> Result<DecompositionResult, EstimationError> {
    let m = results.len();
    if m < 3 {
        return Err(EstimationError::NotEnoughData { n: m, required: 3 });
    }

    // assemble columns: intercept, then dummies per multi-level dimension
    let mut names: Vec<String> = vec!["intercept".into()];
    let mut columns: Vec<Vec<f64>> = vec![vec![1.0; m]];
    let mut baselines: Vec<String> = Vec::new();

    for dim in DIMENSIONS {
        if dim == "year" && settings.trend {
            let years: Option<Vec<i32>> = results.iter().map(|r| r.segment.year).collect();
            let Some(years) = years else {
                return Err(EstimationError::InvalidSettings(
                    "trend requested but some segments have no year".into(),
                ));
            };
            let base = *years.iter().min().expect("nonempty");
            if years.iter().any(|&y| y != base) {
                names.push("trend".into());
                columns.push(years.iter().map(|&y| (y - base) as f64).collect());
                baselines.push(format!("trend origin year={base}"));
            }
            continue;
        }
        let levels: BTreeSet<String> = results.iter().map(|r| level_of(r, dim)).collect();
        if levels.len() < 2 {
            continue;
        }
        let mut iter = levels.into_iter();
        let reference = iter.next().expect("at least two levels");
        baselines.push(format!("{dim}={reference}"));
        for level in iter {
            names.push(format!("{dim}={level}"));
            columns.push(
                results
                    .iter()
                    .map(|r| if level_of(r, dim) == level { 1.0 } else { 0.0 })
                    .collect(),
            );
        }
    }

    let p = columns.len();
    if m < p + 1 {
        return Err(EstimationError::NotEnoughData { n: m, required: p + 1 });
    }
    if let Some(dependent) = find_collinear(&columns) {
        return Err(EstimationError::DegenerateInput(format!(
            "collinear terms: {}",
            dependent
                .into_iter()
                .map(|i| names[i].clone())
                .collect::<Vec<_>>()
                .join(", ")
        )));
    }

    let raw_w: Vec<f64> = if settings.weighted {
        results.iter().map(|r| r.n_obs as f64).collect()
    } else {
        vec![1.0; m]
    };
    // normalise weights to sum to m: unit weights then give classical OLS
    let sw: f64 = raw_w.iter().sum();
    let w: Vec<f64> = raw_w.iter().map(|v| v * m as f64 / sw).collect();
    let y: Vec<f64> = results.iter().map(|r| r.mu).collect();

    let x = DMatrix::from_fn(m, p, |i, j| columns[j][i]);
    let wy = DVector::from_fn(m, |i, _| w[i] * y[i]);
    let xtw = {
        let mut t = x.transpose();
        for (j, mut col) in t.column_iter_mut().enumerate() {
            col *= w[j];
        }
        t
    };
    let xtwx = &xtw * &x;
    let xtwy = x.transpose() * wy;
    let chol = xtwx
        .clone()
        .cholesky()
        .ok_or_else(|| EstimationError::SingularInformation("dummy design".into()))?;
    let beta = chol.solve(&xtwy);
    let xtwx_inv = chol.inverse();

    let mut rss = 0.0;
    let mut tss = 0.0;
    let ybar: f64 = y.iter().zip(&w).map(|(yi, wi)| yi * wi).sum::<f64>() / m as f64;
    for i in 0..m {
        let fitted: f64 = (0..p).map(|j| beta[j] * columns[j][i]).sum();
        rss += w[i] * (y[i] - fitted) * (y[i] - fitted);
        tss += w[i] * (y[i] - ybar) * (y[i] - ybar);
    }
    let df = m - p;
    let sigma2 = rss / df as f64;
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };

    let student = StudentsT::new(0.0, 1.0, df as f64)
        .map_err(|e| EstimationError::InvalidSettings(e.to_string()))?;
    let terms: Vec<CoefficientRow> = (0..p)
        .map(|j| {
            let estimate = beta[j];
            let std_err = (sigma2 * xtwx_inv[(j, j)]).max(0.0).sqrt();
            let (t_stat, p_value) = if std_err > 0.0 {
                let t = estimate / std_err;
                (t, 2.0 * (1.0 - student.cdf(t.abs())))
            } else {
                // an exact fit: infinitely sharp
                (f64::INFINITY * estimate.signum(), 0.0)
            };
            CoefficientRow {
                term: names[j].clone(),
                estimate,
                std_err,
                t_stat,
                p_value,
            }
        })
        .collect();

    Ok(DecompositionResult {
        terms,
        baselines,
        r_squared,
        n_segments: m,
        df,
        weighted: settings.weighted,
    })
}

/// Returns indices of columns that are (numerically) linear combinations of
/// earlier ones, via modified Gram–Schmidt.
fn find_collinear(columns: &[Vec<f64>]) -> Option<Vec<usize>> {
    let m = columns.first()?.len();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut dependent = Vec::new();
    for (j, col) in columns.iter().enumerate() {
        let mut v = col.clone();
        let original: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for b in &basis {
            let proj: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
            for i in 0..m {
                v[i] -= proj * b[i];
            }
        }
        let residual = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if residual <= 1e-10 * original.max(1e-10) {
            dependent.push(j);
        } else {
            for x in &mut v {
                *x /= residual;
            }
            basis.push(v);
        }
    }
    if dependent.is_empty() {
        None
    } else {
        Some(dependent)
    }
}
