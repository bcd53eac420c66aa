//! Friction estimation from the tenure-on-wage-rank regression.
//!
//! Conditional on the wage, elapsed tenure is exponential with hazard
//! `theta(w) = delta + lambda (1 - F(w))`, and substituting the earned-offer
//! relation between `F` and the earned distribution `G` turns the conditional
//! mean into a line in the wage *rank*:
//!
//! ```text
//! E[t | w] = beta0 + beta1 * G(w)
//! beta0 = 1 / (delta (1 + k)),   beta1 = k / (delta (1 + k))
//! ```
//!
//! so a least-squares fit of tenure on the empirical rank identifies the
//! frictions without assuming anything about the shape of the offered-wage
//! distribution:
//!
//! ```text
//! k = beta1 / beta0,   delta = 1 / (beta0 + beta1),   lambda = k * delta
//! ```
//!
//! Standard errors for the frictions follow from the regression covariance by
//! the delta method. [`fit_linear_robust`] replaces the squared loss with a
//! Huber loss (iteratively reweighted least squares), which keeps a handful
//! of implausibly long recorded spells from dragging the slope.

use crate::error::EstimationError;
use crate::model::{
    normal_ci, EmpiricalWageDistribution, EstimatorMethod, FitDiagnostics, FrictionEstimate,
    Observation,
};

/// Fewest observations the regression accepts.
pub const MIN_OBSERVATIONS: usize = 10;

/// Huber tuning constant: 95% efficiency at the normal model.
const HUBER_C: f64 = 1.345;
const ROBUST_MAX_ITER: usize = 50;
const ROBUST_TOL: f64 = 1e-8;

/// Two-parameter regression output: tenure intercept and rank slope.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub beta0: f64,
    pub beta1: f64,
    /// Covariance of `(beta0, beta1)`.
    pub cov: [[f64; 2]; 2],
    /// Residual variance estimate.
    pub sigma2: f64,
    pub r_squared: f64,
    pub n: usize,
    /// Number of reweighting iterations, for the robust variant.
    pub robust_iterations: Option<usize>,
}

impl RegressionFit {
    pub fn se_beta0(&self) -> f64 {
        self.cov[0][0].max(0.0).sqrt()
    }

    pub fn se_beta1(&self) -> f64 {
        self.cov[1][1].max(0.0).sqrt()
    }
}

/// Empirical wage distribution of a sample, honouring survey weights.
pub fn empirical_cdf(
    observations: &[Observation],
) -> Result<EmpiricalWageDistribution, EstimationError> {
    let wages: Vec<f64> = observations.iter().map(|o| o.wage).collect();
    let weights: Vec<f64> = observations.iter().map(|o| o.weight).collect();
    EmpiricalWageDistribution::from_weighted(&wages, &weights)
        .map_err(|e| EstimationError::DegenerateInput(e.to_string()))
}

/// Ordinary (weighted) least squares of tenure on wage rank, mapped to
/// friction parameters.
///
/// Survey weights enter both the rank computation and the regression; unit
/// weights reproduce plain OLS. Censored spells are used as recorded — the
/// regression has no way to treat them — and their presence is noted in the
/// diagnostics, since the parametric route handles them properly.
pub fn fit_linear(
    observations: &[Observation],
) -> Result<(FrictionEstimate, RegressionFit), EstimationError> {
    let (x, y, w) = design(observations)?;
    let (beta0, beta1, xtwx_inv, sw) = wls(&x, &y, &w)?;

    let n = x.len();
    // normalise weights to sum to n so unit weights give the classical
    // unbiased residual variance RSS / (n - 2)
    let norm = n as f64 / sw;
    let mut rss = 0.0;
    let mut tss = 0.0;
    let ybar = y.iter().zip(&w).map(|(yi, wi)| yi * wi).sum::<f64>() / sw;
    for i in 0..n {
        let e = y[i] - beta0 - beta1 * x[i];
        rss += w[i] * norm * e * e;
        tss += w[i] * norm * (y[i] - ybar) * (y[i] - ybar);
    }
    let sigma2 = rss / (n as f64 - 2.0);
    let cov = [
        [sigma2 * xtwx_inv[0][0] / norm, sigma2 * xtwx_inv[0][1] / norm],
        [sigma2 * xtwx_inv[1][0] / norm, sigma2 * xtwx_inv[1][1] / norm],
    ];
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { 0.0 };

    let fit = RegressionFit {
        beta0,
        beta1,
        cov,
        sigma2,
        r_squared,
        n,
        robust_iterations: None,
    };
    let estimate = frictions_from_fit(&fit, observations, EstimatorMethod::Semiparametric, 1)?;
    Ok((estimate, fit))
}

/// Huber-loss variant of [`fit_linear`], fitted by iteratively reweighted
/// least squares with the residual scale re-estimated each round from the
/// median absolute deviation. Standard errors use the M-estimator sandwich.
///
/// Use this when spells may contain gross recording errors. On clean data
/// it is not a drop-in replacement: duration noise is right-skewed with a
/// spread that grows along the rank axis, and downweighting that tail
/// shades the slope — and hence the friction parameter — below the
/// least-squares answer.
pub fn fit_linear_robust(
    observations: &[Observation],
) -> Result<(FrictionEstimate, RegressionFit), EstimationError> {
    let (x, y, w) = design(observations)?;
    let n = x.len();

    // start from the least-squares solution
    let (mut beta0, mut beta1, _, _) = wls(&x, &y, &w)?;
    let y_scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let mut iterations = 0;
    let mut scale = 0.0;
    let mut converged = false;
    while iterations < ROBUST_MAX_ITER {
        iterations += 1;
        let residuals: Vec<f64> = (0..n).map(|i| y[i] - beta0 - beta1 * x[i]).collect();
        scale = mad_scale(&residuals);
        if scale <= 1e-12 * y_scale {
            // at least half the points sit (to rounding) exactly on the
            // line: nothing left to downweight, the current fit is final
            scale = 0.0;
            converged = true;
            break;
        }
        let hw: Vec<f64> = residuals
            .iter()
            .zip(&w)
            .map(|(e, wi)| {
                let u = (e / scale).abs();
                let huber = if u <= HUBER_C { 1.0 } else { HUBER_C / u };
                wi * huber
            })
            .collect();
        let (b0, b1, _, _) = wls(&x, &y, &hw)?;
        let shift = (b0 - beta0).abs().max((b1 - beta1).abs());
        let size = beta0.abs().max(beta1.abs()).max(1.0);
        beta0 = b0;
        beta1 = b1;
        if shift < ROBUST_TOL * size {
            converged = true;
            break;
        }
    }

    // sandwich covariance: A^-1 B A^-1 with
    //   A = sum w psi'(u) x x',  B = sum w psi(u)^2 s^2 x x'
    let cov = if scale == 0.0 {
        [[0.0, 0.0], [0.0, 0.0]]
    } else {
        let mut a = [[0.0f64; 2]; 2];
        let mut b = [[0.0f64; 2]; 2];
        for i in 0..n {
            let e = y[i] - beta0 - beta1 * x[i];
            let u = e / scale;
            let (psi, dpsi) = if u.abs() <= HUBER_C {
                (u, 1.0)
            } else {
                (HUBER_C * u.signum(), 0.0)
            };
            let xi = [1.0, x[i]];
            for r in 0..2 {
                for c in 0..2 {
                    a[r][c] += w[i] * dpsi * xi[r] * xi[c];
                    b[r][c] += w[i] * psi * psi * scale * scale * xi[r] * xi[c];
                }
            }
        }
        let a_inv = invert2(&a).ok_or_else(|| {
            EstimationError::SingularInformation("robust regression sandwich".into())
        })?;
        // A^-1 B A^-1
        let ab = mat2_mul(&a_inv, &b);
        mat2_mul(&ab, &a_inv)
    };

    let mut rss = 0.0;
    let mut tss = 0.0;
    let sw: f64 = w.iter().sum();
    let ybar = y.iter().zip(&w).map(|(yi, wi)| yi * wi).sum::<f64>() / sw;
    for i in 0..n {
        let e = y[i] - beta0 - beta1 * x[i];
        rss += w[i] * e * e;
        tss += w[i] * (y[i] - ybar) * (y[i] - ybar);
    }

    let fit = RegressionFit {
        beta0,
        beta1,
        cov,
        sigma2: scale * scale,
        r_squared: if tss > 0.0 { 1.0 - rss / tss } else { 0.0 },
        n,
        robust_iterations: Some(iterations),
    };
    let mut estimate = frictions_from_fit(
        &fit,
        observations,
        EstimatorMethod::SemiparametricRobust,
        iterations,
    )?;
    estimate.diagnostics.converged = converged;
    if !converged {
        estimate
            .diagnostics
            .notes
            .push(format!("reweighting stopped at {ROBUST_MAX_ITER} iterations"));
    }
    estimate.validate().map_err(map_model)?;
    Ok((estimate, fit))
}

/// Builds the regression design: ranks `x`, spells `y`, weights `w`.
fn design(
    observations: &[Observation],
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), EstimationError> {
    if observations.len() < MIN_OBSERVATIONS {
        return Err(EstimationError::NotEnoughData {
            n: observations.len(),
            required: MIN_OBSERVATIONS,
        });
    }
    let cdf = empirical_cdf(observations)?;
    let x: Vec<f64> = observations.iter().map(|o| cdf.value_at(o.wage)).collect();
    let y: Vec<f64> = observations.iter().map(|o| o.elapsed_spell).collect();
    let w: Vec<f64> = observations.iter().map(|o| o.weight).collect();
    Ok((x, y, w))
}

/// Weighted least squares for `y = b0 + b1 x`. Returns the coefficients, the
/// inverse weighted cross-product matrix, and the weight total.
#[allow(clippy::type_complexity)]
fn wls(
    x: &[f64],
    y: &[f64],
    w: &[f64],
) -> Result<(f64, f64, [[f64; 2]; 2], f64), EstimationError> {
    let sw: f64 = w.iter().sum();
    let swx: f64 = x.iter().zip(w).map(|(xi, wi)| xi * wi).sum();
    let swy: f64 = y.iter().zip(w).map(|(yi, wi)| yi * wi).sum();
    let swxx: f64 = x.iter().zip(w).map(|(xi, wi)| xi * xi * wi).sum();
    let swxy: f64 = x
        .iter()
        .zip(y)
        .zip(w)
        .map(|((xi, yi), wi)| xi * yi * wi)
        .sum();
    let det = sw * swxx - swx * swx;
    if det.abs() < 1e-12 * sw * sw.max(1.0) {
        return Err(EstimationError::DegenerateInput(
            "wage ranks carry no variation (all wages equal?)".into(),
        ));
    }
    let beta1 = (sw * swxy - swx * swy) / det;
    let beta0 = (swy - beta1 * swx) / sw;
    let inv = [[swxx / det, -swx / det], [-swx / det, sw / det]];
    Ok((beta0, beta1, inv, sw))
}

/// Median absolute deviation scaled to be consistent for the normal sd.
fn mad_scale(residuals: &[f64]) -> f64 {
    let mut abs: Vec<f64> = residuals.iter().map(|e| e.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let median = crate::model::quantile_sorted(&abs, 0.5);
    median / 0.6745
}

fn invert2(m: &[[f64; 2]; 2]) -> Option<[[f64; 2]; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.abs() < 1e-300 || !det.is_finite() {
        return None;
    }
    Some([
        [m[1][1] / det, -m[0][1] / det],
        [-m[1][0] / det, m[0][0] / det],
    ])
}

fn mat2_mul(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut out = [[0.0; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            for i in 0..2 {
                out[r][c] += a[r][i] * b[i][c];
            }
        }
    }
    out
}

fn map_model(e: crate::model::ModelError) -> EstimationError {
    EstimationError::DegenerateInput(e.to_string())
}

/// Maps regression coefficients to frictions with delta-method uncertainty.
fn frictions_from_fit(
    fit: &RegressionFit,
    observations: &[Observation],
    method: EstimatorMethod,
    iterations: usize,
) -> Result<FrictionEstimate, EstimationError> {
    let (b0, b1) = (fit.beta0, fit.beta1);
    if b0 <= 0.0 || b1 < 0.0 {
        return Err(EstimationError::SignRestriction {
            beta0: b0,
            beta1: b1,
        });
    }
    let s = b0 + b1;
    let k = b1 / b0;
    let delta = 1.0 / s;
    let lambda = k * delta;

    // delta method: gradients of (k, delta, lambda) in (beta0, beta1)
    let grad_k = [-b1 / (b0 * b0), 1.0 / b0];
    let grad_d = [-1.0 / (s * s), -1.0 / (s * s)];
    let grad_l = [-b1 * (2.0 * b0 + b1) / (b0 * b0 * s * s), 1.0 / (s * s)];
    let var = |g: [f64; 2]| -> f64 {
        g[0] * g[0] * fit.cov[0][0]
            + 2.0 * g[0] * g[1] * fit.cov[0][1]
            + g[1] * g[1] * fit.cov[1][1]
    };

    let mut estimate = FrictionEstimate::from_rates(delta, lambda, method, fit.n)
        .map_err(map_model)?;
    let level = estimate.ci_level;
    for (point, variance, se_slot, ci_slot) in [
        (k, var(grad_k), &mut estimate.se_k, &mut estimate.ci_k),
        (
            delta,
            var(grad_d),
            &mut estimate.se_delta,
            &mut estimate.ci_delta,
        ),
        (
            lambda,
            var(grad_l),
            &mut estimate.se_lambda,
            &mut estimate.ci_lambda,
        ),
    ] {
        if variance.is_finite() && variance >= 0.0 {
            let se = variance.sqrt();
            *se_slot = Some(se);
            *ci_slot = Some(normal_ci(point, se, level));
        }
    }

    estimate.diagnostics = FitDiagnostics {
        iterations,
        converged: true,
        log_likelihood: None,
        notes: Vec::new(),
    };
    let censored = observations.iter().filter(|o| o.censored).count();
    if censored > 0 {
        estimate.diagnostics.notes.push(format!(
            "{censored} censored spells entered the regression as recorded; \
             the parametric route models censoring explicitly"
        ));
    }
    estimate.validate().map_err(map_model)?;
    Ok(estimate)
}
