//! Elapsed-tenure distribution across the stock of employed workers.
//!
//! In steady state, workers flow into jobs at the bottom of the wage ladder
//! and climb it by accepting outside offers, so the elapsed tenure observed in
//! a cross-section is *not* exponential: long spells are over-represented at
//! high wages where the separation hazard is low. Integrating the
//! wage-conditional spell distribution over the equilibrium wage distribution
//! gives the stock density
//!
//! ```text
//! psi(t) = delta (1 + k) / k * [E1(delta t) - E1(delta (1 + k) t)]
//! ```
//!
//! with `E1` the exponential integral. The cdf follows from the antiderivative
//! `J(c) = t E1(c t) + (1 - e^(-c t)) / c` of `E1(c t)`:
//!
//! ```text
//! Psi(t) = delta (1 + k) / k * [J(delta) - J(delta (1 + k))]
//! ```
//!
//! Both expressions are differences of nearly equal terms when `k` is small,
//! so a second-order expansion in `k` takes over below a threshold; at `k = 0`
//! the distribution collapses to the exponential with rate `delta`, which the
//! expansion reproduces exactly in the limit. These functions are what the
//! wage-free duration estimators maximise against grouped tenure tables.

use crate::special::exp_integral_e1;

/// Below this, the direct formulas lose too many digits to cancellation and
/// the series branch in `k` is used instead.
const SMALL_K: f64 = 1e-6;

fn domain_ok(t: f64, k: f64, delta: f64) -> bool {
    t.is_finite() && t >= 0.0 && k.is_finite() && k >= 0.0 && delta.is_finite() && delta > 0.0
}

/// Density of elapsed tenure in the employed stock.
///
/// Finite and positive for all `t >= 0`; at `t = 0` the density starts at
/// `delta (1 + k) ln(1 + k) / k` (continuously `delta` as `k -> 0`). Returns
/// `NaN` outside the domain `t >= 0`, `k >= 0`, `delta > 0`.
pub fn estock_density(t: f64, k: f64, delta: f64) -> f64 {
    if !domain_ok(t, k, delta) {
        return f64::NAN;
    }
    if t == 0.0 {
        return if k == 0.0 {
            delta
        } else {
            delta * (1.0 + k) * k.ln_1p() / k
        };
    }
    if k < SMALL_K {
        // psi = delta e^(-x) [1 + k (1 - x) / 2] + O(k^2), x = delta t
        let x = delta * t;
        return delta * (-x).exp() * (1.0 + 0.5 * k * (1.0 - x));
    }
    let x = delta * t;
    let y = delta * (1.0 + k) * t;
    delta * (1.0 + k) / k * (exp_integral_e1(x) - exp_integral_e1(y))
}

/// Cumulative distribution of elapsed tenure in the employed stock.
pub fn estock_cdf(t: f64, k: f64, delta: f64) -> f64 {
    if !domain_ok(t, k, delta) {
        return f64::NAN;
    }
    if t == 0.0 {
        return 0.0;
    }
    if k < SMALL_K {
        // Psi = (1 - e^(-x)) + (k / 2) x e^(-x) + O(k^2), x = delta t
        let x = delta * t;
        return -(-x).exp_m1() + 0.5 * k * x * (-x).exp();
    }
    let c1 = delta;
    let c2 = delta * (1.0 + k);
    let j = |c: f64| t * exp_integral_e1(c * t) + (-(-c * t).exp_m1()) / c;
    (delta * (1.0 + k) / k * (j(c1) - j(c2))).clamp(0.0, 1.0)
}

/// Upper tail `1 - Psi(t)`, computed directly to stay accurate deep in the
/// tail where the cdf saturates at one.
pub fn estock_survival(t: f64, k: f64, delta: f64) -> f64 {
    if !domain_ok(t, k, delta) {
        return f64::NAN;
    }
    if t == 0.0 {
        return 1.0;
    }
    if k < SMALL_K {
        let x = delta * t;
        return ((-x).exp() - 0.5 * k * x * (-x).exp()).max(0.0);
    }
    // 1/c - J(c) = e^(-c t)/c - t E1(c t), which is positive since
    // E1(x) < e^(-x)/x
    let tail = |c: f64| (-c * t).exp() / c - t * exp_integral_e1(c * t);
    let c1 = delta;
    let c2 = delta * (1.0 + k);
    (delta * (1.0 + k) / k * (tail(c1) - tail(c2))).clamp(0.0, 1.0)
}
