//! Plain-text tables printed to stdout.
//!
//! The tables show the same numbers the JSON outputs carry, rounded for
//! reading; the JSON is the machine interface.

use frictions_core::{FitFlag, FrictionEstimate, MonopsonyResult, UnemploymentMixtureEstimate};

pub fn fmt(x: f64) -> String {
    format!("{x:.4}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_else(|| "-".into())
}

pub fn flags_str(flags: &[FitFlag]) -> String {
    if flags.is_empty() {
        return "-".into();
    }
    flags
        .iter()
        .map(|f| {
            serde_json::to_value(f)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default()
        })
        .collect::<Vec<_>>()
        .join(",")
}

/// One row per fit: censoring threshold, the three parameters with their
/// standard errors, and any quality flags.
pub fn friction_table(fits: &[&FrictionEstimate]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:>8}  {:>10} {:>8}  {:>10} {:>8}  {:>10} {:>8}  {:>6}  {}\n",
        "censor", "k", "se_k", "delta", "se_delta", "lambda", "se_lambda", "n", "flags"
    ));
    for est in fits {
        out.push_str(&format!(
            "{:>8}  {:>10} {:>8}  {:>10} {:>8}  {:>10} {:>8}  {:>6}  {}\n",
            est.censor_level
                .map(fmt)
                .unwrap_or_else(|| "none".into()),
            fmt(est.k),
            fmt_opt(est.se_k),
            fmt(est.delta),
            fmt_opt(est.se_delta),
            fmt(est.lambda),
            fmt_opt(est.se_lambda),
            est.n_obs,
            flags_str(&est.flags),
        ));
    }
    out
}

pub fn mixture_table(est: &UnemploymentMixtureEstimate) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:>10} {:>8}  {:>10} {:>10}  {:>13}  {:>6}\n",
        "pi", "se_pi", "lambda0", "se_lambda0", "implied_delta", "n"
    ));
    out.push_str(&format!(
        "{:>10} {:>8}  {:>10} {:>10}  {:>13}  {:>6}\n",
        fmt(est.pi),
        fmt_opt(est.se_pi),
        fmt(est.lambda0),
        fmt_opt(est.se_lambda0),
        fmt_opt(est.implied_delta),
        est.n_obs,
    ));
    out
}

/// Per-segment index table: label, size, the index with its uncertainty,
/// the friction ratio behind it, and flags.
pub fn mu_table(rows: &[&MonopsonyResult]) -> String {
    let label_width = rows
        .iter()
        .map(|r| r.segment.label().len())
        .chain(std::iter::once("segment".len()))
        .max()
        .unwrap_or(7);
    let mut out = String::new();
    out.push_str(&format!(
        "{:<label_width$}  {:>6}  {:>8} {:>8}  {:>8} {:>8}  {:>8}  {}\n",
        "segment", "n", "mu", "se_mu", "ci_low", "ci_high", "k", "flags"
    ));
    for r in rows {
        let (lo, hi) = match r.ci_mu {
            Some((lo, hi)) => (fmt(lo), fmt(hi)),
            None => ("-".into(), "-".into()),
        };
        out.push_str(&format!(
            "{:<label_width$}  {:>6}  {:>8} {:>8}  {:>8} {:>8}  {:>8}  {}\n",
            r.segment.label(),
            r.n_obs,
            fmt(r.mu),
            fmt_opt(r.se_mu),
            lo,
            hi,
            fmt(r.frictions.k),
            flags_str(&r.flags),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use frictions_core::model::EstimatorMethod;

    #[test]
    fn friction_table_shows_every_fit() {
        let mut a =
            FrictionEstimate::from_rates(0.07, 0.168, EstimatorMethod::Parametric, 500).unwrap();
        a.censor_level = Some(10.0);
        a.se_k = Some(0.2);
        let b =
            FrictionEstimate::from_rates(0.08, 0.1, EstimatorMethod::Semiparametric, 20).unwrap();
        let table = friction_table(&[&a, &b]);
        assert_eq!(table.lines().count(), 3);
        assert!(table.contains("10.0000"));
        assert!(table.contains("2.4000"));
        assert!(table.contains("none"));
        // missing standard errors render as a dash
        assert!(table.lines().nth(2).unwrap().contains('-'));
    }

    #[test]
    fn flags_render_in_snake_case() {
        assert_eq!(flags_str(&[]), "-");
        assert_eq!(
            flags_str(&[FitFlag::HighVariance, FitFlag::Fallback]),
            "high_variance,fallback"
        );
    }
}
