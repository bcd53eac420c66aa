#!/usr/bin/env python3
"""End-to-end smoke test for the `frictions` Python module.

Run after an editable install of crates/python:

    pip install -e crates/python --no-build-isolation
    python3 python/smoke_test.py

Covers simulation, every estimation route, the power index with its exact
currency invariance, the segment decomposition, dataset loading through a
manifest, and the error paths. Plain asserts, no test framework needed.
"""

import math
import tempfile
from pathlib import Path

import frictions

CHECKS = 0


def check(condition, label):
    global CHECKS
    assert condition, f"check failed: {label}"
    CHECKS += 1


BASE_SCENARIO = """
lambda = 0.168
delta = 0.07
n_workers = 2500
seed = 42
[offered_wages]
log_mean = 7.0
log_sd = 0.6
[unemployment]
pi = 0.25
lambda0 = 0.8
n_unemployed = 1500
class_bounds = [0.0, 0.5, 1.0, 1.5, 2.5, 4.0, 6.0, 9.0]
"""

PANEL_SCENARIO = """
lambda = 0.168
delta = 0.07
seed = 58
[offered_wages]
log_mean = 7.0
log_sd = 0.6
""" + "".join(
    f"""
[[segments]]
sector = "{sector}"
education = "{education}"
age_band = "21-30"
year = {year}
n = 250
{'lambda = 0.1' if sector == 'manufacturing' else ''}
"""
    for sector in ("manufacturing", "services")
    for education in ("primary", "secondary")
    for year in (2018, 2019)
)


def closed_forms():
    k, delta = 2.4, 0.07
    at_zero = frictions.estock_density(0.0, k, delta)
    check(
        abs(at_zero - delta * (1 + k) * math.log(1 + k) / k) < 1e-12,
        "stock density at zero",
    )
    for t in (0.5, 3.0, 12.0):
        total = frictions.estock_cdf(t, k, delta) + frictions.estock_survival(t, k, delta)
        check(abs(total - 1.0) < 1e-12, f"cdf + survival = 1 at t={t}")
    check(
        abs(frictions.estock_density(4.0, 0.0, delta) - delta * math.exp(-delta * 4.0)) < 1e-12,
        "zero-friction limit is exponential",
    )


def conditional_fits(observations):
    ols = frictions.fit_linear(observations)
    robust = frictions.fit_linear_robust(observations)
    mle = frictions.fit_mle(observations)
    check(abs(ols.k - 2.4) < 3 * ols.se_k, "regression recovers k")
    check(abs(mle.k - 2.4) < 3 * mle.se_k, "likelihood recovers k")
    check(mle.se_k < ols.se_k, "likelihood is more efficient")
    check(robust.method == "semiparametric_robust", "robust method name")
    check(ols.ci_k[0] < ols.k < ols.ci_k[1], "CI brackets the point estimate")

    truncated = frictions.fit_mle(observations, censor_level=8.0)
    check(truncated.censor_level == 8.0, "censor level recorded")
    check(abs(truncated.k - 2.4) < 3 * truncated.se_k, "censored fit recovers k")

    grouped = frictions.fit_mle_grouped(observations, [0.0, 1.0, 3.0, 6.0, 10.0, 15.0])
    check(abs(grouped.k - 2.4) < 3 * grouped.se_k, "interval-censored fit recovers k")
    check(grouped.se_k > mle.se_k, "grouping loses information")

    d = mle.to_dict()
    check(
        d["method"] == "parametric" and "diagnostics" in d,
        "to_dict carries method and diagnostics",
    )
    return ols


def stock_fit(observations):
    bounds = [0.0, 0.5, 1.0, 1.5, 2.5, 4.0, 6.0, 9.0, 13.0, 18.0, 25.0, 35.0]
    freq = [0] * len(bounds)
    for obs in observations:
        cls = 0
        for j, lo in enumerate(bounds):
            if obs.elapsed_spell >= lo:
                cls = j
        freq[cls] += 1
    est = frictions.fit_estock_grouped(bounds, freq)
    check(abs(est.k - 2.4) < 3 * est.se_k, "stock fit recovers k without wages")
    check(abs(est.delta - 0.07) < 3 * est.se_delta, "stock fit recovers delta")
    check("high_variance" in est.flags, "stock route is flagged high variance")


def unemployment(scenario):
    bounds, freq = scenario.simulate_unemployment()
    mix = frictions.fit_unemployment_mixture(bounds, freq)
    check(abs(mix.pi - 0.25) < 3 * mix.se_pi, "mixture recovers the stayer share")
    check(abs(mix.lambda0 - 0.8) < 3 * mix.se_lambda0, "mixture recovers the exit rate")
    check(mix.implied_delta is None, "no implied rate without an unemployment rate")

    with_rate = frictions.fit_unemployment_mixture(bounds, freq, unemployment_rate=0.06)
    implied = (1 - with_rate.pi) * with_rate.lambda0 * 0.06 / (1 - 0.06)
    check(
        with_rate.implied_delta is not None
        and abs(with_rate.implied_delta - implied) < 1e-12,
        "implied job-destruction rate",
    )


def power_index(observations):
    result = frictions.segment_mu(observations, bootstrap=120, seed=3)
    check(0.0 < result.mu < 1.0, "index lies in (0, 1)")
    check(result.ci_mu[0] <= result.mu <= result.ci_mu[1], "bootstrap CI brackets")
    check(result.floor_wage < result.mean_wage, "floor below mean")

    again = frictions.segment_mu(observations, bootstrap=120, seed=3)
    check(again.mu == result.mu and again.se_mu == result.se_mu, "same seed, same result")

    rescaled = [
        frictions.Observation(
            wage=o.wage * 1024.0,
            elapsed_spell=o.elapsed_spell,
            censored=o.censored,
            weight=o.weight,
        )
        for o in observations
    ]
    scaled = frictions.segment_mu(rescaled, bootstrap=120, seed=3)
    check(scaled.mu == result.mu, "index is exactly currency invariant")
    check(scaled.floor_wage == result.floor_wage * 1024.0, "floor scales exactly")

    check(frictions.mu_index(1500.0, 300.0, 0.0) == 1.0, "no frictions, full extraction")
    check(frictions.mu_index(500.0, 500.0, 2.4) == 0.0, "flat wages, no extraction")

    wages = [o.wage for o in observations]
    check(frictions.wage_floor(wages) in wages, "floor is an actual observation")


def panel():
    scenario = frictions.Scenario.from_path(write_panel_scenario())
    observations = scenario.simulate()
    results, failures, skip = frictions.segment_mu_all(
        observations, min_segment_size=100, bootstrap=80, seed=9
    )
    check(len(results) == 8 and not failures, "all eight segments fit")
    check(skip["observations_skipped"] == 0, "nothing skipped")

    by_sector = {}
    for r in results:
        sector = r.segment.split("|")[0]
        by_sector.setdefault(sector, []).append(r.mu)
    manu = sum(by_sector["manufacturing"]) / len(by_sector["manufacturing"])
    serv = sum(by_sector["services"]) / len(by_sector["services"])
    check(manu > serv, "slower arrivals mean more wage-setting power")

    fit = frictions.decompose(results)
    terms = {t["term"]: t for t in fit["terms"]}
    check("sector=services" in terms and terms["sector=services"]["estimate"] < 0,
          "decomposition attributes the sector gap")
    check(fit["df"] == 8 - len(terms), "degrees of freedom")
    check("term" in fit["table"] and "reference:" in fit["table"], "rendered table")
    print(fit["table"])


def write_panel_scenario():
    path = Path(tempfile.mkdtemp()) / "panel.toml"
    path.write_text(PANEL_SCENARIO)
    return path


def dataset_roundtrip(observations):
    root = Path(tempfile.mkdtemp())
    rows = ["wage,tenure,censored,weight,hours,age,sector,education,region,gender,year"]
    for o in observations:
        rows.append(
            f"{o.wage!r},{o.elapsed_spell!r},{str(o.censored).lower()},"
            f"{o.weight!r},40.0,25,services,secondary,,,"
        )
    (root / "workers.csv").write_text("\n".join(rows) + "\n")
    (root / "manifest.toml").write_text(
        """
name = "smoke"
csv_path = "workers.csv"

[columns]
wage = "wage"
tenure = "tenure"
censored = "censored"
weight = "weight"
hours = "hours"
age = "age"
sector = "sector"
education = "education"

[filters]
min_hours = 35.0
age_range = [21, 30]

[schema]
sectors = ["services"]
educations = ["secondary"]
age_bands = [[21, 30]]
"""
    )
    loaded, report = frictions.load_dataset(root / "manifest.toml")
    check(report["rows_read"] == len(observations), "all rows read")
    check(report["rows_kept"] == len(observations), "no rows dropped")
    check(len(loaded) == len(observations), "observation count survives")
    check(
        math.isclose(loaded[0].wage, observations[0].wage, rel_tol=0, abs_tol=0),
        "wages survive the CSV round trip exactly",
    )


def error_paths():
    try:
        frictions.fit_linear([])
    except frictions.EstimationError as e:
        check("10" in str(e), "tiny samples are rejected with the minimum size")
    else:
        raise AssertionError("fit on empty sample should raise EstimationError")

    try:
        frictions.segment_mu([], estimator="banana")
    except ValueError:
        check(True, "unknown estimator raises ValueError")
    else:
        raise AssertionError("unknown estimator should raise ValueError")

    try:
        frictions.fit_estock_grouped([5.0, 1.0], [10, 10])
    except ValueError:
        check(True, "descending bounds raise ValueError")
    else:
        raise AssertionError("descending bounds should raise ValueError")

    try:
        frictions.Observation(wage=-1.0, elapsed_spell=2.0)
    except ValueError:
        check(True, "negative wages are rejected")
    else:
        raise AssertionError("negative wage should raise ValueError")


def main():
    closed_forms()

    scenario = frictions.Scenario.from_toml(BASE_SCENARIO)
    check(scenario.k == 2.4 and scenario.lambda_ == 0.168, "scenario parses")
    check("lambda = 0.168" in scenario.to_toml(), "scenario round-trips to TOML")
    observations = scenario.simulate()
    check(len(observations) == 2500, "simulation honours the sample size")

    conditional_fits(observations)
    stock_fit(observations)
    unemployment(scenario)
    power_index(observations)
    panel()
    dataset_roundtrip(observations[:200])
    error_paths()

    print(f"ok: {CHECKS} checks passed")


if __name__ == "__main__":
    main()
