//! Implementations of the four subcommands and the JSON shapes they write.
//!
//! Every command writes a single top-level JSON document carrying
//! `schema_version`, the [`RunRecord`], and either results or a structured
//! error body. Failures after argument parsing still produce that document
//! before the process exits nonzero, so batch callers always have something
//! machine-readable to inspect.

use crate::record::RunRecord;
use crate::tables;
use crate::{
    AggregateMode, CommandError, DecomposeArgs, EstimateArgs, Method, MonopsonyArgs, MuMethod,
    SimulateArgs, SCHEMA_VERSION,
};
use frictions_core::ingest::{load_dataset, segmentize, DatasetManifest, DropReport, SkipReport};
use frictions_core::monopsony::{
    aggregate_mu, decompose as decompose_mu, segment_mu, segment_mu_all, DecompositionResult,
    DecompositionSettings, MonopsonySettings, MuEstimator,
};
use frictions_core::parametric::{fit_mle, fit_mle_grouped, CensoringMode, MleSettings};
use frictions_core::semiparametric::{fit_linear, fit_linear_robust};
use frictions_core::sim::{write_dataset, Scenario};
use frictions_core::unconditional::{fit_estock_grouped, fit_unemployment_mixture};
use frictions_core::{
    EstimationError, FrictionEstimate, GroupedDurations, MonopsonyResult,
    UnemploymentMixtureEstimate,
};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Machine-readable error carried inside output JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub kind: String,
    pub message: String,
}

fn error_body(e: &EstimationError) -> ErrorBody {
    let kind = match e {
        EstimationError::NotEnoughData { .. } => "not_enough_data",
        EstimationError::DegenerateInput(_) => "degenerate_input",
        EstimationError::SignRestriction { .. } => "sign_restriction",
        EstimationError::NonConvergence { .. } => "non_convergence",
        EstimationError::SingularInformation(_) => "singular_information",
        EstimationError::NonFiniteObjective { .. } => "non_finite_objective",
        EstimationError::InvalidSettings(_) => "invalid_settings",
    };
    ErrorBody {
        kind: kind.into(),
        message: e.to_string(),
    }
}

fn usage(msg: impl Into<String>) -> CommandError {
    CommandError::Usage(msg.into())
}

fn failed(e: impl std::fmt::Display) -> CommandError {
    CommandError::Failed(e.to_string())
}

/// Serialises `value` as pretty JSON with a trailing newline.
fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CommandError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CommandError::Failed(format!("serialisation failed: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|e| CommandError::Failed(format!("cannot write {}: {e}", path.display())))
}

fn write_csv_rows(
    path: &Path,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<(), CommandError> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| CommandError::Failed(format!("cannot write {}: {e}", path.display())))?;
    let io = |e: csv::Error| CommandError::Failed(format!("cannot write {}: {e}", path.display()));
    writer.write_record(header).map_err(io)?;
    for row in rows {
        writer.write_record(row).map_err(io)?;
    }
    writer
        .flush()
        .map_err(|e| CommandError::Failed(format!("cannot write {}: {e}", path.display())))
}

fn opt_str(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

// ---------------------------------------------------------------------------
// simulate

/// Starter scenario written by `simulate --write-template`.
const SCENARIO_TEMPLATE: &str = r#"# Synthetic labour-market scenario.
#
# lambda is the offer-arrival rate for employed workers, delta the
# job-destruction rate; their ratio k = lambda / delta drives how strongly
# tenure rises with the wage rank.
lambda = 0.168
delta = 0.07
n_workers = 5000
seed = 1

# Spells above this many time units are recorded at the threshold and
# flagged as censored. Remove the line for fully observed spells.
censor_level = 20.0

# Offered wages are lognormal, parameterised on the log scale.
[offered_wages]
log_mean = 7.0
log_sd = 0.6

# Unemployment side: a share pi never transitions into employment, the rest
# leave at rate lambda0. Durations are written grouped on class_bounds.
[unemployment]
pi = 0.05
lambda0 = 0.4
n_unemployed = 2000
class_bounds = [0.0, 2.0, 5.0, 15.0]

# For a heterogeneous market, delete n_workers above and describe explicit
# segments instead; unset per-segment values inherit the scenario level.
#
# [[segments]]
# sector = "services"
# education = "secondary"
# age_band = "21-30"
# n = 3000
#
# [[segments]]
# sector = "manufacturing"
# education = "primary"
# age_band = "31-45"
# n = 2000
# lambda = 0.10
"#;

#[derive(Debug, Serialize)]
struct SimulateReport {
    schema_version: u32,
    run: RunRecord,
    /// Files written, keyed by role.
    files: serde_json::Value,
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CommandError> {
    if args.write_template {
        std::fs::write(&args.scenario, SCENARIO_TEMPLATE).map_err(|e| {
            CommandError::Failed(format!("cannot write {}: {e}", args.scenario.display()))
        })?;
        println!("wrote scenario template to {}", args.scenario.display());
        return Ok(());
    }
    let out = args.out.as_ref().expect("clap requires --out here");
    let scenario = Scenario::from_path(&args.scenario).map_err(failed)?;
    let paths = write_dataset(&scenario, out).map_err(failed)?;

    let mut run = RunRecord::new("simulate");
    run.add_input(&args.scenario)?;
    run.seed = Some(scenario.seed);
    run.settings = serde_json::json!({
        "n_employed": scenario.resolved_segments().iter().map(|s| s.n).sum::<usize>(),
        "n_unemployed": scenario.unemployment.as_ref().map(|u| u.n_unemployed),
        "censor_level": scenario.censor_level,
    });
    let report = SimulateReport {
        schema_version: SCHEMA_VERSION,
        run,
        files: serde_json::json!({
            "csv": paths.csv.display().to_string(),
            "truth": paths.truth.display().to_string(),
            "manifest": paths.manifest.display().to_string(),
            "unemployment": paths.unemployment.as_ref().map(|p| p.display().to_string()),
        }),
    };
    write_json(&out.join("run.json"), &report)?;

    println!("wrote {}", paths.csv.display());
    println!("wrote {}", paths.truth.display());
    println!("wrote {}", paths.manifest.display());
    if let Some(u) = &paths.unemployment {
        println!("wrote {}", u.display());
    }
    println!("wrote {}", out.join("run.json").display());
    Ok(())
}

// ---------------------------------------------------------------------------
// estimate

/// One fit of the sweep: the threshold it ran under and either the estimate
/// or the error.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitOutcome {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub censor_level: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<FrictionEstimate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

fn outcome(censor: Option<f64>, result: Result<FrictionEstimate, EstimationError>) -> FitOutcome {
    match result {
        Ok(mut est) => {
            if censor.is_some() {
                est.censor_level = censor;
            }
            FitOutcome {
                censor_level: est.censor_level,
                estimate: Some(est),
                error: None,
            }
        }
        Err(e) => FitOutcome {
            censor_level: censor,
            estimate: None,
            error: Some(error_body(&e)),
        },
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EstimateReport {
    pub schema_version: u32,
    pub run: RunRecord,
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drop_report: Option<DropReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fits: Vec<FitOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixture: Option<UnemploymentMixtureEstimate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

fn check_bounds(bounds: &[f64]) -> Result<(), CommandError> {
    if bounds.len() < 2 {
        return Err(usage(
            "grouped methods need --bounds with at least two ascending class lower bounds",
        ));
    }
    if bounds[0] < 0.0 || !bounds[0].is_finite() {
        return Err(usage("--bounds must start at a finite, non-negative value"));
    }
    for pair in bounds.windows(2) {
        if !(pair[1].is_finite() && pair[1] > pair[0]) {
            return Err(usage("--bounds must be strictly ascending"));
        }
    }
    Ok(())
}

pub fn estimate(args: &EstimateArgs) -> Result<(), CommandError> {
    let grouped = matches!(args.method, Method::GroupedEstock | Method::GroupedInterval);
    if !args.censor_level.is_empty() && args.method != Method::Parametric {
        return Err(usage("--censor-level only applies to --method parametric"));
    }
    for &c in &args.censor_level {
        if !(c.is_finite() && c > 0.0) {
            return Err(usage(format!(
                "--censor-level values must be positive and finite, got {c}"
            )));
        }
    }
    if grouped {
        check_bounds(&args.bounds)?;
    } else if !args.bounds.is_empty() {
        return Err(usage("--bounds only applies to the grouped methods"));
    }
    if args.method == Method::UnemploymentMixture {
        if args.unemployment.is_none() {
            return Err(usage("--method unemployment_mixture needs --unemployment FILE"));
        }
    } else {
        if args.unemployment.is_some() || args.unemployment_rate.is_some() {
            return Err(usage(
                "--unemployment and --unemployment-rate only apply to --method unemployment_mixture",
            ));
        }
        if args.manifest.is_none() {
            return Err(usage("--manifest is required for this method"));
        }
    }

    let mut run = RunRecord::new("estimate");
    run.settings = serde_json::json!({
        "method": args.method.as_str(),
        "censor_levels": args.censor_level,
        "bounds": args.bounds,
        "unemployment_rate": args.unemployment_rate,
        "ignore_weights": args.ignore_weights,
    });
    let mut report = EstimateReport {
        schema_version: SCHEMA_VERSION,
        run,
        method: args.method.as_str().into(),
        drop_report: None,
        fits: Vec::new(),
        mixture: None,
        error: None,
    };

    if args.method == Method::UnemploymentMixture {
        let path = args.unemployment.as_ref().expect("validated");
        report.run.add_input(path)?;
        let text = std::fs::read_to_string(path)
            .map_err(|e| CommandError::Failed(format!("cannot read {}: {e}", path.display())))?;
        let raw: GroupedDurations = serde_json::from_str(&text)
            .map_err(|e| CommandError::Failed(format!("cannot parse {}: {e}", path.display())))?;
        // re-run the constructor: serde restores fields without checking them
        let grouped = GroupedDurations::new(raw.boundaries().to_vec(), raw.frequencies().to_vec())
            .map_err(|e| CommandError::Failed(format!("{}: {e}", path.display())))?;
        return match fit_unemployment_mixture(&grouped, args.unemployment_rate) {
            Ok(est) => {
                print!("{}", tables::mixture_table(&est));
                if let Some(csv_path) = &args.csv {
                    write_csv_rows(
                        csv_path,
                        &["pi", "se_pi", "lambda0", "se_lambda0", "implied_delta", "n_obs"],
                        &[vec![
                            est.pi.to_string(),
                            opt_str(est.se_pi),
                            est.lambda0.to_string(),
                            opt_str(est.se_lambda0),
                            opt_str(est.implied_delta),
                            est.n_obs.to_string(),
                        ]],
                    )?;
                }
                report.mixture = Some(est);
                write_json(&args.out, &report)
            }
            Err(e) => {
                report.error = Some(error_body(&e));
                write_json(&args.out, &report)?;
                Err(failed(e))
            }
        };
    }

    let manifest_path = args.manifest.as_ref().expect("validated");
    let manifest = DatasetManifest::from_path(manifest_path).map_err(failed)?;
    report.run.add_input(manifest_path)?;
    report.run.add_input(&manifest.csv_path)?;
    let loaded = load_dataset(&manifest).map_err(failed)?;
    report.drop_report = Some(loaded.report);
    let mut observations = loaded.observations;
    if args.ignore_weights {
        for o in &mut observations {
            o.weight = 1.0;
        }
    }

    report.fits = match args.method {
        Method::Semiparametric => {
            vec![outcome(None, fit_linear(&observations).map(|(e, _)| e))]
        }
        Method::SemiparametricRobust => {
            vec![outcome(None, fit_linear_robust(&observations).map(|(e, _)| e))]
        }
        Method::Parametric => {
            if args.censor_level.is_empty() {
                vec![outcome(None, fit_mle(&observations, &MleSettings::default()))]
            } else {
                args.censor_level
                    .iter()
                    .map(|&c| {
                        let settings = MleSettings {
                            censoring: CensoringMode::Threshold(c),
                            ..Default::default()
                        };
                        outcome(Some(c), fit_mle(&observations, &settings))
                    })
                    .collect()
            }
        }
        Method::GroupedInterval => vec![outcome(
            None,
            fit_mle_grouped(&observations, &args.bounds, &MleSettings::default()),
        )],
        Method::GroupedEstock => {
            let spells: Vec<f64> = observations.iter().map(|o| o.elapsed_spell).collect();
            let fit = GroupedDurations::from_spells(&spells, args.bounds.clone())
                .map_err(|e| EstimationError::DegenerateInput(e.to_string()))
                .and_then(|g| fit_estock_grouped(&g));
            vec![outcome(None, fit)]
        }
        Method::UnemploymentMixture => unreachable!("handled above"),
    };

    let estimates: Vec<&FrictionEstimate> =
        report.fits.iter().filter_map(|f| f.estimate.as_ref()).collect();
    if !estimates.is_empty() {
        print!("{}", tables::friction_table(&estimates));
    }
    for fit in report.fits.iter().filter(|f| f.error.is_some()) {
        let err = fit.error.as_ref().expect("filtered");
        match fit.censor_level {
            Some(c) => eprintln!("fit at censor level {c} failed: {}", err.message),
            None => eprintln!("fit failed: {}", err.message),
        }
    }

    if let Some(csv_path) = &args.csv {
        let rows: Vec<Vec<String>> = estimates
            .iter()
            .map(|e| {
                vec![
                    opt_str(e.censor_level),
                    e.k.to_string(),
                    opt_str(e.se_k),
                    e.delta.to_string(),
                    opt_str(e.se_delta),
                    e.lambda.to_string(),
                    opt_str(e.se_lambda),
                    e.n_obs.to_string(),
                    tables::flags_str(&e.flags),
                ]
            })
            .collect();
        write_csv_rows(
            csv_path,
            &[
                "censor_level",
                "k",
                "se_k",
                "delta",
                "se_delta",
                "lambda",
                "se_lambda",
                "n_obs",
                "flags",
            ],
            &rows,
        )?;
    }

    if estimates.is_empty() {
        let first = report
            .fits
            .iter()
            .find_map(|f| f.error.clone())
            .expect("no estimates implies an error");
        report.error = Some(first.clone());
        write_json(&args.out, &report)?;
        return Err(CommandError::Failed(first.message));
    }
    write_json(&args.out, &report)
}

// ---------------------------------------------------------------------------
// monopsony

#[derive(Debug, Serialize, Deserialize)]
pub struct SegmentOutcome {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<MonopsonyResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum AggregateReport {
    /// Employment-weighted average of the per-segment indices.
    Weighted {
        mu: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        se: Option<f64>,
        n_segments: usize,
        total_obs: usize,
    },
    /// One index estimated on all surviving observations pooled together.
    Pooled {
        mu: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        se: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ci: Option<(f64, f64)>,
        n_obs: usize,
    },
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MonopsonyReport {
    pub schema_version: u32,
    pub run: RunRecord,
    pub estimator: String,
    pub drop_report: DropReport,
    pub skip_report: SkipReport,
    pub segments: Vec<SegmentOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregate: Option<AggregateReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

fn mu_estimator(m: MuMethod) -> MuEstimator {
    match m {
        MuMethod::Semiparametric => MuEstimator::Semiparametric,
        MuMethod::SemiparametricRobust => MuEstimator::SemiparametricRobust,
        MuMethod::Parametric => MuEstimator::Parametric,
    }
}

fn mu_method_str(m: MuMethod) -> &'static str {
    match m {
        MuMethod::Semiparametric => "semiparametric",
        MuMethod::SemiparametricRobust => "semiparametric_robust",
        MuMethod::Parametric => "parametric",
    }
}

/// Series label for the long-format CSV: the segment key without the year,
/// which gets its own column.
fn series_label(result: &MonopsonyResult) -> String {
    let mut key = result.segment.clone();
    key.year = None;
    key.label()
}

pub fn monopsony(args: &MonopsonyArgs) -> Result<(), CommandError> {
    if (args.trend || args.unweighted) && !args.decompose {
        return Err(usage("--trend and --unweighted only apply together with --decompose"));
    }
    let manifest = DatasetManifest::from_path(&args.manifest).map_err(failed)?;
    let mut run = RunRecord::new("monopsony");
    run.add_input(&args.manifest)?;
    run.add_input(&manifest.csv_path)?;
    run.seed = Some(args.seed);
    run.settings = serde_json::json!({
        "estimator": mu_method_str(args.estimator),
        "bootstrap": args.bootstrap,
        "min_segment_size": args.min_segment_size,
        "aggregate": match args.aggregate {
            AggregateMode::Weighted => "weighted",
            AggregateMode::Pooled => "pooled",
        },
        "ignore_weights": args.ignore_weights,
        "decompose": args.decompose,
        "trend": args.trend,
        "unweighted": args.unweighted,
    });

    let loaded = load_dataset(&manifest).map_err(failed)?;
    let mut observations = loaded.observations;
    if args.ignore_weights {
        for o in &mut observations {
            o.weight = 1.0;
        }
    }
    let pooled_obs = observations.clone();
    let (segments, skip_report) = segmentize(observations, args.min_segment_size);

    std::fs::create_dir_all(&args.out_dir).map_err(|e| {
        CommandError::Failed(format!("cannot create {}: {e}", args.out_dir.display()))
    })?;
    let results_path = args.out_dir.join("results.json");
    let csv_path = args.out_dir.join("results.csv");

    let mut report = MonopsonyReport {
        schema_version: SCHEMA_VERSION,
        run,
        estimator: mu_method_str(args.estimator).into(),
        drop_report: loaded.report,
        skip_report,
        segments: Vec::new(),
        aggregate: None,
        error: None,
    };

    if segments.is_empty() {
        report.error = Some(ErrorBody {
            kind: "not_enough_data".into(),
            message: format!(
                "no segment reached the minimum size of {}",
                args.min_segment_size
            ),
        });
        write_json(&results_path, &report)?;
        return Err(CommandError::Failed(format!(
            "no segment reached the minimum size of {}; see {}",
            args.min_segment_size,
            results_path.display()
        )));
    }

    let settings = MonopsonySettings {
        bootstrap: args.bootstrap,
        seed: args.seed,
        estimator: mu_estimator(args.estimator),
    };
    let mut successes: Vec<MonopsonyResult> = Vec::new();
    for (key, result) in segment_mu_all(&segments, &settings) {
        match result {
            Ok(r) => {
                successes.push(r.clone());
                report.segments.push(SegmentOutcome {
                    label: key.label(),
                    result: Some(r),
                    error: None,
                });
            }
            Err(e) => report.segments.push(SegmentOutcome {
                label: key.label(),
                result: None,
                error: Some(error_body(&e)),
            }),
        }
    }

    report.aggregate = match args.aggregate {
        AggregateMode::Weighted => aggregate_mu(&successes).map(|a| AggregateReport::Weighted {
            mu: a.mu,
            se: a.se,
            n_segments: a.n_segments,
            total_obs: a.total_obs,
        }),
        AggregateMode::Pooled => match segment_mu(&pooled_obs, &settings) {
            Ok(r) => Some(AggregateReport::Pooled {
                mu: r.mu,
                se: r.se_mu,
                ci: r.ci_mu,
                n_obs: r.n_obs,
            }),
            Err(e) => {
                eprintln!("pooled aggregate failed: {e}");
                None
            }
        },
    };

    let rows: Vec<Vec<String>> = successes
        .iter()
        .map(|r| {
            vec![
                series_label(r),
                r.segment.year.map(|y| y.to_string()).unwrap_or_default(),
                r.mu.to_string(),
                opt_str(r.ci_mu.map(|c| c.0)),
                opt_str(r.ci_mu.map(|c| c.1)),
            ]
        })
        .collect();
    write_csv_rows(&csv_path, &["segment", "year", "mu", "ci_low", "ci_high"], &rows)?;
    write_json(&results_path, &report)?;

    let refs: Vec<&MonopsonyResult> = successes.iter().collect();
    if !refs.is_empty() {
        print!("{}", tables::mu_table(&refs));
    }
    match &report.aggregate {
        Some(AggregateReport::Weighted {
            mu,
            se,
            n_segments,
            total_obs,
        }) => println!(
            "aggregate (weighted): mu = {} (se {}), {n_segments} segments, {total_obs} observations",
            tables::fmt(*mu),
            tables::fmt_opt(*se),
        ),
        Some(AggregateReport::Pooled { mu, se, n_obs, .. }) => println!(
            "aggregate (pooled): mu = {} (se {}), {n_obs} observations",
            tables::fmt(*mu),
            tables::fmt_opt(*se),
        ),
        None => {}
    }
    if !report.skip_report.skipped.is_empty() {
        println!(
            "skipped {} segments ({} observations) below the minimum size of {}",
            report.skip_report.skipped.len(),
            report.skip_report.observations_skipped,
            args.min_segment_size
        );
    }
    let failures = report.segments.iter().filter(|s| s.error.is_some()).count();
    if failures > 0 {
        eprintln!(
            "{failures} of {} segments failed to estimate; see {}",
            report.segments.len(),
            results_path.display()
        );
    }
    if successes.is_empty() {
        return Err(CommandError::Failed(format!(
            "every segment failed to estimate; see {}",
            results_path.display()
        )));
    }

    if args.decompose {
        let settings = DecompositionSettings {
            trend: args.trend,
            weighted: !args.unweighted,
        };
        run_decomposition(
            &successes,
            &settings,
            report.run.clone(),
            &args.out_dir.join("decomposition.json"),
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// decompose

/// Serialisable mirror of [`DecompositionSettings`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DecompositionSettingsEcho {
    pub trend: bool,
    pub weighted: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub schema_version: u32,
    pub run: RunRecord,
    pub settings: DecompositionSettingsEcho,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decomposition: Option<DecompositionResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

fn run_decomposition(
    results: &[MonopsonyResult],
    settings: &DecompositionSettings,
    run: RunRecord,
    out: &Path,
) -> Result<(), CommandError> {
    let echo = DecompositionSettingsEcho {
        trend: settings.trend,
        weighted: settings.weighted,
    };
    match decompose_mu(results, settings) {
        Ok(decomposition) => {
            print!("{}", decomposition.render_table());
            write_json(
                out,
                &DecompositionReport {
                    schema_version: SCHEMA_VERSION,
                    run,
                    settings: echo,
                    decomposition: Some(decomposition),
                    error: None,
                },
            )
        }
        Err(e) => {
            write_json(
                out,
                &DecompositionReport {
                    schema_version: SCHEMA_VERSION,
                    run,
                    settings: echo,
                    decomposition: None,
                    error: Some(error_body(&e)),
                },
            )?;
            Err(CommandError::Failed(format!("decomposition failed: {e}")))
        }
    }
}

pub fn decompose(args: &DecomposeArgs) -> Result<(), CommandError> {
    let text = std::fs::read_to_string(&args.input)
        .map_err(|e| CommandError::Failed(format!("cannot read {}: {e}", args.input.display())))?;
    let report: MonopsonyReport = serde_json::from_str(&text).map_err(|e| {
        CommandError::Failed(format!(
            "cannot parse {}: {e} (expected results.json from `frictions monopsony`)",
            args.input.display()
        ))
    })?;
    if report.schema_version != SCHEMA_VERSION {
        return Err(CommandError::Failed(format!(
            "{} has schema version {}, this build reads {}",
            args.input.display(),
            report.schema_version,
            SCHEMA_VERSION
        )));
    }
    let results: Vec<MonopsonyResult> = report
        .segments
        .into_iter()
        .filter_map(|s| s.result)
        .collect();
    let mut run = RunRecord::new("decompose");
    run.add_input(&args.input)?;
    run.settings = serde_json::json!({
        "trend": args.trend,
        "weighted": !args.unweighted,
    });
    let settings = DecompositionSettings {
        trend: args.trend,
        weighted: !args.unweighted,
    };
    run_decomposition(&results, &settings, run, &args.out)
}
