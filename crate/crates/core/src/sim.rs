//! Steady-state simulator for validating the estimators end to end.
//!
//! A [`Scenario`] fixes the friction parameters, the offered-wage
//! distribution, and the sample layout; the simulator then draws a
//! cross-section exactly as the model says a survey would see it:
//!
//! 1. A worker's wage comes from the *earned* distribution `G`, related to
//!    the offered distribution `F` by `F = G (1 + k) / (1 + k G)` — employed
//!    workers are found disproportionately high on the ladder because they
//!    climb it between surveys.
//! 2. Given the wage, elapsed tenure is exponential with the separation
//!    hazard `theta(w) = delta + lambda (1 - F(w))`: better-paid workers are
//!    poached less and observed mid-spell for longer.
//! 3. An optional censoring threshold truncates spells the way interview
//!    windows or top-coding do.
//!
//! Unemployed workers are drawn from the point-mass mixture: a share `pi`
//! never transitions (infinite elapsed duration, landing in the open last
//! class of any grouping), the rest exit at rate `lambda0`.
//!
//! Every worker owns a dedicated RNG substream derived from the scenario seed
//! and the worker's index, so samples are reproducible and *prefix-stable*:
//! growing the sample or re-ordering segments never changes the draws of
//! existing workers.
//!
//! [`write_dataset`] emits a CSV extract together with the ground truth
//! (JSON) and a ready-to-use ingestion manifest, which is how the recovery
//! tests and the command-line round trip exercise the full path from raw
//! file to estimate.

use crate::ingest::{AgeBand, CategorySchema, ColumnMap, DatasetManifest, Filters};
use crate::model::{GroupedDurations, ModelError, Observation, SegmentKey};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::ContinuousCDF;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Weekly hours written for every simulated worker; comfortably above the
/// default full-time filter so a round trip keeps every row.
const SIMULATED_HOURS: f64 = 40.0;

/// Substream offset separating unemployed draws from employed ones.
const UNEMPLOYED_STREAM_BASE: u64 = 1 << 40;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("scenario parse error: {0}")]
    Parse(String),

    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Lognormal offered-wage distribution, parameterised on the log scale.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfferedWages {
    pub log_mean: f64,
    pub log_sd: f64,
}

/// Unemployment side of a scenario: the mixture parameters, how many
/// unemployed workers to draw, and the duration classes to group them into.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnemploymentBlock {
    /// Share that never transitions into employment.
    pub pi: f64,
    /// Exit rate for the transitioning share.
    pub lambda0: f64,
    pub n_unemployed: usize,
    /// Class lower bounds for the grouped output (last class open-ended).
    pub class_bounds: Vec<f64>,
}

/// One segment of the simulated labour market. Friction and wage parameters
/// default to the scenario-level values unless overridden, which is how
/// heterogeneous markets (different `k` per sector, shifted wage scales) are
/// set up.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub sector: String,
    pub education: String,
    /// Age band label in `lo-hi` form; simulated ages are uniform inside it.
    pub age_band: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<i32>,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_sd: Option<f64>,
}

/// Full simulation recipe, usually read from a TOML file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Offer-arrival rate for employed workers.
    pub lambda: f64,
    /// Job-destruction rate.
    pub delta: f64,
    /// Sample size when no explicit segments are given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_workers: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Spells longer than this are recorded at the threshold and flagged
    /// censored; absent means fully observed spells.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub censor_level: Option<f64>,
    pub offered_wages: OfferedWages,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unemployment: Option<UnemploymentBlock>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub segments: Vec<SegmentSpec>,
}

/// A segment with every default resolved, ready to sample from.
#[derive(Debug, Clone)]
pub struct ResolvedSegment {
    pub key: SegmentKey,
    pub n: usize,
    pub lambda: f64,
    pub delta: f64,
    pub log_mean: f64,
    pub log_sd: f64,
    pub age_lo: u32,
    pub age_hi: u32,
}

impl ResolvedSegment {
    pub fn k(&self) -> f64 {
        self.lambda / self.delta
    }
}

fn parse_age_band(label: &str) -> Option<(u32, u32)> {
    let (lo, hi) = label.split_once('-')?;
    let lo: u32 = lo.trim().parse().ok()?;
    let hi: u32 = hi.trim().parse().ok()?;
    (lo <= hi).then_some((lo, hi))
}

fn check_rate(name: &str, v: f64, allow_zero: bool) -> Result<(), SimError> {
    let ok = v.is_finite() && (v > 0.0 || (allow_zero && v == 0.0));
    if ok {
        Ok(())
    } else {
        Err(SimError::InvalidScenario(format!("{name} = {v}")))
    }
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_path(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|source| SimError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serialises")
    }

    /// Offer-to-destruction ratio at the scenario level.
    pub fn k(&self) -> f64 {
        self.lambda / self.delta
    }

    pub fn validate(&self) -> Result<(), SimError> {
        check_rate("lambda", self.lambda, true)?;
        check_rate("delta", self.delta, false)?;
        check_rate("offered_wages.log_sd", self.offered_wages.log_sd, false)?;
        if !self.offered_wages.log_mean.is_finite() {
            return Err(SimError::InvalidScenario(format!(
                "offered_wages.log_mean = {}",
                self.offered_wages.log_mean
            )));
        }
        if let Some(c) = self.censor_level {
            check_rate("censor_level", c, false)?;
        }
        match (&self.n_workers, self.segments.is_empty()) {
            (None, true) => {
                return Err(SimError::InvalidScenario(
                    "set n_workers or provide segments".into(),
                ))
            }
            (Some(_), false) => {
                return Err(SimError::InvalidScenario(
                    "n_workers and segments are mutually exclusive".into(),
                ))
            }
            (Some(0), _) => {
                return Err(SimError::InvalidScenario("n_workers must be positive".into()))
            }
            _ => {}
        }
        for (i, seg) in self.segments.iter().enumerate() {
            if seg.n == 0 {
                return Err(SimError::InvalidScenario(format!("segments[{i}].n = 0")));
            }
            if parse_age_band(&seg.age_band).is_none() {
                return Err(SimError::InvalidScenario(format!(
                    "segments[{i}].age_band {:?} is not of the form lo-hi",
                    seg.age_band
                )));
            }
            if let Some(l) = seg.lambda {
                check_rate("segment lambda", l, true)?;
            }
            if let Some(d) = seg.delta {
                check_rate("segment delta", d, false)?;
            }
            if let Some(s) = seg.log_sd {
                check_rate("segment log_sd", s, false)?;
            }
        }
        // age bands of distinct labels must not overlap, otherwise mapping
        // ages back to bands at ingestion would be ambiguous
        let mut bands: Vec<(u32, u32)> = self
            .segments
            .iter()
            .filter_map(|s| parse_age_band(&s.age_band))
            .collect();
        bands.sort();
        bands.dedup();
        for pair in bands.windows(2) {
            if pair[1].0 <= pair[0].1 {
                return Err(SimError::InvalidScenario(format!(
                    "age bands {}-{} and {}-{} overlap",
                    pair[0].0, pair[0].1, pair[1].0, pair[1].1
                )));
            }
        }
        if let Some(u) = &self.unemployment {
            if !(0.0..1.0).contains(&u.pi) {
                return Err(SimError::InvalidScenario(format!(
                    "unemployment.pi = {} outside [0, 1)",
                    u.pi
                )));
            }
            check_rate("unemployment.lambda0", u.lambda0, false)?;
            if u.n_unemployed == 0 {
                return Err(SimError::InvalidScenario(
                    "unemployment.n_unemployed must be positive".into(),
                ));
            }
            GroupedDurations::new(u.class_bounds.clone(), vec![1; u.class_bounds.len()])
                .map_err(|e| SimError::InvalidScenario(format!("unemployment.class_bounds: {e}")))?;
        }
        Ok(())
    }

    /// Segments with all defaults applied. A scenario without explicit
    /// segments becomes one synthetic segment covering the whole sample.
    pub fn resolved_segments(&self) -> Vec<ResolvedSegment> {
        if self.segments.is_empty() {
            let n = self.n_workers.expect("validated");
            return vec![ResolvedSegment {
                key: SegmentKey {
                    sector: "services".into(),
                    education: "secondary".into(),
                    age_band: "21-30".into(),
                    region: None,
                    gender: None,
                    year: None,
                },
                n,
                lambda: self.lambda,
                delta: self.delta,
                log_mean: self.offered_wages.log_mean,
                log_sd: self.offered_wages.log_sd,
                age_lo: 21,
                age_hi: 30,
            }];
        }
        self.segments
            .iter()
            .map(|seg| {
                let (age_lo, age_hi) = parse_age_band(&seg.age_band).expect("validated");
                ResolvedSegment {
                    key: SegmentKey {
                        sector: seg.sector.clone(),
                        education: seg.education.clone(),
                        age_band: seg.age_band.clone(),
                        region: seg.region.clone(),
                        gender: seg.gender.clone(),
                        year: seg.year,
                    },
                    n: seg.n,
                    lambda: seg.lambda.unwrap_or(self.lambda),
                    delta: seg.delta.unwrap_or(self.delta),
                    log_mean: seg.log_mean.unwrap_or(self.offered_wages.log_mean),
                    log_sd: seg.log_sd.unwrap_or(self.offered_wages.log_sd),
                    age_lo,
                    age_hi,
                }
            })
            .collect()
    }
}

/// One simulated worker row, in the exact shape of the emitted CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedWorker {
    pub wage: f64,
    pub tenure: f64,
    pub censored: bool,
    pub weight: f64,
    pub hours: f64,
    pub age: u32,
    pub sector: String,
    pub education: String,
    pub region: String,
    pub gender: String,
    pub year: Option<i32>,
}

impl SimulatedWorker {
    /// The observation an exact ingestion of this row should produce.
    pub fn to_observation(&self, bands: &[AgeBand]) -> Result<Observation, ModelError> {
        let age_band = bands
            .iter()
            .find(|b| b.contains(self.age))
            .map(|b| b.label())
            .unwrap_or_default();
        let segment = SegmentKey {
            sector: self.sector.clone(),
            education: self.education.clone(),
            age_band,
            region: (!self.region.is_empty()).then(|| self.region.clone()),
            gender: (!self.gender.is_empty()).then(|| self.gender.clone()),
            year: self.year,
        };
        Observation::new(self.wage, self.tenure, self.censored, self.weight, segment)
    }
}

/// RNG dedicated to one worker: same seed and index, same draws, regardless
/// of how many other workers exist.
fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draw strictly inside (0, 1).
fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Draws the employed cross-section of a scenario.
pub fn sample_employed(scenario: &Scenario) -> Result<Vec<SimulatedWorker>, SimError> {
    scenario.validate()?;
    let normal = statrs::distribution::Normal::standard();
    let mut workers = Vec::new();
    let mut index: u64 = 0;
    for seg in scenario.resolved_segments() {
        let k = seg.k();
        for _ in 0..seg.n {
            let mut rng = substream(scenario.seed, index);
            index += 1;

            // wage: earned-distribution quantile mapped through the offered cdf
            let g = open_unit(&mut rng);
            let f = g * (1.0 + k) / (1.0 + k * g);
            let z = normal.inverse_cdf(f.clamp(f64::MIN_POSITIVE, 1.0 - 1e-16));
            let wage = (seg.log_mean + seg.log_sd * z).exp();

            // elapsed tenure: exponential at the wage-specific hazard
            let theta = seg.delta + seg.lambda * (1.0 - f);
            let v = open_unit(&mut rng);
            let raw_spell = -v.ln() / theta;
            let (tenure, censored) = match scenario.censor_level {
                Some(c) if raw_spell > c => (c, true),
                _ => (raw_spell, false),
            };

            let age = rng.random_range(seg.age_lo..=seg.age_hi);

            workers.push(SimulatedWorker {
                wage,
                tenure,
                censored,
                weight: 1.0,
                hours: SIMULATED_HOURS,
                age,
                sector: seg.key.sector.clone(),
                education: seg.key.education.clone(),
                region: seg.key.region.clone().unwrap_or_default(),
                gender: seg.key.gender.clone().unwrap_or_default(),
                year: seg.key.year,
            });
        }
    }
    Ok(workers)
}

/// Draws elapsed unemployment durations from the scenario's mixture block.
/// Workers in the never-transitioning share come back as `f64::INFINITY`,
/// which any grouping places in the open last class. Empty when the scenario
/// has no unemployment block.
pub fn sample_unemployed(scenario: &Scenario) -> Result<Vec<f64>, SimError> {
    scenario.validate()?;
    let Some(u) = &scenario.unemployment else {
        return Ok(Vec::new());
    };
    let mut durations = Vec::with_capacity(u.n_unemployed);
    for j in 0..u.n_unemployed {
        let mut rng = substream(scenario.seed, UNEMPLOYED_STREAM_BASE + j as u64);
        let z: f64 = rng.random();
        if z < u.pi {
            durations.push(f64::INFINITY);
        } else {
            let v = open_unit(&mut rng);
            durations.push(-v.ln() / u.lambda0);
        }
    }
    Ok(durations)
}

/// Groups durations onto class lower bounds, sending infinite durations to
/// the open last class.
pub fn group_durations(durations: &[f64], bounds: &[f64]) -> Result<GroupedDurations, SimError> {
    let mut freq = vec![0u64; bounds.len()];
    for &t in durations {
        if t.is_infinite() && t > 0.0 {
            *freq.last_mut().expect("validated bounds") += 1;
            continue;
        }
        if !t.is_finite() || t < 0.0 {
            return Err(SimError::InvalidScenario(format!("duration {t}")));
        }
        let idx = bounds.partition_point(|&b| b < t).max(1) - 1;
        freq[idx] += 1;
    }
    Ok(GroupedDurations::new(bounds.to_vec(), freq)?)
}

/// Ground truth written next to a simulated dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentTruth {
    pub segment: SegmentKey,
    pub n: usize,
    pub lambda: f64,
    pub delta: f64,
    pub k: f64,
    pub log_mean: f64,
    pub log_sd: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnemploymentTruth {
    pub pi: f64,
    pub lambda0: f64,
    pub n_unemployed: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetTruth {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub censor_level: Option<f64>,
    pub segments: Vec<SegmentTruth>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unemployment: Option<UnemploymentTruth>,
}

/// Files produced by [`write_dataset`].
#[derive(Debug, Clone, Serialize)]
pub struct DatasetPaths {
    pub csv: PathBuf,
    pub truth: PathBuf,
    pub manifest: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unemployment: Option<PathBuf>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SimError + '_ {
    move |source| SimError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// The ingestion manifest that reads a simulated dataset back verbatim.
pub fn dataset_manifest(scenario: &Scenario, csv_name: &str) -> DatasetManifest {
    let segments = scenario.resolved_segments();
    let mut sectors: Vec<String> = segments.iter().map(|s| s.key.sector.clone()).collect();
    sectors.sort();
    sectors.dedup();
    let mut educations: Vec<String> = segments.iter().map(|s| s.key.education.clone()).collect();
    educations.sort();
    educations.dedup();
    let mut age_bands: Vec<AgeBand> = segments
        .iter()
        .map(|s| AgeBand {
            lo: s.age_lo,
            hi: s.age_hi,
        })
        .collect();
    age_bands.sort_by_key(|b| (b.lo, b.hi));
    age_bands.dedup();
    let age_range = (
        age_bands.iter().map(|b| b.lo).min().unwrap_or(15),
        age_bands.iter().map(|b| b.hi).max().unwrap_or(64),
    );

    DatasetManifest {
        name: Some("simulated".into()),
        csv_path: PathBuf::from(csv_name),
        columns: ColumnMap {
            wage: "wage".into(),
            tenure: "tenure".into(),
            censored: Some("censored".into()),
            weight: Some("weight".into()),
            hours: Some("hours".into()),
            age: Some("age".into()),
            sector: Some("sector".into()),
            education: Some("education".into()),
            region: Some("region".into()),
            gender: Some("gender".into()),
            year: Some("year".into()),
        },
        filters: Filters {
            min_hours: crate::ingest::DEFAULT_MIN_HOURS,
            age_range,
        },
        schema: CategorySchema {
            sectors,
            educations,
            regions: Vec::new(),
            genders: Vec::new(),
            age_bands,
        },
    }
}

/// Simulates a scenario and writes the dataset bundle into `dir`:
/// `workers.csv`, `truth.json`, `manifest.toml`, and, when the scenario has
/// an unemployment block, grouped durations in `unemployment.json`.
pub fn write_dataset(scenario: &Scenario, dir: &Path) -> Result<DatasetPaths, SimError> {
    scenario.validate()?;
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;

    let workers = sample_employed(scenario)?;
    let csv_path = dir.join("workers.csv");
    let mut writer = csv::Writer::from_path(&csv_path).map_err(|e| SimError::Io {
        path: csv_path.clone(),
        source: std::io::Error::other(e),
    })?;
    for w in &workers {
        writer
            .serialize(w)
            .map_err(|e| SimError::Io {
                path: csv_path.clone(),
                source: std::io::Error::other(e),
            })?;
    }
    writer.flush().map_err(io_err(&csv_path))?;

    let truth = DatasetTruth {
        seed: scenario.seed,
        censor_level: scenario.censor_level,
        segments: scenario
            .resolved_segments()
            .iter()
            .map(|s| SegmentTruth {
                segment: s.key.clone(),
                n: s.n,
                lambda: s.lambda,
                delta: s.delta,
                k: s.k(),
                log_mean: s.log_mean,
                log_sd: s.log_sd,
            })
            .collect(),
        unemployment: scenario.unemployment.as_ref().map(|u| UnemploymentTruth {
            pi: u.pi,
            lambda0: u.lambda0,
            n_unemployed: u.n_unemployed,
        }),
    };
    let truth_path = dir.join("truth.json");
    std::fs::write(
        &truth_path,
        serde_json::to_string_pretty(&truth).expect("truth serialises"),
    )
    .map_err(io_err(&truth_path))?;

    let manifest = dataset_manifest(scenario, "workers.csv");
    let manifest_path = dir.join("manifest.toml");
    std::fs::write(&manifest_path, manifest.to_toml_string()).map_err(io_err(&manifest_path))?;

    let unemployment = match &scenario.unemployment {
        None => None,
        Some(u) => {
            let durations = sample_unemployed(scenario)?;
            let grouped = group_durations(&durations, &u.class_bounds)?;
            let path = dir.join("unemployment.json");
            std::fs::write(
                &path,
                serde_json::to_string_pretty(&grouped).expect("grouped serialises"),
            )
            .map_err(io_err(&path))?;
            Some(path)
        }
    };

    Ok(DatasetPaths {
        csv: csv_path,
        truth: truth_path,
        manifest: manifest_path,
        unemployment,
    })
}
