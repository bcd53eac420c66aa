//! Loading survey extracts into [`Observation`]s.
//!
//! Survey microdata arrives as a CSV extract whose column names, category
//! codes, and filter conventions differ per source. A [`DatasetManifest`]
//! (TOML) describes one extract: which columns hold the wage, tenure, and
//! weights, which categorical columns define segments, the allowed category
//! values, and the filter thresholds. [`load_dataset`] applies the manifest
//! and returns both the surviving observations and a [`DropReport`] that
//! accounts for every input row — the invariant `rows_read = rows_kept +
//! dropped_total` is enforced, so silent data loss is impossible.
//!
//! [`segmentize`] then partitions observations by their [`SegmentKey`].
//! Segments with too few observations to support estimation are skipped and
//! reported rather than estimated badly.

use crate::model::{ModelError, Observation, SegmentKey};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Minimum observations per segment before it is worth estimating frictions;
/// below this the tenure regression is dominated by noise.
pub const DEFAULT_MIN_SEGMENT_SIZE: usize = 100;

/// Default minimum weekly hours for an employment spell to count as a job.
pub const DEFAULT_MIN_HOURS: f64 = 35.0;

/// Default working-age range (inclusive).
pub const DEFAULT_AGE_RANGE: (u32, u32) = (15, 64);

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("manifest parse error: {0}")]
    Manifest(String),

    #[error("column {name:?} not present in CSV header")]
    MissingColumn { name: String },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Model(#[from] ModelError),
}

/// An age band: inclusive bounds plus the label written into segment keys.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(u32, u32)", into = "(u32, u32)")]
pub struct AgeBand {
    pub lo: u32,
    pub hi: u32,
}

impl AgeBand {
    pub fn label(&self) -> String {
        format!("{}-{}", self.lo, self.hi)
    }

    pub fn contains(&self, age: u32) -> bool {
        (self.lo..=self.hi).contains(&age)
    }
}

impl From<(u32, u32)> for AgeBand {
    fn from((lo, hi): (u32, u32)) -> Self {
        Self { lo, hi }
    }
}

impl From<AgeBand> for (u32, u32) {
    fn from(b: AgeBand) -> Self {
        (b.lo, b.hi)
    }
}

/// Default age bands used when the manifest does not override them.
pub fn default_age_bands() -> Vec<AgeBand> {
    vec![
        (15, 20).into(),
        (21, 30).into(),
        (31, 45).into(),
        (46, 65).into(),
    ]
}

/// Maps logical fields to CSV column names. Optional columns simply do not
/// participate: without a `censored` column all spells count as complete,
/// without a `weight` column all weights are one, and an unmapped categorical
/// column does not enter the segment key.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ColumnMap {
    pub wage: String,
    pub tenure: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub censored: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hours: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sector: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub education: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<String>,
}

/// Row filters. Hours and age filters only apply when the corresponding
/// column is mapped.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Filters {
    /// Spells below this many weekly hours are not treated as employment.
    pub min_hours: f64,
    /// Inclusive working-age range.
    pub age_range: (u32, u32),
}

impl Default for Filters {
    fn default() -> Self {
        Self {
            min_hours: DEFAULT_MIN_HOURS,
            age_range: DEFAULT_AGE_RANGE,
        }
    }
}

/// Allowed category values per dimension. An empty list accepts any value;
/// a non-empty list drops rows whose value is not listed.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct CategorySchema {
    pub sectors: Vec<String>,
    pub educations: Vec<String>,
    pub regions: Vec<String>,
    pub genders: Vec<String>,
    /// Age bands as `[lo, hi]` pairs; defaults to 15-20 / 21-30 / 31-45 / 46-65.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub age_bands: Vec<AgeBand>,
}

impl CategorySchema {
    pub fn age_bands_or_default(&self) -> Vec<AgeBand> {
        if self.age_bands.is_empty() {
            default_age_bands()
        } else {
            self.age_bands.clone()
        }
    }
}

/// Description of one survey extract: where the CSV lives and how to read it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// CSV location; relative paths resolve against the manifest's directory.
    pub csv_path: PathBuf,
    pub columns: ColumnMap,
    #[serde(default)]
    pub filters: Filters,
    #[serde(default)]
    pub schema: CategorySchema,
}

impl DatasetManifest {
    /// Parses a manifest file and resolves its CSV path.
    pub fn from_path(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut manifest: DatasetManifest =
            toml::from_str(&text).map_err(|e| IngestError::Manifest(e.to_string()))?;
        if manifest.csv_path.is_relative() {
            if let Some(dir) = path.parent() {
                manifest.csv_path = dir.join(&manifest.csv_path);
            }
        }
        Ok(manifest)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("manifest serialises")
    }
}

/// Why a row was dropped. Each dropped row is charged to exactly one reason —
/// the first failed check in the fixed order below.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    /// Required cell missing or unparseable.
    Unparseable,
    /// Wage absent, zero, negative, or non-finite.
    InvalidWage,
    /// Tenure negative or non-finite.
    InvalidTenure,
    /// Weight zero, negative, or non-finite.
    InvalidWeight,
    /// Weekly hours below the manifest threshold.
    HoursBelowMinimum,
    /// Age outside the working-age range or outside every age band.
    AgeOutOfRange,
    /// Categorical value not in the manifest schema.
    UnknownCategory,
}

impl DropReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::Unparseable => "unparseable",
            DropReason::InvalidWage => "invalid_wage",
            DropReason::InvalidTenure => "invalid_tenure",
            DropReason::InvalidWeight => "invalid_weight",
            DropReason::HoursBelowMinimum => "hours_below_minimum",
            DropReason::AgeOutOfRange => "age_out_of_range",
            DropReason::UnknownCategory => "unknown_category",
        }
    }
}

/// Row-level accounting for one load. Serialises to JSON for audit trails.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct DropReport {
    pub rows_read: u64,
    pub rows_kept: u64,
    pub dropped_total: u64,
    /// Drop counts keyed by reason name; reasons with zero drops are omitted.
    pub dropped_by_reason: BTreeMap<String, u64>,
}

impl DropReport {
    fn record(&mut self, reason: DropReason) {
        self.dropped_total += 1;
        *self
            .dropped_by_reason
            .entry(reason.as_str().to_string())
            .or_insert(0) += 1;
    }

    /// `rows_read = rows_kept + dropped_total`, and the per-reason counts sum
    /// to the total. Violations indicate a bug in the loader.
    pub fn is_conserved(&self) -> bool {
        let by_reason: u64 = self.dropped_by_reason.values().sum();
        self.rows_read == self.rows_kept + self.dropped_total && by_reason == self.dropped_total
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// Observations plus the row accounting from the load.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub observations: Vec<Observation>,
    pub report: DropReport,
}

struct ColumnIndices {
    wage: usize,
    tenure: usize,
    censored: Option<usize>,
    weight: Option<usize>,
    hours: Option<usize>,
    age: Option<usize>,
    sector: Option<usize>,
    education: Option<usize>,
    region: Option<usize>,
    gender: Option<usize>,
    year: Option<usize>,
}

fn find_column(headers: &csv::StringRecord, name: &str) -> Result<usize, IngestError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| IngestError::MissingColumn {
            name: name.to_string(),
        })
}

fn find_optional(
    headers: &csv::StringRecord,
    name: &Option<String>,
) -> Result<Option<usize>, IngestError> {
    match name {
        Some(n) => find_column(headers, n).map(Some),
        None => Ok(None),
    }
}

/// Loads the extract described by `manifest`.
///
/// Every input row either becomes an observation or is charged to exactly one
/// [`DropReason`]; the returned report's conservation invariant always holds.
pub fn load_dataset(manifest: &DatasetManifest) -> Result<LoadedDataset, IngestError> {
    let file = std::fs::File::open(&manifest.csv_path).map_err(|source| IngestError::Io {
        path: manifest.csv_path.clone(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let headers = reader.headers()?.clone();
    let cols = ColumnIndices {
        wage: find_column(&headers, &manifest.columns.wage)?,
        tenure: find_column(&headers, &manifest.columns.tenure)?,
        censored: find_optional(&headers, &manifest.columns.censored)?,
        weight: find_optional(&headers, &manifest.columns.weight)?,
        hours: find_optional(&headers, &manifest.columns.hours)?,
        age: find_optional(&headers, &manifest.columns.age)?,
        sector: find_optional(&headers, &manifest.columns.sector)?,
        education: find_optional(&headers, &manifest.columns.education)?,
        region: find_optional(&headers, &manifest.columns.region)?,
        gender: find_optional(&headers, &manifest.columns.gender)?,
        year: find_optional(&headers, &manifest.columns.year)?,
    };

    let bands = manifest.schema.age_bands_or_default();
    let mut observations = Vec::new();
    let mut report = DropReport::default();

    for record in reader.records() {
        let record = record?;
        report.rows_read += 1;
        match parse_row(&record, &cols, manifest, &bands) {
            Ok(obs) => {
                observations.push(obs);
                report.rows_kept += 1;
            }
            Err(reason) => report.record(reason),
        }
    }

    debug_assert!(report.is_conserved());
    Ok(LoadedDataset {
        observations,
        report,
    })
}

fn cell<'r>(record: &'r csv::StringRecord, idx: usize) -> Option<&'r str> {
    record.get(idx).map(str::trim)
}

fn parse_row(
    record: &csv::StringRecord,
    cols: &ColumnIndices,
    manifest: &DatasetManifest,
    bands: &[AgeBand],
) -> Result<Observation, DropReason> {
    let wage: f64 = cell(record, cols.wage)
        .filter(|s| !s.is_empty())
        .and_then(|s| s.parse().ok())
        .ok_or(DropReason::Unparseable)?;
    if !wage.is_finite() || wage <= 0.0 {
        return Err(DropReason::InvalidWage);
    }

    let tenure: f64 = cell(record, cols.tenure)
        .filter(|s| !s.is_empty())
        .and_then(|s| s.parse().ok())
        .ok_or(DropReason::Unparseable)?;
    if !tenure.is_finite() || tenure < 0.0 {
        return Err(DropReason::InvalidTenure);
    }

    let censored = match cols.censored {
        None => false,
        Some(i) => match cell(record, i).map(|s| s.to_ascii_lowercase()).as_deref() {
            Some("true") | Some("1") | Some("yes") => true,
            Some("false") | Some("0") | Some("no") | Some("") | None => false,
            Some(_) => return Err(DropReason::Unparseable),
        },
    };

    let weight = match cols.weight {
        None => 1.0,
        Some(i) => {
            let w: f64 = cell(record, i)
                .filter(|s| !s.is_empty())
                .and_then(|s| s.parse().ok())
                .ok_or(DropReason::Unparseable)?;
            if !w.is_finite() || w <= 0.0 {
                return Err(DropReason::InvalidWeight);
            }
            w
        }
    };

    if let Some(i) = cols.hours {
        let hours: f64 = cell(record, i)
            .filter(|s| !s.is_empty())
            .and_then(|s| s.parse().ok())
            .ok_or(DropReason::Unparseable)?;
        if hours < manifest.filters.min_hours {
            return Err(DropReason::HoursBelowMinimum);
        }
    }

    let age_band = match cols.age {
        None => String::new(),
        Some(i) => {
            let age: u32 = cell(record, i)
                .filter(|s| !s.is_empty())
                .and_then(|s| s.parse().ok())
                .ok_or(DropReason::Unparseable)?;
            let (lo, hi) = manifest.filters.age_range;
            if !(lo..=hi).contains(&age) {
                return Err(DropReason::AgeOutOfRange);
            }
            bands
                .iter()
                .find(|b| b.contains(age))
                .map(|b| b.label())
                .ok_or(DropReason::AgeOutOfRange)?
        }
    };

    let categorical = |idx: Option<usize>, allowed: &[String]| -> Result<String, DropReason> {
        match idx {
            None => Ok(String::new()),
            Some(i) => {
                let v = cell(record, i).unwrap_or("").to_string();
                if !allowed.is_empty() && !allowed.iter().any(|a| a == &v) {
                    return Err(DropReason::UnknownCategory);
                }
                Ok(v)
            }
        }
    };

    let sector = categorical(cols.sector, &manifest.schema.sectors)?;
    let education = categorical(cols.education, &manifest.schema.educations)?;
    let region = categorical(cols.region, &manifest.schema.regions)?;
    let gender = categorical(cols.gender, &manifest.schema.genders)?;
    let year: Option<i32> = match cols.year {
        None => None,
        Some(i) => match cell(record, i) {
            None | Some("") => None,
            Some(s) => Some(s.parse().map_err(|_| DropReason::Unparseable)?),
        },
    };

    let segment = SegmentKey {
        sector,
        education,
        age_band,
        region: (!region.is_empty()).then_some(region),
        gender: (!gender.is_empty()).then_some(gender),
        year,
    };

    Observation::new(wage, tenure, censored, weight, segment)
        .map_err(|_| DropReason::Unparseable)
}

/// Segments skipped for being too small, with their sizes.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct SkipReport {
    pub skipped: Vec<SkippedSegment>,
    pub observations_skipped: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkippedSegment {
    pub segment: String,
    pub n_obs: usize,
}

impl SkipReport {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// Partitions observations by segment key, skipping segments smaller than
/// `min_segment_size`. The map iterates in key order, so downstream output is
/// deterministic. Conservation holds: input length equals the sum of segment
/// sizes plus `observations_skipped`.
pub fn segmentize(
    observations: Vec<Observation>,
    min_segment_size: usize,
) -> (BTreeMap<SegmentKey, Vec<Observation>>, SkipReport) {
    let mut map: BTreeMap<SegmentKey, Vec<Observation>> = BTreeMap::new();
    for obs in observations {
        map.entry(obs.segment.clone()).or_default().push(obs);
    }
    let mut report = SkipReport::default();
    map.retain(|key, obs| {
        if obs.len() >= min_segment_size {
            true
        } else {
            report.skipped.push(SkippedSegment {
                segment: key.label(),
                n_obs: obs.len(),
            });
            report.observations_skipped += obs.len() as u64;
            false
        }
    });
    (map, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_manifest(dir: &Path, csv_name: &str, body: &str) -> PathBuf {
        let path = dir.join("manifest.toml");
        let text = format!(
            r#"
csv_path = "{csv_name}"

[columns]
wage = "wage"
tenure = "tenure"
censored = "censored"
weight = "weight"
hours = "hours"
age = "age"
sector = "sector"
education = "education"

[schema]
sectors = ["services", "manufacturing"]
educations = ["primary", "secondary"]
{body}
"#
        );
        std::fs::write(&path, text).unwrap();
        path
    }

    fn write_csv(dir: &Path, rows: &[&str]) -> PathBuf {
        let path = dir.join("data.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "wage,tenure,censored,weight,hours,age,sector,education").unwrap();
        for r in rows {
            writeln!(f, "{r}").unwrap();
        }
        path
    }

    #[test]
    fn loads_clean_rows_and_builds_segment_keys() {
        let dir = tempfile::tempdir().unwrap();
        write_csv(
            dir.path(),
            &[
                "1200.5,3.25,false,1.5,40,25,services,secondary",
                "800,10,true,2.0,45,50,manufacturing,primary",
            ],
        );
        let manifest_path = write_manifest(dir.path(), "data.csv", "");
        let manifest = DatasetManifest::from_path(&manifest_path).unwrap();
        let loaded = load_dataset(&manifest).unwrap();

        assert_eq!(loaded.report.rows_read, 2);
        assert_eq!(loaded.report.rows_kept, 2);
        assert_eq!(loaded.report.dropped_total, 0);
        assert!(loaded.report.is_conserved());

        let obs = &loaded.observations;
        assert_eq!(obs[0].wage, 1200.5);
        assert_eq!(obs[0].elapsed_spell, 3.25);
        assert!(!obs[0].censored);
        assert_eq!(obs[0].weight, 1.5);
        assert_eq!(obs[0].segment.age_band, "21-30");
        assert_eq!(obs[0].segment.sector, "services");
        assert!(obs[1].censored);
        assert_eq!(obs[1].segment.age_band, "46-65");
    }

    #[test]
    fn charges_each_bad_row_to_one_reason() {
        let dir = tempfile::tempdir().unwrap();
        write_csv(
            dir.path(),
            &[
                "1000,2,false,1,40,30,services,secondary", // kept
                "abc,2,false,1,40,30,services,secondary",  // unparseable wage
                "-5,2,false,1,40,30,services,secondary",   // invalid wage
                "1000,-1,false,1,40,30,services,secondary", // invalid tenure
                "1000,2,false,0,40,30,services,secondary", // invalid weight
                "1000,2,false,1,20,30,services,secondary", // part-time
                "1000,2,false,1,40,70,services,secondary", // age out of range
                "1000,2,false,1,40,30,mining,secondary",   // unknown sector
            ],
        );
        let manifest_path = write_manifest(dir.path(), "data.csv", "");
        let manifest = DatasetManifest::from_path(&manifest_path).unwrap();
        let loaded = load_dataset(&manifest).unwrap();

        let r = &loaded.report;
        assert_eq!(r.rows_read, 8);
        assert_eq!(r.rows_kept, 1);
        assert_eq!(r.dropped_total, 7);
        assert!(r.is_conserved());
        assert_eq!(r.dropped_by_reason["unparseable"], 1);
        assert_eq!(r.dropped_by_reason["invalid_wage"], 1);
        assert_eq!(r.dropped_by_reason["invalid_tenure"], 1);
        assert_eq!(r.dropped_by_reason["invalid_weight"], 1);
        assert_eq!(r.dropped_by_reason["hours_below_minimum"], 1);
        assert_eq!(r.dropped_by_reason["age_out_of_range"], 1);
        assert_eq!(r.dropped_by_reason["unknown_category"], 1);
    }

    #[test]
    fn optional_columns_take_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("thin.csv");
        std::fs::write(&csv, "w,t\n100,5\n200,1\n").unwrap();
        let manifest_path = dir.path().join("thin.toml");
        std::fs::write(
            &manifest_path,
            "csv_path = \"thin.csv\"\n[columns]\nwage = \"w\"\ntenure = \"t\"\n",
        )
        .unwrap();
        let manifest = DatasetManifest::from_path(&manifest_path).unwrap();
        let loaded = load_dataset(&manifest).unwrap();
        assert_eq!(loaded.report.rows_kept, 2);
        let obs = &loaded.observations[0];
        assert!(!obs.censored);
        assert_eq!(obs.weight, 1.0);
        assert_eq!(obs.segment, SegmentKey::default());
    }

    #[test]
    fn missing_mapped_column_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("thin.csv");
        std::fs::write(&csv, "w,t\n100,5\n").unwrap();
        let manifest_path = dir.path().join("thin.toml");
        std::fs::write(
            &manifest_path,
            "csv_path = \"thin.csv\"\n[columns]\nwage = \"wage\"\ntenure = \"t\"\n",
        )
        .unwrap();
        let manifest = DatasetManifest::from_path(&manifest_path).unwrap();
        assert!(matches!(
            load_dataset(&manifest),
            Err(IngestError::MissingColumn { .. })
        ));
    }

    #[test]
    fn segmentize_conserves_and_skips_small_cells() {
        let mk = |sector: &str, n: usize| -> Vec<Observation> {
            (0..n)
                .map(|i| {
                    Observation::new(
                        100.0 + i as f64,
                        1.0,
                        false,
                        1.0,
                        SegmentKey {
                            sector: sector.into(),
                            ..Default::default()
                        },
                    )
                    .unwrap()
                })
                .collect()
        };
        let mut all = mk("a", 150);
        all.extend(mk("b", 40));
        all.extend(mk("c", 250));
        let total = all.len();

        let (segments, skips) = segmentize(all, 100);
        assert_eq!(segments.len(), 2);
        assert_eq!(skips.skipped.len(), 1);
        assert_eq!(skips.skipped[0].n_obs, 40);
        let kept: usize = segments.values().map(Vec::len).sum();
        assert_eq!(kept + skips.observations_skipped as usize, total);
        // deterministic order
        let labels: Vec<String> = segments.keys().map(SegmentKey::label).collect();
        let mut sorted = labels.clone();
        sorted.sort();
        assert_eq!(labels, sorted);
    }
}
