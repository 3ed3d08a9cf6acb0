//! Run records: metrics, verdicts, and their on-disk layout.
//!
//! A run directory holds `record.json`, `metrics.csv` and one CSV per data
//! table. Directories are named after the manifest digest and never reused.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};
use crate::manifest::ExperimentManifest;

pub const SCHEMA: &str = "rwre.run.v1";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// One measured or computed number with optional uncertainty and bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub sigma: Option<f64>,
    pub bound_low: Option<f64>,
    pub bound_high: Option<f64>,
}

impl Metric {
    pub fn value(name: impl Into<String>, value: f64) -> Self {
        Metric { name: name.into(), value, sigma: None, bound_low: None, bound_high: None }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = Some(sigma);
        self
    }

    pub fn with_bounds(mut self, low: Option<f64>, high: Option<f64>) -> Self {
        self.bound_low = low;
        self.bound_high = high;
        self
    }

    /// `[value - k sigma, value + k sigma]` meets `[bound_low, bound_high]`
    /// (a missing bound is unbounded, a missing sigma is zero).
    pub fn meets_bounds(&self, k_sigma: f64) -> bool {
        let slack = k_sigma * self.sigma.unwrap_or(0.0);
        if self.value.is_nan() || slack.is_nan() {
            return false;
        }
        self.bound_low.is_none_or(|lo| self.value + slack >= lo)
            && self.bound_high.is_none_or(|hi| self.value - slack <= hi)
    }
}

/// Pass/fail against a named bound, recomputable from the metrics it cites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    /// Bound or check name, e.g. `theorem1`, `prop2`, `prop3`.
    pub name: String,
    pub metrics: Vec<String>,
    /// Each cited metric must satisfy `meets_bounds(k_sigma)`.
    pub k_sigma: f64,
    pub passed: bool,
}

impl Verdict {
    pub fn judge(name: impl Into<String>, metrics: &[Metric], k_sigma: f64) -> Self {
        Verdict {
            name: name.into(),
            metrics: metrics.iter().map(|m| m.name.clone()).collect(),
            k_sigma,
            passed: !metrics.is_empty() && metrics.iter().all(|m| m.meets_bounds(k_sigma)),
        }
    }

    /// Re-evaluates the verdict from a metric list; `None` when a cited metric
    /// is absent.
    pub fn recompute(&self, metrics: &[Metric]) -> Option<bool> {
        let mut ok = !self.metrics.is_empty();
        for name in &self.metrics {
            ok &= metrics.iter().find(|m| &m.name == name)?.meets_bounds(self.k_sigma);
        }
        Some(ok)
    }
}

/// A CSV data file produced by an experiment.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Table { name: name.into(), header: header.iter().map(ToString::to_string).collect(), rows: Vec::new() }
    }

    pub fn push<I, S>(&mut self, row: I)
    where
        I: IntoIterator<Item = S>,
        S: ToString,
    {
        self.rows.push(row.into_iter().map(|c| c.to_string()).collect());
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Numbers an experiment produced; everything but wall-clock time.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Outcome {
    pub metrics: Vec<Metric>,
    pub verdicts: Vec<Verdict>,
    pub tables: Vec<Table>,
}

impl Outcome {
    pub fn metric(&mut self, m: Metric) -> Metric {
        self.metrics.push(m.clone());
        m
    }

    pub fn verdict(&mut self, name: &str, metrics: &[Metric], k_sigma: f64) -> bool {
        let v = Verdict::judge(name, metrics, k_sigma);
        let passed = v.passed;
        self.verdicts.push(v);
        passed
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn merge(&mut self, other: Outcome) {
        self.metrics.extend(other.metrics);
        self.verdicts.extend(other.verdicts);
        self.tables.extend(other.tables);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema: String,
    pub kind: String,
    pub version: String,
    /// Canonical manifest text.
    pub manifest: String,
    /// SHA-256 of version and canonical manifest, hex.
    pub digest: String,
    pub wall_clock_seconds: f64,
    pub metrics: Vec<Metric>,
    pub verdicts: Vec<Verdict>,
    pub passed: bool,
    /// Data files written next to the record.
    pub files: Vec<String>,
}

pub fn manifest_digest(manifest: &ExperimentManifest) -> String {
    let mut h = Sha256::new();
    h.update(VERSION.as_bytes());
    h.update(b"\n");
    h.update(manifest.canonical().as_bytes());
    hex::encode(h.finalize())
}

impl RunRecord {
    pub fn new(manifest: &ExperimentManifest, outcome: &Outcome, wall_clock_seconds: f64) -> Self {
        let mut files = vec!["metrics.csv".to_string()];
        files.extend(outcome.tables.iter().map(|t| format!("{}.csv", t.name)));
        RunRecord {
            schema: SCHEMA.into(),
            kind: manifest.kind.to_string(),
            version: VERSION.into(),
            manifest: manifest.canonical(),
            digest: manifest_digest(manifest),
            wall_clock_seconds,
            metrics: outcome.metrics.clone(),
            verdicts: outcome.verdicts.clone(),
            passed: outcome.passed(),
            files,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("records serialize")
    }
}

fn cell(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Tidy metrics CSV: `name,value,sigma,bound_low,bound_high`.
pub fn plotdata_csv(metrics: &[Metric]) -> String {
    let mut t = Table::new("metrics", &["name", "value", "sigma", "bound_low", "bound_high"]);
    for m in metrics {
        t.push([m.name.clone(), m.value.to_string(), cell(m.sigma), cell(m.bound_low), cell(m.bound_high)]);
    }
    t.to_csv()
}

pub fn emit_plotdata(record: &RunRecord, path: &Path) -> Result<()> {
    fs::write(path, plotdata_csv(&record.metrics)).map_err(|e| LabError::io(path, e))
}

/// Creates `root/<kind>-<digest prefix>`, adding `-2`, `-3`, ... when a
/// directory for the same digest already exists.
pub fn fresh_run_dir(root: &Path, record: &RunRecord) -> Result<PathBuf> {
    fs::create_dir_all(root).map_err(|e| LabError::io(root, e))?;
    let base = format!("{}-{}", record.kind, &record.digest[..16]);
    let mut n = 1;
    loop {
        let dir = if n == 1 { root.join(&base) } else { root.join(format!("{base}-{n}")) };
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => n += 1,
            Err(e) => return Err(LabError::io(dir, e)),
        }
    }
}

/// Writes the record, metrics CSV and data tables into a fresh directory.
pub fn write_run(root: &Path, record: &RunRecord, outcome: &Outcome) -> Result<PathBuf> {
    let dir = fresh_run_dir(root, record)?;
    let write = |name: &str, body: &str| {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| LabError::io(path, e))
    };
    write("record.json", &record.to_json())?;
    emit_plotdata(record, &dir.join("metrics.csv"))?;
    for t in &outcome.tables {
        write(&format!("{}.csv", t.name), &t.to_csv())?;
    }
    Ok(dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::{ExperimentKind, ExperimentManifest};

    #[test]
    fn bounds_with_sigma() {
        let m = Metric::value("v", 0.30).with_sigma(0.01).with_bounds(Some(1.0 / 3.0), Some(1.0));
        assert!(m.meets_bounds(3.5));
        assert!(!m.meets_bounds(3.0));
        assert!(Metric::value("x", 5.0).meets_bounds(0.0));
        assert!(!Metric::value("x", f64::NAN).meets_bounds(3.0));
        assert!(!Metric::value("x", 1e-9).with_bounds(None, Some(0.0)).meets_bounds(0.0));
    }

    #[test]
    fn verdicts_recompute() {
        let metrics = vec![
            Metric::value("a", 1.0).with_bounds(Some(0.0), Some(2.0)),
            Metric::value("b", 3.0).with_sigma(0.5).with_bounds(None, Some(2.0)),
        ];
        let v = Verdict::judge("prop2", &metrics, 2.0);
        assert!(v.passed);
        assert_eq!(v.recompute(&metrics), Some(true));
        let strict = Verdict::judge("prop2", &metrics, 1.0);
        assert!(!strict.passed);
        assert_eq!(strict.recompute(&metrics), Some(false));
        assert_eq!(v.recompute(&metrics[..1]), None);
        assert!(!Verdict::judge("empty", &[], 3.0).passed);
    }

    #[test]
    fn empty_record_gives_header_only_csv() {
        assert_eq!(plotdata_csv(&[]), "name,value,sigma,bound_low,bound_high\n");
        let csv = plotdata_csv(&[Metric::value("v_1", 0.25).with_sigma(0.5).with_bounds(None, Some(1.0))]);
        assert_eq!(csv.lines().nth(1), Some("v_1,0.25,0.5,,1"));
    }

    #[test]
    fn digest_tracks_manifest_values() {
        let a = ExperimentManifest::new(ExperimentKind::Verify, 1);
        let b = ExperimentManifest::new(ExperimentKind::Verify, 2);
        assert_eq!(manifest_digest(&a), manifest_digest(&a.clone()));
        assert_ne!(manifest_digest(&a), manifest_digest(&b));
        assert_eq!(manifest_digest(&a).len(), 64);
    }

    #[test]
    fn reruns_get_new_directories() {
        let tmp = tempfile::tempdir().unwrap();
        let m = ExperimentManifest::new(ExperimentKind::Verify, 1);
        let outcome = Outcome::default();
        let record = RunRecord::new(&m, &outcome, 0.0);
        let first = write_run(tmp.path(), &record, &outcome).unwrap();
        let second = write_run(tmp.path(), &record, &outcome).unwrap();
        assert_ne!(first, second);
        assert!(second.file_name().unwrap().to_str().unwrap().ends_with("-2"));
        let json = std::fs::read_to_string(first.join("record.json")).unwrap();
        let back: RunRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, record);
    }
}
