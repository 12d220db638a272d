//! Machine-readable run reports with a versioned schema.
//!
//! Reports serialize to canonical JSON: struct fields in declaration
//! order, maps sorted by key, a trailing newline. Two runs with the same
//! config, seeds, and tool version produce byte-identical files, which is
//! itself a tested property. Wall-clock timings never enter the canonical
//! report; they go to a sidecar file written by the caller so reruns stay
//! comparable.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;

/// Version of the report layout, bumped on breaking changes.
pub const REPORT_SCHEMA: u32 = 1;

/// How one stage ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    /// Ran and met its criteria.
    Pass,
    /// Ran and missed at least one criterion.
    Fail,
    /// Not run because an earlier stage failed.
    Skip,
    /// Aborted by an unexpected error.
    Error,
}

/// One pipeline stage: verdict plus whatever numbers and witnesses the
/// stage produced, as free-form JSON with a stable key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub name: String,
    pub status: StageStatus,
    pub details: Value,
}

impl StageReport {
    pub fn pass(name: &str, details: Value) -> Self {
        Self { name: name.into(), status: StageStatus::Pass, details }
    }

    pub fn fail(name: &str, details: Value) -> Self {
        Self { name: name.into(), status: StageStatus::Fail, details }
    }

    pub fn skip(name: &str) -> Self {
        Self { name: name.into(), status: StageStatus::Skip, details: Value::Null }
    }

    pub fn error(name: &str, message: &str) -> Self {
        Self {
            name: name.into(),
            status: StageStatus::Error,
            details: serde_json::json!({ "error": message }),
        }
    }
}

/// A full run: stages in execution order, the echoed config, and the
/// overall verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: u32,
    pub tool_version: String,
    pub label: String,
    pub config: BTreeMap<String, String>,
    pub stages: Vec<StageReport>,
    pub pass: bool,
}

impl RunReport {
    pub fn new(label: &str, config: BTreeMap<String, String>) -> Self {
        Self {
            schema: REPORT_SCHEMA,
            tool_version: crate::ARTIFACT_VERSION.into(),
            label: label.into(),
            config,
            stages: Vec::new(),
            pass: false,
        }
    }

    /// Appends a stage and keeps the overall verdict current.
    pub fn push(&mut self, stage: StageReport) {
        self.stages.push(stage);
        self.pass = self.stages.iter().all(|s| s.status == StageStatus::Pass);
    }

    pub fn stage(&self, name: &str) -> Option<&StageReport> {
        self.stages.iter().find(|s| s.name == name)
    }
}

/// The exact bytes [`write_report`] persists.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| crate::error::Error::Parse(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

/// Writes the report as canonical JSON.
pub fn write_report(path: &Path, report: &RunReport) -> Result<()> {
    std::fs::write(path, canonical_json(report)?)?;
    Ok(())
}

/// Reads a report back, checking the schema version.
pub fn read_report(path: &Path) -> Result<RunReport> {
    let text = std::fs::read_to_string(path)?;
    let report: RunReport = serde_json::from_str(&text)
        .map_err(|e| crate::error::Error::Parse(format!("{}: {e}", path.display())))?;
    if report.schema != REPORT_SCHEMA {
        return Err(crate::error::Error::Parse(format!(
            "unsupported report schema {} (expected {REPORT_SCHEMA})",
            report.schema
        )));
    }
    Ok(report)
}

/// Writes per-stage wall-clock seconds next to a report. Kept out of the
/// canonical report on purpose: timings differ between identical runs.
pub fn write_timings(path: &Path, timings: &[(String, f64)]) -> Result<()> {
    let entries: Vec<Value> = timings
        .iter()
        .map(|(name, secs)| serde_json::json!({ "stage": name, "seconds": secs }))
        .collect();
    let doc = serde_json::json!({ "schema": REPORT_SCHEMA, "timings": entries });
    std::fs::write(path, canonical_json(&doc)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> RunReport {
        let mut config = BTreeMap::new();
        config.insert("dim".into(), "3".into());
        config.insert("seed".into(), "7".into());
        let mut r = RunReport::new("demo", config);
        r.push(StageReport::pass(
            "alpha",
            serde_json::json!({ "zeta": 1.0, "alpha": 2, "margin": 0.25 }),
        ));
        r.push(StageReport::fail("beta", serde_json::json!({ "witness": [0.0, 1.0] })));
        r.push(StageReport::skip("gamma"));
        r
    }

    #[test]
    fn verdict_tracks_stage_statuses() {
        let mut config = BTreeMap::new();
        config.insert("k".into(), "v".into());
        let mut r = RunReport::new("ok", config);
        r.push(StageReport::pass("a", Value::Null));
        assert!(r.pass);
        r.push(StageReport::error("b", "boom"));
        assert!(!r.pass);
        assert_eq!(r.stage("b").unwrap().status, StageStatus::Error);
    }

    #[test]
    fn canonical_bytes_are_reproducible_and_sorted() {
        let a = canonical_json(&sample_report()).unwrap();
        let b = canonical_json(&sample_report()).unwrap();
        assert_eq!(a, b);
        assert!(a.ends_with('\n'));
        // Map keys inside details come out sorted regardless of insertion.
        let alpha = a.find("\"alpha\": 2").unwrap();
        let zeta = a.find("\"zeta\"").unwrap();
        assert!(alpha < zeta);
        assert!(a.contains("\"schema\": 1"));
    }

    #[test]
    fn report_round_trips_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        let report = sample_report();
        write_report(&path, &report).unwrap();
        let back = read_report(&path).unwrap();
        assert_eq!(report, back);
        // Statuses serialize as the lowercase words.
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"status\": \"skip\""));
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        let mut report = sample_report();
        report.schema = 99;
        write_report(&path, &report).unwrap();
        assert!(read_report(&path).is_err());
    }

    #[test]
    fn timings_sidecar_writes_every_stage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.timings.json");
        write_timings(&path, &[("alpha".into(), 0.25), ("beta".into(), 1.5)]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"stage\": \"alpha\""));
        assert!(text.contains("\"seconds\": 1.5"));
    }
}
