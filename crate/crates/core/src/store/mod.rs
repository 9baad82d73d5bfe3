//! Per-cell AUI time series, persisted as append-only JSON-lines logs.
//!
//! Each cell has `<root>/<cell>.jsonl`. Lines are never rewritten: an
//! overwrite appends a `replace` record carrying both payloads, so the log
//! doubles as the audit trail. One writer per cell is assumed; within a
//! process appends are serialized by a lock.

mod chart;
mod export;
pub mod golden;

pub use chart::{emit_chart, render_chart};
pub use export::{
    comparison_rows, export_comparison_csv, export_csv, export_index_csv, export_metric_csv,
    ComparisonRow,
};

use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::catalog::Period;
use crate::error::{Error, Result};
use crate::indices::IndexSeries;
use crate::pipeline::Gap;

pub const LOG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuiObservation {
    pub cell: String,
    pub period: Period,
    /// 0..=10 in steps of 0.1.
    pub aui: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ndbi_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cloud_cover_pct: Option<f64>,
    pub model_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_response_digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<DateTime<Utc>>,
}

impl AuiObservation {
    /// Equal in everything but the timestamp.
    pub fn same_payload(&self, other: &AuiObservation) -> bool {
        let strip = |o: &AuiObservation| AuiObservation {
            created_at: None,
            ..o.clone()
        };
        strip(self) == strip(other)
    }
}

/// Which quantity a [`MetricSeries`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Aui,
    Ndbi,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Aui => "aui",
            Metric::Ndbi => "ndbi",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Metric::Aui => "AUI",
            Metric::Ndbi => "NDBI",
        }
    }

    /// Decimal places used whenever the metric is written out.
    pub fn decimals(self) -> usize {
        match self {
            Metric::Aui => 1,
            Metric::Ndbi => 6,
        }
    }

    pub fn format(self, v: f64) -> String {
        format!("{:.*}", self.decimals(), v)
    }
}

/// A bare (period, value) sequence for charts and joins.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    pub cell: String,
    pub metric: Metric,
    pub points: Vec<(Period, f64)>,
}

impl MetricSeries {
    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }

    pub fn get(&self, period: Period) -> Option<f64> {
        self.points.iter().find(|p| p.0 == period).map(|p| p.1)
    }
}

impl IndexSeries {
    pub fn to_metric(&self) -> MetricSeries {
        MetricSeries {
            cell: self.cell.clone(),
            metric: Metric::Ndbi,
            points: self.entries.iter().map(|e| (e.period, e.scene_mean)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AuiSeries {
    pub cell: String,
    /// Chronological, one per period.
    pub observations: Vec<AuiObservation>,
    pub gaps: Vec<Gap>,
}

impl AuiSeries {
    pub fn new(cell: impl Into<String>) -> Self {
        Self {
            cell: cell.into(),
            ..Default::default()
        }
    }

    pub fn get(&self, period: Period) -> Option<&AuiObservation> {
        self.observations.iter().find(|o| o.period == period)
    }

    /// Insert keeping chronological order; a second value for a period is a
    /// conflict.
    pub fn insert(&mut self, obs: AuiObservation) -> Result<()> {
        if obs.cell != self.cell {
            return Err(Error::InvalidInput(format!(
                "observation for {} added to series of {}",
                obs.cell, self.cell
            )));
        }
        match self.observations.binary_search_by_key(&obs.period, |o| o.period) {
            Ok(_) => Err(Error::Conflict {
                cell: obs.cell,
                period: obs.period.label(),
            }),
            Err(i) => {
                self.gaps.retain(|g| g.period != obs.period);
                self.observations.insert(i, obs);
                Ok(())
            }
        }
    }

    fn replace(&mut self, obs: AuiObservation) {
        match self.observations.binary_search_by_key(&obs.period, |o| o.period) {
            Ok(i) => self.observations[i] = obs,
            Err(i) => self.observations.insert(i, obs),
        }
    }

    pub fn add_gap(&mut self, gap: Gap) {
        if self.get(gap.period).is_some() || self.gaps.contains(&gap) {
            return;
        }
        let i = self.gaps.partition_point(|g| g.period <= gap.period);
        self.gaps.insert(i, gap);
    }

    pub fn periods(&self) -> Vec<Period> {
        self.observations.iter().map(|o| o.period).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.aui).collect()
    }

    pub fn to_metric(&self) -> MetricSeries {
        MetricSeries {
            cell: self.cell.clone(),
            metric: Metric::Aui,
            points: self.observations.iter().map(|o| (o.period, o.aui)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum Record {
    Observation {
        observation: AuiObservation,
    },
    Replace {
        observation: AuiObservation,
        replaces: AuiObservation,
    },
    Gap {
        cell: String,
        #[serde(flatten)]
        gap: Gap,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct LogLine {
    schema_version: u32,
    #[serde(flatten)]
    record: Record,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AppendOutcome {
    Inserted,
    /// Same payload already stored; nothing written.
    Unchanged,
    /// Different payload stored and `overwrite` was set; the old one stays
    /// in the log.
    Replaced,
}

#[derive(Debug)]
pub struct SeriesStore {
    root: PathBuf,
    lock: Mutex<()>,
}

impl SeriesStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root)?;
        Ok(Self {
            root,
            lock: Mutex::new(()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn log_path(&self, cell: &str) -> PathBuf {
        self.root.join(format!("{cell}.jsonl"))
    }

    pub fn cells(&self) -> Result<Vec<String>> {
        let mut out = Vec::new();
        for entry in std::fs::read_dir(&self.root)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "jsonl") {
                if let Some(stem) = path.file_stem() {
                    out.push(stem.to_string_lossy().into_owned());
                }
            }
        }
        out.sort();
        Ok(out)
    }

    pub fn load(&self, cell: &str) -> Result<AuiSeries> {
        let path = self.log_path(cell);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(AuiSeries::new(cell)),
            Err(e) => return Err(e.into()),
        };
        let mut series = AuiSeries::new(cell);
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let what = || format!("{} line {}", path.display(), n + 1);
            let parsed: LogLine = serde_json::from_str(line).map_err(|e| Error::parse(what(), e))?;
            if parsed.schema_version != LOG_SCHEMA_VERSION {
                return Err(Error::parse(
                    what(),
                    format!("unsupported schema_version {}", parsed.schema_version),
                ));
            }
            match parsed.record {
                Record::Observation { observation } => {
                    if series.get(observation.period).is_some() {
                        return Err(Error::parse(what(), "second observation for a period without replace"));
                    }
                    series.insert(observation).map_err(|e| Error::parse(what(), e))?;
                }
                Record::Replace { observation, .. } => {
                    series.gaps.retain(|g| g.period != observation.period);
                    series.replace(observation);
                }
                Record::Gap { gap, .. } => series.add_gap(gap),
            }
        }
        Ok(series)
    }

    fn write_line(&self, cell: &str, record: Record) -> Result<()> {
        let line = serde_json::to_string(&LogLine {
            schema_version: LOG_SCHEMA_VERSION,
            record,
        })?;
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.log_path(cell))?;
        f.write_all(format!("{line}\n").as_bytes())?;
        f.sync_data()?;
        Ok(())
    }

    pub fn append(&self, obs: &AuiObservation, overwrite: bool) -> Result<AppendOutcome> {
        let _guard = self.lock.lock().unwrap_or_else(|p| p.into_inner());
        let series = self.load(&obs.cell)?;
        match series.get(obs.period) {
            None => {
                self.write_line(
                    &obs.cell,
                    Record::Observation {
                        observation: obs.clone(),
                    },
                )?;
                Ok(AppendOutcome::Inserted)
            }
            Some(existing) if existing.same_payload(obs) => Ok(AppendOutcome::Unchanged),
            Some(_) if !overwrite => Err(Error::Conflict {
                cell: obs.cell.clone(),
                period: obs.period.label(),
            }),
            Some(existing) => {
                log::info!("{} {}: replacing stored observation", obs.cell, obs.period);
                self.write_line(
                    &obs.cell,
                    Record::Replace {
                        observation: obs.clone(),
                        replaces: existing.clone(),
                    },
                )?;
                Ok(AppendOutcome::Replaced)
            }
        }
    }

    /// Gaps already recorded, or shadowed by an observation, are skipped.
    pub fn record_gap(&self, cell: &str, gap: &Gap) -> Result<bool> {
        let _guard = self.lock.lock().unwrap_or_else(|p| p.into_inner());
        let series = self.load(cell)?;
        if series.get(gap.period).is_some() || series.gaps.contains(gap) {
            return Ok(false);
        }
        self.write_line(
            cell,
            Record::Gap {
                cell: cell.to_string(),
                gap: gap.clone(),
            },
        )?;
        Ok(true)
    }

    /// Raw audit trail: every line, in order.
    pub fn audit(&self, cell: &str) -> Result<Vec<serde_json::Value>> {
        let text = match std::fs::read_to_string(self.log_path(cell)) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(Error::from))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(period: &str, aui: f64) -> AuiObservation {
        AuiObservation {
            cell: "tdr70".into(),
            period: period.parse().unwrap(),
            aui,
            ndbi_mean: Some(0.099356),
            scene_id: Some("S2A_x".into()),
            cloud_cover_pct: Some(3.25),
            model_id: "stub".into(),
            prompt_digest: None,
            raw_response_digest: None,
            rationale: None,
            created_at: Some(Utc::now()),
        }
    }

    #[test]
    fn append_then_load_roundtrips() {
        let dir = tempfile::tempdir().unwrap();
        let store = SeriesStore::open(dir.path()).unwrap();
        store.append(&obs("2016-07", 7.4), false).unwrap();
        store.append(&obs("2016-01", 7.2), false).unwrap();
        let s = store.load("tdr70").unwrap();
        assert_eq!(s.values(), vec![7.2, 7.4]);
        assert!(s.observations[0].same_payload(&obs("2016-01", 7.2)));
        assert_eq!(s.observations[0].ndbi_mean, Some(0.099356));
    }

    #[test]
    fn identical_reappend_is_noop() {
        let dir = tempfile::tempdir().unwrap();
        let store = SeriesStore::open(dir.path()).unwrap();
        assert_eq!(store.append(&obs("2016-01", 7.2), false).unwrap(), AppendOutcome::Inserted);
        assert_eq!(store.append(&obs("2016-01", 7.2), false).unwrap(), AppendOutcome::Unchanged);
        assert_eq!(store.audit("tdr70").unwrap().len(), 1);
    }

    #[test]
    fn different_payload_conflicts_unless_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        let store = SeriesStore::open(dir.path()).unwrap();
        store.append(&obs("2016-01", 7.2), false).unwrap();
        assert!(matches!(
            store.append(&obs("2016-01", 7.3), false),
            Err(Error::Conflict { .. })
        ));
        assert_eq!(store.append(&obs("2016-01", 7.3), true).unwrap(), AppendOutcome::Replaced);
        assert_eq!(store.load("tdr70").unwrap().values(), vec![7.3]);
        let audit = store.audit("tdr70").unwrap();
        assert_eq!(audit.len(), 2);
        assert_eq!(audit[1]["replaces"]["aui"], 7.2);
    }

    #[test]
    fn gaps_recorded_once_and_cleared_by_observation() {
        let dir = tempfile::tempdir().unwrap();
        let store = SeriesStore::open(dir.path()).unwrap();
        let p: Period = "2017-07".parse().unwrap();
        assert!(store.record_gap("tdr70", &Gap::no_scene(p)).unwrap());
        assert!(!store.record_gap("tdr70", &Gap::no_scene(p)).unwrap());
        assert_eq!(store.load("tdr70").unwrap().gaps.len(), 1);
        store.append(&obs("2017-07", 7.6), false).unwrap();
        let s = store.load("tdr70").unwrap();
        assert!(s.gaps.is_empty());
        assert_eq!(s.observations.len(), 1);
    }

    #[test]
    fn corrupt_line_is_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let store = SeriesStore::open(dir.path()).unwrap();
        std::fs::write(store.log_path("tdr70"), "{not json\n").unwrap();
        assert!(matches!(store.load("tdr70"), Err(Error::Parse { .. })));
    }

    #[test]
    fn series_insert_keeps_order_and_rejects_duplicates() {
        let mut s = AuiSeries::new("tdr70");
        s.insert(obs("2017-01", 2.0)).unwrap();
        s.insert(obs("2016-01", 1.0)).unwrap();
        assert_eq!(s.values(), vec![1.0, 2.0]);
        assert!(s.insert(obs("2016-01", 1.5)).is_err());
    }
}
