//! Run configuration: a TOML file, overridden field by field by flags.
//!
//! ```toml
//! cells = ["tdr70", "tdr0t"]
//! from = "2016-01-01"
//! to = "2025-01-01"
//! catalog = "corpus"            # manifest directory/file, or a STAC search URL
//! backend = "stub"              # remote | stub | replay
//! refs = "refs/refs.json"       # optional; synthetic reference set if absent
//! cache_dir = "cache"
//! out_dir = "out"
//! jobs = 4
//! clamp_step = 0.2              # optional
//! svg = true
//!
//! [model]
//! endpoint = "https://api.openai.com/v1"
//! id = "gpt-4o-mini"
//! replay_dir = "replay"         # read by `replay`, written by the others
//! reasks = 2
//! ```
//!
//! Secrets never live in the file: `AUI_MODEL_API_KEY` and
//! `AUI_CATALOG_TOKEN` come from the environment.

use std::path::{Path, PathBuf};

use aui_core::catalog::Period;
use aui_core::geogrid::GeohashCell;
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub const CATALOG_TOKEN_ENV: &str = "AUI_CATALOG_TOKEN";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Remote,
    Stub,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub endpoint: String,
    pub id: String,
    pub replay_dir: Option<PathBuf>,
    pub reasks: u32,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1".into(),
            id: "gpt-4o-mini".into(),
            replay_dir: None,
            reasks: aui_core::scoring::DEFAULT_REASKS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub cells: Vec<String>,
    #[serde(deserialize_with = "date")]
    pub from: Option<NaiveDate>,
    #[serde(deserialize_with = "date")]
    pub to: Option<NaiveDate>,
    pub catalog: Option<String>,
    pub backend: BackendKind,
    pub refs: Option<PathBuf>,
    pub cache_dir: PathBuf,
    pub out_dir: PathBuf,
    pub jobs: usize,
    pub clamp_step: Option<f64>,
    pub svg: bool,
    pub overwrite: bool,
    pub model: ModelConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            cells: Vec::new(),
            from: None,
            to: None,
            catalog: None,
            backend: BackendKind::Stub,
            refs: None,
            cache_dir: PathBuf::from("cache"),
            out_dir: PathBuf::from("out"),
            jobs: 4,
            clamp_step: None,
            svg: true,
            overwrite: false,
            model: ModelConfig::default(),
        }
    }
}
/// Accepts a TOML local date (`2016-01-01`) as well as a quoted one.
fn date<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<NaiveDate>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Toml(toml::value::Datetime),
        Text(String),
    }
    let text = match Raw::deserialize(d)? {
        Raw::Toml(dt) if dt.time.is_none() && dt.offset.is_none() => dt.to_string(),
        Raw::Toml(dt) => return Err(serde::de::Error::custom(format!("expected a date, got {dt}"))),
        Raw::Text(s) => s,
    };
    text.parse().map(Some).map_err(serde::de::Error::custom)
}

/// A configuration that passed validation.
#[derive(Debug, Clone)]
pub struct Validated {
    pub cells: Vec<GeohashCell>,
    pub periods: Vec<Period>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("config {}: {e}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Checks that need no I/O beyond the local filesystem.
    pub fn validate(&self, need_periods: bool) -> Result<Validated, String> {
        if self.cells.is_empty() {
            return Err("no cells given (--cells or `cells` in the config)".into());
        }
        let mut cells = Vec::new();
        for c in &self.cells {
            let cell: GeohashCell = c.trim().parse().map_err(|e| format!("cell {c:?}: {e}"))?;
            if !cells.contains(&cell) {
                cells.push(cell);
            }
        }
        let periods = match (self.from, self.to) {
            (Some(f), Some(t)) if f > t => return Err(format!("--from {f} is after --to {t}")),
            (Some(f), Some(t)) => Period::range(f, t),
            _ if need_periods => return Err("--from and --to are required".into()),
            _ => Vec::new(),
        };
        if need_periods && periods.is_empty() {
            return Err("the date range contains no January or July period".into());
        }
        if self.jobs == 0 {
            return Err("--jobs must be at least 1".into());
        }
        if let Some(s) = self.clamp_step {
            if !(s.is_finite() && s > 0.0) {
                return Err(format!("--clamp-step {s} must be positive"));
            }
        }
        if let Some(r) = &self.refs {
            if !r.exists() {
                return Err(format!("reference set {} does not exist", r.display()));
            }
        }
        Ok(Validated {
            cells,
            periods,
        })
    }

    pub fn validate_backend(&self) -> Result<(), String> {
        match self.backend {
            BackendKind::Stub => Ok(()),
            BackendKind::Replay => match &self.model.replay_dir {
                Some(d) if d.is_dir() => Ok(()),
                Some(d) => Err(format!("replay directory {} does not exist", d.display())),
                None => Err("backend replay needs model.replay_dir (--replay-dir)".into()),
            },
            BackendKind::Remote => {
                if std::env::var_os(aui_core::scoring::API_KEY_ENV).is_none() {
                    return Err(format!("backend remote needs {}", aui_core::scoring::API_KEY_ENV));
                }
                if !(self.model.endpoint.starts_with("http://") || self.model.endpoint.starts_with("https://")) {
                    return Err(format!("model endpoint {:?} is not an http(s) URL", self.model.endpoint));
                }
                Ok(())
            }
        }
    }

    pub fn catalog_token() -> Option<String> {
        std::env::var(CATALOG_TOKEN_ENV).ok().filter(|t| !t.is_empty())
    }
}
