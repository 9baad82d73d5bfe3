use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{encode_jpeg, CompositeImage};

/// Inclusive AUI band a reference image stands for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 2]", try_from = "[f64; 2]")]
pub struct AuiRange {
    pub lo: f64,
    pub hi: f64,
}

impl AuiRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(0.0 <= lo && lo <= hi && hi <= 10.0) {
            return Err(Error::Config(format!("AUI range [{lo}, {hi}] must satisfy 0 <= lo <= hi <= 10")));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }
}

impl From<AuiRange> for [f64; 2] {
    fn from(r: AuiRange) -> Self {
        [r.lo, r.hi]
    }
}

impl TryFrom<[f64; 2]> for AuiRange {
    type Error = Error;

    fn try_from([lo, hi]: [f64; 2]) -> Result<Self> {
        AuiRange::new(lo, hi)
    }
}

impl fmt::Display for AuiRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lo == self.hi {
            write!(f, "{}", self.lo)
        } else {
            write!(f, "{}-{}", self.lo, self.hi)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceEntry {
    pub label: String,
    pub aui_range: AuiRange,
    /// JPEG bytes as sent to the model.
    pub jpeg: Vec<u8>,
    pub provenance: String,
}

impl ReferenceEntry {
    pub fn from_composite(
        label: impl Into<String>,
        aui_range: AuiRange,
        image: &CompositeImage,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        Ok(Self {
            label: label.into(),
            aui_range,
            jpeg: encode_jpeg(image)?,
            provenance: provenance.into(),
        })
    }
}

/// Calibration images with their AUI bands, ordered by ascending range.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSet {
    entries: Vec<ReferenceEntry>,
}

/// One line of the reference-set file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReferenceFileEntry {
    pub label: String,
    pub aui_range: AuiRange,
    /// JPEG path, relative to the reference file.
    pub image: PathBuf,
    #[serde(default)]
    pub provenance: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReferenceFile {
    pub schema_version: u32,
    pub entries: Vec<ReferenceFileEntry>,
}

/// The six calibration bins: label, range, provenance of the original region.
pub const DEFAULT_BINS: [(&str, f64, f64, &str); 6] = [
    ("forest", 0.0, 0.0, "forest near Koothampalyam, GH5 tdp49"),
    ("sparse rural", 1.0, 2.0, "Jallipalya, GH5 tdp54"),
    ("peri-urban", 3.0, 4.0, "Hesaraghatta, GH5 tdr4f"),
    ("suburban", 5.0, 6.0, "Kaggalipura, GH5 tdr0g"),
    ("urban", 7.0, 8.0, "Halasuru, GH5 tdr1y"),
    ("dense urban", 9.0, 10.0, "Rajajinagar, GH5 tdr1u"),
];

impl ReferenceSet {
    pub fn new(entries: Vec<ReferenceEntry>) -> Result<Self> {
        for pair in entries.windows(2) {
            let (a, b) = (&pair[0].aui_range, &pair[1].aui_range);
            if !(a.hi < b.lo) {
                return Err(Error::Config(format!(
                    "reference ranges must ascend without overlap: {a} then {b}"
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[ReferenceEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read reference set {}: {e}", path.display())))?;
        let file: ReferenceFile = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("reference set {}: {e}", path.display())))?;
        if file.schema_version != 1 {
            return Err(Error::Config(format!(
                "reference set schema_version {} is not supported",
                file.schema_version
            )));
        }
        let base = path.parent().unwrap_or(Path::new(""));
        let entries = file
            .entries
            .into_iter()
            .map(|e| {
                let img = base.join(&e.image);
                let jpeg = std::fs::read(&img).map_err(|err| {
                    Error::Config(format!("reference image {}: {err}", img.display()))
                })?;
                Ok(ReferenceEntry {
                    label: e.label,
                    aui_range: e.aui_range,
                    jpeg,
                    provenance: e.provenance,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }

    /// Write images next to `path` and the index file at `path`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let base = path.parent().unwrap_or(Path::new(""));
        std::fs::create_dir_all(base)?;
        let mut entries = Vec::new();
        for (i, e) in self.entries.iter().enumerate() {
            let name = PathBuf::from(format!("ref_{i}_{}.jpg", e.aui_range.to_string().replace('.', "_")));
            std::fs::write(base.join(&name), &e.jpeg)?;
            entries.push(ReferenceFileEntry {
                label: e.label.clone(),
                aui_range: e.aui_range,
                image: name,
                provenance: e.provenance.clone(),
            });
        }
        let file = ReferenceFile {
            schema_version: 1,
            entries,
        };
        std::fs::write(path, serde_json::to_string_pretty(&file)? + "\n")?;
        Ok(())
    }
}
