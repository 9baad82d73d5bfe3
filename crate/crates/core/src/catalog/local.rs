//! Offline catalog backed by a JSON manifest.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "scenes": [
//!     {
//!       "scene_id": "S2A_20160109_tdr70",
//!       "acquired_at": "2016-01-09T05:20:00Z",
//!       "cloud_cover_pct": 3.2,
//!       "cell": "tdr70",
//!       "bands": { "B2": "tdr70/2016-01/B2.tif", "B8": { "href": "stack.tif", "sample": 7 } }
//!     }
//!   ]
//! }
//! ```
//!
//! Footprints are given by `cell` (a geohash covering the target), by `bbox`
//! (`[lon_min, lat_min, lon_max, lat_max]`), or both. Relative band paths
//! resolve against the manifest's directory. Scenes without
//! `cloud_cover_pct` get an estimate from their blue band.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{estimate_cloud_fraction, Period, SceneRecord, CLOUD_BRIGHTNESS_THRESHOLD};
use crate::error::{Error, Result};
use crate::geogrid::{BoundingBox, GeohashCell};
use crate::raster::{AssetRef, Band};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub scenes: Vec<ManifestScene>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestScene {
    pub scene_id: String,
    pub acquired_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cloud_cover_pct: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell: Option<GeohashCell>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<[f64; 4]>,
    pub bands: BTreeMap<Band, AssetRef>,
}

impl ManifestScene {
    fn covers(&self, target: &BoundingBox) -> bool {
        let by_cell = self.cell.as_ref().is_some_and(|c| c.bbox().covers(target));
        let by_bbox = self.bbox.is_some_and(|[lon_min, lat_min, lon_max, lat_max]| {
            BoundingBox {
                lat_min,
                lat_max,
                lon_min,
                lon_max,
            }
            .covers(target)
        });
        by_cell || by_bbox
    }
}

impl Manifest {
    pub fn new(scenes: Vec<ManifestScene>) -> Self {
        Self {
            schema_version: MANIFEST_SCHEMA_VERSION,
            scenes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::parse(
                "manifest",
                format!("unsupported schema_version {}", self.schema_version),
            ));
        }
        for s in &self.scenes {
            if s.cell.is_none() && s.bbox.is_none() {
                return Err(Error::parse(
                    "manifest",
                    format!("scene {} has neither cell nor bbox", s.scene_id),
                ));
            }
            if let Some(c) = s.cloud_cover_pct {
                if !(0.0..=100.0).contains(&c) {
                    return Err(Error::parse(
                        "manifest",
                        format!("scene {} cloud_cover_pct {c} outside [0, 100]", s.scene_id),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LocalCatalog {
    root: PathBuf,
    manifest: Arc<Manifest>,
}

impl LocalCatalog {
    /// `path` is a manifest file or a directory containing `manifest.json`.
    pub fn open(path: PathBuf) -> Result<Self> {
        let file = if path.is_dir() { path.join(MANIFEST_FILE) } else { path };
        let text = std::fs::read_to_string(&file).map_err(|e| {
            Error::Config(format!("cannot read catalog manifest {}: {e}", file.display()))
        })?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::parse(format!("manifest {}", file.display()), e))?;
        manifest.validate()?;
        let root = file.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self {
            root,
            manifest: Arc::new(manifest),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    fn resolve(&self, asset: &AssetRef) -> AssetRef {
        if asset.is_remote() || Path::new(asset.href()).is_absolute() {
            return asset.clone();
        }
        asset.with_href(self.root.join(asset.href()).to_string_lossy().into_owned())
    }

    pub(super) fn query(&self, cell: &GeohashCell, period: Period) -> Result<Vec<SceneRecord>> {
        let mut out = Vec::new();
        for s in &self.manifest.scenes {
            if !period.contains(s.acquired_at) || !s.covers(cell.bbox()) {
                continue;
            }
            let band_assets: BTreeMap<Band, AssetRef> =
                s.bands.iter().map(|(b, a)| (*b, self.resolve(a))).collect();
            let mut rec = SceneRecord {
                scene_id: s.scene_id.clone(),
                acquired_at: s.acquired_at,
                cloud_cover_pct: s.cloud_cover_pct.unwrap_or(f64::NAN),
                band_assets,
                cell: cell.clone(),
            };
            if s.cloud_cover_pct.is_none() {
                let raster = rec.read(&[Band::B2])?;
                rec.cloud_cover_pct = 100.0 * estimate_cloud_fraction(&raster, CLOUD_BRIGHTNESS_THRESHOLD)?;
            }
            out.push(rec);
        }
        Ok(out)
    }
}
