//! Scene discovery and representative-scene selection.

mod local;
mod period;
mod remote;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use local::{LocalCatalog, Manifest, ManifestScene, MANIFEST_FILE, MANIFEST_SCHEMA_VERSION};
pub use period::{Half, Period};
pub use remote::RemoteCatalog;

use crate::error::{Error, Result};
use crate::geogrid::GeohashCell;
use crate::http::{HttpClient, RetryPolicy};
use crate::raster::{self, AssetRef, Band, SceneRaster};

/// Default blue-band reflectance above which a pixel counts as cloud.
pub const CLOUD_BRIGHTNESS_THRESHOLD: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    pub scene_id: String,
    pub acquired_at: DateTime<Utc>,
    pub cloud_cover_pct: f64,
    pub band_assets: BTreeMap<Band, AssetRef>,
    pub cell: GeohashCell,
}

impl SceneRecord {
    /// Required bands absent from `band_assets`.
    pub fn missing_bands(&self) -> Vec<Band> {
        Band::REQUIRED
            .iter()
            .copied()
            .filter(|b| !self.band_assets.contains_key(b))
            .collect()
    }

    pub fn period(&self) -> Option<Period> {
        Period::containing(self.acquired_at.date_naive())
    }

    pub fn read(&self, bands: &[Band]) -> Result<SceneRaster> {
        raster::read_scene(&self.scene_id, &self.cell, &self.band_assets, bands)
    }
}

#[derive(Debug, Clone)]
pub enum CatalogSource {
    Local(LocalCatalog),
    Remote(RemoteCatalog),
}

impl CatalogSource {
    /// `http(s)://...` opens a remote search endpoint; anything else is a
    /// local manifest file or a directory holding `manifest.json`.
    pub fn open(spec: &str, token: Option<String>, max_in_flight: usize) -> Result<Self> {
        if spec.starts_with("http://") || spec.starts_with("https://") {
            let client = HttpClient::new(RetryPolicy::default(), max_in_flight, Duration::from_secs(60));
            Ok(CatalogSource::Remote(RemoteCatalog::new(spec, token, client)))
        } else {
            Ok(CatalogSource::Local(LocalCatalog::open(PathBuf::from(spec))?))
        }
    }

    /// Scenes acquired inside `period`'s window whose footprint covers `cell`.
    pub fn query_scenes(&self, cell: &GeohashCell, period: Period) -> Result<Vec<SceneRecord>> {
        let mut scenes = match self {
            CatalogSource::Local(c) => c.query(cell, period)?,
            CatalogSource::Remote(c) => c.query(cell, period)?,
        };
        scenes.retain(|s| period.contains(s.acquired_at));
        scenes.sort_by(|a, b| a.acquired_at.cmp(&b.acquired_at).then_with(|| a.scene_id.cmp(&b.scene_id)));
        Ok(scenes)
    }
}

/// Least cloud cover wins; ties go to the earliest acquisition, then the
/// lexicographically smallest scene id.
pub fn select_representative<'a>(
    cell: &GeohashCell,
    period: Period,
    scenes: &'a [SceneRecord],
) -> Result<&'a SceneRecord> {
    scenes
        .iter()
        .min_by(|a, b| {
            a.cloud_cover_pct
                .total_cmp(&b.cloud_cover_pct)
                .then_with(|| a.acquired_at.cmp(&b.acquired_at))
                .then_with(|| a.scene_id.cmp(&b.scene_id))
        })
        .ok_or_else(|| Error::NoScene {
            cell: cell.code().to_string(),
            period,
        })
}

/// Share of valid B2 pixels brighter than `threshold` reflectance.
pub fn estimate_cloud_fraction(raster: &SceneRaster, threshold: f64) -> Result<f64> {
    let blue = raster::to_reflectance(raster.band(Band::B2)?);
    let (bright, valid) = blue
        .values
        .iter()
        .filter(|v| !v.is_nan())
        .fold((0usize, 0usize), |(b, n), &v| (b + (v > threshold) as usize, n + 1));
    if valid == 0 {
        return Err(Error::UndefinedFraction);
    }
    Ok(bright as f64 / valid as f64)
}
