//! Where per-period scenes come from.

use serde::{Deserialize, Serialize};

use crate::catalog::{select_representative, CatalogSource, Period, SceneRecord};
use crate::error::{Error, Result};
use crate::geogrid::GeohashCell;
use crate::raster::{Band, SceneRaster};

/// A period with no usable scene. Gaps are recorded, never interpolated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gap {
    pub period: Period,
    pub reason: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_id: Option<String>,
}

impl Gap {
    pub fn no_scene(period: Period) -> Self {
        Self {
            period,
            reason: "no scene in window".into(),
            scene_id: None,
        }
    }
}

/// Supplies the representative scene of a (cell, period) and its pixels.
pub trait SceneSource: Send + Sync {
    /// `None` marks a gap.
    fn representative(&self, cell: &GeohashCell, period: Period) -> Result<Option<SceneRecord>>;

    fn load(&self, record: &SceneRecord, bands: &[Band]) -> Result<SceneRaster> {
        record.read(bands)
    }
}

/// Query + least-cloud selection straight from a catalog.
#[derive(Debug, Clone)]
pub struct CatalogSceneSource {
    pub catalog: CatalogSource,
}

impl CatalogSceneSource {
    pub fn new(catalog: CatalogSource) -> Self {
        Self { catalog }
    }
}

impl SceneSource for CatalogSceneSource {
    fn representative(&self, cell: &GeohashCell, period: Period) -> Result<Option<SceneRecord>> {
        let scenes = self.catalog.query_scenes(cell, period)?;
        match select_representative(cell, period, &scenes) {
            Ok(s) => Ok(Some(s.clone())),
            Err(Error::NoScene { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }
}
