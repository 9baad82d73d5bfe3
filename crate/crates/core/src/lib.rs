//! Urban development scoring for Sentinel-2 geohash cells.
//!
//! The pipeline: pick a cell and a range of half-year periods, select the
//! least-cloud scene of each period from a catalog, decode its bands,
//! compose a true-colour image and score it 0..10 with a vision model that
//! is calibrated by reference images and anchored on the previous period's
//! score. NDBI runs alongside as the spectral baseline.
//!
//! ```no_run
//! use aui_core::prelude::*;
//!
//! let cell: GeohashCell = "tdr70".parse()?;
//! let catalog = CatalogSource::open("corpus/", None, 4)?;
//! let source = CatalogSceneSource::new(catalog);
//! let refs = aui_core::synth::default_reference_set(64)?;
//! let periods = Period::range(
//!     chrono::NaiveDate::from_ymd_opt(2016, 1, 1).unwrap(),
//!     chrono::NaiveDate::from_ymd_opt(2025, 1, 1).unwrap(),
//! );
//! let run = score_series(&cell, &periods, &source, &StubBackend::default(), &refs,
//!                        &SeriesOptions::default(), None, None);
//! println!("{:?}", run.series.values());
//! # Ok::<(), aui_core::Error>(())
//! ```

pub mod catalog;
pub mod error;
pub mod exec;
pub mod geogrid;
pub mod http;
pub mod indices;
pub mod pipeline;
pub mod raster;
pub mod scoring;
pub mod store;
pub mod synth;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::catalog::{select_representative, CatalogSource, Period, SceneRecord};
    pub use crate::error::{Error, Result};
    pub use crate::exec::Exec;
    pub use crate::geogrid::{BoundingBox, GeohashCell};
    pub use crate::indices::{index_series, ndbi, IndexResult, IndexSeries};
    pub use crate::pipeline::{CatalogSceneSource, Gap, SceneSource};
    pub use crate::raster::{compose_rgb, Band, CompositeImage, SceneRaster, StretchSpec};
    pub use crate::scoring::{
        score, score_series, ModelBackend, ReferenceSet, ReplayBackend, SeriesOptions, StubBackend,
    };
    pub use crate::store::{AuiObservation, AuiSeries, SeriesStore};
}
