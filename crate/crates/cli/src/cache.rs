//! Scene cache: `<cache>/<cell>/<period>/` holds the representative
//! scene's band files, its true-colour JPEG and `scene.json`. A period whose
//! catalog query came back empty holds only `gap.json`.
//!
//! Entries are assembled in a hidden sibling directory and renamed into
//! place, so an interrupted ingest never leaves a half-written entry.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use aui_core::catalog::{select_representative, CatalogSource, Period, SceneRecord};
use aui_core::geogrid::GeohashCell;
use aui_core::http::HttpClient;
use aui_core::pipeline::{Gap, SceneSource};
use aui_core::raster::{compose_rgb, export_jpeg, jpeg_filename, Band, StretchSpec};
use aui_core::{Error, Result};
use serde::{Deserialize, Serialize};

pub const SCENE_FILE: &str = "scene.json";
pub const GAP_FILE: &str = "gap.json";

/// `scene.json`: the catalog record with band paths relative to the entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct CachedScene {
    record: SceneRecord,
    /// Where each band was fetched from.
    sources: BTreeMap<Band, String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IngestOutcome {
    Cached,
    Fetched { files: usize },
    Gap(Gap),
}

/// Downloads remote assets. The catalog token is only sent to URLs on the
/// catalog's own origin.
#[derive(Debug, Clone)]
pub struct Fetcher {
    pub client: HttpClient,
    pub auth: Option<(String, String)>,
}

impl Fetcher {
    fn token_for(&self, url: &str) -> Option<&str> {
        self.auth
            .as_ref()
            .filter(|(origin, _)| url.starts_with(&format!("{origin}/")))
            .map(|(_, t)| t.as_str())
    }

    fn download(&self, url: &str, dest: &Path) -> Result<u64> {
        self.client.download(url, self.token_for(url), dest)
    }
}

/// `scheme://host[:port]` of a URL.
pub fn origin(url: &str) -> Option<String> {
    let rest_at = url.find("://")? + 3;
    let end = url[rest_at..].find('/').map_or(url.len(), |i| rest_at + i);
    Some(url[..end].to_string())
}

#[derive(Debug, Clone)]
pub struct SceneCache {
    root: PathBuf,
}

impl SceneCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn entry_dir(&self, cell: &GeohashCell, period: Period) -> PathBuf {
        self.root.join(cell.code()).join(period.label())
    }

    pub fn is_cached(&self, cell: &GeohashCell, period: Period) -> bool {
        self.entry_dir(cell, period).join(SCENE_FILE).is_file()
    }

    /// Fetch the representative scene of `(cell, period)` unless it is
    /// already cached.
    pub fn ingest(
        &self,
        catalog: &CatalogSource,
        fetcher: &Fetcher,
        cell: &GeohashCell,
        period: Period,
    ) -> Result<IngestOutcome> {
        if self.is_cached(cell, period) {
            return Ok(IngestOutcome::Cached);
        }
        let dir = self.entry_dir(cell, period);
        let scenes = catalog.query_scenes(cell, period)?;
        let record = match select_representative(cell, period, &scenes) {
            Ok(r) => r.clone(),
            Err(Error::NoScene { .. }) => {
                let gap = Gap::no_scene(period);
                std::fs::create_dir_all(&dir)?;
                write_json(&dir.join(GAP_FILE), &gap)?;
                return Ok(IngestOutcome::Gap(gap));
            }
            Err(e) => return Err(e),
        };

        let parent = dir.parent().expect("entry has a cell directory");
        std::fs::create_dir_all(parent)?;
        let staging = parent.join(format!(".{}.partial-{}", period.label(), std::process::id()));
        if staging.exists() {
            std::fs::remove_dir_all(&staging)?;
        }
        std::fs::create_dir_all(&staging)?;
        let result = Self::fill(&staging, fetcher, record);
        match result {
            Ok((files, scene)) => {
                // a leftover gap marker or stale directory gives way
                if dir.exists() {
                    std::fs::remove_dir_all(&dir)?;
                }
                std::fs::rename(&staging, &dir)?;
                log::info!("{cell} {period}: cached {} ({files} files)", scene.record.scene_id);
                Ok(IngestOutcome::Fetched { files })
            }
            Err(e) => {
                let _ = std::fs::remove_dir_all(&staging);
                Err(e)
            }
        }
    }

    fn fill(
        staging: &Path,
        fetcher: &Fetcher,
        mut record: SceneRecord,
    ) -> Result<(usize, CachedScene)> {
        let missing = record.missing_bands();
        if !missing.is_empty() {
            log::warn!("{}: scene lacks bands {missing:?}", record.scene_id);
        }
        // one local file per distinct source file; multi-sample stacks share it
        let mut local_for: BTreeMap<String, String> = BTreeMap::new();
        let mut sources = BTreeMap::new();
        let mut assets = BTreeMap::new();
        for band in Band::REQUIRED {
            let Some(asset) = record.band_assets.get(&band) else { continue };
            let href = asset.href().to_string();
            let name = match local_for.get(&href) {
                Some(n) => n.clone(),
                None => {
                    let name = format!("{}.tif", band.name());
                    let dest = staging.join(&name);
                    if asset.is_remote() {
                        fetcher.download(&href, &dest)?;
                    } else {
                        link_or_copy(Path::new(&href), &dest)?;
                    }
                    local_for.insert(href.clone(), name.clone());
                    name
                }
            };
            sources.insert(band, href);
            assets.insert(band, asset.with_href(name));
        }
        let files = local_for.len();
        record.band_assets = assets;

        let scene = CachedScene { record, sources };
        let resolved = resolve(&scene.record, staging);
        match resolved.read(&Band::VISIBLE) {
            Ok(raster) => {
                let rgb = compose_rgb(&raster, &StretchSpec::default())?;
                let period = scene.record.period().ok_or_else(|| {
                    Error::InvalidInput(format!("{} acquired outside any period", scene.record.scene_id))
                })?;
                export_jpeg(&rgb, &staging.join(jpeg_filename(period)))?;
            }
            Err(e @ Error::BandMissing(_)) => log::warn!("{}: no composite: {e}", scene.record.scene_id),
            Err(e) => return Err(e),
        }
        write_json(&staging.join(SCENE_FILE), &scene)?;
        Ok((files, scene))
    }
}

fn resolve(record: &SceneRecord, dir: &Path) -> SceneRecord {
    let mut r = record.clone();
    for asset in r.band_assets.values_mut() {
        *asset = asset.with_href(dir.join(asset.href()).to_string_lossy().into_owned());
    }
    r
}

fn link_or_copy(src: &Path, dest: &Path) -> Result<()> {
    if std::fs::hard_link(src, dest).is_err() {
        std::fs::copy(src, dest).map_err(|e| {
            Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", src.display())))
        })?;
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, serde_json::to_string_pretty(value)? + "\n")?;
    std::fs::rename(tmp, path)?;
    Ok(())
}

/// Serves scenes out of an ingested cache.
#[derive(Debug, Clone)]
pub struct CacheSceneSource {
    cache: SceneCache,
}

impl CacheSceneSource {
    pub fn new(cache: SceneCache) -> Self {
        Self { cache }
    }
}

impl SceneSource for CacheSceneSource {
    fn representative(&self, cell: &GeohashCell, period: Period) -> Result<Option<SceneRecord>> {
        let dir = self.cache.entry_dir(cell, period);
        let path = dir.join(SCENE_FILE);
        match std::fs::read_to_string(&path) {
            Ok(text) => {
                let scene: CachedScene =
                    serde_json::from_str(&text).map_err(|e| Error::Parse {
                        what: path.display().to_string(),
                        msg: e.to_string(),
                    })?;
                Ok(Some(resolve(&scene.record, &dir)))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                if dir.join(GAP_FILE).is_file() {
                    Ok(None)
                } else {
                    Err(Error::Config(format!(
                        "{cell} {period} is not in the cache {}; run `aui ingest` first",
                        self.cache.root.display()
                    )))
                }
            }
            Err(e) => Err(e.into()),
        }
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_of_urls() {
        assert_eq!(origin("https://a.example:8443/stac/search?x=1").as_deref(), Some("https://a.example:8443"));
        assert_eq!(origin("http://h").as_deref(), Some("http://h"));
        assert_eq!(origin("relative/path"), None);
    }

    #[test]
    fn token_stays_on_catalog_origin() {
        let f = Fetcher {
            client: HttpClient::new(Default::default(), 1, std::time::Duration::from_secs(1)),
            auth: Some(("https://cat.example".into(), "t".into())),
        };
        assert_eq!(f.token_for("https://cat.example/a.tif"), Some("t"));
        assert_eq!(f.token_for("https://cat.example.evil/a.tif"), None);
        assert_eq!(f.token_for("https://cdn.example/a.tif"), None);
    }
}
