//! STAC-style item search over HTTP.
//!
//! `GET {endpoint}?bbox=lon_min,lat_min,lon_max,lat_max&datetime=start/end&limit=N`
//! returning a GeoJSON FeatureCollection; further pages are followed through
//! `links[rel=next]`.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::Deserialize;

use super::{Period, SceneRecord};
use crate::error::{Error, Result};
use crate::geogrid::{BoundingBox, GeohashCell};
use crate::http::HttpClient;
use crate::raster::{AssetRef, Band};

const MAX_PAGES: usize = 1000;

#[derive(Debug, Clone)]
pub struct RemoteCatalog {
    endpoint: String,
    pub collection: Option<String>,
    token: Option<String>,
    pub page_limit: usize,
    client: HttpClient,
}

#[derive(Debug, Deserialize)]
struct FeatureCollection {
    #[serde(default)]
    features: Vec<Feature>,
    #[serde(default)]
    links: Vec<Link>,
}

#[derive(Debug, Deserialize)]
struct Link {
    rel: String,
    href: String,
}

#[derive(Debug, Deserialize)]
struct Feature {
    id: String,
    bbox: Option<Vec<f64>>,
    properties: Properties,
    #[serde(default)]
    assets: BTreeMap<String, Asset>,
}

#[derive(Debug, Deserialize)]
struct Properties {
    datetime: DateTime<Utc>,
    #[serde(rename = "eo:cloud_cover")]
    cloud_cover: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct Asset {
    href: String,
}

impl RemoteCatalog {
    pub fn new(endpoint: &str, token: Option<String>, client: HttpClient) -> Self {
        Self {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            collection: Some("sentinel-2-l2a".into()),
            token,
            page_limit: 100,
            client,
        }
    }

    pub fn client(&self) -> &HttpClient {
        &self.client
    }

    pub fn token(&self) -> Option<&str> {
        self.token.as_deref()
    }

    pub fn search_url(&self, cell: &GeohashCell, period: Period) -> String {
        let b = cell.bbox();
        let (start, end) = period.window_utc();
        let mut url = format!(
            "{}?bbox={},{},{},{}&datetime={}/{}&limit={}",
            self.endpoint,
            b.lon_min,
            b.lat_min,
            b.lon_max,
            b.lat_max,
            start.format("%Y-%m-%dT%H:%M:%SZ"),
            (end - chrono::Duration::seconds(1)).format("%Y-%m-%dT%H:%M:%SZ"),
            self.page_limit
        );
        if let Some(c) = &self.collection {
            url.push_str("&collections=");
            url.push_str(c);
        }
        url
    }

    fn absolute(&self, href: &str) -> String {
        if href.starts_with("http://") || href.starts_with("https://") {
            return href.to_string();
        }
        // origin of the endpoint, e.g. http://host:port
        let origin_end = self
            .endpoint
            .find("://")
            .and_then(|i| self.endpoint[i + 3..].find('/').map(|j| i + 3 + j))
            .unwrap_or(self.endpoint.len());
        format!("{}/{}", &self.endpoint[..origin_end], href.trim_start_matches('/'))
    }

    pub(super) fn query(&self, cell: &GeohashCell, period: Period) -> Result<Vec<SceneRecord>> {
        let mut url = Some(self.search_url(cell, period));
        let mut out = Vec::new();
        let mut pages = 0;
        while let Some(u) = url.take() {
            pages += 1;
            if pages > MAX_PAGES {
                return Err(Error::parse("catalog response", "pagination does not terminate"));
            }
            let value = self.client.get_json(&u, self.token.as_deref())?;
            let page: FeatureCollection =
                serde_json::from_value(value).map_err(|e| Error::parse("catalog response", e))?;
            for f in page.features {
                if let Some(rec) = self.to_record(f, cell)? {
                    out.push(rec);
                }
            }
            url = page
                .links
                .iter()
                .find(|l| l.rel == "next")
                .map(|l| self.absolute(&l.href));
        }
        Ok(out)
    }

    fn to_record(&self, f: Feature, cell: &GeohashCell) -> Result<Option<SceneRecord>> {
        let bbox = match f.bbox.as_deref() {
            Some([lon_min, lat_min, lon_max, lat_max]) => BoundingBox {
                lat_min: *lat_min,
                lat_max: *lat_max,
                lon_min: *lon_min,
                lon_max: *lon_max,
            },
            Some([lon_min, lat_min, _, lon_max, lat_max, _]) => BoundingBox {
                lat_min: *lat_min,
                lat_max: *lat_max,
                lon_min: *lon_min,
                lon_max: *lon_max,
            },
            _ => {
                return Err(Error::parse(
                    "catalog response",
                    format!("feature {} has no usable bbox", f.id),
                ))
            }
        };
        if !bbox.covers(cell.bbox()) {
            return Ok(None);
        }
        let cloud = f.properties.cloud_cover.ok_or_else(|| {
            Error::parse("catalog response", format!("feature {} lacks eo:cloud_cover", f.id))
        })?;
        if !(0.0..=100.0).contains(&cloud) {
            return Err(Error::parse(
                "catalog response",
                format!("feature {} cloud cover {cloud} outside [0, 100]", f.id),
            ));
        }
        let mut band_assets = BTreeMap::new();
        for (key, asset) in f.assets {
            if let Ok(band) = key.parse::<Band>() {
                band_assets
                    .entry(band)
                    .or_insert_with(|| AssetRef::Path(self.absolute(&asset.href)));
            }
        }
        Ok(Some(SceneRecord {
            scene_id: f.id,
            acquired_at: f.properties.datetime,
            cloud_cover_pct: cloud,
            band_assets,
            cell: cell.clone(),
        }))
    }
}
