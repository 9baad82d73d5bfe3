//! Geohash cells.
//!
//! Standard geohash bit interleaving: the first bit refines longitude, then
//! latitude, alternating. Cells are half-open rectangles `[min, max)` so that
//! cells of one precision partition the globe; points on the north pole or the
//! antimeridian belong to the cells touching those edges.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BASE32: &[u8; 32] = b"0123456789bcdefghjkmnpqrstuvwxyz";

pub const MAX_PRECISION: usize = 12;

/// Mean Earth radius (IUGG), km.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl BoundingBox {
    pub fn center(&self) -> (f64, f64) {
        (
            (self.lat_min + self.lat_max) / 2.0,
            (self.lon_min + self.lon_max) / 2.0,
        )
    }

    pub fn lat_span(&self) -> f64 {
        self.lat_max - self.lat_min
    }

    pub fn lon_span(&self) -> f64 {
        self.lon_max - self.lon_min
    }

    /// Half-open containment, closed on the global north/east edges.
    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        let lat_ok = lat >= self.lat_min && (lat < self.lat_max || (lat == 90.0 && self.lat_max == 90.0));
        let lon_ok =
            lon >= self.lon_min && (lon < self.lon_max || (lon == 180.0 && self.lon_max == 180.0));
        lat_ok && lon_ok
    }

    /// True when `other` lies entirely inside `self` (edges may coincide).
    pub fn covers(&self, other: &BoundingBox) -> bool {
        self.lat_min <= other.lat_min
            && self.lat_max >= other.lat_max
            && self.lon_min <= other.lon_min
            && self.lon_max >= other.lon_max
    }

    pub fn intersects(&self, other: &BoundingBox) -> bool {
        self.lat_min < other.lat_max
            && other.lat_min < self.lat_max
            && self.lon_min < other.lon_max
            && other.lon_min < self.lon_max
    }
}

/// Serialized as its lowercase code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct GeohashCell {
    code: String,
    bbox: BoundingBox,
}

impl GeohashCell {
    pub fn code(&self) -> &str {
        &self.code
    }

    pub fn precision(&self) -> usize {
        self.code.len()
    }

    pub fn bbox(&self) -> &BoundingBox {
        &self.bbox
    }

    /// Width and height in km, see [`cell_dimensions_km`].
    pub fn dimensions_km(&self) -> (f64, f64) {
        cell_dimensions_km(self)
    }

    /// Parent cell one character shorter, `None` at precision 1.
    pub fn parent(&self) -> Option<GeohashCell> {
        (self.code.len() > 1).then(|| decode(&self.code[..self.code.len() - 1]).expect("valid prefix"))
    }
}

impl fmt::Display for GeohashCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code)
    }
}

impl TryFrom<String> for GeohashCell {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        decode(&s)
    }
}

impl From<GeohashCell> for String {
    fn from(c: GeohashCell) -> String {
        c.code
    }
}

impl std::str::FromStr for GeohashCell {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        decode(s)
    }
}

pub fn encode(lat: f64, lon: f64, precision: usize) -> Result<GeohashCell> {
    if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
        return Err(Error::InvalidInput(format!(
            "coordinate out of range: lat {lat}, lon {lon}"
        )));
    }
    if !(1..=MAX_PRECISION).contains(&precision) {
        return Err(Error::InvalidInput(format!(
            "geohash precision must be in 1..={MAX_PRECISION}, got {precision}"
        )));
    }

    let (mut lat_lo, mut lat_hi) = (-90.0_f64, 90.0_f64);
    let (mut lon_lo, mut lon_hi) = (-180.0_f64, 180.0_f64);
    let mut code = String::with_capacity(precision);
    let mut even = true;

    for _ in 0..precision {
        let mut idx = 0usize;
        for _ in 0..5 {
            let (lo, hi, v) = if even {
                (&mut lon_lo, &mut lon_hi, lon)
            } else {
                (&mut lat_lo, &mut lat_hi, lat)
            };
            let mid = (*lo + *hi) / 2.0;
            idx <<= 1;
            if v >= mid {
                idx |= 1;
                *lo = mid;
            } else {
                *hi = mid;
            }
            even = !even;
        }
        code.push(BASE32[idx] as char);
    }

    Ok(GeohashCell {
        code,
        bbox: BoundingBox {
            lat_min: lat_lo,
            lat_max: lat_hi,
            lon_min: lon_lo,
            lon_max: lon_hi,
        },
    })
}

pub fn decode(code: &str) -> Result<GeohashCell> {
    if code.is_empty() || code.len() > MAX_PRECISION {
        return Err(Error::parse(
            "geohash",
            format!("length must be 1..={MAX_PRECISION}, got {}", code.len()),
        ));
    }

    let (mut lat_lo, mut lat_hi) = (-90.0_f64, 90.0_f64);
    let (mut lon_lo, mut lon_hi) = (-180.0_f64, 180.0_f64);
    let mut even = true;

    for ch in code.chars() {
        let idx = char_index(ch)
            .ok_or_else(|| Error::parse("geohash", format!("invalid character {ch:?} in {code:?}")))?;
        for bit in (0..5).rev() {
            let set = (idx >> bit) & 1 == 1;
            let (lo, hi) = if even {
                (&mut lon_lo, &mut lon_hi)
            } else {
                (&mut lat_lo, &mut lat_hi)
            };
            let mid = (*lo + *hi) / 2.0;
            if set {
                *lo = mid;
            } else {
                *hi = mid;
            }
            even = !even;
        }
    }

    Ok(GeohashCell {
        code: code.to_string(),
        bbox: BoundingBox {
            lat_min: lat_lo,
            lat_max: lat_hi,
            lon_min: lon_lo,
            lon_max: lon_hi,
        },
    })
}

fn char_index(ch: char) -> Option<usize> {
    let b = u8::try_from(ch).ok()?;
    BASE32.iter().position(|&c| c == b)
}

/// Cell size on a sphere of radius [`EARTH_RADIUS_KM`].
///
/// Width is the great-circle distance between the west and east edges at the
/// center latitude; height is the meridional arc.
pub fn cell_dimensions_km(cell: &GeohashCell) -> (f64, f64) {
    let bbox = cell.bbox();
    let (lat_c, _) = bbox.center();
    let phi = lat_c.to_radians();
    let dlon = bbox.lon_span().to_radians();

    // haversine with equal latitudes
    let a = phi.cos() * phi.cos() * (dlon / 2.0).sin().powi(2);
    let width = 2.0 * EARTH_RADIUS_KM * a.sqrt().asin();
    let height = EARTH_RADIUS_KM * bbox.lat_span().to_radians();
    (width, height)
}
