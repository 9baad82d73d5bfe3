use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Sentinel-2 MSI band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Band {
    B1,
    B2,
    B3,
    B4,
    B5,
    B6,
    B7,
    B8,
    B8A,
    B9,
    B10,
    B11,
    B12,
}

impl Band {
    /// Product order, also the default sample order of a 13-band stack.
    pub const ALL: [Band; 13] = [
        Band::B1,
        Band::B2,
        Band::B3,
        Band::B4,
        Band::B5,
        Band::B6,
        Band::B7,
        Band::B8,
        Band::B8A,
        Band::B9,
        Band::B10,
        Band::B11,
        Band::B12,
    ];

    /// Bands the pipeline needs: visible for composites, NIR and SWIR for NDBI.
    pub const REQUIRED: [Band; 5] = [Band::B2, Band::B3, Band::B4, Band::B8, Band::B11];

    pub const VISIBLE: [Band; 3] = [Band::B4, Band::B3, Band::B2];

    pub fn native_resolution_m(self) -> u32 {
        match self {
            Band::B2 | Band::B3 | Band::B4 | Band::B8 => 10,
            Band::B5 | Band::B6 | Band::B7 | Band::B8A | Band::B11 | Band::B12 => 20,
            Band::B1 | Band::B9 | Band::B10 => 60,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Band::B1 => "B1",
            Band::B2 => "B2",
            Band::B3 => "B3",
            Band::B4 => "B4",
            Band::B5 => "B5",
            Band::B6 => "B6",
            Band::B7 => "B7",
            Band::B8 => "B8",
            Band::B8A => "B8A",
            Band::B9 => "B9",
            Band::B10 => "B10",
            Band::B11 => "B11",
            Band::B12 => "B12",
        }
    }

    /// Index in the default 13-band sample order.
    pub fn default_sample_index(self) -> usize {
        Band::ALL.iter().position(|&b| b == self).unwrap()
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Band {
    type Err = Error;

    /// Accepts `B2`, `B02`, `b02`, `B8A`, and the common STAC asset names
    /// (`blue`, `green`, `red`, `nir`, `swir16`, ...).
    fn from_str(s: &str) -> Result<Self, Error> {
        let lower = s.trim().to_ascii_lowercase();
        let by_common = match lower.as_str() {
            "coastal" => Some(Band::B1),
            "blue" => Some(Band::B2),
            "green" => Some(Band::B3),
            "red" => Some(Band::B4),
            "rededge1" => Some(Band::B5),
            "rededge2" => Some(Band::B6),
            "rededge3" => Some(Band::B7),
            "nir" => Some(Band::B8),
            "nir08" => Some(Band::B8A),
            "nir09" => Some(Band::B9),
            "cirrus" => Some(Band::B10),
            "swir16" => Some(Band::B11),
            "swir22" => Some(Band::B12),
            _ => None,
        };
        if let Some(b) = by_common {
            return Ok(b);
        }
        let digits = lower
            .strip_prefix('b')
            .ok_or_else(|| Error::parse("band name", format!("{s:?}")))?;
        if digits == "8a" || digits == "08a" {
            return Ok(Band::B8A);
        }
        let n: u32 = digits
            .parse()
            .map_err(|_| Error::parse("band name", format!("{s:?}")))?;
        let band = match n {
            1 => Band::B1,
            2 => Band::B2,
            3 => Band::B3,
            4 => Band::B4,
            5 => Band::B5,
            6 => Band::B6,
            7 => Band::B7,
            8 => Band::B8,
            9 => Band::B9,
            10 => Band::B10,
            11 => Band::B11,
            12 => Band::B12,
            _ => return Err(Error::parse("band name", format!("{s:?}"))),
        };
        Ok(band)
    }
}

impl TryFrom<String> for Band {
    type Error = Error;

    fn try_from(s: String) -> Result<Self, Error> {
        s.parse()
    }
}

impl From<Band> for String {
    fn from(b: Band) -> String {
        b.name().to_string()
    }
}
