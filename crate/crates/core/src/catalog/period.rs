use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Half {
    /// First quarter, January to March.
    H1,
    /// Third quarter, July to September.
    H2,
}

/// A half-year sampling slot. Only the first and third quarters are searched;
/// the second and fourth are left out as buffers between slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Period {
    pub year: i32,
    pub half: Half,
}

impl Period {
    pub fn new(year: i32, half: Half) -> Self {
        Self { year, half }
    }

    /// `YYYY-01` or `YYYY-07`.
    pub fn label(&self) -> String {
        self.to_string()
    }

    /// First day of the slot (Jan 1 or Jul 1).
    pub fn start_date(&self) -> NaiveDate {
        let month = match self.half {
            Half::H1 => 1,
            Half::H2 => 7,
        };
        NaiveDate::from_ymd_opt(self.year, month, 1).expect("valid period start")
    }

    /// Inclusive search window: Jan 1 – Mar 31 or Jul 1 – Sep 30.
    pub fn window(&self) -> (NaiveDate, NaiveDate) {
        let (m0, m1, d1) = match self.half {
            Half::H1 => (1, 3, 31),
            Half::H2 => (7, 9, 30),
        };
        (
            NaiveDate::from_ymd_opt(self.year, m0, 1).unwrap(),
            NaiveDate::from_ymd_opt(self.year, m1, d1).unwrap(),
        )
    }

    /// Window as a half-open UTC interval `[start, end)`.
    pub fn window_utc(&self) -> (DateTime<Utc>, DateTime<Utc>) {
        let (start, end) = self.window();
        let end = end.succ_opt().unwrap();
        (
            start.and_hms_opt(0, 0, 0).unwrap().and_utc(),
            end.and_hms_opt(0, 0, 0).unwrap().and_utc(),
        )
    }

    pub fn contains(&self, t: DateTime<Utc>) -> bool {
        let (start, end) = self.window_utc();
        t >= start && t < end
    }

    /// The period whose window contains `date`, if any.
    pub fn containing(date: NaiveDate) -> Option<Period> {
        let half = match date.month() {
            1..=3 => Half::H1,
            7..=9 => Half::H2,
            _ => return None,
        };
        Some(Period::new(date.year(), half))
    }

    pub fn next(&self) -> Period {
        match self.half {
            Half::H1 => Period::new(self.year, Half::H2),
            Half::H2 => Period::new(self.year + 1, Half::H1),
        }
    }

    pub fn prev(&self) -> Period {
        match self.half {
            Half::H1 => Period::new(self.year - 1, Half::H2),
            Half::H2 => Period::new(self.year, Half::H1),
        }
    }

    /// All periods whose start date lies in `[from, to]`, in order.
    pub fn range(from: NaiveDate, to: NaiveDate) -> Vec<Period> {
        let mut p = Period::new(from.year(), Half::H1);
        let mut out = Vec::new();
        while p.start_date() <= to {
            if p.start_date() >= from {
                out.push(p);
            }
            p = p.next();
        }
        out
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let month = match self.half {
            Half::H1 => "01",
            Half::H2 => "07",
        };
        write!(f, "{:04}-{month}", self.year)
    }
}

impl FromStr for Period {
    type Err = Error;

    /// Accepts `2016-01`, `2016-07`, `2016-H1`, `2016-H2`.
    fn from_str(s: &str) -> Result<Self, Error> {
        let bad = || Error::parse("period label", format!("{s:?} (expected YYYY-01 or YYYY-07)"));
        let (y, rest) = s.trim().split_once('-').ok_or_else(bad)?;
        if y.len() != 4 {
            return Err(bad());
        }
        let year: i32 = y.parse().map_err(|_| bad())?;
        let half = match rest {
            "01" | "H1" | "h1" => Half::H1,
            "07" | "H2" | "h2" => Half::H2,
            _ => return Err(bad()),
        };
        Ok(Period::new(year, half))
    }
}

impl TryFrom<String> for Period {
    type Error = Error;

    fn try_from(s: String) -> Result<Self, Error> {
        s.parse()
    }
}

impl From<Period> for String {
    fn from(p: Period) -> String {
        p.to_string()
    }
}
