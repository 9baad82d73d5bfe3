//! Reference series shipped with the crate: AUI and NDBI for the airport
//! cell `tdr70` and the slow-growth cell `tdr0t`, transcribed from plotted
//! coordinates. Values keep their transcribed text so exports reproduce it.

use serde::Deserialize;

use super::{AuiObservation, AuiSeries, Metric, MetricSeries};
use crate::catalog::Period;
use crate::error::{Error, Result};

pub const GOLDEN_MODEL_ID: &str = "transcribed";

const FILES: [&str; 4] = [
    include_str!("../../fixtures/golden/tdr70_aui.json"),
    include_str!("../../fixtures/golden/tdr70_ndbi.json"),
    include_str!("../../fixtures/golden/tdr0t_aui.json"),
    include_str!("../../fixtures/golden/tdr0t_ndbi.json"),
];

#[derive(Debug, Clone, Deserialize)]
pub struct GoldenSeries {
    pub cell: String,
    pub metric: Metric,
    pub source: String,
    /// (period label, value as written)
    pub points: Vec<(String, String)>,
}

impl GoldenSeries {
    pub fn to_metric(&self) -> Result<MetricSeries> {
        let points = self
            .points
            .iter()
            .map(|(p, v)| {
                let period: Period = p.parse()?;
                let value: f64 = v
                    .parse()
                    .map_err(|e| Error::parse(format!("golden {} {}", self.cell, p), e))?;
                Ok((period, value))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MetricSeries {
            cell: self.cell.clone(),
            metric: self.metric,
            points,
        })
    }
}

pub fn all() -> Vec<GoldenSeries> {
    FILES
        .iter()
        .map(|t| serde_json::from_str(t).expect("shipped golden fixture parses"))
        .collect()
}

pub fn find(cell: &str, metric: Metric) -> Option<GoldenSeries> {
    all().into_iter().find(|g| g.cell == cell && g.metric == metric)
}

pub fn metric_series(cell: &str, metric: Metric) -> Option<MetricSeries> {
    find(cell, metric).map(|g| g.to_metric().expect("shipped golden fixture is valid"))
}

/// The AUI series as store observations, with only the fields that were
/// transcribed filled in.
pub fn aui_series(cell: &str) -> Option<AuiSeries> {
    let m = metric_series(cell, Metric::Aui)?;
    let mut s = AuiSeries::new(cell);
    for (period, aui) in m.points {
        s.insert(AuiObservation {
            cell: cell.to_string(),
            period,
            aui,
            ndbi_mean: None,
            scene_id: None,
            cloud_cover_pct: None,
            model_id: GOLDEN_MODEL_ID.into(),
            prompt_digest: None,
            raw_response_digest: None,
            rationale: None,
            created_at: None,
        })
        .ok()?;
    }
    Some(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_series_with_expected_lengths() {
        let all = all();
        assert_eq!(all.len(), 4);
        for g in &all {
            let n = g.points.len();
            match g.metric {
                Metric::Aui => assert_eq!(n, 19, "{}", g.cell),
                Metric::Ndbi => assert_eq!(n, 18, "{}", g.cell),
            }
            assert_eq!(g.points[0].0, "2016-01");
        }
    }

    #[test]
    fn periods_are_consecutive_half_years() {
        for g in all() {
            let m = g.to_metric().unwrap();
            for w in m.points.windows(2) {
                assert_eq!(w[0].0.next(), w[1].0);
            }
        }
    }

    #[test]
    fn airport_endpoints() {
        let a = aui_series("tdr70").unwrap();
        assert_eq!(a.values().first(), Some(&7.2));
        assert_eq!(a.values().last(), Some(&8.2));
        let n = metric_series("tdr70", Metric::Ndbi).unwrap();
        assert_eq!(n.points[0].1, 0.099356);
    }
}
