use std::collections::BTreeMap;
use std::path::Path;

use super::{AuiSeries, Metric, MetricSeries};
use crate::catalog::Period;
use crate::error::{Error, Result};
use crate::indices::IndexSeries;
use crate::raster::write_atomic;

fn finish(w: csv::Writer<Vec<u8>>, path: &Path) -> Result<()> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    write_atomic(path, &bytes)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

fn opt(v: Option<f64>, decimals: usize) -> String {
    v.map(|x| format!("{x:.decimals$}")).unwrap_or_default()
}

/// `cell,period,aui,ndbi,scene_id,cloud_cover_pct,model_id`
pub fn export_csv(series: &AuiSeries, path: &Path) -> Result<()> {
    if series.observations.is_empty() {
        return Err(Error::InvalidInput(format!("series for {} is empty", series.cell)));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["cell", "period", "aui", "ndbi", "scene_id", "cloud_cover_pct", "model_id"])
        .map_err(csv_err)?;
    for o in &series.observations {
        w.write_record([
            o.cell.as_str(),
            &o.period.label(),
            &Metric::Aui.format(o.aui),
            &opt(o.ndbi_mean, Metric::Ndbi.decimals()),
            o.scene_id.as_deref().unwrap_or(""),
            &opt(o.cloud_cover_pct, 2),
            &o.model_id,
        ])
        .map_err(csv_err)?;
    }
    finish(w, path)
}

/// `period_label,index_name,scene_mean,valid_pixel_count,cloud_cover_pct,flag`
///
/// Gap periods get a row with empty numbers and the reason in `flag`.
pub fn export_index_csv(series: &IndexSeries, path: &Path) -> Result<()> {
    if series.entries.is_empty() && series.gaps.is_empty() {
        return Err(Error::InvalidInput(format!("index series for {} is empty", series.cell)));
    }
    let mut rows: Vec<(Period, [String; 6])> = series
        .entries
        .iter()
        .map(|e| {
            (
                e.period,
                [
                    e.period.label(),
                    e.index_name.clone(),
                    Metric::Ndbi.format(e.scene_mean),
                    e.valid_pixel_count.to_string(),
                    format!("{:.2}", e.cloud_cover_pct),
                    String::new(),
                ],
            )
        })
        .collect();
    let name = series.entries.first().map_or("NDBI", |e| e.index_name.as_str());
    for g in &series.gaps {
        rows.push((
            g.period,
            [
                g.period.label(),
                name.to_string(),
                String::new(),
                String::new(),
                String::new(),
                g.reason.clone(),
            ],
        ));
    }
    rows.sort_by_key(|r| r.0);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["period_label", "index_name", "scene_mean", "valid_pixel_count", "cloud_cover_pct", "flag"])
        .map_err(csv_err)?;
    for (_, r) in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    finish(w, path)
}

/// `cell,period,<metric>`
pub fn export_metric_csv(series: &MetricSeries, path: &Path) -> Result<()> {
    if series.points.is_empty() {
        return Err(Error::InvalidInput(format!("series for {} is empty", series.cell)));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["cell", "period", series.metric.name()]).map_err(csv_err)?;
    for (p, v) in &series.points {
        w.write_record([series.cell.clone(), p.label(), series.metric.format(*v)])
            .map_err(csv_err)?;
    }
    finish(w, path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub period: Period,
    pub aui: Option<f64>,
    pub ndbi: Option<f64>,
}

/// Outer join on period, chronological.
pub fn comparison_rows(aui: &MetricSeries, ndbi: &MetricSeries) -> Vec<ComparisonRow> {
    let mut rows: BTreeMap<Period, ComparisonRow> = BTreeMap::new();
    for &(p, v) in &aui.points {
        rows.entry(p)
            .or_insert(ComparisonRow { period: p, aui: None, ndbi: None })
            .aui = Some(v);
    }
    for &(p, v) in &ndbi.points {
        rows.entry(p)
            .or_insert(ComparisonRow { period: p, aui: None, ndbi: None })
            .ndbi = Some(v);
    }
    rows.into_values().collect()
}

/// `cell,period,aui,ndbi`; a side missing a period leaves its column empty.
pub fn export_comparison_csv(aui: &MetricSeries, ndbi: &MetricSeries, path: &Path) -> Result<()> {
    if aui.metric != Metric::Aui || ndbi.metric != Metric::Ndbi {
        return Err(Error::InvalidInput("comparison needs an AUI and an NDBI series".into()));
    }
    if aui.cell != ndbi.cell {
        return Err(Error::InvalidInput(format!(
            "comparison of different cells {} and {}",
            aui.cell, ndbi.cell
        )));
    }
    let rows = comparison_rows(aui, ndbi);
    if rows.is_empty() {
        return Err(Error::InvalidInput(format!("nothing to compare for {}", aui.cell)));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["cell", "period", "aui", "ndbi"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            aui.cell.clone(),
            r.period.label(),
            opt(r.aui, Metric::Aui.decimals()),
            opt(r.ndbi, Metric::Ndbi.decimals()),
        ])
        .map_err(csv_err)?;
    }
    finish(w, path)
}
