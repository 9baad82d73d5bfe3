//! Normalized-difference spectral indices and their scene-level means.
//!
//! NDBI is computed on raw digital numbers. The ratio is scale invariant, so
//! converting to reflectance first would change nothing but the rounding.
//! Invalid pixels (nodata in either band, or a zero denominator) are excluded
//! from the mean rather than counted as zero.

use serde::Serialize;

use crate::catalog::Period;
use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::geogrid::GeohashCell;
use crate::pipeline::{Gap, SceneSource};
use crate::raster::{self, Band, FloatGrid, SceneRaster};

#[derive(Debug, Clone, PartialEq)]
pub struct IndexResult {
    pub index_name: String,
    pub width: usize,
    pub height: usize,
    /// Per-pixel values in [-1, 1]; NaN marks invalid pixels.
    pub values: Vec<f64>,
    pub scene_mean: f64,
    pub valid_pixel_count: usize,
}

impl IndexResult {
    pub fn is_valid(&self, idx: usize) -> bool {
        !self.values[idx].is_nan()
    }
}

/// `(a - b) / (a + b)` per pixel on two grids of equal shape.
pub fn normalized_difference(
    name: &str,
    a: &FloatGrid,
    b: &FloatGrid,
    exec: Exec,
) -> Result<IndexResult> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::Geometry(format!(
            "{name}: grids {}x{} and {}x{} differ",
            a.width, a.height, b.width, b.height
        )));
    }
    let w = a.width;
    let mut values = vec![f64::NAN; a.values.len()];
    exec::for_each_row(exec, &mut values, w, |y, row| {
        let start = y * w;
        for (x, out) in row.iter_mut().enumerate() {
            let (p, q) = (a.values[start + x], b.values[start + x]);
            let sum = p + q;
            // NaN inputs propagate through `sum` and fail this test too
            if sum != 0.0 && !sum.is_nan() {
                *out = (p - q) / sum;
            }
        }
    });

    // Row partial sums, added in row order: same result on any thread count.
    let rows: Vec<&[f64]> = if w == 0 { Vec::new() } else { values.chunks(w).collect() };
    let partials = exec::map_vec(exec, &rows, |row| {
        row.iter()
            .filter(|v| !v.is_nan())
            .fold((0.0f64, 0usize), |(s, n), v| (s + v, n + 1))
    });
    let (sum, count) = partials
        .into_iter()
        .fold((0.0, 0), |(s, n), (ps, pn)| (s + ps, n + pn));
    if count == 0 {
        return Err(Error::UndefinedMean);
    }
    Ok(IndexResult {
        index_name: name.to_string(),
        width: a.width,
        height: a.height,
        values,
        scene_mean: sum / count as f64,
        valid_pixel_count: count,
    })
}

/// NDBI = (SWIR - NIR) / (SWIR + NIR) with SWIR = B11, NIR = B8, on the
/// 20 m grid.
pub fn ndbi(scene: &SceneRaster) -> Result<IndexResult> {
    ndbi_with(scene, Exec::default())
}

pub fn ndbi_with(scene: &SceneRaster, exec: Exec) -> Result<IndexResult> {
    let swir = scene.band(Band::B11)?;
    let nir = scene.band(Band::B8)?;
    let (swir, nir) = raster::harmonize_with(swir, nir, exec)?;
    normalized_difference("NDBI", &swir, &nir, exec)
}

/// NDVI = (NIR - Red) / (NIR + Red), on the 10 m grid.
pub fn ndvi(scene: &SceneRaster) -> Result<IndexResult> {
    let nir = scene.band(Band::B8)?;
    let red = scene.band(Band::B4)?;
    let (nir, red) = raster::harmonize(nir, red)?;
    normalized_difference("NDVI", &nir, &red, Exec::default())
}

/// NDBI over many scenes at once.
pub fn ndbi_batch(scenes: &[SceneRaster], exec: Exec) -> Vec<Result<IndexResult>> {
    // inner kernels stay sequential; the batch is the parallel axis
    exec::map_vec(exec, scenes, |s| ndbi_with(s, Exec::Sequential))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexEntry {
    pub period: Period,
    pub index_name: String,
    pub scene_id: String,
    pub scene_mean: f64,
    pub valid_pixel_count: usize,
    pub cloud_cover_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IndexSeries {
    pub cell: String,
    pub entries: Vec<IndexEntry>,
    pub gaps: Vec<Gap>,
}

/// NDBI per period for one cell. Periods without a usable scene (none
/// found, bands missing, no valid pixels) are recorded as gaps and the
/// series continues.
pub fn index_series(
    cell: &GeohashCell,
    periods: &[Period],
    source: &dyn SceneSource,
) -> Result<IndexSeries> {
    let mut periods = periods.to_vec();
    periods.sort();
    periods.dedup();
    let mut series = IndexSeries {
        cell: cell.code().to_string(),
        ..Default::default()
    };
    for period in periods {
        let record = match source.representative(cell, period)? {
            Some(r) => r,
            None => {
                series.gaps.push(Gap::no_scene(period));
                continue;
            }
        };
        let outcome = source
            .load(&record, &[Band::B8, Band::B11])
            .and_then(|scene| ndbi(&scene));
        match outcome {
            Ok(r) => series.entries.push(IndexEntry {
                period,
                index_name: r.index_name,
                scene_id: record.scene_id.clone(),
                scene_mean: r.scene_mean,
                valid_pixel_count: r.valid_pixel_count,
                cloud_cover_pct: record.cloud_cover_pct,
            }),
            Err(e @ (Error::BandMissing(_) | Error::UndefinedMean | Error::Geometry(_))) => {
                log::warn!("{cell} {period}: NDBI unavailable: {e}");
                series.gaps.push(Gap {
                    period,
                    reason: e.to_string(),
                    scene_id: Some(record.scene_id.clone()),
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geogrid::decode;
    use crate::raster::BandRaster;

    fn scene(nir: Vec<u16>, swir: Vec<u16>, w: usize, h: usize) -> SceneRaster {
        let mut s = SceneRaster::new("t", decode("tdr70").unwrap());
        s.insert(BandRaster::with_resolution(Band::B8, w, h, 10, nir, 0).unwrap());
        s.insert(BandRaster::with_resolution(Band::B11, w, h, 10, swir, 0).unwrap());
        s
    }

    #[test]
    fn equal_bands_give_zero() {
        let r = ndbi(&scene(vec![500; 9], vec![500; 9], 3, 3)).unwrap();
        assert!(r.values.iter().all(|&v| v == 0.0));
        assert_eq!(r.scene_mean, 0.0);
        assert_eq!(r.valid_pixel_count, 9);
    }

    #[test]
    fn swir_300_nir_100_is_half() {
        let r = ndbi(&scene(vec![100], vec![300], 1, 1)).unwrap();
        assert_eq!(r.values, vec![0.5]);
    }

    #[test]
    fn nodata_excluded_not_zeroed() {
        let r = ndbi(&scene(vec![100, 0, 100], vec![300, 300, 0], 3, 1)).unwrap();
        assert_eq!(r.valid_pixel_count, 1);
        assert_eq!(r.scene_mean, 0.5);
        assert!(!r.is_valid(1) && !r.is_valid(2));
    }

    #[test]
    fn all_invalid_is_undefined_mean() {
        assert!(matches!(
            ndbi(&scene(vec![0; 4], vec![0; 4], 2, 2)),
            Err(Error::UndefinedMean)
        ));
    }

    #[test]
    fn harmonizes_native_resolutions() {
        let mut s = SceneRaster::new("t", decode("tdr70").unwrap());
        s.insert(BandRaster::new(Band::B8, 4, 4, vec![100; 16]).unwrap());
        s.insert(BandRaster::new(Band::B11, 2, 2, vec![300; 4]).unwrap());
        let r = ndbi(&s).unwrap();
        assert_eq!((r.width, r.height), (2, 2));
        assert_eq!(r.scene_mean, 0.5);
    }

    #[test]
    fn missing_band_reported() {
        let mut s = scene(vec![1], vec![1], 1, 1);
        s.bands.remove(&Band::B11);
        assert!(matches!(ndbi(&s), Err(Error::BandMissing(Band::B11))));
    }

    #[test]
    fn ndvi_sign_for_vegetation() {
        let mut s = SceneRaster::new("t", decode("tdr70").unwrap());
        s.insert(BandRaster::new(Band::B8, 1, 1, vec![3000]).unwrap());
        s.insert(BandRaster::new(Band::B4, 1, 1, vec![500]).unwrap());
        assert!(ndvi(&s).unwrap().scene_mean > 0.7);
    }

    #[test]
    fn sequential_and_parallel_agree_bitwise() {
        let nir: Vec<u16> = (0..400).map(|i| 1000 + (i * 7919 % 2000) as u16).collect();
        let swir: Vec<u16> = (0..400).map(|i| 900 + (i * 104729 % 2500) as u16).collect();
        let s = scene(nir, swir, 20, 20);
        let a = ndbi_with(&s, Exec::Sequential).unwrap();
        let b = ndbi_with(&s, Exec::Parallel).unwrap();
        assert_eq!(a.scene_mean.to_bits(), b.scene_mean.to_bits());
        assert_eq!(a.values, b.values);
    }
}
