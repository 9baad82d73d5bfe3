//! Synthetic Sentinel-2 scenes with known land cover.
//!
//! Land cover comes from ranking smooth random fields, so the requested
//! fractions are met exactly and, for a fixed landscape seed, the built-up
//! area of a lower fraction is a subset of that of a higher one. A ramp of
//! fractions therefore looks like a town growing outward. Clouds use an
//! independent field and overwrite whatever is below them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::catalog::{Manifest, ManifestScene, Period, MANIFEST_FILE};
use crate::error::{Error, Result};
use crate::geogrid::GeohashCell;
use crate::raster::tiff::{write_tiff, GeoReference, TiffWriteOptions};
use crate::raster::{compose_rgb, AssetRef, Band, BandRaster, SceneRaster, StretchSpec};
use crate::scoring::{AuiRange, ReferenceEntry, ReferenceSet, DEFAULT_BINS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LandClass {
    Built,
    Vegetation,
    Bare,
    Cloud,
}

impl LandClass {
    /// Mean DN for B2, B3, B4, B8, B11.
    fn means(self) -> [f64; 5] {
        match self {
            LandClass::Built => [1500.0, 1500.0, 1600.0, 2200.0, 3000.0],
            LandClass::Vegetation => [400.0, 700.0, 450.0, 3000.0, 2200.0],
            LandClass::Bare => [800.0, 1100.0, 1300.0, 2400.0, 2700.0],
            LandClass::Cloud => [6500.0, 6600.0, 6700.0, 7000.0, 4500.0],
        }
    }
}

const BANDS: [Band; 5] = [Band::B2, Band::B3, Band::B4, Band::B8, Band::B11];
const SIGMA: [f64; 5] = [80.0, 80.0, 80.0, 150.0, 150.0];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    /// Pixels per side on the 10 m grid; must be even.
    pub size: usize,
    /// Fixes the landscape (where built-up and bare land go).
    pub landscape_seed: u64,
    /// Fixes cloud placement and sensor noise.
    pub scene_seed: u64,
    pub built_fraction: f64,
    pub bare_fraction: f64,
    pub cloud_fraction: f64,
    /// Share of 10 m pixels set to nodata in every band.
    pub nodata_fraction: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            size: 128,
            landscape_seed: 1,
            scene_seed: 1,
            built_fraction: 0.5,
            bare_fraction: 0.0,
            cloud_fraction: 0.0,
            nodata_fraction: 0.0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.size == 0 || self.size % 2 != 0 {
            return Err(Error::InvalidInput(format!("size {} must be even and positive", self.size)));
        }
        for (name, f) in [
            ("built_fraction", self.built_fraction),
            ("bare_fraction", self.bare_fraction),
            ("cloud_fraction", self.cloud_fraction),
            ("nodata_fraction", self.nodata_fraction),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidInput(format!("{name} {f} outside [0, 1]")));
            }
        }
        if self.built_fraction + self.bare_fraction > 1.0 + 1e-12 {
            return Err(Error::InvalidInput("built + bare fractions exceed 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthScene {
    pub raster: SceneRaster,
    /// Ground truth per 10 m pixel, clouds included.
    pub classes: Vec<LandClass>,
    /// Ground truth per 10 m pixel, before clouds.
    pub surface: Vec<LandClass>,
    pub nodata: Vec<bool>,
    pub size: usize,
}

impl SynthScene {
    pub fn fraction(&self, class: LandClass) -> f64 {
        self.classes.iter().filter(|c| **c == class).count() as f64 / self.classes.len() as f64
    }

    pub fn surface_fraction(&self, class: LandClass) -> f64 {
        self.surface.iter().filter(|c| **c == class).count() as f64 / self.surface.len() as f64
    }
}

/// Bilinear upsampling of a coarse uniform lattice with smoothstep weights.
fn smooth_field(rng: &mut ChaCha8Rng, size: usize, feature_px: usize) -> Vec<f64> {
    let g = size / feature_px + 2;
    let lattice: Vec<f64> = (0..g * g).map(|_| rng.random::<f64>()).collect();
    let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
    let mut out = Vec::with_capacity(size * size);
    for y in 0..size {
        let fy = y as f64 / feature_px as f64;
        let (iy, ty) = (fy.floor() as usize, smooth(fy.fract()));
        for x in 0..size {
            let fx = x as f64 / feature_px as f64;
            let (ix, tx) = (fx.floor() as usize, smooth(fx.fract()));
            let at = |yy: usize, xx: usize| lattice[yy * g + xx];
            let top = at(iy, ix) * (1.0 - tx) + at(iy, ix + 1) * tx;
            let bottom = at(iy + 1, ix) * (1.0 - tx) + at(iy + 1, ix + 1) * tx;
            out.push(top * (1.0 - ty) + bottom * ty);
        }
    }
    out
}

/// Pixel indices from highest to lowest field value; ties by index.
fn ranking(field: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..field.len()).collect();
    idx.sort_by(|&a, &b| field[b].total_cmp(&field[a]).then(a.cmp(&b)));
    idx
}

fn count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).round() as usize).min(n)
}

pub fn generate(spec: &SynthSpec, cell: &GeohashCell, scene_id: &str) -> Result<SynthScene> {
    spec.validate()?;
    let size = spec.size;
    let n = size * size;
    let feature = (size / 8).max(2);

    let mut land_rng = ChaCha8Rng::seed_from_u64(spec.landscape_seed);
    let urban = smooth_field(&mut land_rng, size, feature);
    let soil = smooth_field(&mut land_rng, size, feature);

    let mut surface = vec![LandClass::Vegetation; n];
    let n_built = count(spec.built_fraction, n);
    for &i in ranking(&urban).iter().take(n_built) {
        surface[i] = LandClass::Built;
    }
    let n_bare = count(spec.bare_fraction, n).min(n - n_built);
    let bare: Vec<usize> = ranking(&soil)
        .into_iter()
        .filter(|&i| surface[i] == LandClass::Vegetation)
        .take(n_bare)
        .collect();
    for i in bare {
        surface[i] = LandClass::Bare;
    }

    let mut scene_rng = ChaCha8Rng::seed_from_u64(spec.scene_seed ^ 0x9e37_79b9_7f4a_7c15);
    let cloud_field = smooth_field(&mut scene_rng, size, feature);
    let mut classes = surface.clone();
    for &i in ranking(&cloud_field).iter().take(count(spec.cloud_fraction, n)) {
        classes[i] = LandClass::Cloud;
    }
    let mut nodata = vec![false; n];
    let holes: Vec<f64> = (0..n).map(|_| scene_rng.random::<f64>()).collect();
    for &i in ranking(&holes).iter().take(count(spec.nodata_fraction, n)) {
        nodata[i] = true;
    }

    let mut planes: Vec<Vec<u16>> = vec![Vec::with_capacity(n); BANDS.len()];
    for i in 0..n {
        let means = classes[i].means();
        for (b, plane) in planes.iter_mut().enumerate() {
            let v = if nodata[i] {
                0
            } else {
                let noise = Normal::new(0.0, SIGMA[b]).expect("positive sigma");
                (means[b] + noise.sample(&mut scene_rng)).round().clamp(1.0, 20000.0) as u16
            };
            plane.push(v);
        }
    }

    let mut raster = SceneRaster::new(scene_id, cell.clone());
    for (b, band) in BANDS.iter().enumerate() {
        let values = std::mem::take(&mut planes[b]);
        if band.native_resolution_m() == 20 {
            raster.insert(BandRaster::with_resolution(*band, size / 2, size / 2, 20, downsample(&values, size), 0)?);
        } else {
            raster.insert(BandRaster::with_resolution(*band, size, size, 10, values, 0)?);
        }
    }
    Ok(SynthScene {
        raster,
        classes,
        surface,
        nodata,
        size,
    })
}

/// 2x2 mean over non-zero samples, rounded; all-zero blocks stay 0.
fn downsample(values: &[u16], size: usize) -> Vec<u16> {
    let half = size / 2;
    let mut out = Vec::with_capacity(half * half);
    for y in 0..half {
        for x in 0..half {
            let block = [
                values[2 * y * size + 2 * x],
                values[2 * y * size + 2 * x + 1],
                values[(2 * y + 1) * size + 2 * x],
                values[(2 * y + 1) * size + 2 * x + 1],
            ];
            let valid: Vec<f64> = block.iter().filter(|&&v| v != 0).map(|&v| v as f64).collect();
            out.push(if valid.is_empty() {
                0
            } else {
                (valid.iter().sum::<f64>() / valid.len() as f64).round() as u16
            });
        }
    }
    out
}

/// Georeference that maps a grid exactly onto the cell.
pub fn cell_georef(cell: &GeohashCell, width: usize, height: usize) -> GeoReference {
    let b = cell.bbox();
    GeoReference {
        lon_origin: b.lon_min,
        lat_origin: b.lat_max,
        lon_step: b.lon_span() / width as f64,
        lat_step: b.lat_span() / height as f64,
    }
}

/// One GeoTIFF per band under `dir`; returns the asset paths.
pub fn write_scene_tiffs(
    scene: &SceneRaster,
    dir: &Path,
    opts: &TiffWriteOptions,
) -> Result<BTreeMap<Band, AssetRef>> {
    std::fs::create_dir_all(dir)?;
    let mut assets = BTreeMap::new();
    for (band, r) in &scene.bands {
        let path = dir.join(format!("{}.tif", band.name()));
        let opts = TiffWriteOptions {
            nodata: Some(r.nodata),
            georef: Some(cell_georef(&scene.cell, r.width, r.height)),
            ..*opts
        };
        write_tiff(&path, r.width, r.height, &[&r.values], &opts)?;
        assets.insert(*band, AssetRef::Path(path.to_string_lossy().into_owned()));
    }
    Ok(assets)
}

/// A multi-period scene sequence for one cell.
#[derive(Debug, Clone)]
pub struct SequenceSpec {
    pub cell: GeohashCell,
    pub first: Period,
    pub built: Vec<f64>,
    /// Same length as `built`.
    pub cloud: Vec<f64>,
    pub bare_fraction: f64,
    pub size: usize,
    pub landscape_seed: u64,
    /// Leave `cloud_cover_pct` out of the manifest so the catalog has to
    /// estimate it.
    pub omit_cloud_cover: bool,
}

impl SequenceSpec {
    /// `periods` steps from `first` with built-up rising linearly from
    /// `from` to `to`, cloud-free.
    pub fn ramp(cell: GeohashCell, first: Period, periods: usize, from: f64, to: f64) -> Self {
        let built = (0..periods)
            .map(|t| {
                if periods == 1 {
                    from
                } else {
                    from + (to - from) * t as f64 / (periods - 1) as f64
                }
            })
            .collect();
        Self {
            cell,
            first,
            built,
            cloud: vec![0.0; periods],
            bare_fraction: 0.0,
            size: 64,
            landscape_seed: 7,
            omit_cloud_cover: false,
        }
    }

    pub fn periods(&self) -> Vec<Period> {
        let mut p = self.first;
        (0..self.built.len())
            .map(|_| {
                let cur = p;
                p = p.next();
                cur
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct WrittenScene {
    pub period: Period,
    pub scene_id: String,
    pub built_fraction: f64,
    pub cloud_fraction: f64,
}

/// Write TIFFs and a `manifest.json` into `dir` for a local catalog.
pub fn write_sequence(spec: &SequenceSpec, dir: &Path, opts: &TiffWriteOptions) -> Result<Vec<WrittenScene>> {
    if spec.built.len() != spec.cloud.len() {
        return Err(Error::InvalidInput("built and cloud schedules differ in length".into()));
    }
    std::fs::create_dir_all(dir)?;
    let mut manifest_scenes = Vec::new();
    let mut written = Vec::new();
    for (t, period) in spec.periods().into_iter().enumerate() {
        let scene_id = format!("SYN_{}_{}", spec.cell.code(), period.label());
        let synth = generate(
            &SynthSpec {
                size: spec.size,
                landscape_seed: spec.landscape_seed,
                scene_seed: spec.landscape_seed.wrapping_mul(1000).wrapping_add(t as u64),
                built_fraction: spec.built[t],
                bare_fraction: spec.bare_fraction.min(1.0 - spec.built[t]),
                cloud_fraction: spec.cloud[t],
                nodata_fraction: 0.0,
            },
            &spec.cell,
            &scene_id,
        )?;
        let rel = PathBuf::from(spec.cell.code()).join(period.label());
        let assets = write_scene_tiffs(&synth.raster, &dir.join(&rel), opts)?;
        let bands = assets
            .into_iter()
            .map(|(b, _)| (b, AssetRef::Path(rel.join(format!("{}.tif", b.name())).to_string_lossy().into_owned())))
            .collect();
        let start = period.start_date();
        let acquired = Utc
            .from_utc_datetime(&start.and_hms_opt(5, 20, 0).expect("valid time"))
            + Duration::days(20);
        let cloud_pct = 100.0 * synth.fraction(LandClass::Cloud);
        manifest_scenes.push(ManifestScene {
            scene_id: scene_id.clone(),
            acquired_at: acquired,
            cloud_cover_pct: (!spec.omit_cloud_cover).then_some(cloud_pct),
            cell: Some(spec.cell.clone()),
            bbox: None,
            bands,
        });
        written.push(WrittenScene {
            period,
            scene_id,
            built_fraction: synth.surface_fraction(LandClass::Built),
            cloud_fraction: synth.fraction(LandClass::Cloud),
        });
    }
    let manifest = Manifest::new(manifest_scenes);
    std::fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(written)
}

/// Built-up fraction used to draw the synthetic image for each bin.
pub fn reference_built_fraction(range: &AuiRange) -> f64 {
    ((range.lo + range.hi) / 20.0).min(0.95)
}

/// The six calibration bins drawn from synthetic scenes.
pub fn default_reference_set(size: usize) -> Result<ReferenceSet> {
    let cell: GeohashCell = "tdr1u".parse()?;
    let entries = DEFAULT_BINS
        .iter()
        .enumerate()
        .map(|(i, &(label, lo, hi, region))| {
            let range = AuiRange::new(lo, hi)?;
            let built = reference_built_fraction(&range);
            let synth = generate(
                &SynthSpec {
                    size,
                    landscape_seed: 100 + i as u64,
                    scene_seed: 200 + i as u64,
                    built_fraction: built,
                    bare_fraction: (0.05f64).min(1.0 - built),
                    cloud_fraction: 0.0,
                    nodata_fraction: 0.0,
                },
                &cell,
                label,
            )?;
            let image = compose_rgb(&synth.raster, &StretchSpec::default())?;
            ReferenceEntry::from_composite(
                label,
                range,
                &image,
                format!("synthetic stand-in for {region}"),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    ReferenceSet::new(entries)
}
