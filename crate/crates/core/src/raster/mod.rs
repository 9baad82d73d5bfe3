//! Scene rasters: decoding, cell clipping, resolution harmonization and RGB
//! composites.

mod band;
pub mod tiff;

use std::collections::BTreeMap;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::codecs::jpeg::JpegEncoder;
use image::{ExtendedColorType, ImageEncoder, RgbImage};
use serde::{Deserialize, Serialize};

pub use band::Band;

use crate::catalog::Period;
use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::geogrid::{BoundingBox, GeohashCell};
use tiff::{GeoReference, TiffImage};

/// Sentinel-2 L2A surface reflectance scale.
pub const REFLECTANCE_SCALE: f64 = 10_000.0;

pub const JPEG_QUALITY: u8 = 90;

/// Where a band's samples live: a file path and optionally the sample index
/// inside a multi-sample TIFF.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AssetRef {
    Path(String),
    Sample { href: String, sample: usize },
}

impl AssetRef {
    pub fn href(&self) -> &str {
        match self {
            AssetRef::Path(h) => h,
            AssetRef::Sample { href, .. } => href,
        }
    }

    pub fn sample(&self) -> Option<usize> {
        match self {
            AssetRef::Path(_) => None,
            AssetRef::Sample { sample, .. } => Some(*sample),
        }
    }

    pub fn is_remote(&self) -> bool {
        let h = self.href();
        h.starts_with("http://") || h.starts_with("https://")
    }

    pub fn with_href(&self, href: String) -> AssetRef {
        match self {
            AssetRef::Path(_) => AssetRef::Path(href),
            AssetRef::Sample { sample, .. } => AssetRef::Sample { href, sample: *sample },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandRaster {
    pub band: Band,
    pub width: usize,
    pub height: usize,
    pub pixel_size_m: u32,
    /// Row-major digital numbers.
    pub values: Vec<u16>,
    pub nodata: u16,
}

impl BandRaster {
    /// Raster at the band's native resolution with nodata 0.
    pub fn new(band: Band, width: usize, height: usize, values: Vec<u16>) -> Result<Self> {
        Self::with_resolution(band, width, height, band.native_resolution_m(), values, 0)
    }

    pub fn with_resolution(
        band: Band,
        width: usize,
        height: usize,
        pixel_size_m: u32,
        values: Vec<u16>,
        nodata: u16,
    ) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "{band}: {} values for a {width}x{height} grid",
                values.len()
            )));
        }
        if ![10, 20, 60].contains(&pixel_size_m) {
            return Err(Error::InvalidInput(format!(
                "{band}: pixel size {pixel_size_m} m is not a Sentinel-2 resolution"
            )));
        }
        Ok(Self {
            band,
            width,
            height,
            pixel_size_m,
            values,
            nodata,
        })
    }

    pub fn is_valid(&self, idx: usize) -> bool {
        self.values[idx] != self.nodata
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|&&v| v != self.nodata).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneRaster {
    pub scene_id: String,
    pub cell: GeohashCell,
    pub bands: BTreeMap<Band, BandRaster>,
}

impl SceneRaster {
    pub fn new(scene_id: impl Into<String>, cell: GeohashCell) -> Self {
        Self {
            scene_id: scene_id.into(),
            cell,
            bands: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, raster: BandRaster) {
        self.bands.insert(raster.band, raster);
    }

    pub fn band(&self, band: Band) -> Result<&BandRaster> {
        self.bands.get(&band).ok_or(Error::BandMissing(band))
    }

    pub fn missing(&self, bands: &[Band]) -> Vec<Band> {
        bands.iter().copied().filter(|b| !self.bands.contains_key(b)).collect()
    }
}

/// Real-valued grid; invalid pixels are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatGrid {
    pub width: usize,
    pub height: usize,
    pub pixel_size_m: u32,
    pub values: Vec<f64>,
}

impl FloatGrid {
    pub fn from_band(band: &BandRaster) -> Self {
        Self::scaled(band, 1.0)
    }

    fn scaled(band: &BandRaster, scale: f64) -> Self {
        let values = band
            .values
            .iter()
            .map(|&v| if v == band.nodata { f64::NAN } else { v as f64 * scale })
            .collect();
        Self {
            width: band.width,
            height: band.height,
            pixel_size_m: band.pixel_size_m,
            values,
        }
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|v| !v.is_nan()).count()
    }

    /// Mean over valid pixels, `None` when there are none.
    pub fn valid_mean(&self) -> Option<f64> {
        let (sum, n) = self
            .values
            .iter()
            .filter(|v| !v.is_nan())
            .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        (n > 0).then(|| sum / n as f64)
    }
}

/// Surface reflectance (DN / 10000); nodata pixels become NaN.
pub fn to_reflectance(band: &BandRaster) -> FloatGrid {
    FloatGrid::scaled(band, 1.0 / REFLECTANCE_SCALE)
}

/// Bring two bands of the same extent onto the coarser of their grids.
///
/// The finer band is aggregated by block mean over valid pixels; blocks with
/// no valid pixel become NaN. Output order follows the argument order.
pub fn harmonize(a: &BandRaster, b: &BandRaster) -> Result<(FloatGrid, FloatGrid)> {
    harmonize_with(a, b, Exec::default())
}

pub fn harmonize_with(a: &BandRaster, b: &BandRaster, exec: Exec) -> Result<(FloatGrid, FloatGrid)> {
    let a_coarse = a.pixel_size_m >= b.pixel_size_m;
    let (coarse, fine) = if a_coarse { (a, b) } else { (b, a) };
    if coarse.pixel_size_m % fine.pixel_size_m != 0 {
        return Err(Error::Geometry(format!(
            "{} m and {} m grids differ by a non-integer factor",
            coarse.pixel_size_m, fine.pixel_size_m
        )));
    }
    let k = (coarse.pixel_size_m / fine.pixel_size_m) as usize;
    if fine.width != coarse.width * k || fine.height != coarse.height * k {
        return Err(Error::Geometry(format!(
            "{} {}x{} at {} m does not tile {} {}x{} at {} m",
            fine.band,
            fine.width,
            fine.height,
            fine.pixel_size_m,
            coarse.band,
            coarse.width,
            coarse.height,
            coarse.pixel_size_m
        )));
    }
    let coarse_grid = FloatGrid::from_band(coarse);
    let fine_grid = block_mean(&FloatGrid::from_band(fine), k, coarse.pixel_size_m, exec);
    Ok(if a_coarse {
        (coarse_grid, fine_grid)
    } else {
        (fine_grid, coarse_grid)
    })
}

/// Aggregate `k x k` blocks by the mean of their valid pixels.
pub fn block_mean(fine: &FloatGrid, k: usize, pixel_size_m: u32, exec: Exec) -> FloatGrid {
    if k == 1 {
        return fine.clone();
    }
    let (w, h) = (fine.width / k, fine.height / k);
    let mut values = vec![f64::NAN; w * h];
    exec::for_each_row(exec, &mut values, w, |y, row| {
        for (x, out) in row.iter_mut().enumerate() {
            let mut sum = 0.0;
            let mut n = 0usize;
            for dy in 0..k {
                let base = (y * k + dy) * fine.width + x * k;
                for &v in &fine.values[base..base + k] {
                    if !v.is_nan() {
                        sum += v;
                        n += 1;
                    }
                }
            }
            *out = if n > 0 { sum / n as f64 } else { f64::NAN };
        }
    });
    FloatGrid {
        width: w,
        height: h,
        pixel_size_m,
        values,
    }
}

/// 8-bit RGB image, row-major, three bytes per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompositeImage {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<u8>,
}

impl CompositeImage {
    pub fn new(width: usize, height: usize, rgb: Vec<u8>) -> Result<Self> {
        if rgb.len() != width * height * 3 {
            return Err(Error::InvalidInput(format!(
                "{} bytes for a {width}x{height} RGB image",
                rgb.len()
            )));
        }
        Ok(Self { width, height, rgb })
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.rgb.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }

    pub fn from_rgb_image(img: &RgbImage) -> Self {
        Self {
            width: img.width() as usize,
            height: img.height() as usize,
            rgb: img.as_raw().clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StretchSpec {
    /// Fixed reflectance window mapped to 0..=255.
    Linear { lo: f64, hi: f64 },
    /// Per-channel window from percentiles (0..=100) of the valid pixels.
    Percentile { lo_pct: f64, hi_pct: f64 },
}

impl Default for StretchSpec {
    fn default() -> Self {
        StretchSpec::Linear { lo: 0.0, hi: 0.3 }
    }
}

/// Linear stretch of one reflectance value to a byte, rounding half away from zero.
pub fn stretch_to_byte(r: f64, lo: f64, hi: f64) -> u8 {
    let t = ((r - lo) / (hi - lo)).clamp(0.0, 1.0);
    (t * 255.0).round() as u8
}

fn percentile(sorted: &[f64], pct: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (pct / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let (i, frac) = (rank.floor() as usize, rank.fract());
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// True-colour composite from B4/B3/B2. Pixels with nodata in any visible band
/// are black.
pub fn compose_rgb(scene: &SceneRaster, stretch: &StretchSpec) -> Result<CompositeImage> {
    compose_rgb_with(scene, stretch, Exec::default())
}

pub fn compose_rgb_with(scene: &SceneRaster, stretch: &StretchSpec, exec: Exec) -> Result<CompositeImage> {
    let bands = [scene.band(Band::B4)?, scene.band(Band::B3)?, scene.band(Band::B2)?];
    let (w, h) = (bands[0].width, bands[0].height);
    if bands.iter().any(|b| b.width != w || b.height != h) {
        return Err(Error::Geometry("visible bands have different grid sizes".into()));
    }
    let refl: Vec<FloatGrid> = bands.iter().map(|b| to_reflectance(b)).collect();

    let windows: Vec<(f64, f64)> = match *stretch {
        StretchSpec::Linear { lo, hi } => {
            if !(hi > lo) {
                return Err(Error::InvalidInput(format!("stretch window [{lo}, {hi}] is empty")));
            }
            vec![(lo, hi); 3]
        }
        StretchSpec::Percentile { lo_pct, hi_pct } => refl
            .iter()
            .map(|g| {
                let mut v: Vec<f64> = g.values.iter().copied().filter(|v| !v.is_nan()).collect();
                v.sort_by(f64::total_cmp);
                let (lo, hi) = (percentile(&v, lo_pct), percentile(&v, hi_pct));
                if hi > lo { (lo, hi) } else { (lo, lo + f64::EPSILON.max(lo.abs() * 1e-9)) }
            })
            .collect(),
    };

    let mut rgb = vec![0u8; w * h * 3];
    exec::for_each_row(exec, &mut rgb, w * 3, |y, row| {
        for x in 0..w {
            let i = y * w + x;
            let px = [refl[0].values[i], refl[1].values[i], refl[2].values[i]];
            if px.iter().any(|v| v.is_nan()) {
                continue;
            }
            for c in 0..3 {
                row[x * 3 + c] = stretch_to_byte(px[c], windows[c].0, windows[c].1);
            }
        }
    });
    CompositeImage::new(w, h, rgb)
}

/// Baseline JPEG at quality 90.
pub fn encode_jpeg(img: &CompositeImage) -> Result<Vec<u8>> {
    if img.width == 0 || img.height == 0 {
        return Err(Error::InvalidInput("cannot encode a 0x0 image".into()));
    }
    let mut buf = Vec::new();
    JpegEncoder::new_with_quality(&mut buf, JPEG_QUALITY)
        .write_image(&img.rgb, img.width as u32, img.height as u32, ExtendedColorType::Rgb8)
        .map_err(|e| Error::InvalidInput(format!("jpeg encode: {e}")))?;
    Ok(buf)
}

pub fn decode_jpeg(bytes: &[u8]) -> Result<CompositeImage> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Jpeg)
        .map_err(|e| Error::parse("JPEG", e))?;
    Ok(CompositeImage::from_rgb_image(&img.to_rgb8()))
}

pub fn export_jpeg(img: &CompositeImage, path: &Path) -> Result<()> {
    let bytes = encode_jpeg(img)?;
    write_atomic(path, &bytes)
}

/// Lossless PNG, for debugging composites.
pub fn export_png(img: &CompositeImage, path: &Path) -> Result<()> {
    if img.width == 0 || img.height == 0 {
        return Err(Error::InvalidInput("cannot encode a 0x0 image".into()));
    }
    let mut buf = Cursor::new(Vec::new());
    image::codecs::png::PngEncoder::new(&mut buf)
        .write_image(&img.rgb, img.width as u32, img.height as u32, ExtendedColorType::Rgb8)
        .map_err(|e| Error::InvalidInput(format!("png encode: {e}")))?;
    write_atomic(path, buf.get_ref())
}

/// `sentinel_YYYY-MM-01.jpg`
pub fn jpeg_filename(period: Period) -> String {
    format!("sentinel_{}.jpg", period.start_date().format("%Y-%m-%d"))
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn resolve_sample(asset: &AssetRef, band: Band, img: &TiffImage) -> Result<usize> {
    let spp = img.planes.len();
    let idx = match (asset.sample(), spp) {
        (Some(s), _) => s,
        (None, 1) => 0,
        (None, 13) => band.default_sample_index(),
        // L2A stacks omit B10
        (None, 12) => {
            if band == Band::B10 {
                return Err(Error::BandMissing(band));
            }
            Band::ALL.iter().filter(|&&b| b != Band::B10).position(|&b| b == band).unwrap()
        }
        (None, n) => {
            return Err(Error::InvalidInput(format!(
                "{}: {n} samples and no sample index for {band}",
                asset.href()
            )))
        }
    };
    if idx >= spp {
        return Err(Error::InvalidInput(format!(
            "{}: sample {idx} requested for {band} but the file has {spp}",
            asset.href()
        )));
    }
    Ok(idx)
}

/// Crop `plane` to the pixel window covering `bbox`. Identity when the grid
/// already matches the box.
pub fn clip_to_bbox(
    plane: &[u16],
    width: usize,
    height: usize,
    georef: &GeoReference,
    bbox: &BoundingBox,
) -> Result<(Vec<u16>, usize, usize)> {
    // snap to the nearest pixel edge; providers align grids to the cell
    let col = |lon: f64| ((lon - georef.lon_origin) / georef.lon_step).round();
    let row = |lat: f64| ((georef.lat_origin - lat) / georef.lat_step).round();
    let (c0, c1) = (col(bbox.lon_min), col(bbox.lon_max));
    let (r0, r1) = (row(bbox.lat_max), row(bbox.lat_min));
    if c0 < 0.0 || r0 < 0.0 || c1 > width as f64 || r1 > height as f64 || c1 <= c0 || r1 <= r0 {
        return Err(Error::Geometry(format!(
            "raster footprint does not cover cell window cols {c0}..{c1}, rows {r0}..{r1} of {width}x{height}"
        )));
    }
    let (c0, c1, r0, r1) = (c0 as usize, c1 as usize, r0 as usize, r1 as usize);
    if (c0, r0, c1, r1) == (0, 0, width, height) {
        return Ok((plane.to_vec(), width, height));
    }
    let w = c1 - c0;
    let mut out = Vec::with_capacity(w * (r1 - r0));
    for r in r0..r1 {
        out.extend_from_slice(&plane[r * width + c0..r * width + c1]);
    }
    Ok((out, w, r1 - r0))
}

/// Load the requested bands of one scene, clipped to `cell` when the files
/// carry a georeference.
pub fn read_scene(
    scene_id: &str,
    cell: &GeohashCell,
    assets: &BTreeMap<Band, AssetRef>,
    required: &[Band],
) -> Result<SceneRaster> {
    let mut files: BTreeMap<PathBuf, TiffImage> = BTreeMap::new();
    let mut scene = SceneRaster::new(scene_id, cell.clone());
    for &band in required {
        let asset = assets.get(&band).ok_or(Error::BandMissing(band))?;
        if asset.is_remote() {
            return Err(Error::InvalidInput(format!(
                "{band} asset {} has not been downloaded",
                asset.href()
            )));
        }
        let path = PathBuf::from(asset.href());
        if !files.contains_key(&path) {
            let img = tiff::read_tiff(&path)?;
            files.insert(path.clone(), img);
        }
        let img = &files[&path];
        let idx = resolve_sample(asset, band, img)?;
        let (values, w, h) = match &img.georef {
            Some(g) => clip_to_bbox(&img.planes[idx], img.width, img.height, g, cell.bbox())?,
            None => (img.planes[idx].clone(), img.width, img.height),
        };
        scene.insert(BandRaster::with_resolution(
            band,
            w,
            h,
            band.native_resolution_m(),
            values,
            img.nodata.unwrap_or(0),
        )?);
    }
    Ok(scene)
}
