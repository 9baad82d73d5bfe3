//! Minimal TIFF codec for 16-bit unsigned scene rasters.
//!
//! Supported on read (first IFD only):
//!
//! | tag | name                      | accepted values                     |
//! |-----|---------------------------|-------------------------------------|
//! | 256 | ImageWidth                | any                                 |
//! | 257 | ImageLength               | any                                 |
//! | 258 | BitsPerSample             | 16                                  |
//! | 259 | Compression               | 1 (none), 8 / 32946 (deflate)       |
//! | 262 | PhotometricInterpretation | ignored                             |
//! | 273 | StripOffsets              | strip layout                        |
//! | 277 | SamplesPerPixel           | any                                 |
//! | 278 | RowsPerStrip              | default: whole image                |
//! | 279 | StripByteCounts           | strip layout                        |
//! | 284 | PlanarConfiguration       | 1 (chunky), 2 (separate planes)     |
//! | 317 | Predictor                 | 1 (none), 2 (horizontal)            |
//! | 322 | TileWidth                 | tile layout                         |
//! | 323 | TileLength                | tile layout                         |
//! | 324 | TileOffsets               | tile layout                         |
//! | 325 | TileByteCounts            | tile layout                         |
//! | 339 | SampleFormat              | 1 (unsigned integer)                |
//! | 33550 | ModelPixelScale         | degrees per pixel                   |
//! | 33922 | ModelTiepoint           | raster (0,0) anchored at upper left |
//! | 42113 | GDAL_NODATA             | integer text                        |
//!
//! Both byte orders are handled. BigTIFF is rejected.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::ZlibDecoder;
use flate2::write::ZlibEncoder;

use crate::error::{Error, Result};
use crate::exec::{self, Exec};

const TAG_IMAGE_WIDTH: u16 = 256;
const TAG_IMAGE_LENGTH: u16 = 257;
const TAG_BITS_PER_SAMPLE: u16 = 258;
const TAG_COMPRESSION: u16 = 259;
const TAG_PHOTOMETRIC: u16 = 262;
const TAG_STRIP_OFFSETS: u16 = 273;
const TAG_SAMPLES_PER_PIXEL: u16 = 277;
const TAG_ROWS_PER_STRIP: u16 = 278;
const TAG_STRIP_BYTE_COUNTS: u16 = 279;
const TAG_PLANAR_CONFIG: u16 = 284;
const TAG_PREDICTOR: u16 = 317;
const TAG_TILE_WIDTH: u16 = 322;
const TAG_TILE_LENGTH: u16 = 323;
const TAG_TILE_OFFSETS: u16 = 324;
const TAG_TILE_BYTE_COUNTS: u16 = 325;
const TAG_SAMPLE_FORMAT: u16 = 339;
const TAG_MODEL_PIXEL_SCALE: u16 = 33550;
const TAG_MODEL_TIEPOINT: u16 = 33922;
const TAG_GDAL_NODATA: u16 = 42113;

const TYPE_BYTE: u16 = 1;
const TYPE_ASCII: u16 = 2;
const TYPE_SHORT: u16 = 3;
const TYPE_LONG: u16 = 4;
const TYPE_RATIONAL: u16 = 5;
const TYPE_UNDEFINED: u16 = 7;
const TYPE_DOUBLE: u16 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ByteOrder {
    LittleEndian,
    BigEndian,
}

/// Upper-left anchored lat/lon grid (EPSG:4326 degrees).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoReference {
    pub lon_origin: f64,
    pub lat_origin: f64,
    pub lon_step: f64,
    pub lat_step: f64,
}

/// Decoded image: one plane of `width * height` samples per TIFF sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TiffImage {
    pub width: usize,
    pub height: usize,
    pub planes: Vec<Vec<u16>>,
    pub nodata: Option<u16>,
    pub georef: Option<GeoReference>,
}

pub fn read_tiff(path: &Path) -> Result<TiffImage> {
    let bytes = std::fs::read(path)?;
    decode_tiff(&bytes).map_err(|e| match e {
        Error::Parse { what, msg } => Error::Parse {
            what: format!("{what} ({})", path.display()),
            msg,
        },
        other => other,
    })
}

enum Value {
    Ints(Vec<u64>),
    Doubles(Vec<f64>),
    Ascii(String),
}

struct Cursor<'a> {
    bytes: &'a [u8],
    order: ByteOrder,
}

impl<'a> Cursor<'a> {
    fn slice(&self, off: usize, len: usize) -> Result<&'a [u8]> {
        off.checked_add(len)
            .and_then(|end| self.bytes.get(off..end))
            .ok_or_else(|| Error::parse("TIFF", format!("truncated: need bytes {off}..{}", off + len)))
    }

    fn u16(&self, off: usize) -> Result<u16> {
        let b: [u8; 2] = self.slice(off, 2)?.try_into().unwrap();
        Ok(match self.order {
            ByteOrder::LittleEndian => u16::from_le_bytes(b),
            ByteOrder::BigEndian => u16::from_be_bytes(b),
        })
    }

    fn u32(&self, off: usize) -> Result<u32> {
        let b: [u8; 4] = self.slice(off, 4)?.try_into().unwrap();
        Ok(match self.order {
            ByteOrder::LittleEndian => u32::from_le_bytes(b),
            ByteOrder::BigEndian => u32::from_be_bytes(b),
        })
    }

    fn f64(&self, off: usize) -> Result<f64> {
        let b: [u8; 8] = self.slice(off, 8)?.try_into().unwrap();
        Ok(match self.order {
            ByteOrder::LittleEndian => f64::from_le_bytes(b),
            ByteOrder::BigEndian => f64::from_be_bytes(b),
        })
    }
}

fn type_size(ty: u16) -> Option<usize> {
    match ty {
        TYPE_BYTE | TYPE_ASCII | TYPE_UNDEFINED | 6 => Some(1),
        TYPE_SHORT | 8 => Some(2),
        TYPE_LONG | 9 | 11 => Some(4),
        TYPE_RATIONAL | 10 | TYPE_DOUBLE => Some(8),
        _ => None,
    }
}

fn read_entry(cur: &Cursor<'_>, entry_off: usize) -> Result<Option<(u16, Value)>> {
    let tag = cur.u16(entry_off)?;
    let ty = cur.u16(entry_off + 2)?;
    let count = cur.u32(entry_off + 4)? as usize;
    let Some(size) = type_size(ty) else {
        // Unknown field types are skipped, as baseline TIFF readers must.
        return Ok(None);
    };
    let total = size
        .checked_mul(count)
        .ok_or_else(|| Error::parse("TIFF", format!("tag {tag} count overflow")))?;
    let data_off = if total <= 4 {
        entry_off + 8
    } else {
        cur.u32(entry_off + 8)? as usize
    };
    cur.slice(data_off, total)?;

    let value = match ty {
        TYPE_BYTE | TYPE_UNDEFINED => {
            Value::Ints(cur.slice(data_off, count)?.iter().map(|&b| b as u64).collect())
        }
        TYPE_ASCII => {
            let raw = cur.slice(data_off, count)?;
            let text = raw.split(|&b| b == 0).next().unwrap_or(&[]);
            Value::Ascii(String::from_utf8_lossy(text).into_owned())
        }
        TYPE_SHORT => Value::Ints(
            (0..count)
                .map(|i| cur.u16(data_off + 2 * i).map(u64::from))
                .collect::<Result<_>>()?,
        ),
        TYPE_LONG => Value::Ints(
            (0..count)
                .map(|i| cur.u32(data_off + 4 * i).map(u64::from))
                .collect::<Result<_>>()?,
        ),
        TYPE_RATIONAL => Value::Doubles(
            (0..count)
                .map(|i| {
                    let n = cur.u32(data_off + 8 * i)? as f64;
                    let d = cur.u32(data_off + 8 * i + 4)? as f64;
                    Ok(n / d)
                })
                .collect::<Result<_>>()?,
        ),
        TYPE_DOUBLE => Value::Doubles(
            (0..count)
                .map(|i| cur.f64(data_off + 8 * i))
                .collect::<Result<_>>()?,
        ),
        _ => return Ok(None),
    };
    Ok(Some((tag, value)))
}

struct Ifd(BTreeMap<u16, Value>);

impl Ifd {
    fn ints(&self, tag: u16) -> Result<Option<&[u64]>> {
        match self.0.get(&tag) {
            None => Ok(None),
            Some(Value::Ints(v)) => Ok(Some(v)),
            Some(_) => Err(Error::parse("TIFF", format!("tag {tag} has unexpected type"))),
        }
    }

    fn required_ints(&self, tag: u16, name: &str) -> Result<&[u64]> {
        self.ints(tag)?
            .ok_or_else(|| Error::parse("TIFF", format!("missing required tag {name} ({tag})")))
    }

    fn scalar(&self, tag: u16, default: u64) -> Result<u64> {
        Ok(self.ints(tag)?.and_then(|v| v.first().copied()).unwrap_or(default))
    }

    fn doubles(&self, tag: u16) -> Option<&[f64]> {
        match self.0.get(&tag) {
            Some(Value::Doubles(v)) => Some(v),
            _ => None,
        }
    }

    fn ascii(&self, tag: u16) -> Option<&str> {
        match self.0.get(&tag) {
            Some(Value::Ascii(s)) => Some(s),
            _ => None,
        }
    }
}

#[derive(Clone, Copy)]
struct Chunk {
    offset: usize,
    len: usize,
    plane: usize,
    x0: usize,
    y0: usize,
    // stored dimensions of the chunk
    w: usize,
    h: usize,
}

pub fn decode_tiff(bytes: &[u8]) -> Result<TiffImage> {
    decode_tiff_with(bytes, Exec::default())
}

pub fn decode_tiff_with(bytes: &[u8], exec: Exec) -> Result<TiffImage> {
    if bytes.len() < 8 {
        return Err(Error::parse("TIFF", "truncated header"));
    }
    let order = match &bytes[..2] {
        b"II" => ByteOrder::LittleEndian,
        b"MM" => ByteOrder::BigEndian,
        _ => return Err(Error::parse("TIFF", "bad byte-order mark")),
    };
    let cur = Cursor { bytes, order };
    match cur.u16(2)? {
        42 => {}
        43 => {
            return Err(Error::UnsupportedFormat {
                tag: "BigTIFF (version 43)".into(),
            })
        }
        v => return Err(Error::parse("TIFF", format!("bad version {v}"))),
    }

    let ifd_off = cur.u32(4)? as usize;
    let n = cur.u16(ifd_off)? as usize;
    let mut fields = BTreeMap::new();
    for i in 0..n {
        if let Some((tag, value)) = read_entry(&cur, ifd_off + 2 + 12 * i)? {
            fields.insert(tag, value);
        }
    }
    let ifd = Ifd(fields);

    let width = ifd.required_ints(TAG_IMAGE_WIDTH, "ImageWidth")?[0] as usize;
    let height = ifd.required_ints(TAG_IMAGE_LENGTH, "ImageLength")?[0] as usize;
    let spp = ifd.scalar(TAG_SAMPLES_PER_PIXEL, 1)? as usize;
    if width == 0 || height == 0 || spp == 0 {
        return Err(Error::parse("TIFF", "zero-sized image"));
    }

    let bits = ifd.ints(TAG_BITS_PER_SAMPLE)?.unwrap_or(&[1]);
    if let Some(&b) = bits.iter().find(|&&b| b != 16) {
        return Err(Error::UnsupportedFormat {
            tag: format!("BitsPerSample={b}"),
        });
    }
    if let Some(fmts) = ifd.ints(TAG_SAMPLE_FORMAT)? {
        if let Some(&f) = fmts.iter().find(|&&f| f != 1) {
            return Err(Error::UnsupportedFormat {
                tag: format!("SampleFormat={f}"),
            });
        }
    }
    let compression = ifd.scalar(TAG_COMPRESSION, 1)?;
    let deflate = match compression {
        1 => false,
        8 | 32946 => true,
        c => {
            return Err(Error::UnsupportedFormat {
                tag: format!("Compression={c}"),
            })
        }
    };
    let predictor = ifd.scalar(TAG_PREDICTOR, 1)?;
    if predictor != 1 && predictor != 2 {
        return Err(Error::UnsupportedFormat {
            tag: format!("Predictor={predictor}"),
        });
    }
    let planar = match ifd.scalar(TAG_PLANAR_CONFIG, 1)? {
        1 => false,
        2 => true,
        p => {
            return Err(Error::UnsupportedFormat {
                tag: format!("PlanarConfiguration={p}"),
            })
        }
    };
    // samples interleaved inside one chunk
    let chunk_spp = if planar { 1 } else { spp };
    let planes_in_file = if planar { spp } else { 1 };

    let mut chunks = Vec::new();
    if let Some(offsets) = ifd.ints(TAG_TILE_OFFSETS)? {
        let counts = ifd.required_ints(TAG_TILE_BYTE_COUNTS, "TileByteCounts")?;
        let tw = ifd.required_ints(TAG_TILE_WIDTH, "TileWidth")?[0] as usize;
        let th = ifd.required_ints(TAG_TILE_LENGTH, "TileLength")?[0] as usize;
        if tw == 0 || th == 0 {
            return Err(Error::parse("TIFF", "zero tile size"));
        }
        let across = width.div_ceil(tw);
        let down = height.div_ceil(th);
        let per_plane = across * down;
        if offsets.len() != per_plane * planes_in_file || counts.len() != offsets.len() {
            return Err(Error::parse(
                "TIFF",
                format!("expected {} tiles, found {}", per_plane * planes_in_file, offsets.len()),
            ));
        }
        for (i, (&off, &len)) in offsets.iter().zip(counts).enumerate() {
            let plane = i / per_plane;
            let t = i % per_plane;
            chunks.push(Chunk {
                offset: off as usize,
                len: len as usize,
                plane,
                x0: (t % across) * tw,
                y0: (t / across) * th,
                w: tw,
                h: th,
            });
        }
    } else {
        let offsets = ifd.required_ints(TAG_STRIP_OFFSETS, "StripOffsets")?;
        let counts = ifd.required_ints(TAG_STRIP_BYTE_COUNTS, "StripByteCounts")?;
        let rps = (ifd.scalar(TAG_ROWS_PER_STRIP, u32::MAX as u64)? as usize).min(height);
        if rps == 0 {
            return Err(Error::parse("TIFF", "RowsPerStrip is zero"));
        }
        let per_plane = height.div_ceil(rps);
        if offsets.len() != per_plane * planes_in_file || counts.len() != offsets.len() {
            return Err(Error::parse(
                "TIFF",
                format!("expected {} strips, found {}", per_plane * planes_in_file, offsets.len()),
            ));
        }
        for (i, (&off, &len)) in offsets.iter().zip(counts).enumerate() {
            let plane = i / per_plane;
            let s = i % per_plane;
            let y0 = s * rps;
            chunks.push(Chunk {
                offset: off as usize,
                len: len as usize,
                plane,
                x0: 0,
                y0,
                w: width,
                h: rps.min(height - y0),
            });
        }
    }

    let decoded: Vec<Result<Vec<u16>>> = exec::map_vec(exec, &chunks, |c| {
        decode_chunk(&cur, c, chunk_spp, deflate, predictor == 2)
    });

    let mut planes = vec![vec![0u16; width * height]; spp];
    for (chunk, samples) in chunks.iter().zip(decoded) {
        let samples = samples?;
        let rows = chunk.h.min(height - chunk.y0);
        let cols = chunk.w.min(width - chunk.x0);
        for r in 0..rows {
            let src_row = &samples[r * chunk.w * chunk_spp..][..cols * chunk_spp];
            let dst_start = (chunk.y0 + r) * width + chunk.x0;
            if planar {
                planes[chunk.plane][dst_start..dst_start + cols].copy_from_slice(src_row);
            } else {
                for (c, px) in src_row.chunks_exact(spp).enumerate() {
                    for (s, &v) in px.iter().enumerate() {
                        planes[s][dst_start + c] = v;
                    }
                }
            }
        }
    }

    let nodata = match ifd.ascii(TAG_GDAL_NODATA) {
        Some(text) => {
            let t = text.trim();
            let v: f64 = t
                .parse()
                .map_err(|_| Error::parse("TIFF", format!("GDAL_NODATA {t:?} is not a number")))?;
            if v.fract() != 0.0 || !(0.0..=65535.0).contains(&v) {
                return Err(Error::UnsupportedFormat {
                    tag: format!("GDAL_NODATA={t}"),
                });
            }
            Some(v as u16)
        }
        None => None,
    };

    let georef = match (ifd.doubles(TAG_MODEL_PIXEL_SCALE), ifd.doubles(TAG_MODEL_TIEPOINT)) {
        (Some(scale), Some(tie)) if scale.len() >= 2 && tie.len() >= 6 => {
            if tie[0] != 0.0 || tie[1] != 0.0 {
                return Err(Error::UnsupportedFormat {
                    tag: "ModelTiepoint not anchored at raster (0,0)".into(),
                });
            }
            Some(GeoReference {
                lon_origin: tie[3],
                lat_origin: tie[4],
                lon_step: scale[0],
                lat_step: scale[1],
            })
        }
        _ => None,
    };

    Ok(TiffImage {
        width,
        height,
        planes,
        nodata,
        georef,
    })
}

fn decode_chunk(
    cur: &Cursor<'_>,
    chunk: &Chunk,
    spp: usize,
    deflate: bool,
    predictor: bool,
) -> Result<Vec<u16>> {
    let raw = cur.slice(chunk.offset, chunk.len)?;
    let expected = chunk.w * chunk.h * spp * 2;
    let bytes: std::borrow::Cow<'_, [u8]> = if deflate {
        let mut out = Vec::with_capacity(expected);
        ZlibDecoder::new(raw)
            .read_to_end(&mut out)
            .map_err(|e| Error::parse("TIFF", format!("deflate stream: {e}")))?;
        out.into()
    } else {
        raw.into()
    };
    if bytes.len() < expected {
        return Err(Error::parse(
            "TIFF",
            format!("truncated chunk: {} of {expected} bytes", bytes.len()),
        ));
    }
    let mut samples: Vec<u16> = bytes[..expected]
        .chunks_exact(2)
        .map(|b| match cur.order {
            ByteOrder::LittleEndian => u16::from_le_bytes([b[0], b[1]]),
            ByteOrder::BigEndian => u16::from_be_bytes([b[0], b[1]]),
        })
        .collect();
    if predictor {
        let row_len = chunk.w * spp;
        for row in samples.chunks_exact_mut(row_len) {
            for i in spp..row_len {
                row[i] = row[i].wrapping_add(row[i - spp]);
            }
        }
    }
    Ok(samples)
}

// ---------------------------------------------------------------------------
// writer

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Strips { rows_per_strip: usize },
    Tiles { width: usize, height: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Compression {
    None,
    Deflate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiffWriteOptions {
    pub byte_order: ByteOrder,
    pub layout: Layout,
    pub compression: Compression,
    /// Horizontal differencing (predictor 2).
    pub predictor: bool,
    /// Write samples as separate planes (PlanarConfiguration 2).
    pub separate_planes: bool,
    pub nodata: Option<u16>,
    pub georef: Option<GeoReference>,
}

impl Default for TiffWriteOptions {
    fn default() -> Self {
        Self {
            byte_order: ByteOrder::LittleEndian,
            layout: Layout::Strips { rows_per_strip: 64 },
            compression: Compression::Deflate,
            predictor: false,
            separate_planes: true,
            nodata: Some(0),
            georef: None,
        }
    }
}

struct OutField {
    tag: u16,
    ty: u16,
    count: u32,
    data: Vec<u8>,
}

struct Enc(ByteOrder);

impl Enc {
    fn u16(&self, v: u16) -> [u8; 2] {
        match self.0 {
            ByteOrder::LittleEndian => v.to_le_bytes(),
            ByteOrder::BigEndian => v.to_be_bytes(),
        }
    }
    fn u32(&self, v: u32) -> [u8; 4] {
        match self.0 {
            ByteOrder::LittleEndian => v.to_le_bytes(),
            ByteOrder::BigEndian => v.to_be_bytes(),
        }
    }
    fn f64(&self, v: f64) -> [u8; 8] {
        match self.0 {
            ByteOrder::LittleEndian => v.to_le_bytes(),
            ByteOrder::BigEndian => v.to_be_bytes(),
        }
    }
    fn shorts(&self, tag: u16, vals: &[u16]) -> OutField {
        OutField {
            tag,
            ty: TYPE_SHORT,
            count: vals.len() as u32,
            data: vals.iter().flat_map(|&v| self.u16(v)).collect(),
        }
    }
    fn longs(&self, tag: u16, vals: &[u32]) -> OutField {
        OutField {
            tag,
            ty: TYPE_LONG,
            count: vals.len() as u32,
            data: vals.iter().flat_map(|&v| self.u32(v)).collect(),
        }
    }
    fn doubles(&self, tag: u16, vals: &[f64]) -> OutField {
        OutField {
            tag,
            ty: TYPE_DOUBLE,
            count: vals.len() as u32,
            data: vals.iter().flat_map(|&v| self.f64(v)).collect(),
        }
    }
}

/// Encode equally sized `planes` (one per sample) as a single-IFD TIFF.
pub fn encode_tiff(
    width: usize,
    height: usize,
    planes: &[&[u16]],
    opts: &TiffWriteOptions,
) -> Result<Vec<u8>> {
    if width == 0 || height == 0 || planes.is_empty() {
        return Err(Error::InvalidInput("cannot encode an empty raster".into()));
    }
    if planes.iter().any(|p| p.len() != width * height) {
        return Err(Error::InvalidInput("plane length does not match width * height".into()));
    }
    let spp = planes.len();
    let enc = Enc(opts.byte_order);
    let separate = opts.separate_planes && spp > 1;
    let chunk_spp = if separate { 1 } else { spp };
    let plane_groups: Vec<Vec<&[u16]>> = if separate {
        planes.iter().map(|p| vec![*p]).collect()
    } else {
        vec![planes.to_vec()]
    };

    // (x0, y0, w, h) of every chunk in one plane, row-major
    let (geoms, chunk_h_tag): (Vec<(usize, usize, usize, usize)>, Option<(usize, usize)>) =
        match opts.layout {
            Layout::Strips { rows_per_strip } => {
                let rps = rows_per_strip.clamp(1, height);
                let g = (0..height.div_ceil(rps))
                    .map(|s| (0, s * rps, width, rps.min(height - s * rps)))
                    .collect();
                (g, None)
            }
            Layout::Tiles { width: tw, height: th } => {
                if tw == 0 || th == 0 || tw % 16 != 0 || th % 16 != 0 {
                    return Err(Error::InvalidInput("tile dimensions must be positive multiples of 16".into()));
                }
                let mut g = Vec::new();
                for ty in 0..height.div_ceil(th) {
                    for tx in 0..width.div_ceil(tw) {
                        g.push((tx * tw, ty * th, tw, th));
                    }
                }
                (g, Some((tw, th)))
            }
        };

    let mut out: Vec<u8> = Vec::new();
    out.extend_from_slice(match opts.byte_order {
        ByteOrder::LittleEndian => b"II",
        ByteOrder::BigEndian => b"MM",
    });
    out.extend_from_slice(&enc.u16(42));
    out.extend_from_slice(&[0; 4]); // IFD offset, patched below

    let mut offsets = Vec::new();
    let mut counts = Vec::new();
    for group in &plane_groups {
        for &(x0, y0, w, h) in &geoms {
            let mut samples = Vec::with_capacity(w * h * chunk_spp);
            for r in 0..h {
                let row_start = samples.len();
                for c in 0..w {
                    let (y, x) = (y0 + r, x0 + c);
                    for plane in group {
                        let v = if y < height && x < width { plane[y * width + x] } else { 0 };
                        samples.push(v);
                    }
                }
                if opts.predictor {
                    let row = &mut samples[row_start..];
                    for i in (chunk_spp..row.len()).rev() {
                        row[i] = row[i].wrapping_sub(row[i - chunk_spp]);
                    }
                }
            }
            let raw: Vec<u8> = samples.iter().flat_map(|&v| enc.u16(v)).collect();
            let payload = match opts.compression {
                Compression::None => raw,
                Compression::Deflate => {
                    let mut z = ZlibEncoder::new(Vec::new(), flate2::Compression::default());
                    z.write_all(&raw)?;
                    z.finish()?
                }
            };
            offsets.push(out.len() as u32);
            counts.push(payload.len() as u32);
            out.extend_from_slice(&payload);
            if out.len() % 2 == 1 {
                out.push(0);
            }
        }
    }

    let mut fields = vec![
        enc.longs(TAG_IMAGE_WIDTH, &[width as u32]),
        enc.longs(TAG_IMAGE_LENGTH, &[height as u32]),
        enc.shorts(TAG_BITS_PER_SAMPLE, &vec![16; spp]),
        enc.shorts(
            TAG_COMPRESSION,
            &[match opts.compression {
                Compression::None => 1,
                Compression::Deflate => 8,
            }],
        ),
        enc.shorts(TAG_PHOTOMETRIC, &[1]),
        enc.shorts(TAG_SAMPLES_PER_PIXEL, &[spp as u16]),
        enc.shorts(TAG_PLANAR_CONFIG, &[if separate { 2 } else { 1 }]),
        enc.shorts(TAG_SAMPLE_FORMAT, &vec![1; spp]),
    ];
    if opts.predictor {
        fields.push(enc.shorts(TAG_PREDICTOR, &[2]));
    }
    match chunk_h_tag {
        None => {
            let rps = geoms[0].3 as u32;
            fields.push(enc.longs(TAG_STRIP_OFFSETS, &offsets));
            fields.push(enc.longs(TAG_ROWS_PER_STRIP, &[rps]));
            fields.push(enc.longs(TAG_STRIP_BYTE_COUNTS, &counts));
        }
        Some((tw, th)) => {
            fields.push(enc.longs(TAG_TILE_WIDTH, &[tw as u32]));
            fields.push(enc.longs(TAG_TILE_LENGTH, &[th as u32]));
            fields.push(enc.longs(TAG_TILE_OFFSETS, &offsets));
            fields.push(enc.longs(TAG_TILE_BYTE_COUNTS, &counts));
        }
    }
    if let Some(g) = opts.georef {
        fields.push(enc.doubles(TAG_MODEL_PIXEL_SCALE, &[g.lon_step, g.lat_step, 0.0]));
        fields.push(enc.doubles(
            TAG_MODEL_TIEPOINT,
            &[0.0, 0.0, 0.0, g.lon_origin, g.lat_origin, 0.0],
        ));
    }
    if let Some(nd) = opts.nodata {
        let mut text = nd.to_string().into_bytes();
        text.push(0);
        fields.push(OutField {
            tag: TAG_GDAL_NODATA,
            ty: TYPE_ASCII,
            count: text.len() as u32,
            data: text,
        });
    }
    fields.sort_by_key(|f| f.tag);

    let ifd_off = out.len() as u32;
    out[4..8].copy_from_slice(&enc.u32(ifd_off));
    let ifd_len = 2 + 12 * fields.len() + 4;
    let mut extra_off = ifd_off as usize + ifd_len;
    let mut extra = Vec::new();
    out.extend_from_slice(&enc.u16(fields.len() as u16));
    for f in &fields {
        out.extend_from_slice(&enc.u16(f.tag));
        out.extend_from_slice(&enc.u16(f.ty));
        out.extend_from_slice(&enc.u32(f.count));
        if f.data.len() <= 4 {
            let mut inline = f.data.clone();
            inline.resize(4, 0);
            out.extend_from_slice(&inline);
        } else {
            out.extend_from_slice(&enc.u32(extra_off as u32));
            extra.extend_from_slice(&f.data);
            extra_off += f.data.len();
            if extra_off % 2 == 1 {
                extra.push(0);
                extra_off += 1;
            }
        }
    }
    out.extend_from_slice(&[0; 4]);
    out.extend_from_slice(&extra);
    Ok(out)
}

pub fn write_tiff(
    path: &Path,
    width: usize,
    height: usize,
    planes: &[&[u16]],
    opts: &TiffWriteOptions,
) -> Result<()> {
    let bytes = encode_tiff(width, height, planes, opts)?;
    std::fs::write(path, bytes)?;
    Ok(())
}
