//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any failed. Needs no network.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::atomic::{AtomicU32, Ordering};
use std::time::{Duration, Instant};

use aui_core::catalog::{CatalogSource, Period};
use aui_core::exec::Exec;
use aui_core::geogrid::{self, GeohashCell};
use aui_core::indices::{self, index_series, normalized_difference};
use aui_core::pipeline::CatalogSceneSource;
use aui_core::raster::tiff::{decode_tiff, encode_tiff, ByteOrder, Compression, Layout, TiffWriteOptions};
use aui_core::raster::{block_mean, Band, BandRaster, FloatGrid, SceneRaster};
use aui_core::scoring::{
    parse_response, score_payload, score_series, ModelBackend, PromptPart, PromptPayload,
    RecordingBackend, ReplayBackend, ScoreOptions, SeriesOptions, StubBackend, PROMPT_VERSION,
};
use aui_core::store::{self, golden, Metric, SeriesStore};
use aui_core::synth::{self, SequenceSpec};
use aui_core::Error;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

// ---------------------------------------------------------------------------
// 1. geohash

/// Integer-quantization geohash: the cell index along each axis is
/// floor(fraction * 2^bits); bits are interleaved longitude first.
fn oracle_geohash(lat: f64, lon: f64, precision: usize) -> String {
    const ALPHABET: &[u8] = b"0123456789bcdefghjkmnpqrstuvwxyz";
    let total = 5 * precision;
    let lon_bits = total.div_ceil(2);
    let lat_bits = total / 2;
    let quant = |v: f64, lo: f64, span: f64, bits: usize| -> u64 {
        let n = 1u64 << bits;
        (((v - lo) / span * n as f64).floor() as u64).min(n - 1)
    };
    let xi = quant(lon, -180.0, 360.0, lon_bits);
    let yi = quant(lat, -90.0, 180.0, lat_bits);
    let (mut xb, mut yb) = (lon_bits, lat_bits);
    let mut bits = Vec::with_capacity(total);
    for k in 0..total {
        if k % 2 == 0 {
            xb -= 1;
            bits.push((xi >> xb) & 1);
        } else {
            yb -= 1;
            bits.push((yi >> yb) & 1);
        }
    }
    bits.chunks(5)
        .map(|c| ALPHABET[c.iter().fold(0, |acc, b| (acc << 1) | *b as usize)] as char)
        .collect()
}

fn criterion_1() -> Outcome {
    let strategy = (-90.0f64..90.0, -180.0f64..180.0, 1usize..=12);
    let mut r = runner(10_000);
    r.run(&strategy, |(lat, lon, p)| {
        let cell = geogrid::encode(lat, lon, p).unwrap();
        let want = oracle_geohash(lat, lon, p);
        prop_assert_eq!(cell.code(), want.as_str());
        prop_assert!(cell.bbox().contains(lat, lon));
        let back = geogrid::decode(cell.code()).unwrap();
        prop_assert_eq!(back.bbox(), cell.bbox());
        if p < 12 {
            let child = geogrid::encode(lat, lon, p + 1).unwrap();
            prop_assert!(child.code().starts_with(cell.code()));
            prop_assert!(cell.bbox().covers(child.bbox()));
            prop_assert_eq!(child.parent().unwrap(), cell.clone());
        }
        Ok(())
    })
    .map_err(|e| format!("property failed: {e}"))?;

    let c = geogrid::decode("tdr70").map_err(|e| e.to_string())?;
    ensure!(c.bbox().lat_span() == 0.0439453125, "lat span {}", c.bbox().lat_span());
    ensure!(c.bbox().lon_span() == 0.0439453125, "lon span {}", c.bbox().lon_span());
    let eq = geogrid::encode(0.01, 10.0, 5).map_err(|e| e.to_string())?;
    let (w, h) = eq.dimensions_km();
    ensure!((w - 4.89).abs() <= 0.02 && (h - 4.89).abs() <= 0.02, "equator cell {w} x {h} km");
    Ok(format!("10000 cases; spans 0.0439453125; equator {w:.4} x {h:.4} km"))
}

// ---------------------------------------------------------------------------
// 2. NDBI

/// Scalar reference: harmonize by averaging valid 10 m pixels per 2x2
/// block, then a plain loop over pixels.
fn oracle_ndbi(nir: &[u16], swir: &[u16], size: usize) -> (Vec<Option<f64>>, Option<f64>) {
    let half = size / 2;
    let mut px = Vec::with_capacity(half * half);
    for y in 0..half {
        for x in 0..half {
            let mut sum = 0.0;
            let mut n = 0.0;
            for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                let v = nir[(2 * y + dy) * size + 2 * x + dx];
                if v != 0 {
                    sum += v as f64;
                    n += 1.0;
                }
            }
            let s = swir[y * half + x];
            if n == 0.0 || s == 0 {
                px.push(None);
                continue;
            }
            let nir_mean = sum / n;
            let sw = s as f64;
            px.push(if sw + nir_mean == 0.0 { None } else { Some((sw - nir_mean) / (sw + nir_mean)) });
        }
    }
    let valid: Vec<f64> = px.iter().flatten().copied().collect();
    let mean = if valid.is_empty() { None } else { Some(valid.iter().sum::<f64>() / valid.len() as f64) };
    (px, mean)
}

fn two_band_scene(nir: Vec<u16>, swir: Vec<u16>, size: usize) -> SceneRaster {
    let mut s = SceneRaster::new("r", "tdr70".parse().unwrap());
    s.insert(BandRaster::with_resolution(Band::B8, size, size, 10, nir, 0).unwrap());
    s.insert(BandRaster::with_resolution(Band::B11, size / 2, size / 2, 20, swir, 0).unwrap());
    s
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut pixels = 0usize;
    for case in 0..100 {
        let size = 2 * rng.random_range(2..=40usize);
        let nodata = rng.random_range(0.0..0.2);
        let mut draw = |n: usize| -> Vec<u16> {
            (0..n)
                .map(|_| if rng.random::<f64>() < nodata { 0 } else { rng.random_range(1..=12000u16) })
                .collect()
        };
        let nir = draw(size * size);
        let swir = draw(size * size / 4);
        let scene = two_band_scene(nir.clone(), swir.clone(), size);
        let (want_px, want_mean) = oracle_ndbi(&nir, &swir, size);

        for exec in [Exec::Sequential, Exec::Parallel] {
            let got = match indices::ndbi_with(&scene, exec) {
                Ok(r) => r,
                Err(Error::UndefinedMean) => {
                    ensure!(want_mean.is_none(), "case {case}: undefined mean but oracle has one");
                    continue;
                }
                Err(e) => return Err(format!("case {case}: {e}")),
            };
            for (i, (g, w)) in got.values.iter().zip(&want_px).enumerate() {
                match w {
                    None => ensure!(g.is_nan(), "case {case} px {i}: expected invalid, got {g}"),
                    Some(w) => ensure!(rel_close(*g, *w, 1e-12), "case {case} px {i}: {g} vs {w}"),
                }
            }
            let wm = want_mean.ok_or(format!("case {case}: oracle mean undefined"))?;
            ensure!(rel_close(got.scene_mean, wm, 1e-12), "case {case}: mean {} vs {wm}", got.scene_mean);
        }
        pixels += want_px.len();

        // scale invariance: doubling both bands changes nothing
        let dbl = |v: &[u16]| v.iter().map(|&x| x * 2).collect::<Vec<_>>();
        let base = indices::ndbi(&scene);
        let scaled = indices::ndbi(&two_band_scene(dbl(&nir), dbl(&swir), size));
        if let (Ok(a), Ok(b)) = (&base, &scaled) {
            for (x, y) in a.values.iter().zip(&b.values) {
                ensure!(x.is_nan() == y.is_nan(), "case {case}: validity changed under scaling");
                ensure!(x.is_nan() || rel_close(*x, *y, 1e-12), "case {case}: scaling {x} vs {y}");
            }
        }

        // antisymmetry on co-registered grids
        let a = FloatGrid::from_band(scene.band(Band::B11).unwrap());
        let (fine, _) = aui_core::raster::harmonize(scene.band(Band::B8).unwrap(), scene.band(Band::B11).unwrap())
            .map_err(|e| e.to_string())?;
        if let (Ok(p), Ok(q)) = (
            normalized_difference("x", &a, &fine, Exec::Sequential),
            normalized_difference("x", &fine, &a, Exec::Sequential),
        ) {
            for (x, y) in p.values.iter().zip(&q.values) {
                ensure!(x.is_nan() && y.is_nan() || *x == -*y, "case {case}: {x} vs {y} not antisymmetric");
            }
            ensure!(p.scene_mean == -q.scene_mean, "case {case}: means not antisymmetric");
        }
    }
    Ok(format!("100 scenes, {pixels} pixels, sequential and parallel"))
}

// ---------------------------------------------------------------------------
// 3. harmonization

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let k = [2usize, 3, 6][rng.random_range(0..3)];
        let (cw, ch) = (rng.random_range(1..=30usize), rng.random_range(1..=30usize));
        let (w, h) = (cw * k, ch * k);
        let values: Vec<f64> = (0..w * h).map(|_| rng.random_range(1.0..10000.0)).collect();
        let fine = FloatGrid {
            width: w,
            height: h,
            pixel_size_m: 10,
            values,
        };
        for exec in [Exec::Sequential, Exec::Parallel] {
            let coarse = block_mean(&fine, k, 10 * k as u32, exec);
            ensure!(coarse.width == cw && coarse.height == ch, "case {case}: shape");
            let a = fine.values.iter().sum::<f64>() / fine.values.len() as f64;
            let b = coarse.values.iter().sum::<f64>() / coarse.values.len() as f64;
            let rel = (a - b).abs() / a.abs();
            worst = worst.max(rel);
            ensure!(rel <= 1e-9, "case {case}: grid mean {a} vs {b}");
        }
    }
    Ok(format!("100 grids, worst relative drift {worst:.2e}"))
}

// ---------------------------------------------------------------------------
// 4. golden series

fn criterion_4() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut details = Vec::new();
    for g in golden::all() {
        let m = g.to_metric().map_err(|e| e.to_string())?;
        let want: String = std::iter::once(format!("cell,period,{}\n", g.metric.name()))
            .chain(g.points.iter().map(|(p, v)| format!("{},{p},{v}\n", g.cell)))
            .collect();
        let mut first = None;
        for run in 0..2 {
            let csv = dir.path().join(format!("{}_{}_{run}.csv", g.cell, g.metric.name()));
            let svg = dir.path().join(format!("{}_{}_{run}.svg", g.cell, g.metric.name()));
            store::export_metric_csv(&m, &csv).map_err(|e| e.to_string())?;
            store::emit_chart(&[&m], &format!("{} {}", g.cell, g.metric.label()), &svg)
                .map_err(|e| e.to_string())?;
            let pair = (std::fs::read(&csv).unwrap(), std::fs::read(&svg).unwrap());
            ensure!(
                String::from_utf8_lossy(&pair.0) == want,
                "{} {} CSV differs from fixture",
                g.cell,
                g.metric.name()
            );
            match &first {
                None => first = Some(pair),
                Some(f) => ensure!(*f == pair, "{} {}: second emission differs", g.cell, g.metric.name()),
            }
        }
        let svg = String::from_utf8(first.unwrap().1).unwrap();
        ensure!(
            svg.matches("<circle").count() == g.points.len(),
            "{} {}: marker count",
            g.cell,
            g.metric.name()
        );
        details.push(format!("{} {} {}", g.cell, g.metric.name(), g.points.len()));
    }

    let a70 = golden::metric_series("tdr70", Metric::Aui).unwrap();
    let n70 = golden::metric_series("tdr70", Metric::Ndbi).unwrap();
    let a0t = golden::metric_series("tdr0t", Metric::Aui).unwrap();
    let n0t = golden::metric_series("tdr0t", Metric::Ndbi).unwrap();
    let p = |s: &str| s.parse::<Period>().unwrap();
    ensure!(a70.points.len() == 19 && a70.values()[0] == 7.2 && a70.values()[18] == 8.2, "tdr70 AUI");
    ensure!(n70.points.len() == 18 && n70.get(p("2016-01")) == Some(0.099356), "tdr70 NDBI");
    ensure!(a0t.points.len() == 19 && a0t.values()[0] == 2.5 && a0t.values()[18] == 4.1, "tdr0t AUI");
    ensure!(n0t.points.len() == 18 && n0t.get(p("2024-01")) == Some(0.162315), "tdr0t NDBI");

    // AUI through the observation exporter as well
    let obs = golden::aui_series("tdr70").unwrap();
    let path = dir.path().join("obs.csv");
    store::export_csv(&obs, &path).map_err(|e| e.to_string())?;
    let text = std::fs::read_to_string(&path).unwrap();
    ensure!(text.lines().count() == 20, "observation CSV rows");
    ensure!(text.lines().nth(1) == Some("tdr70,2016-01,7.2,,,,transcribed"), "observation CSV first row");

    let chart = store::render_chart(&[&a70, &n70], "tdr70").map_err(|e| e.to_string())?;
    ensure!(chart == store::render_chart(&[&a70, &n70], "tdr70").unwrap(), "dual chart not deterministic");
    Ok(details.join(", "))
}

// ---------------------------------------------------------------------------
// 5. stability under clouds

fn criterion_5() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cell: GeohashCell = "tdr70".parse().unwrap();
    let first: Period = "2016-01".parse().unwrap();
    let mut spec = SequenceSpec::ramp(cell.clone(), first, 10, 0.1, 0.9);
    let cloud_at = [4usize, 8];
    for &t in &cloud_at {
        spec.cloud[t - 1] = 0.4;
    }
    synth::write_sequence(&spec, dir.path(), &TiffWriteOptions::default()).map_err(|e| e.to_string())?;
    let periods = spec.periods();
    let source = CatalogSceneSource::new(
        CatalogSource::open(dir.path().to_str().unwrap(), None, 4).map_err(|e| e.to_string())?,
    );

    let ndbi = index_series(&cell, &periods, &source).map_err(|e| e.to_string())?;
    ensure!(ndbi.entries.len() == 10, "NDBI entries {}", ndbi.entries.len());
    let nd: Vec<f64> = ndbi.entries.iter().map(|e| e.scene_mean).collect();

    let refs = synth::default_reference_set(32).map_err(|e| e.to_string())?;
    let run = score_series(
        &cell,
        &periods,
        &source,
        &StubBackend::default(),
        &refs,
        &SeriesOptions::default(),
        None,
        None,
    );
    if let Some(e) = run.aborted {
        return Err(format!("scoring aborted: {e}"));
    }
    let aui = run.series.values();
    ensure!(aui.len() == 10, "AUI observations {}", aui.len());

    let ndbi_steps: Vec<f64> = cloud_at.iter().map(|&t| nd[t - 1] - nd[t - 2]).collect();
    let aui_steps: Vec<f64> = cloud_at.iter().map(|&t| aui[t - 1] - aui[t - 2]).collect();
    ensure!(
        ndbi_steps.iter().any(|d| d.abs() > 0.05),
        "no NDBI step above 0.05 at cloud periods: {ndbi_steps:?}"
    );
    ensure!(
        aui_steps.iter().all(|d| d.abs() <= 0.2 + 1e-9),
        "AUI moved more than 0.2 at cloud periods: {aui_steps:?} (series {aui:?})"
    );
    ensure!(aui.windows(2).all(|w| w[1] >= w[0]), "AUI not non-decreasing: {aui:?}");
    Ok(format!(
        "NDBI steps {:?}, AUI steps {:?}, AUI {aui:?}",
        ndbi_steps.iter().map(|d| format!("{d:+.3}")).collect::<Vec<_>>(),
        aui_steps
    ))
}

// ---------------------------------------------------------------------------
// 6. scoring contract

struct Scripted {
    reply: String,
    calls: AtomicU32,
}

impl ModelBackend for Scripted {
    fn model_id(&self) -> &str {
        "scripted"
    }
    fn complete(&self, _: &PromptPayload) -> aui_core::Result<String> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(self.reply.clone())
    }
}

fn load_strings(name: &str) -> Vec<String> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/responses").join(name);
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn one_decimal(v: f64) -> bool {
    ((v * 10.0).round() - v * 10.0).abs() < 1e-9
}

fn criterion_6() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cell: GeohashCell = "tdr0t".parse().unwrap();
    let mut spec = SequenceSpec::ramp(cell.clone(), "2016-01".parse().unwrap(), 8, 0.2, 0.5);
    spec.cloud[3] = 0.1;
    spec.cloud[5] = 0.5;
    let corpus = dir.path().join("corpus");
    synth::write_sequence(&spec, &corpus, &TiffWriteOptions::default()).map_err(|e| e.to_string())?;
    let source = CatalogSceneSource::new(
        CatalogSource::open(corpus.to_str().unwrap(), None, 4).map_err(|e| e.to_string())?,
    );
    let refs = synth::default_reference_set(32).map_err(|e| e.to_string())?;
    let periods = spec.periods();
    let opts = SeriesOptions::default();

    // record, then replay
    let cache = dir.path().join("replay");
    let store_a = SeriesStore::open(dir.path().join("store_a")).map_err(|e| e.to_string())?;
    let recorder = RecordingBackend::new(StubBackend::default(), &cache);
    let recorded = score_series(&cell, &periods, &source, &recorder, &refs, &opts, None, Some(&store_a));
    ensure!(recorded.aborted.is_none(), "recording run aborted: {:?}", recorded.aborted);
    let replay = ReplayBackend::new(&cache, "stub-brightness-v1");
    let store_b = SeriesStore::open(dir.path().join("store_b")).map_err(|e| e.to_string())?;
    let replayed = score_series(&cell, &periods, &source, &replay, &refs, &opts, None, Some(&store_b));
    ensure!(replayed.aborted.is_none(), "replay run aborted: {:?}", replayed.aborted);
    ensure!(recorded.series.values() == replayed.series.values(), "replay differs from recording");
    let digests = |r: &aui_core::scoring::SeriesRun| r.trace.iter().map(|t| t.prompt_digest.clone()).collect::<Vec<_>>();
    ensure!(digests(&recorded) == digests(&replayed), "prompt digests differ across runs");

    // every cached reply and every fixture reply parses
    let mut responses: Vec<String> = Vec::new();
    for entry in std::fs::read_dir(&cache).map_err(|e| e.to_string())? {
        let text = std::fs::read_to_string(entry.unwrap().path()).unwrap();
        let e: aui_core::scoring::ReplayEntry = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        responses.push(e.response);
    }
    let cached = responses.len();
    responses.extend(load_strings("valid.json"));
    for r in &responses {
        ensure!(parse_response(r).is_ok(), "reply does not parse: {r:?}");
    }

    // malformed replies exhaust exactly the configured re-asks
    let payload = PromptPayload {
        version: PROMPT_VERSION,
        cell: "tdr0t".into(),
        parts: vec![PromptPart::Instruction { text: "rate".into() }],
    };
    let malformed = load_strings("malformed.json");
    for reasks in [0u32, 2] {
        for m in &malformed {
            let b = Scripted {
                reply: m.clone(),
                calls: AtomicU32::new(0),
            };
            match score_payload(&payload, &b, ScoreOptions { reasks }) {
                Err(Error::Scoring { attempts, .. }) => {
                    ensure!(attempts == reasks + 1, "{m:?}: {attempts} attempts");
                    ensure!(b.calls.load(Ordering::SeqCst) == reasks + 1, "{m:?}: call count");
                }
                other => return Err(format!("{m:?}: expected scoring error, got {other:?}")),
            }
        }
    }

    // out-of-range replies are clamped before they are stored
    for (reply, want) in [("{\"aui\": 12.34}", 10.0), ("{\"aui\": -2}", 0.0), ("{\"aui\": 4.449}", 4.4)] {
        let b = Scripted {
            reply: reply.into(),
            calls: AtomicU32::new(0),
        };
        let s = score_payload(&payload, &b, ScoreOptions::default()).map_err(|e| e.to_string())?;
        ensure!(s.value == want, "{reply}: stored {}", s.value);
    }

    let mut stored = 0;
    for st in [&store_a, &store_b] {
        for o in st.load(cell.code()).map_err(|e| e.to_string())?.observations {
            ensure!((0.0..=10.0).contains(&o.aui) && one_decimal(o.aui), "persisted AUI {}", o.aui);
            stored += 1;
        }
    }
    Ok(format!(
        "{} replies parsed ({cached} cached), {} malformed rejected, {stored} stored scores valid",
        responses.len(),
        malformed.len()
    ))
}

// ---------------------------------------------------------------------------
// 7. TIFF reader

fn oracle_pixels(bytes: &[u8]) -> Result<(u32, u32, Vec<u16>), String> {
    let mut dec = tiff::decoder::Decoder::new(std::io::Cursor::new(bytes)).map_err(|e| e.to_string())?;
    let (w, h) = dec.dimensions().map_err(|e| e.to_string())?;
    match dec.read_image().map_err(|e| e.to_string())? {
        tiff::decoder::DecodingResult::U16(v) => Ok((w, h, v)),
        _ => Err("oracle decoded a non-u16 image".into()),
    }
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    for byte_order in [ByteOrder::LittleEndian, ByteOrder::BigEndian] {
        for layout in [Layout::Strips { rows_per_strip: 7 }, Layout::Tiles { width: 16, height: 32 }] {
            for compression in [Compression::None, Compression::Deflate] {
                for (spp, predictor) in [(1usize, false), (1, true), (3, false)] {
                    let (w, h) = (rng.random_range(5..70usize), rng.random_range(5..70usize));
                    let planes: Vec<Vec<u16>> =
                        (0..spp).map(|_| (0..w * h).map(|_| rng.random()).collect()).collect();
                    let refs: Vec<&[u16]> = planes.iter().map(|p| p.as_slice()).collect();
                    let opts = TiffWriteOptions {
                        byte_order,
                        layout,
                        compression,
                        predictor,
                        separate_planes: false,
                        nodata: Some(0),
                        georef: None,
                    };
                    let label = format!("{byte_order:?}/{layout:?}/{compression:?}/spp{spp}/pred{predictor}");
                    let bytes = encode_tiff(w, h, &refs, &opts).map_err(|e| format!("{label}: {e}"))?;
                    let ours = decode_tiff(&bytes).map_err(|e| format!("{label}: {e}"))?;
                    let (ow, oh, oracle) = oracle_pixels(&bytes).map_err(|e| format!("{label}: oracle: {e}"))?;
                    ensure!((ow as usize, oh as usize) == (ours.width, ours.height), "{label}: dimensions");
                    let interleaved: Vec<u16> = (0..w * h)
                        .flat_map(|i| ours.planes.iter().map(move |p| p[i]))
                        .collect();
                    ensure!(interleaved == oracle, "{label}: pixels differ from oracle");
                    ensure!(ours.planes == planes, "{label}: pixels differ from source");
                    checked += 1;
                }
            }
        }
    }
    Ok(format!("{checked} files across byte order x layout x compression"))
}

// ---------------------------------------------------------------------------

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 7] = [
        ("geohash properties and cell size", criterion_1, Duration::from_secs(5)),
        ("NDBI oracle equivalence", criterion_2, Duration::from_secs(30)),
        ("harmonization conserves the mean", criterion_3, Duration::from_secs(30)),
        ("golden series export", criterion_4, Duration::from_secs(60)),
        ("AUI stability under clouds", criterion_5, Duration::from_secs(120)),
        ("scoring contract", criterion_6, Duration::from_secs(120)),
        ("TIFF reader against oracle", criterion_7, Duration::from_secs(60)),
    ];
    let mut failed = 0;
    for (i, (name, f, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(d) if elapsed > *budget => Err(format!("{d}; took {elapsed:.2?}, budget {budget:?}")),
            o => o,
        };
        match outcome {
            Ok(detail) => println!("criterion {} PASS  {name} ({elapsed:.2?}): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} FAIL  {name} ({elapsed:.2?}): {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
