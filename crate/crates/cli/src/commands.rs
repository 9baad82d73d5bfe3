use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use aui_core::catalog::{CatalogSource, Manifest, Period, MANIFEST_FILE};
use aui_core::geogrid::GeohashCell;
use aui_core::http::{HttpClient, RetryPolicy};
use aui_core::indices::index_series;
use aui_core::raster::tiff::TiffWriteOptions;
use aui_core::raster::Band;
use aui_core::scoring::{
    score_series, ModelBackend, RecordingBackend, ReferenceSet, RemoteBackend, ReplayBackend, ScoreOptions,
    SeriesOptions, StubBackend,
};
use aui_core::store::{self, emit_chart, golden, Metric, MetricSeries, SeriesStore};
use aui_core::synth::{self, SequenceSpec};

use crate::cache::{origin, CacheSceneSource, Fetcher, IngestOutcome, SceneCache};
use crate::config::{BackendKind, RunConfig};
use crate::Failure;

type CmdResult = Result<u8, Failure>;

/// Run `f` for every cell on up to `jobs` threads; results keep cell order.
fn for_cells<R: Send>(cells: &[GeohashCell], jobs: usize, f: impl Fn(&GeohashCell) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..cells.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, cells.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= cells.len() {
                    break;
                }
                let r = f(&cells[i]);
                slots.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every cell ran"))
        .collect()
}

fn out_dir(c: &RunConfig) -> Result<&Path, Failure> {
    std::fs::create_dir_all(&c.out_dir)
        .map_err(|e| Failure::runtime(format!("cannot create {}: {e}", c.out_dir.display())))?;
    Ok(&c.out_dir)
}

/// First failure wins the exit code; all are reported.
fn settle(errors: Vec<(String, Failure)>, gaps: usize) -> CmdResult {
    let mut first = None;
    for (cell, f) in errors {
        eprintln!("aui: {cell}: {}", f.msg);
        first.get_or_insert(f.code);
    }
    match first {
        Some(code) => Err(Failure {
            code,
            msg: "some cells failed".into(),
        }),
        None if gaps > 0 => Ok(1),
        None => Ok(0),
    }
}

fn chart(c: &RunConfig, series: &[&MetricSeries], title: &str, path: PathBuf) -> Result<(), Failure> {
    if c.svg && series.iter().any(|s| !s.points.is_empty()) {
        emit_chart(series, title, &path)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------

pub fn ingest(c: &RunConfig) -> CmdResult {
    let v = c.validate(true).map_err(Failure::config)?;
    let spec = c
        .catalog
        .as_deref()
        .ok_or_else(|| Failure::config("no catalog given (--catalog or `catalog` in the config)"))?;
    let token = RunConfig::catalog_token();
    let catalog = CatalogSource::open(spec, token.clone(), c.jobs)?;
    let fetcher = Fetcher {
        client: HttpClient::new(RetryPolicy::default(), c.jobs, Duration::from_secs(300)),
        auth: origin(spec).zip(token),
    };
    let cache = SceneCache::new(&c.cache_dir);

    struct CellIngest {
        fetched: usize,
        files: usize,
        cached: usize,
        gaps: Vec<(Period, String)>,
        error: Option<Failure>,
    }
    let results = for_cells(&v.cells, c.jobs, |cell| {
        let mut r = CellIngest {
            fetched: 0,
            files: 0,
            cached: 0,
            gaps: Vec::new(),
            error: None,
        };
        for &period in &v.periods {
            match cache.ingest(&catalog, &fetcher, cell, period) {
                Ok(IngestOutcome::Cached) => r.cached += 1,
                Ok(IngestOutcome::Fetched { files }) => {
                    r.fetched += 1;
                    r.files += files;
                }
                Ok(IngestOutcome::Gap(g)) => r.gaps.push((period, g.reason)),
                Err(e) => {
                    r.error = Some(Failure::from(e));
                    break;
                }
            }
        }
        r
    });

    let out = out_dir(c)?;
    let mut report = String::from("cell,period,reason\n");
    let (mut fetched, mut files, mut cached, mut gaps) = (0, 0, 0, 0);
    let mut errors = Vec::new();
    for (cell, r) in v.cells.iter().zip(results) {
        fetched += r.fetched;
        files += r.files;
        cached += r.cached;
        gaps += r.gaps.len();
        for (p, reason) in &r.gaps {
            report.push_str(&format!("{cell},{p},{reason}\n"));
        }
        if let Some(e) = r.error {
            errors.push((cell.to_string(), e));
        }
    }
    std::fs::write(out.join("ingest_gaps.csv"), report)
        .map_err(|e| Failure::runtime(format!("gap report: {e}")))?;
    println!("ingest: {fetched} fetched ({files} files), {cached} already cached, {gaps} gaps");
    settle(errors, gaps)
}

// ---------------------------------------------------------------------------

fn backend(c: &RunConfig) -> Result<Box<dyn ModelBackend>, Failure> {
    c.validate_backend().map_err(Failure::config)?;
    let record = |dir: &PathBuf| -> Result<(), Failure> {
        std::fs::create_dir_all(dir)
            .map_err(|e| Failure::runtime(format!("cannot create replay cache {}: {e}", dir.display())))
    };
    Ok(match (c.backend, &c.model.replay_dir) {
        (BackendKind::Stub, None) => Box::new(StubBackend::default()),
        (BackendKind::Stub, Some(dir)) => {
            record(dir)?;
            Box::new(RecordingBackend::new(StubBackend::default(), dir))
        }
        (BackendKind::Replay, Some(dir)) => Box::new(ReplayBackend::new(dir, &c.model.id)),
        (BackendKind::Replay, None) => unreachable!("validate_backend requires replay_dir"),
        (BackendKind::Remote, dir) => {
            let remote = RemoteBackend::from_env(&c.model.endpoint, &c.model.id, c.jobs)?;
            match dir {
                Some(d) => {
                    record(d)?;
                    Box::new(RecordingBackend::new(remote, d))
                }
                None => Box::new(remote),
            }
        }
    })
}

fn references(c: &RunConfig) -> Result<ReferenceSet, Failure> {
    Ok(match &c.refs {
        Some(p) => ReferenceSet::load(p)?,
        None => {
            log::info!("no --refs given; using the synthetic reference set");
            synth::default_reference_set(64)?
        }
    })
}

pub fn score(c: &RunConfig) -> CmdResult {
    let v = c.validate(true).map_err(Failure::config)?;
    let backend = backend(c)?;
    let refs = references(c)?;
    let out = out_dir(c)?;
    let store = SeriesStore::open(out.join("series"))?;
    let source = CacheSceneSource::new(SceneCache::new(&c.cache_dir));
    let opts = SeriesOptions {
        score: ScoreOptions {
            reasks: c.model.reasks,
        },
        max_step: c.clamp_step,
        overwrite: c.overwrite,
        ..Default::default()
    };

    let results = for_cells(&v.cells, c.jobs, |cell| -> Result<(usize, usize, usize), Failure> {
        // --overwrite rescores everything; otherwise stored periods are reused
        let resume = if c.overwrite { None } else { Some(store.load(cell.code())?) };
        let run = score_series(cell, &v.periods, &source, backend.as_ref(), &refs, &opts, resume.as_ref(), Some(&store));
        let series = &run.series;
        if !series.observations.is_empty() {
            store::export_csv(series, &out.join(format!("{cell}_aui.csv")))?;
            chart(c, &[&series.to_metric()], &format!("AUI {cell}"), out.join(format!("{cell}_aui.svg")))?;
        }
        if let Some(e) = run.aborted {
            return Err(e.into());
        }
        Ok((series.observations.len(), run.reused, series.gaps.len()))
    });

    let mut errors = Vec::new();
    let mut gaps = 0;
    for (cell, r) in v.cells.iter().zip(results) {
        match r {
            Ok((n, reused, g)) => {
                gaps += g;
                println!("{cell}: {n} scored ({reused} reused), {g} gaps");
            }
            Err(f) => errors.push((cell.to_string(), f)),
        }
    }
    settle(errors, gaps)
}

// ---------------------------------------------------------------------------

pub fn ndbi(c: &RunConfig) -> CmdResult {
    let v = c.validate(true).map_err(Failure::config)?;
    let out = out_dir(c)?;
    let source = CacheSceneSource::new(SceneCache::new(&c.cache_dir));
    let results = for_cells(&v.cells, c.jobs, |cell| -> Result<(usize, usize), Failure> {
        let series = index_series(cell, &v.periods, &source)?;
        store::export_index_csv(&series, &out.join(format!("{cell}_ndbi.csv")))?;
        chart(c, &[&series.to_metric()], &format!("NDBI {cell}"), out.join(format!("{cell}_ndbi.svg")))?;
        Ok((series.entries.len(), series.gaps.len()))
    });
    let mut errors = Vec::new();
    let mut gaps = 0;
    for (cell, r) in v.cells.iter().zip(results) {
        match r {
            Ok((n, g)) => {
                gaps += g;
                println!("{cell}: {n} NDBI values, {g} flagged");
            }
            Err(f) => errors.push((cell.to_string(), f)),
        }
    }
    settle(errors, gaps)
}

// ---------------------------------------------------------------------------

fn write_comparison(c: &RunConfig, out: &Path, aui: &MetricSeries, ndbi: &MetricSeries) -> Result<(), Failure> {
    let cell = &aui.cell;
    store::export_comparison_csv(aui, ndbi, &out.join(format!("{cell}_compare.csv")))?;
    chart(c, &[aui, ndbi], &format!("AUI vs NDBI {cell}"), out.join(format!("{cell}_compare.svg")))?;
    println!("{cell}: {} AUI, {} NDBI", aui.points.len(), ndbi.points.len());
    Ok(())
}

pub fn compare(c: &RunConfig, use_golden: bool) -> CmdResult {
    let out = out_dir(c)?;
    if use_golden {
        let mut cells: Vec<String> = c.cells.clone();
        if cells.is_empty() {
            cells = golden::all().into_iter().map(|g| g.cell).collect();
            cells.dedup();
        }
        for cell in &cells {
            let get = |m: Metric| {
                golden::metric_series(cell, m)
                    .ok_or_else(|| Failure::config(format!("no transcribed {} series for {cell}", m.name())))
            };
            write_comparison(c, out, &get(Metric::Aui)?, &get(Metric::Ndbi)?)?;
        }
        return Ok(0);
    }

    let v = c.validate(true).map_err(Failure::config)?;
    let store = SeriesStore::open(out.join("series"))?;
    let source = CacheSceneSource::new(SceneCache::new(&c.cache_dir));
    let results = for_cells(&v.cells, c.jobs, |cell| -> Result<usize, Failure> {
        let mut aui = store.load(cell.code())?.to_metric();
        aui.points.retain(|(p, _)| v.periods.contains(p));
        if aui.points.is_empty() {
            return Err(Failure::config(format!("no AUI observations for {cell}; run `aui score` first")));
        }
        let index = index_series(cell, &v.periods, &source)?;
        write_comparison(c, out, &aui, &index.to_metric())?;
        Ok(index.gaps.len())
    });
    let mut errors = Vec::new();
    let mut gaps = 0;
    for (cell, r) in v.cells.iter().zip(results) {
        match r {
            Ok(g) => gaps += g,
            Err(f) => errors.push((cell.to_string(), f)),
        }
    }
    settle(errors, gaps)
}

// ---------------------------------------------------------------------------

pub struct SynthArgs {
    pub dir: PathBuf,
    pub size: usize,
    pub built: (f64, f64),
    pub cloud: Vec<String>,
    pub drop_band: Vec<String>,
}

fn period_pairs(items: &[String], what: &str) -> Result<Vec<(Period, String)>, Failure> {
    items
        .iter()
        .map(|s| {
            let (p, x) = s
                .split_once('=')
                .ok_or_else(|| Failure::config(format!("--{what} {s:?}: expected PERIOD=VALUE")))?;
            let p: Period = p.parse().map_err(|e| Failure::config(format!("--{what} {s:?}: {e}")))?;
            Ok((p, x.to_string()))
        })
        .collect()
}

/// Stable per-cell landscape seed.
fn seed_for(cell: &GeohashCell) -> u64 {
    cell.code()
        .bytes()
        .fold(7u64, |h, b| h.wrapping_mul(31).wrapping_add(u64::from(b)))
}

pub fn synth(c: &RunConfig, a: &SynthArgs) -> CmdResult {
    let v = c.validate(true).map_err(Failure::config)?;
    if a.size == 0 || a.size % 2 != 0 {
        return Err(Failure::config("--size must be a positive even number"));
    }
    let clouds = period_pairs(&a.cloud, "cloud")?;
    let drops = period_pairs(&a.drop_band, "drop-band")?;
    let mut scenes = Vec::new();
    for cell in &v.cells {
        let mut spec = SequenceSpec::ramp(cell.clone(), v.periods[0], v.periods.len(), a.built.0, a.built.1);
        spec.size = a.size;
        spec.landscape_seed = seed_for(cell);
        for (p, frac) in &clouds {
            let f: f64 = frac
                .parse()
                .map_err(|_| Failure::config(format!("--cloud {p}={frac}: not a number")))?;
            if let Some(i) = v.periods.iter().position(|q| q == p) {
                spec.cloud[i] = f;
            }
        }
        synth::write_sequence(&spec, &a.dir, &TiffWriteOptions::default())?;
        let text = std::fs::read_to_string(a.dir.join(MANIFEST_FILE))
            .map_err(|e| Failure::runtime(format!("manifest: {e}")))?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| Failure::runtime(format!("manifest: {e}")))?;
        scenes.extend(m.scenes);
    }
    for (p, band) in &drops {
        let band: Band = band.parse().map_err(|e| Failure::config(format!("--drop-band {p}={band}: {e}")))?;
        for s in scenes.iter_mut().filter(|s| Period::containing(s.acquired_at.date_naive()) == Some(*p)) {
            s.bands.remove(&band);
        }
    }
    let n = scenes.len();
    let manifest = Manifest::new(scenes);
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Failure::runtime(e.to_string()))?;
    std::fs::write(a.dir.join(MANIFEST_FILE), json + "\n").map_err(|e| Failure::runtime(format!("manifest: {e}")))?;
    println!("synth: {n} scenes for {} cells in {}", v.cells.len(), a.dir.display());
    Ok(0)
}

pub fn refs(dir: &Path, size: usize) -> CmdResult {
    if size == 0 || size % 2 != 0 {
        return Err(Failure::config("--size must be a positive even number"));
    }
    let set = synth::default_reference_set(size)?;
    let path = dir.join("refs.json");
    set.save(&path)?;
    println!("refs: {} images -> {}", set.len(), path.display());
    Ok(0)
}
