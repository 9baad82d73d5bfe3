//! `aui`: ingest Sentinel-2 scenes per geohash cell, score them, and emit
//! AUI and NDBI series.
//!
//! Exit codes: 0 success, 1 finished with gaps, 2 configuration or input
//! error, 3 backend, catalog or other runtime failure.

mod cache;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use config::{BackendKind, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "aui", version, about = "Urban development index for Sentinel-2 geohash cells")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

/// Flags override the config file field by field.
#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Comma-separated geohash cells.
    #[arg(long, global = true, value_delimiter = ',')]
    cells: Option<Vec<String>>,
    /// First day of the date range (YYYY-MM-DD).
    #[arg(long, global = true)]
    from: Option<NaiveDate>,
    /// Last day of the date range (YYYY-MM-DD).
    #[arg(long, global = true)]
    to: Option<NaiveDate>,
    /// Local manifest (file or directory) or STAC search URL.
    #[arg(long, global = true)]
    catalog: Option<String>,
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendKind>,
    /// Reference set index (see `aui refs`).
    #[arg(long, global = true)]
    refs: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    /// Cells processed concurrently; also caps in-flight requests.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Limit the AUI change between consecutive observations.
    #[arg(long, global = true)]
    clamp_step: Option<f64>,
    /// Model identifier for the remote and replay backends.
    #[arg(long, global = true)]
    model: Option<String>,
    /// Chat-completions API base URL.
    #[arg(long, global = true)]
    endpoint: Option<String>,
    /// Replay cache: read by `--backend replay`, written by the others.
    #[arg(long, global = true)]
    replay_dir: Option<PathBuf>,
    /// Replace stored observations that disagree with a new score.
    #[arg(long, global = true)]
    overwrite: bool,
    /// Skip SVG charts.
    #[arg(long, global = true)]
    no_svg: bool,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fetch the representative scene of every (cell, period) into the cache.
    Ingest,
    /// Score cached scenes and write per-cell series.
    Score,
    /// NDBI series from cached scenes.
    Ndbi,
    /// Side-by-side AUI and NDBI table and chart.
    Compare {
        /// Use the shipped hand-transcribed series instead of local results.
        #[arg(long)]
        golden: bool,
    },
    /// Write a synthetic corpus (band TIFFs plus manifest) for the cells and range.
    Synth {
        #[arg(long)]
        dir: PathBuf,
        /// Pixels per side.
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 0.1)]
        built_from: f64,
        #[arg(long, default_value_t = 0.9)]
        built_to: f64,
        /// PERIOD=FRACTION cloud injections, e.g. 2017-07=0.4.
        #[arg(long, value_delimiter = ',')]
        cloud: Vec<String>,
        /// Leave this band out of the given periods' scenes, e.g. 2018-01=B11.
        #[arg(long, value_delimiter = ',')]
        drop_band: Vec<String>,
    },
    /// Write the default synthetic reference set.
    Refs {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = 64)]
        size: usize,
    },
    /// Print the effective configuration as TOML.
    Config,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub msg: String,
}

impl Failure {
    pub fn config(msg: impl Into<String>) -> Self {
        Self { code: 2, msg: msg.into() }
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        Self { code: 3, msg: msg.into() }
    }
}

impl From<aui_core::Error> for Failure {
    fn from(e: aui_core::Error) -> Self {
        use aui_core::Error as E;
        let code = match e {
            E::Config(_) | E::InvalidInput(_) => 2,
            _ => 3,
        };
        Self { code, msg: e.to_string() }
    }
}

fn merge(global: &GlobalArgs) -> Result<RunConfig, Failure> {
    let mut c = match &global.config {
        Some(p) => RunConfig::load(p).map_err(Failure::config)?,
        None => RunConfig::default(),
    };
    let g = global;
    if let Some(v) = &g.cells {
        c.cells = v.iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
    }
    if g.from.is_some() {
        c.from = g.from;
    }
    if g.to.is_some() {
        c.to = g.to;
    }
    if let Some(v) = &g.catalog {
        c.catalog = Some(v.clone());
    }
    if let Some(v) = g.backend {
        c.backend = v;
    }
    if let Some(v) = &g.refs {
        c.refs = Some(v.clone());
    }
    if let Some(v) = &g.out {
        c.out_dir = v.clone();
    }
    if let Some(v) = &g.cache {
        c.cache_dir = v.clone();
    }
    if let Some(v) = g.jobs {
        c.jobs = v;
    }
    if g.clamp_step.is_some() {
        c.clamp_step = g.clamp_step;
    }
    if let Some(v) = &g.model {
        c.model.id = v.clone();
    }
    if let Some(v) = &g.endpoint {
        c.model.endpoint = v.clone();
    }
    if let Some(v) = &g.replay_dir {
        c.model.replay_dir = Some(v.clone());
    }
    if g.overwrite {
        c.overwrite = true;
    }
    if g.no_svg {
        c.svg = false;
    }
    Ok(c)
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let config = merge(&cli.global)?;
    match cli.command {
        Command::Ingest => commands::ingest(&config),
        Command::Score => commands::score(&config),
        Command::Ndbi => commands::ndbi(&config),
        Command::Compare { golden } => commands::compare(&config, golden),
        Command::Synth {
            dir,
            size,
            built_from,
            built_to,
            cloud,
            drop_band,
        } => commands::synth(
            &config,
            &commands::SynthArgs {
                dir,
                size,
                built: (built_from, built_to),
                cloud,
                drop_band,
            },
        ),
        Command::Refs { dir, size } => commands::refs(&dir, size),
        Command::Config => {
            print!("{}", config.to_toml());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("aui: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
