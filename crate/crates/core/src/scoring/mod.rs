//! Calibrated AUI scoring: prompt assembly, model backends, response
//! parsing, and the per-cell series loop that threads each score into the
//! next request.

mod backend;
mod prompt;
mod reference;
mod stub;

pub use backend::{
    ModelBackend, RecordingBackend, RemoteBackend, ReplayBackend, ReplayEntry, API_KEY_ENV,
    REPLAY_SCHEMA_VERSION,
};
pub use prompt::{
    assemble_prompt, EncodedImage, PreviousObservation, PromptPart, PromptPayload, ScoringRequest,
    INSTRUCTION, MEDIA_TYPE_JPEG, PROMPT_VERSION,
};
pub use reference::{AuiRange, ReferenceEntry, ReferenceFile, ReferenceFileEntry, ReferenceSet, DEFAULT_BINS};
pub use stub::{classify_pixel, PixelClass, StubBackend, STUB_MODEL_ID};

use chrono::Utc;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::catalog::Period;
use crate::error::{Error, Result};
use crate::geogrid::GeohashCell;
use crate::indices;
use crate::pipeline::{Gap, SceneSource};
use crate::raster::{compose_rgb, encode_jpeg, Band, StretchSpec};
use crate::store::{AuiObservation, AuiSeries, SeriesStore};

pub const AUI_MIN: f64 = 0.0;
pub const AUI_MAX: f64 = 10.0;
pub const DEFAULT_REASKS: u32 = 2;

/// Half away from zero, to one decimal.
pub fn round_tenth(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedResponse {
    pub aui: f64,
    pub rationale: Option<String>,
}

/// Take the first well-formed JSON object in `raw` and read its numeric
/// `aui` and optional string `rationale`. Prose and code fences around the
/// object are tolerated.
pub fn parse_response(raw: &str) -> Result<ParsedResponse> {
    let object = raw.char_indices().filter(|&(_, c)| c == '{').find_map(|(i, _)| {
        let mut it = serde_json::Deserializer::from_str(&raw[i..]).into_iter::<Value>();
        match it.next() {
            Some(Ok(Value::Object(map))) => Some(map),
            _ => None,
        }
    });
    let map = object.ok_or_else(|| Error::parse("model response", "no JSON object found"))?;
    let aui = match map.get("aui") {
        Some(Value::Number(n)) => n.as_f64().unwrap_or(f64::NAN),
        Some(other) => {
            return Err(Error::parse("model response", format!("\"aui\" is not a number: {other}")))
        }
        None => return Err(Error::parse("model response", "object has no \"aui\" field")),
    };
    if !aui.is_finite() {
        return Err(Error::parse("model response", "\"aui\" is not finite"));
    }
    let rationale = match map.get("rationale") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(other) => Some(other.to_string()),
    };
    Ok(ParsedResponse { aui, rationale })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuiScore {
    /// Clamped to [0, 10] and rounded to one decimal.
    pub value: f64,
    /// As returned by the model.
    pub raw_value: f64,
    pub rationale: Option<String>,
    pub model_id: String,
    pub prompt_digest: String,
    pub raw_response_digest: String,
    pub attempts: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreOptions {
    /// Extra asks after an unparseable reply, with the identical payload.
    pub reasks: u32,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        Self {
            reasks: DEFAULT_REASKS,
        }
    }
}

/// Normalize a parsed value: clamp into [0, 10] (logging an anomaly when
/// that changes it) and round to one decimal.
pub fn normalize_value(raw: f64, context: &str) -> f64 {
    if !(AUI_MIN..=AUI_MAX).contains(&raw) {
        log::warn!("{context}: model returned AUI {raw} outside [0, 10]; clamped");
    }
    round_tenth(raw.clamp(AUI_MIN, AUI_MAX))
}

pub fn score_payload(
    payload: &PromptPayload,
    backend: &dyn ModelBackend,
    opts: ScoreOptions,
) -> Result<AuiScore> {
    let prompt_digest = payload.digest();
    let attempts = opts.reasks + 1;
    let mut last_raw = String::new();
    for attempt in 1..=attempts {
        let raw = backend.complete(payload)?;
        match parse_response(&raw) {
            Ok(parsed) => {
                let context = format!("{} {}", payload.cell, prompt_digest.get(..12).unwrap_or(""));
                return Ok(AuiScore {
                    value: normalize_value(parsed.aui, &context),
                    raw_value: parsed.aui,
                    rationale: parsed.rationale,
                    model_id: backend.model_id().to_string(),
                    raw_response_digest: hex::encode(Sha256::digest(raw.as_bytes())),
                    prompt_digest,
                    attempts: attempt,
                });
            }
            Err(e) => {
                log::warn!("{}: attempt {attempt} unparseable: {e}", payload.cell);
                last_raw = raw;
            }
        }
    }
    Err(Error::Scoring {
        raw: last_raw,
        attempts,
    })
}

pub fn score(req: &ScoringRequest<'_>, backend: &dyn ModelBackend, opts: ScoreOptions) -> Result<AuiScore> {
    score_payload(&assemble_prompt(req)?, backend, opts)
}

#[derive(Debug, Clone)]
pub struct SeriesOptions {
    pub stretch: StretchSpec,
    pub score: ScoreOptions,
    /// Limit |AUI(t) - AUI(previous)| after scoring. Off by default.
    pub max_step: Option<f64>,
    /// Also compute the scene's NDBI for each observation.
    pub with_ndbi: bool,
    /// Replace stored observations that differ instead of failing.
    pub overwrite: bool,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self {
            stretch: StretchSpec::default(),
            score: ScoreOptions::default(),
            max_step: None,
            with_ndbi: true,
            overwrite: false,
        }
    }
}

/// What was sent for one period.
#[derive(Debug, Clone, PartialEq)]
pub struct RequestTrace {
    pub period: Period,
    pub prompt_digest: String,
    pub previous: Option<(Period, f64)>,
    pub raw_value: f64,
    pub value: f64,
}

#[derive(Debug)]
pub struct SeriesRun {
    pub series: AuiSeries,
    pub trace: Vec<RequestTrace>,
    /// Observations taken from the resume series without calling the model.
    pub reused: usize,
    /// Set when a backend or catalog failure stopped the run; everything
    /// before it is in `series` (and in the store, if one was given).
    pub aborted: Option<Error>,
}

/// Score `periods` for one cell in chronological order. Each request carries
/// the most recent non-gap observation as its temporal anchor; the first
/// period goes with references only.
#[allow(clippy::too_many_arguments)]
pub fn score_series(
    cell: &GeohashCell,
    periods: &[Period],
    source: &dyn SceneSource,
    backend: &dyn ModelBackend,
    references: &ReferenceSet,
    opts: &SeriesOptions,
    resume: Option<&AuiSeries>,
    store: Option<&SeriesStore>,
) -> SeriesRun {
    let mut periods = periods.to_vec();
    periods.sort();
    periods.dedup();
    let mut run = SeriesRun {
        series: AuiSeries::new(cell.code()),
        trace: Vec::new(),
        reused: 0,
        aborted: None,
    };
    let mut previous: Option<PreviousObservation> = None;
    for period in periods {
        match score_period(cell, period, source, backend, references, opts, resume, store, &previous, &mut run) {
            Ok(Some(prev)) => previous = Some(prev),
            Ok(None) => {}
            Err(e) => {
                log::error!("{cell} {period}: {e}");
                run.aborted = Some(e);
                break;
            }
        }
    }
    run
}

#[allow(clippy::too_many_arguments)]
fn score_period(
    cell: &GeohashCell,
    period: Period,
    source: &dyn SceneSource,
    backend: &dyn ModelBackend,
    references: &ReferenceSet,
    opts: &SeriesOptions,
    resume: Option<&AuiSeries>,
    store: Option<&SeriesStore>,
    previous: &Option<PreviousObservation>,
    run: &mut SeriesRun,
) -> Result<Option<PreviousObservation>> {
    let gap = |run: &mut SeriesRun, gap: Gap| -> Result<Option<PreviousObservation>> {
        log::info!("{cell} {period}: gap: {}", gap.reason);
        if let Some(s) = store {
            s.record_gap(cell.code(), &gap)?;
        }
        run.series.add_gap(gap);
        Ok(None)
    };

    let Some(record) = source.representative(cell, period)? else {
        return gap(run, Gap::no_scene(period));
    };
    let scene = match source.load(&record, &Band::VISIBLE) {
        Ok(s) => s,
        Err(e @ (Error::BandMissing(_) | Error::Geometry(_))) => {
            return gap(
                run,
                Gap {
                    period,
                    reason: e.to_string(),
                    scene_id: Some(record.scene_id.clone()),
                },
            )
        }
        Err(e) => return Err(e),
    };
    let jpeg = encode_jpeg(&compose_rgb(&scene, &opts.stretch)?)?;

    if let Some(existing) = resume.and_then(|r| r.get(period)) {
        run.series.insert(existing.clone())?;
        run.reused += 1;
        return Ok(Some(PreviousObservation {
            period,
            aui: existing.aui,
            jpeg,
        }));
    }

    let ndbi_mean = if opts.with_ndbi {
        match source
            .load(&record, &[Band::B8, Band::B11])
            .and_then(|s| indices::ndbi(&s))
        {
            Ok(r) => Some(r.scene_mean),
            Err(e) => {
                log::warn!("{cell} {period}: NDBI unavailable: {e}");
                None
            }
        }
    } else {
        None
    };

    let req = ScoringRequest {
        cell: cell.code().to_string(),
        period,
        current: jpeg.clone(),
        previous: previous.clone(),
        references,
    };
    let scored = score(&req, backend, opts.score)?;
    let mut value = scored.value;
    if let (Some(step), Some(prev)) = (opts.max_step, previous) {
        let limited = round_tenth(value.clamp(prev.aui - step, prev.aui + step));
        if limited != value {
            log::info!("{cell} {period}: step limited {value} -> {limited}");
        }
        value = limited.clamp(AUI_MIN, AUI_MAX);
    }
    run.trace.push(RequestTrace {
        period,
        prompt_digest: scored.prompt_digest.clone(),
        previous: previous.as_ref().map(|p| (p.period, p.aui)),
        raw_value: scored.raw_value,
        value,
    });
    let obs = AuiObservation {
        cell: cell.code().to_string(),
        period,
        aui: value,
        ndbi_mean,
        scene_id: Some(record.scene_id.clone()),
        cloud_cover_pct: Some(record.cloud_cover_pct),
        model_id: scored.model_id,
        prompt_digest: Some(scored.prompt_digest),
        raw_response_digest: Some(scored.raw_response_digest),
        rationale: scored.rationale,
        created_at: Some(Utc::now()),
    };
    if let Some(s) = store {
        s.append(&obs, opts.overwrite)?;
    }
    run.series.insert(obs)?;
    Ok(Some(PreviousObservation {
        period,
        aui: value,
        jpeg,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    #[test]
    fn parses_plain_and_wrapped_json() {
        let p = parse_response(r#"{"aui": 7.2, "rationale": "dense"}"#).unwrap();
        assert_eq!(p.aui, 7.2);
        assert_eq!(p.rationale.as_deref(), Some("dense"));
        let p = parse_response("Sure.\n```json\n{\"aui\": 3}\n```").unwrap();
        assert_eq!((p.aui, p.rationale), (3.0, None));
        let p = parse_response("{oops} then {\"aui\": 4.5, \"rationale\": null}").unwrap();
        assert_eq!(p.aui, 4.5);
    }

    #[test]
    fn contract_violations() {
        for raw in ["", "seven", r#"{"score": 7}"#, r#"{"aui": "7.2"}"#, r#"{"aui": 7.2"#, "[1,2]"] {
            assert!(parse_response(raw).is_err(), "{raw:?}");
        }
    }

    #[test]
    fn first_object_wins_even_if_it_lacks_aui() {
        assert!(parse_response(r#"{"note": 1} {"aui": 2}"#).is_err());
    }

    #[test]
    fn rounding_and_clamping() {
        assert_eq!(round_tenth(7.25), 7.3);
        assert_eq!(round_tenth(7.249), 7.2);
        assert_eq!(normalize_value(11.3, "t"), 10.0);
        assert_eq!(normalize_value(-0.4, "t"), 0.0);
        assert_eq!(normalize_value(3.14159, "t"), 3.1);
    }

    struct Scripted {
        replies: Vec<&'static str>,
        calls: AtomicU32,
    }

    impl ModelBackend for Scripted {
        fn model_id(&self) -> &str {
            "scripted"
        }
        fn complete(&self, _: &PromptPayload) -> Result<String> {
            let i = self.calls.fetch_add(1, Ordering::SeqCst) as usize;
            Ok(self.replies[i.min(self.replies.len() - 1)].to_string())
        }
    }

    fn payload() -> PromptPayload {
        PromptPayload {
            version: PROMPT_VERSION,
            cell: "tdr70".into(),
            parts: vec![PromptPart::Instruction { text: "x".into() }],
        }
    }

    #[test]
    fn reasks_then_succeeds() {
        let b = Scripted {
            replies: vec!["nope", "still no", r#"{"aui": 6.66}"#],
            calls: AtomicU32::new(0),
        };
        let s = score_payload(&payload(), &b, ScoreOptions { reasks: 2 }).unwrap();
        assert_eq!(s.value, 6.7);
        assert_eq!(s.attempts, 3);
    }

    #[test]
    fn gives_up_after_configured_reasks() {
        let b = Scripted {
            replies: vec!["nope"],
            calls: AtomicU32::new(0),
        };
        let err = score_payload(&payload(), &b, ScoreOptions { reasks: 2 }).unwrap_err();
        assert!(matches!(err, Error::Scoring { attempts: 3, .. }));
        assert_eq!(b.calls.load(Ordering::SeqCst), 3);
    }
}
