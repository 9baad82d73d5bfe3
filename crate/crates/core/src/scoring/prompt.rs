use base64::Engine as _;
use serde::{Serialize, Serializer};
use sha2::{Digest, Sha256};

use super::reference::{AuiRange, ReferenceSet};
use crate::catalog::Period;
use crate::error::{Error, Result};

pub const MEDIA_TYPE_JPEG: &str = "image/jpeg";

/// Bumped whenever the instruction wording or part layout changes, so cached
/// replies keyed by the old payloads stop matching.
pub const PROMPT_VERSION: u32 = 1;

pub const INSTRUCTION: &str = "\
You are rating how urbanized a small patch of land is, using a true-colour \
Sentinel-2 image of one ~5 km geohash cell.

Use the Aggregated Urban Index (AUI), a number from 0 to 10:
0 means no built structures at all (forest, water, untouched land); 10 means \
the cell is completely covered by dense buildings and paved surfaces. Judge \
the share of the cell that is built up and how densely, not the colour of \
the image.

The reference images below show cells whose AUI is known; use them as the \
scale. If an image of the same cell from the previous period is given, keep \
your rating consistent with it: land rarely changes much in six months, and \
clouds, haze or seasonal vegetation are not a change in urbanization.

Reply with one JSON object and nothing else:
{\"aui\": <number between 0 and 10 with one decimal>, \"rationale\": \"<one short sentence>\"}";

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedImage {
    pub media_type: &'static str,
    pub bytes: Vec<u8>,
}

impl EncodedImage {
    pub fn jpeg(bytes: Vec<u8>) -> Self {
        Self {
            media_type: MEDIA_TYPE_JPEG,
            bytes,
        }
    }

    pub fn base64(&self) -> String {
        base64::engine::general_purpose::STANDARD.encode(&self.bytes)
    }

    pub fn data_uri(&self) -> String {
        format!("data:{};base64,{}", self.media_type, self.base64())
    }
}

impl Serialize for EncodedImage {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.data_uri())
    }
}

/// One ordered piece of the prompt.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PromptPart {
    Instruction {
        text: String,
    },
    Reference {
        label: String,
        aui_range: AuiRange,
        caption: String,
        image: EncodedImage,
    },
    Previous {
        period: Period,
        aui: f64,
        caption: String,
        image: EncodedImage,
    },
    Current {
        period: Period,
        caption: String,
        image: EncodedImage,
    },
}

impl PromptPart {
    pub fn caption(&self) -> &str {
        match self {
            PromptPart::Instruction { text } => text,
            PromptPart::Reference { caption, .. }
            | PromptPart::Previous { caption, .. }
            | PromptPart::Current { caption, .. } => caption,
        }
    }

    pub fn image(&self) -> Option<&EncodedImage> {
        match self {
            PromptPart::Instruction { .. } => None,
            PromptPart::Reference { image, .. }
            | PromptPart::Previous { image, .. }
            | PromptPart::Current { image, .. } => Some(image),
        }
    }
}

/// Exactly what the model sees, in order. Identical requests give
/// identical payloads and digests.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PromptPayload {
    pub version: u32,
    pub cell: String,
    pub parts: Vec<PromptPart>,
}

impl PromptPayload {
    pub fn canonical_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("payload serializes")
    }

    /// Lowercase hex SHA-256 of the canonical serialization.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_bytes()))
    }

    pub fn current(&self) -> Option<(Period, &EncodedImage)> {
        self.parts.iter().find_map(|p| match p {
            PromptPart::Current { period, image, .. } => Some((*period, image)),
            _ => None,
        })
    }

    pub fn previous(&self) -> Option<(Period, f64, &EncodedImage)> {
        self.parts.iter().find_map(|p| match p {
            PromptPart::Previous {
                period, aui, image, ..
            } => Some((*period, *aui, image)),
            _ => None,
        })
    }

    pub fn references(&self) -> impl Iterator<Item = (&AuiRange, &EncodedImage)> {
        self.parts.iter().filter_map(|p| match p {
            PromptPart::Reference {
                aui_range, image, ..
            } => Some((aui_range, image)),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreviousObservation {
    pub period: Period,
    pub aui: f64,
    pub jpeg: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct ScoringRequest<'a> {
    pub cell: String,
    pub period: Period,
    /// JPEG of the current composite.
    pub current: Vec<u8>,
    pub previous: Option<PreviousObservation>,
    pub references: &'a ReferenceSet,
}

pub fn assemble_prompt(req: &ScoringRequest<'_>) -> Result<PromptPayload> {
    if req.references.is_empty() {
        return Err(Error::Config("reference set is empty".into()));
    }
    if req.current.is_empty() {
        return Err(Error::InvalidInput("current image is empty".into()));
    }
    let mut parts = Vec::with_capacity(req.references.len() + 3);
    parts.push(PromptPart::Instruction {
        text: INSTRUCTION.to_string(),
    });
    for r in req.references.entries() {
        parts.push(PromptPart::Reference {
            label: r.label.clone(),
            aui_range: r.aui_range,
            caption: format!("Reference: {} (AUI {})", r.label, r.aui_range),
            image: EncodedImage::jpeg(r.jpeg.clone()),
        });
    }
    if let Some(p) = &req.previous {
        if p.period >= req.period {
            return Err(Error::InvalidInput(format!(
                "previous period {} is not before {}",
                p.period, req.period
            )));
        }
        parts.push(PromptPart::Previous {
            period: p.period,
            aui: p.aui,
            caption: format!("Same cell, {}: previous period AUI = {:.1}", p.period, p.aui),
            image: EncodedImage::jpeg(p.jpeg.clone()),
        });
    }
    parts.push(PromptPart::Current {
        period: req.period,
        caption: format!("Cell {} in {}: rate this image", req.cell, req.period),
        image: EncodedImage::jpeg(req.current.clone()),
    });
    Ok(PromptPayload {
        version: PROMPT_VERSION,
        cell: req.cell.clone(),
        parts,
    })
}
