use crate::catalog::Period;
use crate::raster::Band;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error in {what}: {msg}")]
    Parse { what: String, msg: String },

    #[error("transport error after {attempts} attempt(s) for {context}: {msg}")]
    Transport {
        context: String,
        attempts: u32,
        msg: String,
    },

    #[error("band {0} missing from scene")]
    BandMissing(Band),

    #[error("unsupported TIFF feature: {tag}")]
    UnsupportedFormat { tag: String },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("mean is undefined: no valid pixels")]
    UndefinedMean,

    #[error("cloud fraction is undefined: no valid pixels")]
    UndefinedFraction,

    #[error("no scene for cell {cell} in period {period}")]
    NoScene { cell: String, period: Period },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("model backend error: {0}")]
    Backend(String),

    #[error("unparseable model response after {attempts} attempt(s): {raw:?}")]
    Scoring { raw: String, attempts: u32 },

    #[error("observation for {cell} {period} already stored with a different payload")]
    Conflict { cell: String, period: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(what: impl Into<String>, msg: impl std::fmt::Display) -> Self {
        Error::Parse {
            what: what.into(),
            msg: msg.to_string(),
        }
    }
}
