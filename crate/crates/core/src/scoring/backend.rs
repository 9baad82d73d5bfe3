use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::prompt::{PromptPart, PromptPayload};
use crate::error::{Error, Result};
use crate::http::{HttpClient, RetryPolicy};
use crate::raster::write_atomic;

/// Anything that turns a prompt into raw response text.
pub trait ModelBackend: Send + Sync {
    fn model_id(&self) -> &str;

    fn complete(&self, payload: &PromptPayload) -> Result<String>;
}

impl<B: ModelBackend + ?Sized> ModelBackend for Box<B> {
    fn model_id(&self) -> &str {
        (**self).model_id()
    }

    fn complete(&self, payload: &PromptPayload) -> Result<String> {
        (**self).complete(payload)
    }
}

impl<B: ModelBackend + ?Sized> ModelBackend for std::sync::Arc<B> {
    fn model_id(&self) -> &str {
        (**self).model_id()
    }

    fn complete(&self, payload: &PromptPayload) -> Result<String> {
        (**self).complete(payload)
    }
}

pub const API_KEY_ENV: &str = "AUI_MODEL_API_KEY";

/// OpenAI-compatible chat-completions endpoint with image inputs.
#[derive(Debug, Clone)]
pub struct RemoteBackend {
    endpoint: String,
    model: String,
    api_key: Option<String>,
    client: HttpClient,
    pub max_tokens: u32,
}

impl RemoteBackend {
    /// `endpoint` is the API base, e.g. `https://api.openai.com/v1`.
    pub fn new(endpoint: &str, model: &str, api_key: Option<String>, client: HttpClient) -> Self {
        Self {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            model: model.to_string(),
            api_key,
            client,
            max_tokens: 300,
        }
    }

    pub fn from_env(endpoint: &str, model: &str, max_in_flight: usize) -> Result<Self> {
        let key = std::env::var(API_KEY_ENV)
            .map_err(|_| Error::Config(format!("{API_KEY_ENV} is not set")))?;
        let client = HttpClient::new(RetryPolicy::default(), max_in_flight, Duration::from_secs(120));
        Ok(Self::new(endpoint, model, Some(key), client))
    }

    pub fn request_body(&self, payload: &PromptPayload) -> Value {
        let mut messages = Vec::new();
        let mut user = Vec::new();
        for part in &payload.parts {
            match part {
                PromptPart::Instruction { text } => {
                    messages.push(json!({"role": "system", "content": text}));
                }
                _ => {
                    user.push(json!({"type": "text", "text": part.caption()}));
                    if let Some(img) = part.image() {
                        user.push(json!({"type": "image_url", "image_url": {"url": img.data_uri()}}));
                    }
                }
            }
        }
        messages.push(json!({"role": "user", "content": user}));
        json!({
            "model": self.model,
            "temperature": 0,
            "max_tokens": self.max_tokens,
            "messages": messages,
        })
    }
}

impl ModelBackend for RemoteBackend {
    fn model_id(&self) -> &str {
        &self.model
    }

    fn complete(&self, payload: &PromptPayload) -> Result<String> {
        let url = format!("{}/chat/completions", self.endpoint);
        let text = self
            .client
            .post_json(&url, &self.request_body(payload), self.api_key.as_deref())
            .map_err(|e| Error::Backend(e.to_string()))?;
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| Error::Backend(format!("chat completion is not JSON: {e}")))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| Error::Backend("chat completion has no choices[0].message.content".into()))
    }
}

pub const REPLAY_SCHEMA_VERSION: u32 = 1;

/// One cached reply, stored as `<digest>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub schema_version: u32,
    pub model_id: String,
    pub response: String,
}

/// Answers from a directory of recorded replies keyed by payload digest.
/// A miss is a backend error, never a silent fallback.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    dir: PathBuf,
    model_id: String,
}

impl ReplayBackend {
    pub fn new(dir: impl Into<PathBuf>, model_id: impl Into<String>) -> Self {
        Self {
            dir: dir.into(),
            model_id: model_id.into(),
        }
    }

    pub fn entry_path(dir: &Path, digest: &str) -> PathBuf {
        dir.join(format!("{digest}.json"))
    }

    pub fn lookup(&self, digest: &str) -> Result<Option<ReplayEntry>> {
        let path = Self::entry_path(&self.dir, digest);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let entry: ReplayEntry =
            serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))?;
        if entry.schema_version != REPLAY_SCHEMA_VERSION {
            return Err(Error::Backend(format!(
                "replay entry {} has schema_version {}",
                path.display(),
                entry.schema_version
            )));
        }
        Ok(Some(entry))
    }
}

impl ModelBackend for ReplayBackend {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn complete(&self, payload: &PromptPayload) -> Result<String> {
        let digest = payload.digest();
        match self.lookup(&digest)? {
            Some(e) => Ok(e.response),
            None => Err(Error::Backend(format!(
                "replay cache {} has no entry for prompt {digest}",
                self.dir.display()
            ))),
        }
    }
}

/// Passes through to `inner` and writes every reply into a replay cache.
#[derive(Debug, Clone)]
pub struct RecordingBackend<B> {
    inner: B,
    dir: PathBuf,
}

impl<B: ModelBackend> RecordingBackend<B> {
    pub fn new(inner: B, dir: impl Into<PathBuf>) -> Self {
        Self {
            inner,
            dir: dir.into(),
        }
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }
}

impl<B: ModelBackend> ModelBackend for RecordingBackend<B> {
    fn model_id(&self) -> &str {
        self.inner.model_id()
    }

    fn complete(&self, payload: &PromptPayload) -> Result<String> {
        let response = self.inner.complete(payload)?;
        let entry = ReplayEntry {
            schema_version: REPLAY_SCHEMA_VERSION,
            model_id: self.inner.model_id().to_string(),
            response: response.clone(),
        };
        std::fs::create_dir_all(&self.dir)?;
        let path = ReplayBackend::entry_path(&self.dir, &payload.digest());
        write_atomic(&path, (serde_json::to_string_pretty(&entry)? + "\n").as_bytes())?;
        Ok(response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::prompt::PROMPT_VERSION;

    struct Fixed(&'static str);

    impl ModelBackend for Fixed {
        fn model_id(&self) -> &str {
            "fixed"
        }
        fn complete(&self, _: &PromptPayload) -> Result<String> {
            Ok(self.0.to_string())
        }
    }

    fn payload(cell: &str) -> PromptPayload {
        PromptPayload {
            version: PROMPT_VERSION,
            cell: cell.into(),
            parts: vec![PromptPart::Instruction { text: "x".into() }],
        }
    }

    #[test]
    fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let rec = RecordingBackend::new(Fixed(r#"{"aui": 3.0}"#), dir.path());
        let p = payload("tdr70");
        assert_eq!(rec.complete(&p).unwrap(), r#"{"aui": 3.0}"#);
        let replay = ReplayBackend::new(dir.path(), "fixed");
        assert_eq!(replay.complete(&p).unwrap(), r#"{"aui": 3.0}"#);
        assert!(matches!(replay.complete(&payload("tdr0t")), Err(Error::Backend(_))));
    }

    #[test]
    fn request_body_shape() {
        let client = HttpClient::new(RetryPolicy::default(), 1, Duration::from_secs(1));
        let b = RemoteBackend::new("http://x/v1/", "m", None, client);
        let body = b.request_body(&payload("c"));
        assert_eq!(body["model"], "m");
        assert_eq!(body["temperature"], 0);
        assert_eq!(body["messages"][0]["role"], "system");
        assert_eq!(body["messages"][1]["role"], "user");
    }
}
