//! Blocking HTTP with bounded retries and an in-flight request cap.

use std::io::Read;
use std::path::Path;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde_json::Value;

use crate::error::{Error, Result};

const MAX_BODY_BYTES: u64 = 256 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    /// Additional attempts after the first one.
    pub retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            retries: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn attempts(&self) -> u32 {
        self.retries + 1
    }

    fn delay(&self, attempt: u32) -> Duration {
        self.base_delay.saturating_mul(1 << attempt.min(16))
    }
}

/// Counting semaphore capping concurrent requests across clones.
#[derive(Debug, Clone)]
pub struct ConcurrencyLimit {
    inner: Arc<(Mutex<usize>, Condvar)>,
    max: usize,
}

pub struct Permit<'a>(&'a ConcurrencyLimit);

impl ConcurrencyLimit {
    pub fn new(max: usize) -> Self {
        Self {
            inner: Arc::new((Mutex::new(0), Condvar::new())),
            max: max.max(1),
        }
    }

    pub fn max(&self) -> usize {
        self.max
    }

    pub fn acquire(&self) -> Permit<'_> {
        let (lock, cv) = &*self.inner;
        let mut n = lock.lock().unwrap();
        while *n >= self.max {
            n = cv.wait(n).unwrap();
        }
        *n += 1;
        Permit(self)
    }

    pub fn in_flight(&self) -> usize {
        *self.inner.0.lock().unwrap()
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let (lock, cv) = &*self.0.inner;
        *lock.lock().unwrap() -= 1;
        cv.notify_one();
    }
}

#[derive(Clone)]
pub struct HttpClient {
    agent: ureq::Agent,
    pub retry: RetryPolicy,
    pub limit: ConcurrencyLimit,
}

impl std::fmt::Debug for HttpClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpClient")
            .field("retry", &self.retry)
            .field("limit", &self.limit.max())
            .finish()
    }
}

enum Attempt<T> {
    Done(T),
    Retry(String),
    Fail(String),
}

impl HttpClient {
    pub fn new(retry: RetryPolicy, max_in_flight: usize, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            retry,
            limit: ConcurrencyLimit::new(max_in_flight),
        }
    }

    fn run<T>(&self, context: &str, mut once: impl FnMut() -> Attempt<T>) -> Result<T> {
        let attempts = self.retry.attempts();
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(self.retry.delay(attempt - 1));
            }
            let outcome = {
                let _permit = self.limit.acquire();
                once()
            };
            match outcome {
                Attempt::Done(v) => return Ok(v),
                Attempt::Fail(msg) => {
                    return Err(Error::Transport {
                        context: context.to_string(),
                        attempts: attempt + 1,
                        msg,
                    })
                }
                Attempt::Retry(msg) => {
                    log::warn!("{context}: attempt {} failed: {msg}", attempt + 1);
                    last = msg;
                }
            }
        }
        Err(Error::Transport {
            context: context.to_string(),
            attempts,
            msg: last,
        })
    }

    fn classify(
        result: std::result::Result<ureq::http::Response<ureq::Body>, ureq::Error>,
    ) -> Attempt<ureq::http::Response<ureq::Body>> {
        match result {
            Err(e) => Attempt::Retry(e.to_string()),
            Ok(resp) => {
                let status = resp.status().as_u16();
                match status {
                    200..=299 => Attempt::Done(resp),
                    401 | 403 => Attempt::Fail(format!("authentication failed (HTTP {status})")),
                    408 | 429 | 500..=599 => Attempt::Retry(format!("HTTP {status}")),
                    _ => Attempt::Fail(format!("HTTP {status}")),
                }
            }
        }
    }

    fn body_text(resp: &mut ureq::http::Response<ureq::Body>) -> std::result::Result<String, String> {
        resp.body_mut()
            .with_config()
            .limit(MAX_BODY_BYTES)
            .read_to_string()
            .map_err(|e| e.to_string())
    }

    pub fn get_json(&self, url: &str, bearer: Option<&str>) -> Result<Value> {
        let text = self.run(url, || {
            let mut req = self.agent.get(url).header("Accept", "application/json");
            if let Some(t) = bearer {
                req = req.header("Authorization", &format!("Bearer {t}"));
            }
            match Self::classify(req.call()) {
                Attempt::Done(mut resp) => match Self::body_text(&mut resp) {
                    Ok(t) => Attempt::Done(t),
                    Err(e) => Attempt::Retry(e),
                },
                Attempt::Retry(m) => Attempt::Retry(m),
                Attempt::Fail(m) => Attempt::Fail(m),
            }
        })?;
        serde_json::from_str(&text).map_err(|e| Error::parse(format!("JSON from {url}"), e))
    }

    /// POST a JSON body and return the raw response text.
    pub fn post_json(&self, url: &str, body: &Value, bearer: Option<&str>) -> Result<String> {
        let payload = serde_json::to_string(body)?;
        self.run(url, || {
            let mut req = self.agent.post(url).header("Content-Type", "application/json");
            if let Some(t) = bearer {
                req = req.header("Authorization", &format!("Bearer {t}"));
            }
            match Self::classify(req.send(payload.as_str())) {
                Attempt::Done(mut resp) => match Self::body_text(&mut resp) {
                    Ok(t) => Attempt::Done(t),
                    Err(e) => Attempt::Retry(e),
                },
                Attempt::Retry(m) => Attempt::Retry(m),
                Attempt::Fail(m) => Attempt::Fail(m),
            }
        })
    }

    /// Stream `url` to `dest` via a temporary file; `dest` only appears once
    /// the download completed.
    pub fn download(&self, url: &str, bearer: Option<&str>, dest: &Path) -> Result<u64> {
        if let Some(dir) = dest.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let tmp = dest.with_extension("part");
        let n = self.run(url, || {
            let mut req = self.agent.get(url);
            if let Some(t) = bearer {
                req = req.header("Authorization", &format!("Bearer {t}"));
            }
            match Self::classify(req.call()) {
                Attempt::Done(mut resp) => {
                    let mut reader = resp.body_mut().with_config().limit(MAX_BODY_BYTES).reader();
                    let mut buf = Vec::new();
                    if let Err(e) = reader.read_to_end(&mut buf) {
                        return Attempt::Retry(e.to_string());
                    }
                    match std::fs::write(&tmp, &buf) {
                        Ok(()) => Attempt::Done(buf.len() as u64),
                        Err(e) => Attempt::Fail(e.to_string()),
                    }
                }
                Attempt::Retry(m) => Attempt::Retry(m),
                Attempt::Fail(m) => Attempt::Fail(m),
            }
        });
        match n {
            Ok(n) => {
                std::fs::rename(&tmp, dest)?;
                Ok(n)
            }
            Err(e) => {
                let _ = std::fs::remove_file(&tmp);
                Err(e)
            }
        }
    }
}
