//! HTTP client for a remote normalization service.
//!
//! Protocol: `POST {base}/v1/normalize` with `{"lang", "sentences"}` answers
//! `{"normalized", "model"}`; `GET {base}/v1/health` answers
//! `{"status", "model"}`. Large requests are cut into chunks that run on at
//! most `max_in_flight` threads; results are reassembled in input order.

use std::fmt;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use lexnorm_core::backend::{BackendError, Capability, LangSupport, Normalizer};
use serde::{Deserialize, Serialize};

type ChunkResult = Result<Vec<String>, RemoteError>;

#[derive(Clone, Debug, PartialEq)]
pub struct RemoteConfig {
    /// Scheme, host and port, e.g. `http://127.0.0.1:8080`.
    pub base_url: String,
    /// Per attempt, covering connect, send and receive.
    pub timeout: Duration,
    pub max_in_flight: usize,
    /// Extra attempts after the first.
    pub retries: u32,
    /// Attempt `k` (from 1) waits `backoff * 2^(k-1)` first.
    pub backoff: Duration,
    /// Sentences per request.
    pub max_batch: usize,
}

impl RemoteConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        RemoteConfig {
            base_url: base_url.into(),
            timeout: Duration::from_secs(30),
            max_in_flight: 4,
            retries: 3,
            backoff: Duration::from_millis(200),
            max_batch: 32,
        }
    }

    pub fn validate(&self) -> Result<(), RemoteError> {
        if self.timeout.is_zero() {
            return Err(RemoteError::InvalidConfig("timeout must be positive"));
        }
        if self.max_in_flight == 0 || self.max_batch == 0 {
            return Err(RemoteError::InvalidConfig(
                "in-flight cap and batch size must be positive",
            ));
        }
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(RemoteError::InvalidConfig(
                "base url must start with http:// or https://",
            ));
        }
        Ok(())
    }

    fn endpoint(&self, path: &str) -> String {
        format!("{}{path}", self.base_url.trim_end_matches('/'))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RemoteError {
    /// Every attempt timed out or the last one did.
    Timeout {
        attempts: u32,
    },
    Transport {
        attempts: u32,
        detail: String,
    },
    /// The response did not follow the protocol.
    Protocol(String),
    /// 5xx; the body is passed through.
    Server {
        status: u16,
        body: String,
    },
    /// 4xx; the body is passed through.
    Rejected {
        status: u16,
        body: String,
    },
    InvalidConfig(&'static str),
}

impl fmt::Display for RemoteError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RemoteError::Timeout { attempts } => write!(f, "timed out after {attempts} attempt(s)"),
            RemoteError::Transport { attempts, detail } => {
                write!(f, "transport error after {attempts} attempt(s): {detail}")
            }
            RemoteError::Protocol(detail) => write!(f, "protocol error: {detail}"),
            RemoteError::Server { status, body } => write!(f, "server error {status}: {body}"),
            RemoteError::Rejected { status, body } => {
                write!(f, "request rejected with {status}: {body}")
            }
            RemoteError::InvalidConfig(detail) => write!(f, "invalid remote config: {detail}"),
        }
    }
}

impl std::error::Error for RemoteError {}

#[derive(Serialize)]
struct NormalizeRequest<'a> {
    lang: &'a str,
    sentences: &'a [String],
}

#[derive(Deserialize)]
struct NormalizeResponse {
    normalized: Vec<String>,
    #[allow(dead_code)]
    model: Option<String>,
}

#[derive(Deserialize)]
struct HealthResponse {
    status: String,
    model: Option<String>,
}

/// What a single attempt ended with.
enum Attempt {
    Done(String),
    Retry(RemoteError),
    Fail(RemoteError),
}

pub struct RemoteClient {
    cfg: RemoteConfig,
    agent: ureq::Agent,
    retries: AtomicU64,
}

impl fmt::Debug for RemoteClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RemoteClient")
            .field("cfg", &self.cfg)
            .finish_non_exhaustive()
    }
}

impl RemoteClient {
    pub fn new(cfg: RemoteConfig) -> Result<Self, RemoteError> {
        cfg.validate()?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(RemoteClient {
            cfg,
            agent,
            retries: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.cfg
    }

    /// Retries performed since construction, over all calls.
    pub fn retries_performed(&self) -> u64 {
        self.retries.load(Ordering::Relaxed)
    }

    fn attempt(&self, url: &str, body: Option<&str>) -> Attempt {
        let result = match body {
            Some(b) => self
                .agent
                .post(url)
                .header("Content-Type", "application/json")
                .send(b),
            None => self.agent.get(url).call(),
        };
        let mut resp = match result {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => {
                return Attempt::Retry(RemoteError::Timeout { attempts: 0 })
            }
            Err(e) => {
                return Attempt::Retry(RemoteError::Transport {
                    attempts: 0,
                    detail: e.to_string(),
                })
            }
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(ureq::Error::Timeout(_)) => {
                return Attempt::Retry(RemoteError::Timeout { attempts: 0 })
            }
            Err(e) => {
                return Attempt::Retry(RemoteError::Transport {
                    attempts: 0,
                    detail: e.to_string(),
                })
            }
        };
        match status {
            200..=299 => Attempt::Done(text),
            503 => Attempt::Retry(RemoteError::Server { status, body: text }),
            500..=599 => Attempt::Fail(RemoteError::Server { status, body: text }),
            _ => Attempt::Fail(RemoteError::Rejected { status, body: text }),
        }
    }

    fn with_retries(&self, url: &str, body: Option<&str>) -> Result<String, RemoteError> {
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            match self.attempt(url, body) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(e) if attempt > self.cfg.retries => {
                    return Err(match e {
                        RemoteError::Timeout { .. } => RemoteError::Timeout { attempts: attempt },
                        RemoteError::Transport { detail, .. } => RemoteError::Transport {
                            attempts: attempt,
                            detail,
                        },
                        other => other,
                    })
                }
                Attempt::Retry(_) => {
                    self.retries.fetch_add(1, Ordering::Relaxed);
                    thread::sleep(self.cfg.backoff.saturating_mul(1 << (attempt - 1).min(16)));
                }
            }
        }
    }

    fn normalize_chunk(
        &self,
        lang: &str,
        sentences: &[String],
    ) -> Result<Vec<String>, RemoteError> {
        let body = serde_json::to_string(&NormalizeRequest { lang, sentences })
            .expect("requests always serialize");
        let text = self.with_retries(&self.cfg.endpoint("/v1/normalize"), Some(&body))?;
        let resp: NormalizeResponse =
            serde_json::from_str(&text).map_err(|e| RemoteError::Protocol(e.to_string()))?;
        if resp.normalized.len() != sentences.len() {
            return Err(RemoteError::Protocol(format!(
                "sent {} sentences, received {}",
                sentences.len(),
                resp.normalized.len()
            )));
        }
        Ok(resp.normalized)
    }

    /// Normalizes `sentences`, preserving order and count.
    pub fn normalize(&self, lang: &str, sentences: &[String]) -> Result<Vec<String>, RemoteError> {
        let chunks: Vec<&[String]> = sentences.chunks(self.cfg.max_batch).collect();
        let results: Mutex<Vec<Option<ChunkResult>>> =
            Mutex::new((0..chunks.len()).map(|_| None).collect());
        let next = AtomicUsize::new(0);
        let workers = self.cfg.max_in_flight.min(chunks.len());
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(chunk) = chunks.get(i) else { break };
                    let r = self.normalize_chunk(lang, chunk);
                    let failed = r.is_err();
                    results
                        .lock()
                        .expect("no worker panics while holding the lock")[i] = Some(r);
                    if failed {
                        // Let the remaining chunks fail fast instead of running.
                        next.store(chunks.len(), Ordering::Relaxed);
                        break;
                    }
                });
            }
        });
        let mut out = Vec::with_capacity(sentences.len());
        for r in results.into_inner().expect("workers have joined") {
            match r {
                Some(Ok(part)) => out.extend(part),
                Some(Err(e)) => return Err(e),
                None => {}
            }
        }
        if out.len() != sentences.len() {
            // Only reachable when a chunk was skipped after another failed.
            return Err(RemoteError::Protocol("incomplete result set".into()));
        }
        Ok(out)
    }

    /// Returns the served model id.
    pub fn health(&self) -> Result<String, RemoteError> {
        let text = self.with_retries(&self.cfg.endpoint("/v1/health"), None)?;
        let h: HealthResponse =
            serde_json::from_str(&text).map_err(|e| RemoteError::Protocol(e.to_string()))?;
        if h.status != "ok" {
            return Err(RemoteError::Protocol(format!(
                "health status {:?}",
                h.status
            )));
        }
        Ok(h.model.unwrap_or_default())
    }
}

/// One-shot convenience over [`RemoteClient::normalize`].
pub fn remote_call(
    cfg: &RemoteConfig,
    lang: &str,
    sentences: &[String],
) -> Result<Vec<String>, RemoteError> {
    RemoteClient::new(cfg.clone())?.normalize(lang, sentences)
}

impl Normalizer for RemoteClient {
    fn capability(&self) -> Capability {
        Capability {
            name: format!("remote:{}", self.cfg.base_url),
            langs: LangSupport::Any,
        }
    }

    fn normalize_batch(
        &self,
        lang: &str,
        sentences: &[String],
    ) -> Result<Vec<String>, BackendError> {
        let out = self
            .normalize(lang, sentences)
            .map_err(|e| BackendError::Failure {
                backend: self.capability().name,
                detail: e.to_string(),
            })?;
        Ok(out
            .iter()
            .map(|s| s.split_whitespace().collect::<Vec<_>>().join(" "))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(RemoteConfig::new("http://localhost:1").validate().is_ok());
        assert!(RemoteConfig::new("localhost:1").validate().is_err());
        let mut cfg = RemoteConfig::new("http://x");
        cfg.timeout = Duration::ZERO;
        assert_eq!(
            cfg.validate(),
            Err(RemoteError::InvalidConfig("timeout must be positive"))
        );
        let mut cfg = RemoteConfig::new("http://x");
        cfg.max_in_flight = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn endpoint_joins_without_double_slash() {
        let cfg = RemoteConfig::new("http://h:1/");
        assert_eq!(cfg.endpoint("/v1/health"), "http://h:1/v1/health");
    }

    #[test]
    fn empty_input_needs_no_server() {
        let client = RemoteClient::new(RemoteConfig::new("http://127.0.0.1:9")).unwrap();
        assert_eq!(client.normalize("en", &[]).unwrap(), Vec::<String>::new());
    }
}
