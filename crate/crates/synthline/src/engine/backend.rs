use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use async_trait::async_trait;
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::GenerationParams;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    /// Worth retrying: timeouts, dropped connections, rate limits, server errors.
    #[error("transient backend failure: {0}")]
    Transient(String),
    /// Retrying cannot help: bad credentials, rejected requests.
    #[error("permanent backend failure: {0}")]
    Permanent(String),
}

impl BackendError {
    pub fn is_transient(&self) -> bool {
        matches!(self, BackendError::Transient(_))
    }

    pub fn reason(&self) -> &str {
        match self {
            BackendError::Transient(r) | BackendError::Permanent(r) => r,
        }
    }
}

/// Something that turns one prompt into one completion.
///
/// Implementations are shared between up to `max_concurrency` in-flight calls.
#[async_trait]
pub trait CompletionBackend: Send + Sync {
    async fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<String, BackendError>;

    fn name(&self) -> String;
}

#[async_trait]
impl<B: CompletionBackend + ?Sized> CompletionBackend for std::sync::Arc<B> {
    async fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<String, BackendError> {
        (**self).complete(prompt, params).await
    }

    fn name(&self) -> String {
        (**self).name()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FaultMode {
    #[default]
    None,
    /// The first `k` calls for each distinct prompt fail transiently.
    FailFirst(usize),
    AlwaysFail,
    /// Every call fails permanently, like a rejected API key.
    Permanent,
}

/// Deterministic offline stand-in for an LLM.
///
/// Answers `REQ-<8 hex digits> <domain>`, where the digits come from a SHA-256
/// of the prompt and sampling parameters and the domain is echoed from the
/// prompt's `Is for a ... system` line. Also counts calls and concurrent calls.
#[derive(Debug, Default)]
pub struct MockBackend {
    fault: FaultMode,
    latency: Duration,
    attempts: Mutex<HashMap<String, usize>>,
    calls: AtomicUsize,
    in_flight: AtomicUsize,
    peak_in_flight: AtomicUsize,
}

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_fault(mut self, fault: FaultMode) -> Self {
        self.fault = fault;
        self
    }

    /// Each call sleeps this long, which makes overlapping calls observable.
    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = latency;
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn peak_in_flight(&self) -> usize {
        self.peak_in_flight.load(Ordering::SeqCst)
    }

    pub fn respond(prompt: &str, params: &GenerationParams) -> String {
        let mut h = Sha256::new();
        h.update(prompt.as_bytes());
        h.update([0u8]);
        h.update(format!("{}|{}|{}", params.model_name, params.temperature, params.top_p).as_bytes());
        let digest = hex::encode(&h.finalize()[..4]);
        match echoed_domain(prompt) {
            Some(domain) => format!("REQ-{digest} {domain}"),
            None => format!("REQ-{digest}"),
        }
    }
}

fn echoed_domain(prompt: &str) -> Option<&str> {
    prompt.lines().find_map(|l| {
        let rest = &l[l.find("Is for a ")? + "Is for a ".len()..];
        rest.strip_suffix(" system")
    })
}

struct InFlight<'a>(&'a AtomicUsize);

impl Drop for InFlight<'_> {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::SeqCst);
    }
}

#[async_trait]
impl CompletionBackend for MockBackend {
    async fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        let _guard = InFlight(&self.in_flight);
        self.peak_in_flight.fetch_max(now, Ordering::SeqCst);
        if !self.latency.is_zero() {
            tokio::time::sleep(self.latency).await;
        }
        let attempt = {
            let mut seen = self.attempts.lock().unwrap();
            let n = seen.entry(prompt.to_string()).or_default();
            *n += 1;
            *n
        };
        match self.fault {
            FaultMode::None => {}
            FaultMode::FailFirst(k) if attempt > k => {}
            FaultMode::FailFirst(_) | FaultMode::AlwaysFail => {
                return Err(BackendError::Transient(format!("injected failure on attempt {attempt}")))
            }
            FaultMode::Permanent => return Err(BackendError::Permanent("injected permanent failure".into())),
        }
        Ok(Self::respond(prompt, params))
    }

    fn name(&self) -> String {
        "mock".into()
    }
}
