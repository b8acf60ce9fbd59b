//! Generation runs: allocate samples over atomic configurations, render prompts,
//! call a [`CompletionBackend`] with bounded concurrency and retries, and stream
//! the resulting samples into a [`SampleSink`].
//!
//! Requests are issued in allocation order and their results are consumed in that
//! same order, so with a deterministic backend and a seed the output is
//! reproducible byte for byte.

pub mod backend;
pub mod http;

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use futures::StreamExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use synthline_core::prompt::snake_case;
use synthline_core::{
    allocate_samples, expand_atomic_configurations, AtomicConfiguration, Configuration, ExpandError, FeatureModel,
    LabelSpec, PromptError, SyntheticSample, Template,
};
use thiserror::Error;

pub use backend::{BackendError, CompletionBackend, FaultMode, MockBackend};
pub use http::ChatBackend;

use crate::ids::IdSource;
use crate::store::SampleSink;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GenerationParams {
    pub model_name: String,
    pub temperature: f64,
    pub top_p: f64,
    pub max_concurrency: usize,
    pub retry_limit: u32,
    /// Left to the provider when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            model_name: "GPT-4o".into(),
            temperature: 1.0,
            top_p: 1.0,
            max_concurrency: 8,
            retry_limit: 3,
            max_tokens: None,
        }
    }
}

impl GenerationParams {
    /// Reads the LLM choice, Temperature and TopP from a configuration, keeping
    /// defaults for whatever it does not set.
    pub fn from_configuration(model: &FeatureModel, config: &Configuration) -> Self {
        let mut p = GenerationParams::default();
        if let Some(llm) = model.feature("LLM") {
            if let Some(choice) = llm.children.iter().find(|c| config.is_selected(model, &c.name)) {
                p.model_name = choice.display_value().to_string();
            }
        }
        if let Some(t) = config.single_value("Temperature").and_then(|v| v.as_number()) {
            p.temperature = t;
        }
        if let Some(t) = config.single_value("TopP").and_then(|v| v.as_number()) {
            p.top_p = t;
        }
        p
    }

    pub fn check(&self) -> Result<(), EngineError> {
        let bad = |m: &str| Err(EngineError::Params(m.into()));
        if self.model_name.trim().is_empty() {
            return bad("modelName must not be empty");
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return bad("temperature must be a finite number >= 0");
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return bad("topP must be in (0, 1]");
        }
        if self.max_concurrency == 0 {
            return bad("maxConcurrency must be positive");
        }
        Ok(())
    }
}

/// Exponential backoff with full jitter: before retry `k` (0-based) wait a
/// uniform draw from `[0, min(max, base * factor^k))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Backoff {
    pub base: Duration,
    pub factor: f64,
    pub max: Duration,
}

impl Default for Backoff {
    fn default() -> Self {
        Backoff {
            base: Duration::from_secs(1),
            factor: 2.0,
            max: Duration::from_secs(60),
        }
    }
}

impl Backoff {
    pub fn ceiling(&self, retry: u32) -> Duration {
        let exp = self.base.as_secs_f64() * self.factor.powi(retry.min(64) as i32);
        Duration::from_secs_f64(exp.min(self.max.as_secs_f64()))
    }

    pub fn delay(&self, retry: u32, unit: f64) -> Duration {
        self.ceiling(retry).mul_f64(unit.clamp(0.0, 1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Pending,
    Running,
    Completed,
    Failed,
    Cancelled,
}

impl RunStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, RunStatus::Completed | RunStatus::Failed | RunStatus::Cancelled)
    }

    fn can_become(self, next: RunStatus) -> bool {
        match self {
            RunStatus::Pending => next != RunStatus::Pending,
            RunStatus::Running => next.is_terminal(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AllocationEntry {
    pub atomic_index: usize,
    pub count: usize,
}

/// One failed attempt. Attempts are numbered from 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AttemptFailure {
    pub atomic_index: usize,
    pub attempt: u32,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GenerationRun {
    pub id: String,
    pub label: String,
    pub config_snapshot: Configuration,
    pub params: GenerationParams,
    pub allocation: Vec<AllocationEntry>,
    pub status: RunStatus,
    pub produced: usize,
    pub failures: Vec<AttemptFailure>,
    /// Why a failed run stopped early, if it did.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl GenerationRun {
    pub fn requested(&self) -> usize {
        self.allocation.iter().map(|a| a.count).sum()
    }

    /// Moves to `next` unless that would reopen or rewind the run.
    pub fn transition(&mut self, next: RunStatus) -> bool {
        let ok = self.status.can_become(next);
        if ok {
            self.status = next;
        }
        ok
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid generation parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Expand(#[from] ExpandError),
    #[error("the configuration sets no SubsetSize")]
    MissingSubsetSize,
    #[error("SubsetSize must be a positive integer, got {0}")]
    BadSubsetSize(f64),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

/// Shared view of a run: snapshots for observers, a cancel switch for the owner.
#[derive(Debug, Clone)]
pub struct RunHandle {
    state: Arc<Mutex<GenerationRun>>,
    cancel: Arc<AtomicBool>,
}

impl RunHandle {
    pub fn snapshot(&self) -> GenerationRun {
        self.state.lock().unwrap().clone()
    }

    pub fn id(&self) -> String {
        self.state.lock().unwrap().id.clone()
    }

    /// Asks the run to stop; requests already in flight finish, no new ones start.
    pub fn cancel(&self) {
        self.cancel.store(true, Ordering::SeqCst);
    }

    pub fn is_cancel_requested(&self) -> bool {
        self.cancel.load(Ordering::SeqCst)
    }

    fn update<T>(&self, f: impl FnOnce(&mut GenerationRun) -> T) -> T {
        f(&mut self.state.lock().unwrap())
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Makes the run id, sample ids, timestamps and jitter reproducible.
    pub seed: Option<u64>,
    pub backoff: Backoff,
    pub template: Option<Template>,
}

struct Job {
    atomic: Arc<AtomicConfiguration>,
    prompt: Arc<str>,
}

/// A run that has been planned but not started.
pub struct Generation {
    handle: RunHandle,
    jobs: Vec<Job>,
    label: LabelSpec,
    params: GenerationParams,
    ids: IdSource,
    jitter: ChaCha8Rng,
    backoff: Backoff,
}

/// Reads SubsetSize from the configuration.
pub fn subset_size(config: &Configuration) -> Result<usize, EngineError> {
    let n = config
        .single_value("SubsetSize")
        .and_then(|v| v.as_number())
        .ok_or(EngineError::MissingSubsetSize)?;
    if n < 1.0 || n.fract() != 0.0 || n > usize::MAX as f64 {
        return Err(EngineError::BadSubsetSize(n));
    }
    Ok(n as usize)
}

impl Generation {
    pub fn prepare(
        model: &FeatureModel,
        config: &Configuration,
        label: &LabelSpec,
        params: GenerationParams,
        options: RunOptions,
    ) -> Result<Self, EngineError> {
        params.check()?;
        label.check()?;
        let atomics = expand_atomic_configurations(model, config)?;
        let counts = allocate_samples(atomics.len(), subset_size(config)?).expect("expansion is never empty");
        let template = options.template.unwrap_or_else(Template::default_requirement);

        let mut jobs = Vec::new();
        let mut allocation = Vec::with_capacity(atomics.len());
        for (atomic, &count) in atomics.into_iter().zip(&counts) {
            allocation.push(AllocationEntry { atomic_index: atomic.index, count });
            if count == 0 {
                continue;
            }
            let prompt: Arc<str> = template.render(&atomic, label)?.text.into();
            let atomic = Arc::new(atomic);
            for _ in 0..count {
                jobs.push(Job { atomic: atomic.clone(), prompt: prompt.clone() });
            }
        }

        let mut ids = IdSource::from_seed(options.seed);
        let jitter = match options.seed {
            Some(s) => ChaCha8Rng::seed_from_u64(s ^ 0x6a09_e667_f3bc_c908),
            None => ChaCha8Rng::from_os_rng(),
        };
        let run = GenerationRun {
            id: ids.next().0,
            label: label.label.clone(),
            config_snapshot: config.clone(),
            params: params.clone(),
            allocation,
            status: RunStatus::Pending,
            produced: 0,
            failures: Vec::new(),
            error: None,
        };
        Ok(Generation {
            handle: RunHandle {
                state: Arc::new(Mutex::new(run)),
                cancel: Arc::new(AtomicBool::new(false)),
            },
            jobs,
            label: label.clone(),
            params,
            ids,
            jitter,
            backoff: options.backoff,
        })
    }

    pub fn handle(&self) -> RunHandle {
        self.handle.clone()
    }

    /// Runs to a terminal state and returns the final snapshot.
    pub async fn execute(mut self, backend: Arc<dyn CompletionBackend>, sink: &mut dyn SampleSink) -> GenerationRun {
        let handle = self.handle.clone();
        if handle.is_cancel_requested() {
            handle.update(|r| r.transition(RunStatus::Cancelled));
            return handle.snapshot();
        }
        handle.update(|r| r.transition(RunStatus::Running));

        let abort = Arc::new(AtomicBool::new(false));
        let jitter = Arc::new(Mutex::new(self.jitter.clone()));
        let jobs = std::mem::take(&mut self.jobs);
        let params = Arc::new(self.params.clone());
        let backoff = self.backoff;

        let mut outcomes = futures::stream::iter(jobs)
            .map(|job| {
                let (backend, params, handle, abort, jitter) =
                    (backend.clone(), params.clone(), handle.clone(), abort.clone(), jitter.clone());
                async move {
                    let stop = || handle.is_cancel_requested() || abort.load(Ordering::SeqCst);
                    let mut attempt = 0u32;
                    loop {
                        if stop() {
                            return (job, Outcome::Skipped);
                        }
                        attempt += 1;
                        let err = match backend.complete(&job.prompt, &params).await {
                            Ok(text) if !text.trim().is_empty() => return (job, Outcome::Text(text.trim().to_string())),
                            Ok(_) => BackendError::Transient("empty completion".into()),
                            Err(e) => e,
                        };
                        handle.update(|r| {
                            r.failures.push(AttemptFailure {
                                atomic_index: job.atomic.index,
                                attempt,
                                reason: err.to_string(),
                            })
                        });
                        if !err.is_transient() {
                            abort.store(true, Ordering::SeqCst);
                            return (job, Outcome::Fatal(err.to_string()));
                        }
                        if attempt > params.retry_limit {
                            return (job, Outcome::Exhausted);
                        }
                        let unit = jitter.lock().unwrap().random::<f64>();
                        tokio::time::sleep(backoff.delay(attempt - 1, unit)).await;
                    }
                }
            })
            .buffered(self.params.max_concurrency);

        let mut exhausted = false;
        let mut fatal: Option<String> = None;
        while let Some((job, outcome)) = outcomes.next().await {
            match outcome {
                Outcome::Text(text) => {
                    if fatal.is_some() {
                        continue;
                    }
                    let sample = self.sample(&job.atomic, text);
                    match sink.write(&sample) {
                        Ok(()) => handle.update(|r| r.produced += 1),
                        Err(e) => {
                            abort.store(true, Ordering::SeqCst);
                            fatal = Some(format!("writing output failed: {e}"));
                        }
                    }
                }
                Outcome::Exhausted => exhausted = true,
                Outcome::Fatal(reason) => {
                    fatal.get_or_insert(reason);
                }
                Outcome::Skipped => {}
            }
        }
        drop(outcomes);
        if let Err(e) = sink.finish() {
            fatal.get_or_insert(format!("writing output failed: {e}"));
        }

        handle.update(|r| {
            r.failures.sort_by_key(|f| (f.atomic_index, f.attempt));
            let status = if fatal.is_some() || (exhausted && !handle.is_cancel_requested()) {
                RunStatus::Failed
            } else if handle.is_cancel_requested() {
                RunStatus::Cancelled
            } else {
                RunStatus::Completed
            };
            r.error = fatal;
            r.transition(status);
        });
        handle.snapshot()
    }

    fn sample(&mut self, atomic: &AtomicConfiguration, text: String) -> SyntheticSample {
        let (id, at) = self.ids.next();
        let mut s = SyntheticSample::bare(id, text, self.label.label.clone());
        s.label_description = self.label.description.clone();
        for (axis, value) in &atomic.axes.0 {
            let slot = match snake_case(axis).as_str() {
                "requirement_type" => &mut s.requirement_type,
                "specification_level" => &mut s.specification_level,
                "requirement_source" => &mut s.requirement_source,
                "specification_format" => &mut s.specification_format,
                "language" => &mut s.language,
                "domain" => &mut s.domain,
                _ => continue,
            };
            *slot = value.clone();
        }
        s.llm = self.params.model_name.clone();
        s.temperature = Some(self.params.temperature);
        s.top_p = Some(self.params.top_p);
        s.run_id = self.handle.id();
        s.created_at = Some(at);
        s
    }
}

enum Outcome {
    Text(String),
    Exhausted,
    Fatal(String),
    Skipped,
}

/// Plans and executes one run.
pub async fn run_generation(
    model: &FeatureModel,
    config: &Configuration,
    label: &LabelSpec,
    params: GenerationParams,
    backend: Arc<dyn CompletionBackend>,
    sink: &mut dyn SampleSink,
    options: RunOptions,
) -> Result<GenerationRun, EngineError> {
    let generation = Generation::prepare(model, config, label, params, options)?;
    Ok(generation.execute(backend, sink).await)
}
