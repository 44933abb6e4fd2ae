//! Judge client: renders the prompt, talks to a chat-completions endpoint
//! (or a deterministic mock), parses the score, and memoizes through the
//! verdict cache.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use ual_core::Sample;

use crate::cache::{content_hash, CacheEntry, VerdictCache};
use crate::error::SourceError;
use crate::parse::parse_score;
use crate::template::{render_user_prompt, SYSTEM_PROMPT, TEMPLATE_ID};

/// Environment variable read for the bearer token. Credentials never appear
/// in config files; this is the only channel.
pub const API_KEY_ENV_VAR: &str = "UAL_JUDGE_API_KEY";

/// How to reach the judge and how patiently.
///
/// `endpoint` selects the backend: `http(s)://…` is a chat-completions URL,
/// `mock:fixed=<n>` always scores `n`, and `mock:table=<path>` looks scores
/// up per sample id in a JSON-lines file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JudgeConfig {
    pub endpoint: String,
    pub model: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub backoff_base_secs: f64,
    pub max_in_flight: usize,
    pub template_id: String,
    pub temperature: f64,
}

impl Default for JudgeConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            model: String::new(),
            timeout_secs: 30,
            max_retries: 3,
            backoff_base_secs: 0.5,
            max_in_flight: 4,
            template_id: TEMPLATE_ID.to_owned(),
            temperature: 0.0,
        }
    }
}

impl JudgeConfig {
    pub fn validate(&self) -> Result<(), SourceError> {
        if self.max_in_flight < 1 {
            return Err(SourceError::InvalidConfig(
                "max_in_flight must be at least 1".into(),
            ));
        }
        if self.timeout_secs == 0 {
            return Err(SourceError::InvalidConfig("timeout must be positive".into()));
        }
        if !(self.backoff_base_secs >= 0.0 && self.backoff_base_secs.is_finite()) {
            return Err(SourceError::InvalidConfig(
                "backoff base must be a finite non-negative number of seconds".into(),
            ));
        }
        Ok(())
    }
}

/// One sample's elicited uncertainty.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub sample_id: String,
    /// Integer score straight from the judge, 0..=100.
    pub score: u8,
    /// score / 100, the uncertainty fed to the smoothing-value solver.
    pub u: f64,
    pub raw_text: String,
    pub content_hash: String,
}

enum Backend {
    MockFixed(i64),
    MockTable(HashMap<String, i64>),
    Http {
        client: reqwest::blocking::Client,
        api_key: Option<String>,
    },
}

enum CallFailure {
    /// Transport error or 5xx: worth retrying with backoff.
    Retryable(String),
    /// The server answered decisively (4xx, malformed success body): retrying
    /// would repeat the same outcome.
    Fatal(String),
}

/// A configured judge plus its call counter. The counter tracks backend
/// invocations only — cache hits never touch it — which is what the
/// idempotence guarantees are stated against.
pub struct Judge {
    config: JudgeConfig,
    backend: Backend,
    calls: AtomicU64,
    hits: AtomicU64,
}

impl Judge {
    pub fn new(config: JudgeConfig) -> Result<Self, SourceError> {
        config.validate()?;
        let backend = if let Some(spec) = config.endpoint.strip_prefix("mock:") {
            parse_mock_backend(spec)?
        } else if config.endpoint.starts_with("http://") || config.endpoint.starts_with("https://")
        {
            let client = reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(config.timeout_secs))
                .build()
                .map_err(|e| SourceError::InvalidConfig(format!("http client: {e}")))?;
            Backend::Http {
                client,
                api_key: std::env::var(API_KEY_ENV_VAR).ok(),
            }
        } else {
            return Err(SourceError::InvalidConfig(format!(
                "endpoint must be http(s):// or mock:, got {:?}",
                config.endpoint
            )));
        };
        Ok(Self {
            config,
            backend,
            calls: AtomicU64::new(0),
            hits: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &JudgeConfig {
        &self.config
    }

    /// Backend invocations so far, retries included (mock invocations count
    /// like network calls).
    pub fn backend_calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    /// Elicitations answered straight from the cache so far.
    pub fn cache_hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    /// Returns the verdict for one sample, from cache when its content hash
    /// is already known, otherwise by querying the backend (with retries) and
    /// caching the reply.
    pub fn elicit(&self, sample: &Sample, cache: &VerdictCache) -> Result<JudgeVerdict, SourceError> {
        let hash = content_hash(
            &self.config.template_id,
            &self.config.model,
            &sample.instruction,
            &sample.response,
        );
        if let Some(entry) = cache.get(&hash) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(verdict_from_entry(&sample.id, entry));
        }
        let raw_text = self.call_backend(sample)?;
        let score = parse_score(&raw_text)?;
        let entry = CacheEntry {
            hash: hash.clone(),
            score,
            raw_text,
            template_id: self.config.template_id.clone(),
            model: self.config.model.clone(),
        };
        cache.insert(entry.clone())?;
        Ok(verdict_from_entry(&sample.id, entry))
    }

    fn call_backend(&self, sample: &Sample) -> Result<String, SourceError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        match &self.backend {
            Backend::MockFixed(score) => Ok(format!("SCORE: {score}")),
            Backend::MockTable(table) => match table.get(&sample.id) {
                Some(score) => Ok(format!("SCORE: {score}")),
                None => Err(SourceError::ScoreTableMissing {
                    sample_id: sample.id.clone(),
                }),
            },
            Backend::Http { client, api_key } => {
                self.post_with_retries(client, api_key.as_deref(), sample)
            }
        }
    }

    fn post_with_retries(
        &self,
        client: &reqwest::blocking::Client,
        api_key: Option<&str>,
        sample: &Sample,
    ) -> Result<String, SourceError> {
        let body = json!({
            "model": self.config.model,
            "messages": [
                { "role": "system", "content": SYSTEM_PROMPT },
                { "role": "user", "content": render_user_prompt(&sample.instruction, &sample.response) },
            ],
            "temperature": self.config.temperature,
        });
        let mut attempts = 0u32;
        loop {
            attempts += 1;
            if attempts > 1 {
                self.calls.fetch_add(1, Ordering::Relaxed);
            }
            match post_once(client, &self.config.endpoint, api_key, &body) {
                Ok(text) => return Ok(text),
                Err(CallFailure::Fatal(detail)) => {
                    return Err(SourceError::JudgeUnavailable { attempts, detail });
                }
                Err(CallFailure::Retryable(detail)) => {
                    if attempts > self.config.max_retries {
                        return Err(SourceError::JudgeUnavailable { attempts, detail });
                    }
                    let delay = self.config.backoff_base_secs * f64::powi(2.0, attempts as i32 - 1);
                    std::thread::sleep(Duration::from_secs_f64(delay));
                }
            }
        }
    }
}

fn verdict_from_entry(sample_id: &str, entry: CacheEntry) -> JudgeVerdict {
    JudgeVerdict {
        sample_id: sample_id.to_owned(),
        score: entry.score,
        u: f64::from(entry.score) / 100.0,
        raw_text: entry.raw_text,
        content_hash: entry.hash,
    }
}

fn parse_mock_backend(spec: &str) -> Result<Backend, SourceError> {
    if let Some(score) = spec.strip_prefix("fixed=") {
        let score: i64 = score
            .parse()
            .map_err(|_| SourceError::InvalidConfig(format!("mock:fixed= wants an integer, got {spec:?}")))?;
        return Ok(Backend::MockFixed(score));
    }
    if let Some(path) = spec.strip_prefix("table=") {
        #[derive(Deserialize)]
        struct Row {
            sample_id: String,
            score: i64,
        }
        let text = std::fs::read_to_string(path)?;
        let mut table = HashMap::new();
        for (index, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: Row = serde_json::from_str(line).map_err(|e| SourceError::TableFormat {
                line: index + 1,
                message: e.to_string(),
            })?;
            table.insert(row.sample_id, row.score);
        }
        return Ok(Backend::MockTable(table));
    }
    Err(SourceError::InvalidConfig(format!(
        "mock endpoint wants fixed=<n> or table=<path>, got {spec:?}"
    )))
}

fn post_once(
    client: &reqwest::blocking::Client,
    endpoint: &str,
    api_key: Option<&str>,
    body: &Value,
) -> Result<String, CallFailure> {
    let mut request = client.post(endpoint).json(body);
    if let Some(key) = api_key {
        request = request.bearer_auth(key);
    }
    let response = request
        .send()
        .map_err(|e| CallFailure::Retryable(format!("transport: {e}")))?;
    let status = response.status();
    if status.is_server_error() {
        return Err(CallFailure::Retryable(format!("server error {status}")));
    }
    if !status.is_success() {
        return Err(CallFailure::Fatal(format!("request rejected with {status}")));
    }
    let payload: Value = response
        .json()
        .map_err(|e| CallFailure::Fatal(format!("malformed response body: {e}")))?;
    payload["choices"][0]["message"]["content"]
        .as_str()
        .map(str::to_owned)
        .ok_or_else(|| CallFailure::Fatal("response lacks choices[0].message.content".into()))
}

/// Summary counters from one `annotate_dataset` run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnnotateStats {
    pub total: usize,
    pub cache_hits: u64,
    pub backend_calls: u64,
}

/// Annotates every sample with its judged uncertainty, running up to
/// `max_in_flight` elicitations concurrently. Output order equals input
/// order regardless of completion order; on failure the error for the
/// earliest sample is returned.
pub fn annotate_dataset(
    samples: &[Sample],
    judge: &Judge,
    cache: &VerdictCache,
) -> Result<(Vec<Sample>, AnnotateStats), SourceError> {
    let calls_before = judge.backend_calls();
    let hits_before = judge.cache_hits();
    let workers = judge.config().max_in_flight.min(samples.len()).max(1);
    let next = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel::<(usize, Result<JudgeVerdict, SourceError>)>();

    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let next = &next;
            let failed = &failed;
            scope.spawn(move || loop {
                if failed.load(Ordering::Relaxed) {
                    break;
                }
                let index = next.fetch_add(1, Ordering::Relaxed);
                if index >= samples.len() {
                    break;
                }
                let result = judge.elicit(&samples[index], cache);
                if result.is_err() {
                    failed.store(true, Ordering::Relaxed);
                }
                if tx.send((index, result)).is_err() {
                    break;
                }
            });
        }
    });
    drop(tx);

    let mut slots: Vec<Option<Result<JudgeVerdict, SourceError>>> =
        (0..samples.len()).map(|_| None).collect();
    for (index, result) in rx {
        slots[index] = Some(result);
    }

    let mut annotated = Vec::with_capacity(samples.len());
    for (sample, slot) in samples.iter().zip(slots) {
        match slot {
            Some(Ok(verdict)) => {
                let mut sample = sample.clone();
                sample.uncertainty = Some(verdict.u);
                annotated.push(sample);
            }
            Some(Err(error)) => return Err(error),
            // A worker saw the failure flag and never started this sample;
            // the earliest actual error is further down the slot list.
            None => continue,
        }
    }
    if annotated.len() != samples.len() {
        // Failure flag tripped but the failing slot drained before a later
        // unstarted one; surface a generic unavailability rather than panic.
        return Err(SourceError::JudgeUnavailable {
            attempts: 0,
            detail: "annotation aborted before all samples were judged".into(),
        });
    }

    let stats = AnnotateStats {
        total: samples.len(),
        cache_hits: judge.cache_hits() - hits_before,
        backend_calls: judge.backend_calls() - calls_before,
    };
    Ok((annotated, stats))
}

/// Sidecar metadata written next to an annotated dataset. With
/// `deterministic` set the timestamp is pinned to zero so reruns are
/// byte-identical.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub template_id: String,
    pub model: String,
    pub unix_timestamp: u64,
}

impl Provenance {
    pub fn new(config: &JudgeConfig, deterministic: bool) -> Self {
        let unix_timestamp = if deterministic {
            0
        } else {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        };
        Self {
            template_id: config.template_id.clone(),
            model: config.model.clone(),
            unix_timestamp,
        }
    }
}
