//! Stateless chat-completion boundary with record/replay.
//!
//! Every LLM call in the runtime is a self-contained request: the full
//! prompt travels in the message list and nothing is carried between calls.
//! Requests are fingerprinted over their canonical form so a recorded
//! transcript can replay a whole run byte-for-byte, independent of call
//! order or interleaving.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::text::truncate_chars;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub messages: Vec<ChatMessage>,
    pub model_id: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl CompletionRequest {
    /// A request carrying one user message, the common shape for the
    /// runtime's prompt-per-call stages.
    pub fn single_user(
        model_id: impl Into<String>,
        temperature: f64,
        max_tokens: u32,
        prompt: impl Into<String>,
    ) -> Self {
        Self {
            messages: vec![ChatMessage::user(prompt)],
            model_id: model_id.into(),
            temperature,
            max_tokens: max_tokens.max(1),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.messages.is_empty() {
            return Err("request has no messages".into());
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(format!("temperature {} is not >= 0", self.temperature));
        }
        if self.max_tokens == 0 {
            return Err("max_tokens must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub content: String,
    pub usage: Usage,
}

/// Canonical text form of a request. Every field and message boundary is
/// length-prefixed, so distinct requests never share a canonical form, and
/// any single-character change in any message changes it.
pub fn canonicalize(request: &CompletionRequest) -> String {
    let mut s = String::with_capacity(
        64 + request
            .messages
            .iter()
            .map(|m| m.content.len() + 16)
            .sum::<usize>(),
    );
    s.push_str("v1");
    s.push_str(&format!(
        "|model:{}:{}",
        request.model_id.len(),
        request.model_id
    ));
    s.push_str(&format!("|temp:{:016x}", request.temperature.to_bits()));
    s.push_str(&format!("|max:{}", request.max_tokens));
    s.push_str(&format!("|n:{}", request.messages.len()));
    for m in &request.messages {
        s.push_str(&format!("|{}:{}:", m.role.as_str(), m.content.len()));
        s.push_str(&m.content);
    }
    s
}

/// Stable hex fingerprint of a request's canonical form.
pub fn fingerprint(request: &CompletionRequest) -> String {
    let digest = Sha256::digest(canonicalize(request).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Short human-readable preview stored beside each transcript record.
pub fn request_digest(request: &CompletionRequest) -> String {
    let canonical = canonicalize(request);
    let head = truncate_chars(&canonical, 160);
    if head.len() < canonical.len() {
        format!("{head}…")
    } else {
        head.to_string()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TranscriptRecord {
    fingerprint: String,
    request_digest: String,
    response: String,
}

/// Fingerprint-keyed store of recorded responses. Fixture files hold one
/// JSON record per line: `{"fingerprint", "request_digest", "response"}`.
#[derive(Debug, Clone, Default)]
pub struct Transcript {
    entries: BTreeMap<String, String>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, fingerprint: String, response: String) {
        self.entries.insert(fingerprint, response);
    }

    pub fn get(&self, fingerprint: &str) -> Option<&str> {
        self.entries.get(fingerprint).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Loads a JSONL fixture file.
    pub fn load(path: &Path) -> std::io::Result<Self> {
        let mut transcript = Self::new();
        transcript.merge_file(path)?;
        Ok(transcript)
    }

    /// Loads and merges every `*.jsonl` file in a directory.
    pub fn load_dir(dir: &Path) -> std::io::Result<Self> {
        let mut transcript = Self::new();
        let mut paths: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        for path in paths {
            transcript.merge_file(&path)?;
        }
        Ok(transcript)
    }

    fn merge_file(&mut self, path: &Path) -> std::io::Result<()> {
        let reader = BufReader::new(File::open(path)?);
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: TranscriptRecord = serde_json::from_str(&line).map_err(|e| {
                std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("{}: {e}", path.display()),
                )
            })?;
            self.entries.insert(record.fingerprint, record.response);
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("transport failure after {attempts} attempts: {last}")]
    Transport { attempts: u32, last: String },
    #[error("no recorded response for fingerprint {fingerprint} (request: {digest})")]
    ReplayMiss { fingerprint: String, digest: String },
    #[error("provider rejected request: {0}")]
    Provider(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("transcript i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct ProviderReply {
    pub content: String,
    pub usage: Usage,
}

#[derive(Debug)]
pub enum ProviderFailure {
    /// Worth retrying: connection errors, timeouts, 429/5xx statuses.
    Transient(String),
    /// Not worth retrying: auth failures, malformed requests, bad payloads.
    Fatal(String),
}

/// A raw chat-completion backend.
pub trait Provider: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<ProviderReply, ProviderFailure>;
}

/// OpenAI-style chat-completions backend: POST of
/// `{model, messages, temperature, max_tokens}` with a bearer credential.
pub struct HttpProvider {
    endpoint: String,
    api_key: String,
    client: reqwest::blocking::Client,
}

impl HttpProvider {
    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>, timeout: Duration) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .expect("building HTTP client");
        Self {
            endpoint: endpoint.into(),
            api_key: api_key.into(),
            client,
        }
    }
}

#[derive(Deserialize)]
struct WireResponse {
    #[serde(default)]
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

impl Provider for HttpProvider {
    fn complete(&self, request: &CompletionRequest) -> Result<ProviderReply, ProviderFailure> {
        let body = serde_json::json!({
            "model": request.model_id,
            "messages": request.messages.iter().map(|m| {
                serde_json::json!({"role": m.role.as_str(), "content": m.content})
            }).collect::<Vec<_>>(),
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });

        let mut builder = self.client.post(&self.endpoint).json(&body);
        if !self.api_key.is_empty() {
            builder = builder.bearer_auth(&self.api_key);
        }
        let response = builder
            .send()
            .map_err(|e| ProviderFailure::Transient(format!("{}: {e}", self.endpoint)))?;

        let status = response.status();
        if !status.is_success() {
            let text = response.text().unwrap_or_default();
            let message = format!("HTTP {status}: {}", truncate_chars(&text, 300));
            return if status.as_u16() == 429 || status.is_server_error() {
                Err(ProviderFailure::Transient(message))
            } else {
                Err(ProviderFailure::Fatal(message))
            };
        }

        let wire: WireResponse = response
            .json()
            .map_err(|e| ProviderFailure::Fatal(format!("unparseable response body: {e}")))?;
        let content = wire
            .choices
            .first()
            .and_then(|c| c.message.content.clone())
            .unwrap_or_default();
        let usage = wire
            .usage
            .map(|u| Usage {
                prompt_tokens: u.prompt_tokens,
                completion_tokens: u.completion_tokens,
            })
            .unwrap_or_default();
        Ok(ProviderReply { content, usage })
    }
}

/// Offline backend answering from ordered substring rules; used to build
/// deterministic fixtures and as a stub in tests. The first rule whose
/// needles all appear in the request's last message wins.
#[derive(Debug, Default)]
pub struct ScriptedProvider {
    rules: Vec<(Vec<String>, String)>,
}

impl ScriptedProvider {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a rule matched when every needle occurs in the last message.
    pub fn rule(mut self, needles: &[&str], response: impl Into<String>) -> Self {
        self.rules.push((
            needles.iter().map(|s| s.to_string()).collect(),
            response.into(),
        ));
        self
    }

    /// Adds a catch-all rule.
    pub fn fallback(self, response: impl Into<String>) -> Self {
        self.rule(&[], response)
    }
}

impl Provider for ScriptedProvider {
    fn complete(&self, request: &CompletionRequest) -> Result<ProviderReply, ProviderFailure> {
        let prompt = request
            .messages
            .last()
            .map(|m| m.content.as_str())
            .unwrap_or("");
        for (needles, response) in &self.rules {
            if needles.iter().all(|n| prompt.contains(n)) {
                return Ok(ProviderReply {
                    content: response.clone(),
                    usage: Usage::default(),
                });
            }
        }
        Err(ProviderFailure::Fatal(format!(
            "no scripted response matched request: {}",
            request_digest(request)
        )))
    }
}

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    /// Total transport attempts before giving up.
    pub attempts: u32,
    /// First backoff delay; doubled after each failed attempt.
    pub base_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            base_backoff: Duration::from_millis(250),
        }
    }
}

enum Mode {
    Live,
    Record { sink: Mutex<RecordSink> },
    Replay { transcript: Transcript },
}

struct RecordSink {
    cache: Transcript,
    file: File,
}

/// The LLM boundary. Thread-safe: transcript appends are serialized
/// internally, so one gateway can back parallel runs.
pub struct Gateway {
    provider: Option<Arc<dyn Provider>>,
    mode: Mode,
    retry: RetryPolicy,
}

impl Gateway {
    pub fn live(provider: Arc<dyn Provider>, retry: RetryPolicy) -> Self {
        Self {
            provider: Some(provider),
            mode: Mode::Live,
            retry,
        }
    }

    /// Answers every request from the transcript; unknown fingerprints are
    /// [`GatewayError::ReplayMiss`] (the prompt drifted from the recording).
    pub fn replay(transcript: Transcript) -> Self {
        Self {
            provider: None,
            mode: Mode::Replay { transcript },
            retry: RetryPolicy::default(),
        }
    }

    /// Forwards to the provider and appends each new (fingerprint, response)
    /// pair to `path`. A fingerprint already present in the file is answered
    /// from it without touching the provider.
    pub fn record(
        provider: Arc<dyn Provider>,
        path: &Path,
        retry: RetryPolicy,
    ) -> std::io::Result<Self> {
        let cache = if path.exists() {
            Transcript::load(path)?
        } else {
            Transcript::new()
        };
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            provider: Some(provider),
            mode: Mode::Record {
                sink: Mutex::new(RecordSink { cache, file }),
            },
            retry,
        })
    }

    pub fn complete(
        &self,
        request: &CompletionRequest,
    ) -> Result<CompletionResponse, GatewayError> {
        request.validate().map_err(GatewayError::InvalidRequest)?;
        match &self.mode {
            Mode::Replay { transcript } => {
                let fp = fingerprint(request);
                match transcript.get(&fp) {
                    Some(content) => Ok(CompletionResponse {
                        content: content.to_string(),
                        usage: Usage::default(),
                    }),
                    None => Err(GatewayError::ReplayMiss {
                        fingerprint: fp,
                        digest: request_digest(request),
                    }),
                }
            }
            Mode::Live => self
                .call_with_retry(request)
                .map(|reply| CompletionResponse {
                    content: reply.content,
                    usage: reply.usage,
                }),
            Mode::Record { sink } => {
                let fp = fingerprint(request);
                {
                    let guard = sink.lock().expect("record sink lock");
                    if let Some(content) = guard.cache.get(&fp) {
                        return Ok(CompletionResponse {
                            content: content.to_string(),
                            usage: Usage::default(),
                        });
                    }
                }
                let reply = self.call_with_retry(request)?;
                let mut guard = sink.lock().expect("record sink lock");
                // Another thread may have recorded the same request while
                // we were waiting on the provider.
                if guard.cache.get(&fp).is_none() {
                    let record = TranscriptRecord {
                        fingerprint: fp.clone(),
                        request_digest: request_digest(request),
                        response: reply.content.clone(),
                    };
                    let line = serde_json::to_string(&record)
                        .map_err(|e| GatewayError::Provider(format!("serializing record: {e}")))?;
                    writeln!(guard.file, "{line}")?;
                    guard.file.flush()?;
                    guard.cache.insert(fp, reply.content.clone());
                }
                Ok(CompletionResponse {
                    content: reply.content,
                    usage: reply.usage,
                })
            }
        }
    }

    fn call_with_retry(&self, request: &CompletionRequest) -> Result<ProviderReply, GatewayError> {
        let provider = self
            .provider
            .as_ref()
            .expect("live/record gateway always holds a provider");
        let mut last = String::new();
        for attempt in 0..self.retry.attempts {
            if attempt > 0 {
                let factor = 2u32.saturating_pow((attempt - 1).min(16));
                std::thread::sleep(self.retry.base_backoff.saturating_mul(factor));
            }
            match provider.complete(request) {
                Ok(reply) => return Ok(reply),
                Err(ProviderFailure::Transient(e)) => last = e,
                Err(ProviderFailure::Fatal(e)) => return Err(GatewayError::Provider(e)),
            }
        }
        Err(GatewayError::Transport {
            attempts: self.retry.attempts,
            last,
        })
    }
}

/// One pipeline stage's view of the gateway: a model id, sampling settings,
/// and a prompt-in/text-out call.
#[derive(Clone)]
pub struct LlmStage {
    pub gateway: Arc<Gateway>,
    pub model_id: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl LlmStage {
    pub fn new(
        gateway: Arc<Gateway>,
        model_id: impl Into<String>,
        temperature: f64,
        max_tokens: u32,
    ) -> Self {
        Self {
            gateway,
            model_id: model_id.into(),
            temperature,
            max_tokens,
        }
    }

    pub fn ask(&self, prompt: &str) -> Result<String, GatewayError> {
        let request = CompletionRequest::single_user(
            &self.model_id,
            self.temperature,
            self.max_tokens,
            prompt,
        );
        Ok(self.gateway.complete(&request)?.content)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::io::Read;
    use std::sync::atomic::{AtomicU32, Ordering};

    fn request(prompt: &str) -> CompletionRequest {
        CompletionRequest::single_user("test-model", 0.0, 256, prompt)
    }

    #[test]
    fn fingerprint_is_deterministic() {
        let p = request("what is 6*7?");
        assert_eq!(fingerprint(&p), fingerprint(&p.clone()));
    }

    #[test]
    fn fingerprint_distinguishes_structure() {
        let p = request("hello");
        let mut q = p.clone();
        q.messages.push(ChatMessage::assistant("hi"));
        assert_ne!(fingerprint(&p), fingerprint(&q));

        let mut r = p.clone();
        r.temperature = 0.5;
        assert_ne!(fingerprint(&p), fingerprint(&r));

        let mut s = p.clone();
        s.messages[0].content = "hellp".into();
        assert_ne!(fingerprint(&p), fingerprint(&s));
    }

    #[test]
    fn boundary_shifts_do_not_collide() {
        // Same total text, different message split.
        let a = CompletionRequest {
            messages: vec![ChatMessage::user("ab"), ChatMessage::user("c")],
            model_id: "m".into(),
            temperature: 0.0,
            max_tokens: 16,
        };
        let b = CompletionRequest {
            messages: vec![ChatMessage::user("a"), ChatMessage::user("bc")],
            model_id: "m".into(),
            temperature: 0.0,
            max_tokens: 16,
        };
        assert_ne!(fingerprint(&a), fingerprint(&b));
    }

    // Drawn from a deliberately tiny space so genuinely equal pairs occur.
    fn random_request(rng: &mut ChaCha8Rng) -> CompletionRequest {
        let n_messages = rng.random_range(1..=2);
        let messages = (0..n_messages)
            .map(|_| {
                let role = match rng.random_range(0..3) {
                    0 => Role::System,
                    1 => Role::User,
                    _ => Role::Assistant,
                };
                let len = rng.random_range(0..=2);
                let content: String = (0..len)
                    .map(|_| char::from(rng.random_range(b'a'..=b'b')))
                    .collect();
                ChatMessage { role, content }
            })
            .collect();
        CompletionRequest {
            messages,
            model_id: "m".into(),
            temperature: if rng.random_bool(0.5) { 0.0 } else { 0.7 },
            max_tokens: rng.random_range(1..3),
        }
    }

    #[test]
    fn no_false_merges_on_random_request_pairs() {
        // Oracle: brute-force structural equality. Small alphabets force
        // plenty of genuinely equal pairs, so both directions get exercised.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut equal_pairs = 0;
        for _ in 0..10_000 {
            let a = random_request(&mut rng);
            let b = random_request(&mut rng);
            let fp_equal = fingerprint(&a) == fingerprint(&b);
            let really_equal = a == b;
            assert_eq!(fp_equal, really_equal, "a={a:?} b={b:?}");
            if really_equal {
                equal_pairs += 1;
            }
        }
        assert!(equal_pairs > 0, "oracle never saw an equal pair");
    }

    #[test]
    fn replay_returns_recorded_content() {
        let p = request("the answer?");
        let mut transcript = Transcript::new();
        transcript.insert(fingerprint(&p), "42".into());
        let gateway = Gateway::replay(transcript);
        assert_eq!(gateway.complete(&p).unwrap().content, "42");
        // Stateless: a second call is identical.
        assert_eq!(gateway.complete(&p).unwrap().content, "42");
    }

    #[test]
    fn replay_is_order_independent() {
        let a = request("first");
        let b = request("second");
        let mut transcript = Transcript::new();
        transcript.insert(fingerprint(&a), "A".into());
        transcript.insert(fingerprint(&b), "B".into());

        let gateway = Gateway::replay(transcript.clone());
        let forward = (
            gateway.complete(&a).unwrap().content,
            gateway.complete(&b).unwrap().content,
        );
        let gateway = Gateway::replay(transcript);
        let reversed = (
            gateway.complete(&b).unwrap().content,
            gateway.complete(&a).unwrap().content,
        );
        assert_eq!(forward.0, reversed.1);
        assert_eq!(forward.1, reversed.0);
    }

    #[test]
    fn replay_miss_names_the_fingerprint() {
        let gateway = Gateway::replay(Transcript::new());
        let err = gateway.complete(&request("unknown")).unwrap_err();
        match err {
            GatewayError::ReplayMiss {
                fingerprint: fp, ..
            } => assert_eq!(fp.len(), 64),
            other => panic!("expected ReplayMiss, got {other:?}"),
        }
    }

    struct FlakyProvider {
        calls: AtomicU32,
        succeed_after: u32,
    }

    impl Provider for FlakyProvider {
        fn complete(&self, _: &CompletionRequest) -> Result<ProviderReply, ProviderFailure> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst) + 1;
            if n > self.succeed_after {
                Ok(ProviderReply {
                    content: format!("ok after {n}"),
                    usage: Usage::default(),
                })
            } else {
                Err(ProviderFailure::Transient("connection reset".into()))
            }
        }
    }

    #[test]
    fn retries_are_bounded() {
        let provider = Arc::new(FlakyProvider {
            calls: AtomicU32::new(0),
            succeed_after: u32::MAX,
        });
        let gateway = Gateway::live(
            provider.clone(),
            RetryPolicy {
                attempts: 3,
                base_backoff: Duration::from_millis(1),
            },
        );
        let err = gateway.complete(&request("x")).unwrap_err();
        assert!(matches!(err, GatewayError::Transport { attempts: 3, .. }));
        assert_eq!(provider.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn transient_failures_recover_within_budget() {
        let provider = Arc::new(FlakyProvider {
            calls: AtomicU32::new(0),
            succeed_after: 2,
        });
        let gateway = Gateway::live(
            provider,
            RetryPolicy {
                attempts: 3,
                base_backoff: Duration::from_millis(1),
            },
        );
        assert_eq!(
            gateway.complete(&request("x")).unwrap().content,
            "ok after 3"
        );
    }

    #[test]
    fn fatal_failures_do_not_retry() {
        struct FatalProvider(AtomicU32);
        impl Provider for FatalProvider {
            fn complete(&self, _: &CompletionRequest) -> Result<ProviderReply, ProviderFailure> {
                self.0.fetch_add(1, Ordering::SeqCst);
                Err(ProviderFailure::Fatal("401 unauthorized".into()))
            }
        }
        let provider = Arc::new(FatalProvider(AtomicU32::new(0)));
        let gateway = Gateway::live(provider.clone(), RetryPolicy::default());
        assert!(matches!(
            gateway.complete(&request("x")),
            Err(GatewayError::Provider(_))
        ));
        assert_eq!(provider.0.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn record_then_replay_matches_the_fixture_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("transcript.jsonl");
        let provider = Arc::new(
            ScriptedProvider::new()
                .rule(&["capital"], "Paris")
                .fallback("no idea"),
        );

        let recorder = Gateway::record(provider, &path, RetryPolicy::default()).unwrap();
        let p = request("capital of France?");
        let q = request("something else");
        assert_eq!(recorder.complete(&p).unwrap().content, "Paris");
        assert_eq!(recorder.complete(&q).unwrap().content, "no idea");
        // Duplicate request answered from the file, not appended twice.
        assert_eq!(recorder.complete(&p).unwrap().content, "Paris");
        drop(recorder);

        let mut raw = String::new();
        File::open(&path).unwrap().read_to_string(&mut raw).unwrap();
        assert_eq!(raw.lines().count(), 2);

        // Oracle: the recorded file itself. Replay must return its bytes.
        let replayer = Gateway::replay(Transcript::load(&path).unwrap());
        for line in raw.lines() {
            let record: serde_json::Value = serde_json::from_str(line).unwrap();
            let response = record["response"].as_str().unwrap();
            let fp = record["fingerprint"].as_str().unwrap();
            let got = if fp == fingerprint(&p) {
                replayer.complete(&p).unwrap().content
            } else {
                replayer.complete(&q).unwrap().content
            };
            assert_eq!(got.as_bytes(), response.as_bytes());
        }
    }

    #[test]
    fn scripted_provider_rule_order_wins() {
        let provider = ScriptedProvider::new()
            .rule(&["alpha", "beta"], "both")
            .rule(&["alpha"], "just alpha")
            .fallback("neither");
        let ask = |p: &str| provider.complete(&request(p)).unwrap().content;
        assert_eq!(ask("alpha and beta here"), "both");
        assert_eq!(ask("alpha only"), "just alpha");
        assert_eq!(ask("gamma"), "neither");
    }

    #[test]
    fn invalid_requests_are_rejected() {
        let gateway = Gateway::replay(Transcript::new());
        let empty = CompletionRequest {
            messages: vec![],
            model_id: "m".into(),
            temperature: 0.0,
            max_tokens: 1,
        };
        assert!(matches!(
            gateway.complete(&empty),
            Err(GatewayError::InvalidRequest(_))
        ));
    }

    fn serve(responses: Vec<(u16, String)>) -> (String, std::thread::JoinHandle<u32>) {
        crate::testutil::serve(
            responses
                .into_iter()
                .map(|(status, body)| crate::testutil::CannedResponse::json(status, body))
                .collect(),
        )
    }

    fn chat_body(content: &str) -> String {
        serde_json::json!({
            "choices": [{"message": {"role": "assistant", "content": content}}],
            "usage": {"prompt_tokens": 12, "completion_tokens": 3},
        })
        .to_string()
    }

    #[test]
    fn http_provider_round_trip() {
        let (addr, handle) = serve(vec![(200, chat_body("pong"))]);
        let provider = HttpProvider::new(addr, "key", Duration::from_secs(5));
        let reply = provider.complete(&request("ping")).unwrap();
        assert_eq!(reply.content, "pong");
        assert_eq!(reply.usage.prompt_tokens, 12);
        assert_eq!(handle.join().unwrap(), 1);
    }

    #[test]
    fn http_5xx_retries_then_succeeds() {
        let (addr, handle) = serve(vec![
            (500, "{\"error\":\"boom\"}".into()),
            (503, "{\"error\":\"busy\"}".into()),
            (200, chat_body("recovered")),
        ]);
        let provider = Arc::new(HttpProvider::new(addr, "key", Duration::from_secs(5)));
        let gateway = Gateway::live(
            provider,
            RetryPolicy {
                attempts: 3,
                base_backoff: Duration::from_millis(1),
            },
        );
        assert_eq!(
            gateway.complete(&request("x")).unwrap().content,
            "recovered"
        );
        assert_eq!(handle.join().unwrap(), 3);
    }

    #[test]
    fn http_4xx_is_fatal() {
        let (addr, handle) = serve(vec![(400, "{\"error\":\"bad request\"}".into())]);
        let provider = Arc::new(HttpProvider::new(addr, "key", Duration::from_secs(5)));
        let gateway = Gateway::live(provider, RetryPolicy::default());
        assert!(matches!(
            gateway.complete(&request("x")),
            Err(GatewayError::Provider(_))
        ));
        assert_eq!(handle.join().unwrap(), 1);
    }

    #[test]
    fn null_content_is_empty_not_an_error() {
        let body = serde_json::json!({
            "choices": [{"message": {"role": "assistant", "content": null}}],
        })
        .to_string();
        let (addr, _handle) = serve(vec![(200, body)]);
        let provider = HttpProvider::new(addr, "key", Duration::from_secs(5));
        assert_eq!(provider.complete(&request("x")).unwrap().content, "");
    }
}
