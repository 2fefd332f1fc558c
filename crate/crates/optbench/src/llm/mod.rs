//! Provider-agnostic chat-completion client with retry/backoff, a global
//! requests-per-minute cap, and a deterministic scripted mock used by the
//! whole test suite (no network in CI).

pub mod parse;
pub mod prompts;

pub use parse::{
    extract_code, extract_test_cases, extract_test_inputs, parse_sections, ParsedResponse,
    SectionLabel,
};
pub use prompts::{bindings, bindings_sha256, render, RenderedPrompt, TemplateName, TemplateSet};

use std::collections::{BTreeMap, VecDeque};
use std::fs;
use std::io::BufRead;
use std::path::Path;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("auth error: {0}")]
    Auth(String),
    #[error("rate limited / transient failures exhausted retries: {0}")]
    RateLimited(String),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("mock script has no entry for request (template {template:?})")]
    MockMiss { template: Option<String> },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("template {template} has unbound placeholder {{{placeholder}}}")]
    UnboundPlaceholder {
        template: String,
        placeholder: String,
    },
    #[error("reply is missing sections {missing:?} (found {found:?})")]
    MissingSection {
        missing: Vec<String>,
        found: Vec<String>,
    },
    #[error("empty reply")]
    EmptyReply,
}

impl LlmError {
    fn is_transient(&self) -> bool {
        matches!(self, LlmError::Transport(_) | LlmError::RateLimited(_))
    }
}

#[derive(Debug, Clone)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "user".into(),
            content: content.into(),
        }
    }
}

/// Fingerprint carried by requests built from a rendered template, used by
/// the scripted mock to match replies.
#[derive(Debug, Clone, PartialEq)]
pub struct Fingerprint {
    pub template: String,
    pub bindings_sha256: String,
}

#[derive(Debug, Clone)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub model: String,
    pub fingerprint: Option<Fingerprint>,
}

impl ChatRequest {
    pub fn from_prompt(prompt: &RenderedPrompt, temperature: f64) -> Self {
        ChatRequest {
            messages: vec![ChatMessage::user(prompt.text.clone())],
            temperature,
            max_tokens: 4096,
            model: String::new(),
            fingerprint: Some(Fingerprint {
                template: prompt.template.as_str().to_string(),
                bindings_sha256: prompt.bindings_sha256.clone(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CompletionStats {
    pub attempts: u32,
    pub elapsed: Duration,
}

// ---------------------------------------------------------------------------
// Mock backend
// ---------------------------------------------------------------------------

/// One scripted reply. `template`/`bindings_sha256` of `None` match
/// anything; `prompt_contains` requires every substring to appear in the
/// final user message. `transient_failures` injects that many retryable
/// errors before the reply is served.
#[derive(Debug)]
pub struct MockEntry {
    pub template: Option<String>,
    pub bindings_sha256: Option<String>,
    pub prompt_contains: Vec<String>,
    pub reply: String,
    transient_failures: AtomicU32,
}

impl Clone for MockEntry {
    fn clone(&self) -> Self {
        MockEntry {
            template: self.template.clone(),
            bindings_sha256: self.bindings_sha256.clone(),
            prompt_contains: self.prompt_contains.clone(),
            reply: self.reply.clone(),
            transient_failures: AtomicU32::new(self.transient_failures.load(Ordering::Relaxed)),
        }
    }
}

impl MockEntry {
    fn matches(&self, req: &ChatRequest) -> bool {
        if let Some(t) = &self.template {
            match &req.fingerprint {
                Some(fp) if &fp.template == t => {}
                _ => return false,
            }
        }
        if let Some(h) = &self.bindings_sha256 {
            match &req.fingerprint {
                Some(fp) if &fp.bindings_sha256 == h => {}
                _ => return false,
            }
        }
        if !self.prompt_contains.is_empty() {
            let content = req
                .messages
                .last()
                .map(|m| m.content.as_str())
                .unwrap_or("");
            if !self.prompt_contains.iter().all(|n| content.contains(n)) {
                return false;
            }
        }
        true
    }
}

/// Deterministic scripted replies keyed by request fingerprint. First
/// matching entry wins.
#[derive(Debug, Clone, Default)]
pub struct MockScript {
    entries: Vec<MockEntry>,
}

#[derive(Deserialize)]
struct MockEntryFile {
    #[serde(rename = "match", default)]
    matcher: MockMatcherFile,
    reply: String,
    #[serde(default)]
    transient_failures: u32,
}

#[derive(Deserialize, Default)]
struct MockMatcherFile {
    #[serde(default)]
    template: Option<String>,
    #[serde(default)]
    bindings_sha256: Option<String>,
    #[serde(default)]
    prompt_contains: Vec<String>,
}

impl MockScript {
    pub fn new() -> Self {
        Self::default()
    }

    /// Scripted reply for every request rendered from `template`.
    pub fn on_template(mut self, template: TemplateName, reply: &str) -> Self {
        self.entries.push(MockEntry {
            template: Some(template.as_str().to_string()),
            bindings_sha256: None,
            prompt_contains: Vec::new(),
            reply: reply.to_string(),
            transient_failures: AtomicU32::new(0),
        });
        self
    }

    /// Scripted reply for requests from `template` whose prompt contains all
    /// the given substrings. Listed before broader entries, wins.
    pub fn on_prompt(mut self, template: TemplateName, needles: &[&str], reply: &str) -> Self {
        self.entries.push(MockEntry {
            template: Some(template.as_str().to_string()),
            bindings_sha256: None,
            prompt_contains: needles.iter().map(|s| s.to_string()).collect(),
            reply: reply.to_string(),
            transient_failures: AtomicU32::new(0),
        });
        self
    }

    /// Catch-all reply for any request.
    pub fn on_any(mut self, reply: &str) -> Self {
        self.entries.push(MockEntry {
            template: None,
            bindings_sha256: None,
            prompt_contains: Vec::new(),
            reply: reply.to_string(),
            transient_failures: AtomicU32::new(0),
        });
        self
    }

    /// Inject `n` retryable failures before the most recently added entry
    /// starts answering.
    pub fn with_transient_failures(self, n: u32) -> Self {
        if let Some(last) = self.entries.last() {
            last.transient_failures.store(n, Ordering::Relaxed);
        }
        self
    }

    /// Load entries from JSONL:
    /// `{"match": {"template": ..., "bindings_sha256": ..., "prompt_contains": [...]}, "reply": ..., "transient_failures": n}`
    pub fn from_jsonl(path: &Path) -> Result<Self, LlmError> {
        let file = fs::File::open(path)
            .map_err(|e| LlmError::Transport(format!("mock script {}: {e}", path.display())))?;
        let mut script = MockScript::new();
        for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| LlmError::Transport(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: MockEntryFile = serde_json::from_str(&line)
                .map_err(|e| LlmError::Malformed(format!("mock script line {}: {e}", i + 1)))?;
            let wildcard = |s: Option<String>| s.filter(|v| v != "*");
            script.entries.push(MockEntry {
                template: wildcard(entry.matcher.template),
                bindings_sha256: wildcard(entry.matcher.bindings_sha256),
                prompt_contains: entry.matcher.prompt_contains,
                reply: entry.reply,
                transient_failures: AtomicU32::new(entry.transient_failures),
            });
        }
        Ok(script)
    }

    fn lookup(&self, req: &ChatRequest) -> Result<String, LlmError> {
        for entry in &self.entries {
            if entry.matches(req) {
                let pending = entry.transient_failures.load(Ordering::Relaxed);
                if pending > 0 {
                    entry
                        .transient_failures
                        .store(pending - 1, Ordering::Relaxed);
                    return Err(LlmError::Transport("scripted transient failure".into()));
                }
                return Ok(entry.reply.clone());
            }
        }
        Err(LlmError::MockMiss {
            template: req.fingerprint.as_ref().map(|f| f.template.clone()),
        })
    }
}

// ---------------------------------------------------------------------------
// Client
// ---------------------------------------------------------------------------

/// Sliding-window admission: at most `cap` admissions inside any
/// `window`-long interval. `admit` either records the dispatch or reports
/// how long to wait.
#[derive(Debug)]
struct SlidingWindow {
    cap: usize,
    window: Duration,
    log: VecDeque<Instant>,
}

impl SlidingWindow {
    fn new(cap: usize, window: Duration) -> Self {
        SlidingWindow {
            cap: cap.max(1),
            window,
            log: VecDeque::new(),
        }
    }

    fn admit(&mut self, now: Instant) -> Result<(), Duration> {
        while self
            .log
            .front()
            .map(|t| now.duration_since(*t) >= self.window)
            .unwrap_or(false)
        {
            self.log.pop_front();
        }
        if self.log.len() < self.cap {
            self.log.push_back(now);
            Ok(())
        } else {
            Err(self.window - now.duration_since(*self.log.front().unwrap()))
        }
    }
}

#[derive(Debug)]
enum Backend {
    Http {
        endpoint: String,
        key_env: String,
        model: String,
        http: reqwest::blocking::Client,
    },
    Mock(MockScript),
}

/// Shareable chat client. The rate cap and concurrency limit are enforced
/// per client instance across threads.
pub struct LlmClient {
    backend: Backend,
    max_retries: u32,
    backoff_base: Duration,
    limiter: Mutex<SlidingWindow>,
    inflight: Mutex<usize>,
    inflight_cv: Condvar,
    concurrency: usize,
}

impl LlmClient {
    pub fn mock(script: MockScript) -> Self {
        LlmClient {
            backend: Backend::Mock(script),
            max_retries: 3,
            backoff_base: Duration::from_millis(10),
            limiter: Mutex::new(SlidingWindow::new(600, Duration::from_secs(60))),
            inflight: Mutex::new(0),
            inflight_cv: Condvar::new(),
            concurrency: 8,
        }
    }

    pub fn http(endpoint: &str, model: &str, key_env: &str) -> Self {
        LlmClient {
            backend: Backend::Http {
                endpoint: endpoint.to_string(),
                key_env: key_env.to_string(),
                model: model.to_string(),
                http: reqwest::blocking::Client::builder()
                    .timeout(Duration::from_secs(120))
                    .build()
                    .expect("http client"),
            },
            max_retries: 3,
            backoff_base: Duration::from_millis(500),
            limiter: Mutex::new(SlidingWindow::new(60, Duration::from_secs(60))),
            inflight: Mutex::new(0),
            inflight_cv: Condvar::new(),
            concurrency: 4,
        }
    }

    pub fn with_rate_limit(self, rpm: u32, window: Duration) -> Self {
        *self.limiter.lock().unwrap() = SlidingWindow::new(rpm as usize, window);
        self
    }

    pub fn with_concurrency(mut self, n: usize) -> Self {
        self.concurrency = n.max(1);
        self
    }

    pub fn with_retries(mut self, max_retries: u32, backoff_base: Duration) -> Self {
        self.max_retries = max_retries;
        self.backoff_base = backoff_base;
        self
    }

    pub fn is_mock(&self) -> bool {
        matches!(self.backend, Backend::Mock(_))
    }

    /// Block until dispatching one more request keeps every window-long
    /// interval at or under the cap.
    fn rate_acquire(&self) {
        loop {
            let decision = self.limiter.lock().unwrap().admit(Instant::now());
            match decision {
                Ok(()) => return,
                Err(d) => std::thread::sleep(d.max(Duration::from_millis(1))),
            }
        }
    }

    fn dispatch(&self, req: &ChatRequest) -> Result<String, LlmError> {
        match &self.backend {
            Backend::Mock(script) => script.lookup(req),
            Backend::Http {
                endpoint,
                key_env,
                model,
                http,
            } => {
                let key = std::env::var(key_env).map_err(|_| {
                    LlmError::Auth(format!("environment variable {key_env} not set"))
                })?;
                let model = if req.model.is_empty() {
                    model
                } else {
                    &req.model
                };
                let body = serde_json::json!({
                    "model": model,
                    "messages": req.messages.iter().map(|m| {
                        serde_json::json!({"role": m.role, "content": m.content})
                    }).collect::<Vec<_>>(),
                    "temperature": req.temperature,
                    "max_tokens": req.max_tokens,
                });
                let resp = http
                    .post(endpoint)
                    .bearer_auth(key)
                    .json(&body)
                    .send()
                    .map_err(|e| LlmError::Transport(e.to_string()))?;
                let status = resp.status();
                if status.as_u16() == 401 || status.as_u16() == 403 {
                    return Err(LlmError::Auth(format!("HTTP {status}")));
                }
                if status.as_u16() == 429 || status.is_server_error() {
                    return Err(LlmError::Transport(format!("HTTP {status}")));
                }
                if !status.is_success() {
                    return Err(LlmError::Malformed(format!("HTTP {status}")));
                }
                let json: serde_json::Value = resp
                    .json()
                    .map_err(|e| LlmError::Malformed(e.to_string()))?;
                json.get("choices")
                    .and_then(|c| c.get(0))
                    .and_then(|c| c.get("message"))
                    .and_then(|m| m.get("content"))
                    .and_then(|c| c.as_str())
                    .map(|s| s.to_string())
                    .ok_or_else(|| {
                        LlmError::Malformed("no choices[0].message.content in response".into())
                    })
            }
        }
    }

    /// Complete a request, retrying transient failures with exponential
    /// backoff (up to `max_retries` retries).
    pub fn complete(&self, req: &ChatRequest) -> Result<String, LlmError> {
        self.complete_with_stats(req).map(|(text, _)| text)
    }

    pub fn complete_with_stats(
        &self,
        req: &ChatRequest,
    ) -> Result<(String, CompletionStats), LlmError> {
        // fail fast on missing credentials, before any dispatch
        if let Backend::Http { key_env, .. } = &self.backend {
            if std::env::var(key_env).is_err() {
                return Err(LlmError::Auth(format!(
                    "environment variable {key_env} not set"
                )));
            }
        }
        let start = Instant::now();
        let _slot = self.acquire_slot();
        let mut attempts = 0u32;
        let mut last_err = None;
        while attempts <= self.max_retries {
            self.rate_acquire();
            attempts += 1;
            match self.dispatch(req) {
                Ok(text) => {
                    return Ok((
                        text,
                        CompletionStats {
                            attempts,
                            elapsed: start.elapsed(),
                        },
                    ))
                }
                Err(e) if e.is_transient() && attempts <= self.max_retries => {
                    log::warn!("transient llm failure (attempt {attempts}): {e}");
                    std::thread::sleep(self.backoff_base * 2u32.saturating_pow(attempts - 1));
                    last_err = Some(e);
                }
                Err(e) if e.is_transient() => return Err(LlmError::RateLimited(e.to_string())),
                Err(e) => return Err(e),
            }
        }
        Err(LlmError::RateLimited(
            last_err.map(|e| e.to_string()).unwrap_or_default(),
        ))
    }

    fn acquire_slot(&self) -> SlotGuard<'_> {
        let mut inflight = self.inflight.lock().unwrap();
        while *inflight >= self.concurrency {
            inflight = self.inflight_cv.wait(inflight).unwrap();
        }
        *inflight += 1;
        SlotGuard { client: self }
    }

    /// Render a template and complete it in one step.
    pub fn ask(
        &self,
        templates: &TemplateSet,
        name: TemplateName,
        bindings: &BTreeMap<String, String>,
        temperature: f64,
    ) -> Result<(String, CompletionStats), LlmError> {
        let prompt = render(templates, name, bindings)?;
        let req = ChatRequest::from_prompt(&prompt, temperature);
        self.complete_with_stats(&req)
    }
}

struct SlotGuard<'a> {
    client: &'a LlmClient,
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        let mut inflight = self.client.inflight.lock().unwrap();
        *inflight -= 1;
        self.client.inflight_cv.notify_one();
    }
}

/// The three-label optimization taxonomy retained as an optional
/// classification op.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptType {
    GlobalAlgorithmic,
    Local,
    Other,
}

pub fn classify_opt_type(
    client: &LlmClient,
    templates: &TemplateSet,
    slow_src: &str,
    fast_src: &str,
) -> Result<OptType, LlmError> {
    let b = bindings(&[("slow_code", slow_src), ("fast_code", fast_src)]);
    let (reply, _) = client.ask(templates, TemplateName::OptTypeClassify, &b, 0.0)?;
    let lower = reply.to_ascii_lowercase();
    Ok(if lower.contains("global") {
        OptType::GlobalAlgorithmic
    } else if lower.contains("local") {
        OptType::Local
    } else {
        OptType::Other
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req_for(template: TemplateName, text: &str) -> ChatRequest {
        ChatRequest {
            messages: vec![ChatMessage::user(text)],
            temperature: 0.0,
            max_tokens: 256,
            model: String::new(),
            fingerprint: Some(Fingerprint {
                template: template.as_str().to_string(),
                bindings_sha256: "x".into(),
            }),
        }
    }

    #[test]
    fn mock_returns_canned_reply() {
        let client =
            LlmClient::mock(MockScript::new().on_template(TemplateName::AnchorStage1, "canned"));
        let out = client
            .complete(&req_for(TemplateName::AnchorStage1, "whatever"))
            .unwrap();
        assert_eq!(out, "canned");
    }

    #[test]
    fn mock_miss_is_an_error() {
        let client = LlmClient::mock(MockScript::new());
        let err = client
            .complete(&req_for(TemplateName::Instruct, "x"))
            .unwrap_err();
        assert!(matches!(err, LlmError::MockMiss { .. }));
    }

    #[test]
    fn prompt_contains_matching_wins_over_broad_entries() {
        let script = MockScript::new()
            .on_prompt(TemplateName::AnchorStage3Refine, &["MARKER_B"], "specific")
            .on_template(TemplateName::AnchorStage3Refine, "generic");
        let client = LlmClient::mock(script);
        let hit = client
            .complete(&req_for(
                TemplateName::AnchorStage3Refine,
                "has MARKER_B inside",
            ))
            .unwrap();
        assert_eq!(hit, "specific");
        let miss = client
            .complete(&req_for(TemplateName::AnchorStage3Refine, "nothing"))
            .unwrap();
        assert_eq!(miss, "generic");
    }

    #[test]
    fn transient_failures_then_success_in_three_attempts() {
        let script = MockScript::new()
            .on_template(TemplateName::Instruct, "ok")
            .with_transient_failures(2);
        let client = LlmClient::mock(script);
        let (out, stats) = client
            .complete_with_stats(&req_for(TemplateName::Instruct, "x"))
            .unwrap();
        assert_eq!(out, "ok");
        assert_eq!(stats.attempts, 3);
    }

    #[test]
    fn retries_exhaust_into_rate_limited() {
        let script = MockScript::new()
            .on_template(TemplateName::Instruct, "late")
            .with_transient_failures(10);
        let client = LlmClient::mock(script).with_retries(2, Duration::from_millis(1));
        let err = client
            .complete(&req_for(TemplateName::Instruct, "x"))
            .unwrap_err();
        assert!(matches!(err, LlmError::RateLimited(_)));
    }

    #[test]
    fn missing_key_env_fails_before_any_dispatch() {
        let client = LlmClient::http(
            "http://127.0.0.1:1/v1/chat/completions",
            "m",
            "OPTBENCH_TEST_KEY_THAT_DOES_NOT_EXIST",
        );
        let err = client
            .complete(&req_for(TemplateName::Instruct, "x"))
            .unwrap_err();
        assert!(matches!(err, LlmError::Auth(_)));
    }

    #[test]
    fn sliding_window_never_admits_more_than_cap_per_window() {
        // deterministic property: drive the admission logic with a
        // synthetic clock over randomized arrival gaps and check that no
        // window-long interval ever holds more than `cap` dispatches
        use rand::{Rng, SeedableRng};
        let window = Duration::from_secs(60);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for cap in [1usize, 3, 10] {
            let mut sw = SlidingWindow::new(cap, window);
            let base = Instant::now();
            let mut clock = base;
            let mut admitted: Vec<Instant> = Vec::new();
            for _ in 0..200 {
                clock += Duration::from_millis(rng.gen_range(0..30_000));
                loop {
                    match sw.admit(clock) {
                        Ok(()) => {
                            admitted.push(clock);
                            break;
                        }
                        Err(wait) => {
                            assert!(wait <= window);
                            clock += wait;
                        }
                    }
                }
            }
            for (i, start) in admitted.iter().enumerate() {
                let in_window = admitted[i..]
                    .iter()
                    .take_while(|t| t.duration_since(*start) < window)
                    .count();
                assert!(
                    in_window <= cap,
                    "cap {cap}: window starting at dispatch {i} holds {in_window}"
                );
            }
        }
    }

    #[test]
    fn rate_cap_paces_the_mock_backend() {
        // 7 requests at cap 3 per 150ms need at least two full windows;
        // scheduling load can only make this slower, never faster
        let window = Duration::from_millis(150);
        let client = LlmClient::mock(MockScript::new().on_any("r")).with_rate_limit(3, window);
        let req = req_for(TemplateName::Instruct, "x");
        let started = Instant::now();
        for _ in 0..7 {
            client.complete(&req).unwrap();
        }
        assert!(
            started.elapsed() >= Duration::from_millis(290),
            "7 dispatches at 3-per-150ms finished too fast: {:?}",
            started.elapsed()
        );
    }

    #[test]
    fn jsonl_script_loading() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("script.jsonl");
        std::fs::write(
            &path,
            r#"{"match": {"template": "instruct", "bindings_sha256": "*"}, "reply": "hi"}
{"match": {"prompt_contains": ["zap"]}, "reply": "zapped"}
"#,
        )
        .unwrap();
        let client = LlmClient::mock(MockScript::from_jsonl(&path).unwrap());
        assert_eq!(
            client
                .complete(&req_for(TemplateName::Instruct, "x"))
                .unwrap(),
            "hi"
        );
        let mut req = req_for(TemplateName::SelfDebugging, "zap me");
        req.fingerprint = None;
        assert_eq!(client.complete(&req).unwrap(), "zapped");
    }

    #[test]
    fn classify_parses_categories() {
        let t = TemplateSet::default();
        for (reply, want) in [
            (
                "Global algorithmic optimization",
                OptType::GlobalAlgorithmic,
            ),
            ("local optimization", OptType::Local),
            ("code cleanup", OptType::Other),
        ] {
            let client = LlmClient::mock(
                MockScript::new().on_template(TemplateName::OptTypeClassify, reply),
            );
            assert_eq!(classify_opt_type(&client, &t, "a", "b").unwrap(), want);
        }
    }
}
