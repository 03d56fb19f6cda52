use std::sync::{Condvar, Mutex};
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{BackendError, DecodingConfig, LanguageBackend, RecordProbe};
use crate::pipeline::Context;

/// JSON field names used on the wire. Defaults follow the bundled protocol;
/// override them to talk to other completion servers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldNames {
    pub prompt: String,
    pub max_tokens: String,
    pub temperature: String,
    pub beam_width: String,
    pub seed: String,
    pub text: String,
}

impl Default for FieldNames {
    fn default() -> Self {
        Self {
            prompt: "prompt".into(),
            max_tokens: "max_tokens".into(),
            temperature: "temperature".into(),
            beam_width: "beam_width".into(),
            seed: "seed".into(),
            text: "text".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    pub url: String,
    #[serde(skip_serializing)]
    pub token: Option<String>,
    pub fields: FieldNames,
    pub timeout_ms: u64,
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub max_in_flight: usize,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            url: String::new(),
            token: None,
            fields: FieldNames::default(),
            timeout_ms: 30_000,
            max_attempts: 3,
            initial_backoff_ms: 250,
            max_in_flight: 4,
        }
    }
}

impl RemoteConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            ..Self::default()
        }
    }

    /// Fills `url` and `token` from `COQ_BACKEND_URL` / `COQ_BACKEND_TOKEN`
    /// where they are unset.
    pub fn with_env(mut self) -> Self {
        if self.url.is_empty() {
            if let Ok(url) = std::env::var("COQ_BACKEND_URL") {
                self.url = url;
            }
        }
        if self.token.is_none() {
            self.token = std::env::var("COQ_BACKEND_TOKEN").ok().filter(|t| !t.is_empty());
        }
        self
    }
}

/// Counting gate bounding concurrent requests.
#[derive(Debug)]
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn new(permits: usize) -> Self {
        Self {
            free: Mutex::new(permits),
            cv: Condvar::new(),
        }
    }

    fn enter(&self) -> GateGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

enum Failure {
    Retryable(String),
    Fatal(BackendError),
}

/// Blocking client for the single-endpoint completion protocol.
#[derive(Debug)]
pub struct RemoteBackend {
    config: RemoteConfig,
    agent: ureq::Agent,
    gate: Gate,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Result<Self, BackendError> {
        if config.url.is_empty() {
            return Err(BackendError::Config(
                "remote backend needs a URL (flag or COQ_BACKEND_URL)".into(),
            ));
        }
        if config.max_attempts == 0 || config.max_in_flight == 0 {
            return Err(BackendError::Config(
                "max_attempts and max_in_flight must be at least 1".into(),
            ));
        }
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build();
        let gate = Gate::new(config.max_in_flight);
        Ok(Self {
            config,
            agent,
            gate,
        })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    /// Request body for `prompt`. The prompt is sent unmodified.
    pub fn request_body(&self, prompt: &str, decoding: &DecodingConfig) -> Value {
        let f = &self.config.fields;
        let mut body = Map::new();
        body.insert(f.prompt.clone(), Value::from(prompt));
        body.insert(f.max_tokens.clone(), Value::from(decoding.max_tokens));
        if let Some(t) = decoding.effective_temperature() {
            body.insert(f.temperature.clone(), Value::from(t));
        }
        if let Some(w) = decoding.effective_beam_width() {
            body.insert(f.beam_width.clone(), Value::from(w));
        }
        if let Some(s) = decoding.seed {
            body.insert(f.seed.clone(), Value::from(s));
        }
        Value::Object(body)
    }

    pub fn complete(&self, prompt: &str, decoding: &DecodingConfig) -> Result<String, BackendError> {
        let body = self.request_body(prompt, decoding);
        log::debug!("POST {} {}", self.config.url, body);
        let _permit = self.gate.enter();
        let mut backoff = Duration::from_millis(self.config.initial_backoff_ms);
        let mut last = String::new();
        for attempt in 1..=self.config.max_attempts {
            match self.send_once(&body) {
                Ok(text) => return Ok(text),
                Err(Failure::Fatal(err)) => return Err(err),
                Err(Failure::Retryable(msg)) => {
                    log::warn!("attempt {attempt}/{} failed: {msg}", self.config.max_attempts);
                    last = msg;
                }
            }
            if attempt < self.config.max_attempts {
                let jitter_ms = rand::thread_rng().gen_range(0..=backoff.as_millis() as u64 / 2);
                std::thread::sleep(backoff + Duration::from_millis(jitter_ms));
                backoff *= 2;
            }
        }
        Err(BackendError::Transport {
            attempts: self.config.max_attempts,
            message: last,
        })
    }

    fn send_once(&self, body: &Value) -> Result<String, Failure> {
        let mut req = self.agent.post(&self.config.url);
        if let Some(token) = &self.config.token {
            req = req.set("Authorization", &format!("Bearer {token}"));
        }
        let resp = match req.send_json(body) {
            Ok(resp) => resp,
            Err(ureq::Error::Status(code, _)) if code == 429 || code >= 500 => {
                return Err(Failure::Retryable(format!("HTTP {code}")));
            }
            Err(ureq::Error::Status(code, _)) => {
                return Err(Failure::Fatal(BackendError::Transport {
                    attempts: 1,
                    message: format!("HTTP {code}"),
                }));
            }
            Err(ureq::Error::Transport(t)) => return Err(Failure::Retryable(t.to_string())),
        };
        let raw = resp
            .into_string()
            .map_err(|e| Failure::Retryable(format!("reading body: {e}")))?;
        let value: Value = serde_json::from_str(&raw)
            .map_err(|e| Failure::Fatal(BackendError::MalformedResponse(format!("{e}: {raw}"))))?;
        value
            .get(&self.config.fields.text)
            .and_then(Value::as_str)
            .map(String::from)
            .ok_or_else(|| {
                Failure::Fatal(BackendError::MalformedResponse(format!(
                    "missing string field `{}`",
                    self.config.fields.text
                )))
            })
    }
}

impl LanguageBackend for RemoteBackend {
    fn id(&self) -> String {
        format!("remote:{}", self.config.url)
    }

    fn complete_questions(
        &self,
        fewshot_prompt: &str,
        decoding: &DecodingConfig,
        _probe: &RecordProbe<'_>,
    ) -> Result<String, BackendError> {
        self.complete(fewshot_prompt, decoding)
    }

    fn complete_answer(
        &self,
        answer_prompt: &str,
        _context: &Context,
        decoding: &DecodingConfig,
    ) -> Result<String, BackendError> {
        self.complete(answer_prompt, decoding)
    }
}
