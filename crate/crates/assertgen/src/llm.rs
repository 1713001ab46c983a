//! Chat backends: live HTTP, replay from a script, and a recorder.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use assertgen_core::dialogue::{BackendError, ChatBackend, GenerationConfig};
use assertgen_core::model::{Role, Transcript};

/// One line of a record/replay file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayTurn {
    pub entry_id: String,
    pub ordinal: usize,
    #[serde(default)]
    pub request_hash: Option<String>,
    pub response: String,
}

fn sha256_hex(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    hex::encode(h.finalize())
}

/// Stable key of the `ordinal`-th user turn of an entry's dialogue.
pub fn turn_key(entry_id: &str, ordinal: usize) -> String {
    sha256_hex(&[entry_id.as_bytes(), b"\0", ordinal.to_string().as_bytes()])
}

pub fn request_hash(message: &str) -> String {
    sha256_hex(&[message.as_bytes()])
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayFileError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}: {msg}")]
    Line { path: String, line: usize, msg: String },
}

/// Returns scripted responses keyed by (entry id, turn ordinal).
#[derive(Debug, Default)]
pub struct ReplayBackend {
    turns: HashMap<String, ReplayTurn>,
}

impl ReplayBackend {
    pub fn from_turns(turns: impl IntoIterator<Item = ReplayTurn>) -> Self {
        ReplayBackend {
            turns: turns
                .into_iter()
                .map(|t| (turn_key(&t.entry_id, t.ordinal), t))
                .collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, ReplayFileError> {
        let shown = path.display().to_string();
        let file = File::open(path).map_err(|source| ReplayFileError::Io { path: shown.clone(), source })?;
        let mut turns = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|source| ReplayFileError::Io { path: shown.clone(), source })?;
            if line.trim().is_empty() {
                continue;
            }
            let turn: ReplayTurn = serde_json::from_str(&line).map_err(|e| ReplayFileError::Line {
                path: shown.clone(),
                line: n + 1,
                msg: e.to_string(),
            })?;
            turns.push(turn);
        }
        Ok(Self::from_turns(turns))
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }
}

impl ChatBackend for ReplayBackend {
    fn respond(&self, history: &Transcript, message: &str, _cfg: &GenerationConfig) -> Result<String, BackendError> {
        let ordinal = history.user_turns();
        let turn = self
            .turns
            .get(&turn_key(&history.entry_id, ordinal))
            .ok_or_else(|| BackendError::ReplayMiss { entry_id: history.entry_id.clone(), ordinal })?;
        if let Some(expected) = &turn.request_hash {
            if *expected != request_hash(message) {
                log::warn!(
                    "{} turn {ordinal}: prompt differs from the recorded one",
                    history.entry_id
                );
            }
        }
        Ok(turn.response.clone())
    }
}

/// Passes requests to `inner` and appends every exchange to a replay file.
pub struct RecordingBackend<B> {
    inner: B,
    out: Mutex<File>,
}

impl<B: ChatBackend> RecordingBackend<B> {
    pub fn create(inner: B, path: &Path) -> std::io::Result<Self> {
        let out = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(RecordingBackend { inner, out: Mutex::new(out) })
    }
}

impl<B: ChatBackend> ChatBackend for RecordingBackend<B> {
    fn respond(&self, history: &Transcript, message: &str, cfg: &GenerationConfig) -> Result<String, BackendError> {
        let response = self.inner.respond(history, message, cfg)?;
        let turn = ReplayTurn {
            entry_id: history.entry_id.clone(),
            ordinal: history.user_turns(),
            request_hash: Some(request_hash(message)),
            response: response.clone(),
        };
        let line = serde_json::to_string(&turn).expect("replay turn serializes");
        let mut out = self.out.lock().unwrap_or_else(|p| p.into_inner());
        writeln!(out, "{line}").map_err(|e| BackendError::Unavailable(format!("record file: {e}")))?;
        Ok(response)
    }
}

/// OpenAI-style chat-completions endpoint.
pub struct LiveBackend {
    endpoint: String,
    api_key: String,
    client: reqwest::blocking::Client,
    backoff: Duration,
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    temperature: f64,
    messages: Vec<WireMessage<'a>>,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireReply,
}

#[derive(Deserialize)]
struct WireReply {
    #[serde(default)]
    content: Option<String>,
}

fn role_name(r: Role) -> &'static str {
    match r {
        Role::System => "system",
        Role::User => "user",
        Role::Assistant => "assistant",
    }
}

enum Attempt {
    Retry(String),
    Fatal(BackendError),
}

impl LiveBackend {
    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>, timeout: Duration) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        Ok(LiveBackend {
            endpoint: endpoint.into(),
            api_key: api_key.into(),
            client,
            backoff: Duration::from_millis(500),
        })
    }

    /// First retry delay; doubled after each failure.
    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    fn attempt(&self, body: &WireRequest) -> Result<String, Attempt> {
        let resp = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(body)
            .send()
            .map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| Attempt::Retry(e.to_string()))?;
        if status.is_success() {
            let parsed: WireResponse = serde_json::from_str(&text)
                .map_err(|e| Attempt::Fatal(BackendError::Unavailable(format!("bad response body: {e}"))))?;
            return parsed
                .choices
                .into_iter()
                .next()
                .and_then(|c| c.message.content)
                .ok_or_else(|| Attempt::Fatal(BackendError::Unavailable("response has no message".into())));
        }
        if status.as_u16() == 400 && text.contains("context_length") {
            return Err(Attempt::Fatal(BackendError::ContextOverflow(text)));
        }
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(Attempt::Retry(format!("HTTP {status}")));
        }
        Err(Attempt::Fatal(BackendError::Unavailable(format!("HTTP {status}: {text}"))))
    }
}

impl ChatBackend for LiveBackend {
    fn respond(&self, history: &Transcript, message: &str, cfg: &GenerationConfig) -> Result<String, BackendError> {
        let mut messages: Vec<WireMessage> = history
            .turns
            .iter()
            .map(|t| WireMessage { role: role_name(t.role), content: &t.text })
            .collect();
        messages.push(WireMessage { role: "user", content: message });
        let body = WireRequest { model: &cfg.model_name, temperature: cfg.temperature, messages };
        let mut delay = self.backoff;
        let mut last = String::new();
        for attempt in 0..=cfg.max_retries {
            if attempt > 0 {
                thread::sleep(delay);
                delay *= 2;
            }
            match self.attempt(&body) {
                Ok(mut text) => {
                    if let Some((cut, _)) = text.char_indices().nth(cfg.max_response_chars) {
                        text.truncate(cut);
                    }
                    return Ok(text);
                }
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(e)) => {
                    log::warn!("{} attempt {}: {e}", history.entry_id, attempt + 1);
                    last = e;
                }
            }
        }
        Err(BackendError::Unavailable(format!("gave up after {} retries: {last}", cfg.max_retries)))
    }
}
