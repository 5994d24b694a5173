//! Model clients used by the rectifier and the theorem predictor.
//!
//! The HTTP backend speaks the OpenAI-compatible chat-completions format.
//! Canned, replay, and heuristic backends answer without any network access.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRequest {
    pub system: String,
    pub user: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
    #[serde(default)]
    pub temperature: f64,
    pub max_reply_tokens: u32,
}

impl ModelRequest {
    pub fn new(system: impl Into<String>, user: impl Into<String>) -> ModelRequest {
        ModelRequest {
            system: system.into(),
            user: user.into(),
            image: None,
            temperature: 0.0,
            max_reply_tokens: 512,
        }
    }

    /// Store key: hex SHA-256 of the system prompt followed by the user prompt.
    pub fn key(&self) -> String {
        request_key(&self.system, &self.user)
    }

    fn check(&self) -> Result<(), ClientError> {
        if self.user.trim().is_empty() {
            return Err(ClientError::InvalidRequest("user prompt is empty".into()));
        }
        if !(0.0..=1.0).contains(&self.temperature) {
            return Err(ClientError::InvalidRequest(format!("temperature {} outside [0,1]", self.temperature)));
        }
        Ok(())
    }
}

pub fn request_key(system: &str, user: &str) -> String {
    let mut h = Sha256::new();
    h.update(system.as_bytes());
    h.update(user.as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ClientError {
    #[error("request timed out")]
    Timeout,
    #[error("HTTP status {0}: {1}")]
    HttpStatus(u16, String),
    #[error("environment variable {0} holding the API key is not set")]
    MissingApiKey(String),
    #[error("no stored reply for request key {0}")]
    CannedMiss(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    BadResponse(String),
    #[error("reply store error: {0}")]
    Store(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("backend misconfigured: {0}")]
    Config(String),
}

impl ClientError {
    fn retryable(&self) -> bool {
        matches!(self, ClientError::Timeout) || matches!(self, ClientError::HttpStatus(code, _) if *code >= 500)
    }
}

/// A text-completion backend. Implementations must tolerate concurrent calls.
pub trait ModelClient: Send + Sync {
    fn complete(&self, req: &ModelRequest) -> Result<String, ClientError>;
}

impl<T: ModelClient + ?Sized> ModelClient for Box<T> {
    fn complete(&self, req: &ModelRequest) -> Result<String, ClientError> {
        (**self).complete(req)
    }
}

impl<T: ModelClient + ?Sized> ModelClient for std::sync::Arc<T> {
    fn complete(&self, req: &ModelRequest) -> Result<String, ClientError> {
        (**self).complete(req)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreEntry {
    pub key: String,
    pub reply: String,
}

fn read_store(path: &Path) -> Result<BTreeMap<String, String>, ClientError> {
    let text = fs::read_to_string(path).map_err(|e| ClientError::Store(format!("{}: {e}", path.display())))?;
    let entries: Vec<StoreEntry> =
        serde_json::from_str(&text).map_err(|e| ClientError::Store(format!("{}: {e}", path.display())))?;
    Ok(entries.into_iter().map(|e| (e.key, e.reply)).collect())
}

fn write_store(path: &Path, map: &BTreeMap<String, String>) -> Result<(), ClientError> {
    let entries: Vec<StoreEntry> =
        map.iter().map(|(k, v)| StoreEntry { key: k.clone(), reply: v.clone() }).collect();
    let text = serde_json::to_string_pretty(&entries).expect("store serializes");
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, text + "\n").map_err(|e| ClientError::Store(format!("{}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| ClientError::Store(format!("{}: {e}", path.display())))
}

/// Serves replies from a fixed table keyed by [`request_key`].
#[derive(Debug, Clone, Default)]
pub struct CannedClient {
    replies: BTreeMap<String, String>,
}

impl CannedClient {
    pub fn new() -> CannedClient {
        CannedClient::default()
    }

    pub fn load(path: &Path) -> Result<CannedClient, ClientError> {
        Ok(CannedClient { replies: read_store(path)? })
    }

    pub fn insert(&mut self, system: &str, user: &str, reply: impl Into<String>) {
        self.replies.insert(request_key(system, user), reply.into());
    }

    pub fn insert_key(&mut self, key: String, reply: impl Into<String>) {
        self.replies.insert(key, reply.into());
    }

    pub fn len(&self) -> usize {
        self.replies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replies.is_empty()
    }

    pub fn save(&self, path: &Path) -> Result<(), ClientError> {
        write_store(path, &self.replies)
    }
}

impl ModelClient for CannedClient {
    fn complete(&self, req: &ModelRequest) -> Result<String, ClientError> {
        req.check()?;
        let key = req.key();
        self.replies.get(&key).map(|r| r.trim().to_string()).ok_or(ClientError::CannedMiss(key))
    }
}

/// Wraps a live backend and persists every reply to a store file.
pub struct RecordingClient<C> {
    inner: C,
    path: PathBuf,
    entries: Mutex<BTreeMap<String, String>>,
}

impl<C: ModelClient> RecordingClient<C> {
    pub fn new(inner: C, path: &Path) -> Result<RecordingClient<C>, ClientError> {
        let entries = if path.exists() { read_store(path)? } else { BTreeMap::new() };
        Ok(RecordingClient { inner, path: path.to_path_buf(), entries: Mutex::new(entries) })
    }
}

impl<C: ModelClient> ModelClient for RecordingClient<C> {
    fn complete(&self, req: &ModelRequest) -> Result<String, ClientError> {
        let reply = self.inner.complete(req)?;
        let mut entries = self.entries.lock().expect("store lock");
        entries.insert(req.key(), reply.clone());
        write_store(&self.path, &entries)?;
        Ok(reply)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoreMode {
    Record,
    Replay,
}

/// Record mode wraps `live`; replay mode serves `store` and fails on a miss.
pub fn record_replay(
    mode: StoreMode,
    store: &Path,
    live: Option<Box<dyn ModelClient>>,
) -> Result<Box<dyn ModelClient>, ClientError> {
    match mode {
        StoreMode::Record => {
            let live = live.ok_or_else(|| ClientError::Config("record mode needs a live backend".into()))?;
            Ok(Box::new(RecordingClient::new(live, store)?))
        }
        StoreMode::Replay => {
            if !store.exists() {
                return Err(ClientError::Store(format!("{} does not exist", store.display())));
            }
            Ok(Box::new(CannedClient::load(store)?))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Http,
    Canned,
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelClientConfig {
    pub backend: Backend,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model_name: String,
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    /// First backoff delay; doubles after each retry.
    #[serde(default = "default_backoff_ms")]
    pub backoff_base_ms: u64,
}

fn default_key_env() -> String {
    "OPENAI_API_KEY".to_string()
}

fn default_timeout() -> u64 {
    60
}

fn default_retries() -> u32 {
    3
}

fn default_backoff_ms() -> u64 {
    1000
}

impl ModelClientConfig {
    pub fn http(endpoint: &str, model_name: &str) -> ModelClientConfig {
        ModelClientConfig {
            backend: Backend::Http,
            endpoint: Some(endpoint.to_string()),
            model_name: model_name.to_string(),
            api_key_env: default_key_env(),
            timeout_secs: default_timeout(),
            retries: default_retries(),
            backoff_base_ms: default_backoff_ms(),
        }
    }
}

/// OpenAI-compatible chat-completions client.
pub struct HttpClient {
    config: ModelClientConfig,
    endpoint: String,
    http: reqwest::blocking::Client,
}

impl HttpClient {
    pub fn new(config: ModelClientConfig) -> Result<HttpClient, ClientError> {
        let endpoint = config
            .endpoint
            .clone()
            .ok_or_else(|| ClientError::Config("http backend needs an endpoint".into()))?;
        if config.model_name.is_empty() {
            return Err(ClientError::Config("http backend needs a model name".into()));
        }
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| ClientError::Config(e.to_string()))?;
        Ok(HttpClient { config, endpoint, http })
    }

    fn body(&self, req: &ModelRequest) -> Result<serde_json::Value, ClientError> {
        let user_content = match &req.image {
            None => json!(req.user),
            Some(path) => {
                let bytes = fs::read(path)
                    .map_err(|e| ClientError::InvalidRequest(format!("image {}: {e}", path.display())))?;
                let mime = match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
                    Some("jpg" | "jpeg") => "image/jpeg",
                    Some("gif") => "image/gif",
                    Some("webp") => "image/webp",
                    _ => "image/png",
                };
                let data = base64::engine::general_purpose::STANDARD.encode(bytes);
                json!([
                    {"type": "text", "text": req.user},
                    {"type": "image_url", "image_url": {"url": format!("data:{mime};base64,{data}")}}
                ])
            }
        };
        Ok(json!({
            "model": self.config.model_name,
            "messages": [
                {"role": "system", "content": req.system},
                {"role": "user", "content": user_content}
            ],
            "temperature": req.temperature,
            "max_tokens": req.max_reply_tokens
        }))
    }

    fn attempt(&self, key: &str, body: &serde_json::Value) -> Result<String, ClientError> {
        let resp = self
            .http
            .post(&self.endpoint)
            .bearer_auth(key)
            .json(body)
            .send()
            .map_err(|e| if e.is_timeout() { ClientError::Timeout } else { ClientError::Transport(e.to_string()) })?;
        let status = resp.status();
        let text = resp
            .text()
            .map_err(|e| if e.is_timeout() { ClientError::Timeout } else { ClientError::Transport(e.to_string()) })?;
        if !status.is_success() {
            return Err(ClientError::HttpStatus(status.as_u16(), text));
        }
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| ClientError::BadResponse(e.to_string()))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(|s| s.trim().to_string())
            .ok_or_else(|| ClientError::BadResponse("missing choices[0].message.content".into()))
    }
}

impl ModelClient for HttpClient {
    fn complete(&self, req: &ModelRequest) -> Result<String, ClientError> {
        req.check()?;
        let key = std::env::var(&self.config.api_key_env)
            .map_err(|_| ClientError::MissingApiKey(self.config.api_key_env.clone()))?;
        let body = self.body(req)?;
        let mut delay = Duration::from_millis(self.config.backoff_base_ms);
        let mut tries = 0;
        loop {
            match self.attempt(&key, &body) {
                Err(e) if e.retryable() && tries < self.config.retries => {
                    log::warn!("model request failed ({e}); retrying in {delay:?}");
                    thread::sleep(delay);
                    delay *= 2;
                    tries += 1;
                }
                other => return other,
            }
        }
    }
}

/// Builds a client from configuration. Heuristic clients need no configuration.
pub fn build_client(config: &ModelClientConfig, canned_store: Option<&Path>) -> Result<Box<dyn ModelClient>, ClientError> {
    match config.backend {
        Backend::Http => Ok(Box::new(HttpClient::new(config.clone())?)),
        Backend::Canned => match canned_store {
            Some(path) => Ok(Box::new(CannedClient::load(path)?)),
            None => Err(ClientError::Config("canned backend needs a reply store".into())),
        },
        Backend::Heuristic => Ok(Box::new(crate::disambiguation::HeuristicRectifier::new())),
    }
}
