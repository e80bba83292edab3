//! Single entry point for every model call.
//!
//! Three backends share the [`ChatBackend`] trait: live HTTP against an
//! OpenAI-compatible endpoint, record (live call plus transcript append),
//! and replay (transcript lookup, no network). Requests are keyed by a
//! content digest, so a complete transcript makes any pipeline above this
//! module a pure function of its inputs.

mod http;
mod transcript;

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use self::http::{HttpBackend, HttpConfig, API_KEY_ENV};
pub use self::transcript::{load_transcript, ChatExchange, RecordBackend, ReplayBackend};

/// The system message shared by every prompt.
pub const SYSTEM_PROMPT: &str = "You are a helpful and harmless AI software engineer. \nYou must provide an answer to the following request. \nBe brief and precise.";

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("endpoint returned status {status}: {excerpt}")]
    Endpoint { status: u16, excerpt: String },
    #[error("transcript gap: no recorded response for request digest {digest}")]
    TranscriptGap { digest: String },
    #[error("environment variable {API_KEY_ENV} is not set")]
    MissingApiKey,
    #[error("malformed endpoint response: {0}")]
    MalformedResponse(String),
    #[error("transcript {path}: {message}")]
    Transcript { path: String, message: String },
    #[error("scripted backend: {0}")]
    Scripted(String),
}

/// One single-turn chat completion request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system: String,
    pub user: String,
    #[serde(rename = "model")]
    pub model_name: String,
    pub temperature: f64,
    pub seed: Option<u64>,
    /// Distinguishes retries of an otherwise identical request.
    pub attempt_nonce: u64,
}

impl ChatRequest {
    pub fn new(system: impl Into<String>, user: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            system: system.into(),
            user: user.into(),
            model_name: model_name.into(),
            temperature: 0.0,
            seed: None,
            attempt_nonce: 0,
        }
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_nonce(mut self, nonce: u64) -> Self {
        self.attempt_nonce = nonce;
        self
    }

    /// Seed sent on the wire: the base seed shifted by the attempt nonce.
    pub fn wire_seed(&self) -> Option<u64> {
        match (self.seed, self.attempt_nonce) {
            (None, 0) => None,
            (seed, nonce) => Some(seed.unwrap_or(0).wrapping_add(nonce)),
        }
    }

    pub fn digest(&self) -> String {
        canonical_digest(self)
    }
}

/// SHA-256 over the sorted-key JSON encoding of the digest-relevant fields.
pub fn canonical_digest(request: &ChatRequest) -> String {
    let canonical = serde_json::json!({
        "attempt_nonce": request.attempt_nonce,
        "model": request.model_name,
        "seed": request.seed,
        "system": request.system,
        "temperature": request.temperature,
        "user": request.user,
    });
    let bytes = serde_json::to_vec(&canonical).expect("canonical request encodes");
    hex::encode(Sha256::digest(&bytes))
}

/// Anything that can answer a [`ChatRequest`].
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError>;
}

impl<T: ChatBackend + ?Sized> ChatBackend for &T {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        (**self).complete(request)
    }
}

impl<T: ChatBackend + ?Sized> ChatBackend for Box<T> {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        (**self).complete(request)
    }
}

impl<T: ChatBackend + ?Sized> ChatBackend for Arc<T> {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        (**self).complete(request)
    }
}

/// Backend answering from a closure. Used for scripted fixtures and demos.
pub struct FnBackend<F>(pub F);

impl<F> ChatBackend for FnBackend<F>
where
    F: Fn(&ChatRequest) -> Result<String, GatewayError> + Send + Sync,
{
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        (self.0)(request)
    }
}

/// Model parameters stamped onto every request a pipeline issues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSettings {
    pub name: String,
    pub temperature: f64,
    pub seed: Option<u64>,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            name: "gpt-4o".to_string(),
            temperature: 0.0,
            seed: Some(42),
        }
    }
}

impl ModelSettings {
    pub fn request(&self, system: &str, user: &str, nonce: u64) -> ChatRequest {
        ChatRequest::new(system, user, self.name.clone())
            .with_temperature(self.temperature)
            .with_seed(self.seed)
            .with_nonce(nonce)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BackendConfig {
    Http(HttpConfig),
    Record { http: HttpConfig, transcript: PathBuf },
    Replay { transcript: PathBuf },
}

/// Builds the backend described by `config`.
pub fn open_backend(config: &BackendConfig) -> Result<Box<dyn ChatBackend>, GatewayError> {
    Ok(match config {
        BackendConfig::Http(http) => Box::new(HttpBackend::from_env(http.clone())?),
        BackendConfig::Record { http, transcript } => {
            Box::new(RecordBackend::create(HttpBackend::from_env(http.clone())?, transcript)?)
        }
        BackendConfig::Replay { transcript } => Box::new(ReplayBackend::load(transcript)?),
    })
}

/// Issues `request` against `backend`.
pub fn complete(request: &ChatRequest, backend: &dyn ChatBackend) -> Result<String, GatewayError> {
    backend.complete(request)
}
