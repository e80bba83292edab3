use std::time::Duration;

use serde_json::{json, Value};

use super::{ChatBackend, ChatRequest, GatewayError};

/// Bearer token source for the live backend.
pub const API_KEY_ENV: &str = "QUEST_API_KEY";

const EXCERPT_LIMIT: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct HttpConfig {
    /// Scheme and host, without the `/v1/chat/completions` path.
    pub base_url: String,
    pub timeout: Duration,
    /// Total tries on transport failure, including the first.
    pub max_attempts: u32,
    /// Delay before the second try; doubles on each later one.
    pub initial_backoff: Duration,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com".to_string(),
            timeout: Duration::from_secs(120),
            max_attempts: 3,
            initial_backoff: Duration::from_millis(500),
        }
    }
}

/// Live OpenAI-compatible chat-completions client.
pub struct HttpBackend {
    agent: ureq::Agent,
    config: HttpConfig,
    api_key: String,
}

impl HttpBackend {
    pub fn new(config: HttpConfig, api_key: impl Into<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            config,
            api_key: api_key.into(),
        }
    }

    /// Reads the bearer token from [`API_KEY_ENV`].
    pub fn from_env(config: HttpConfig) -> Result<Self, GatewayError> {
        let key = std::env::var(API_KEY_ENV).map_err(|_| GatewayError::MissingApiKey)?;
        Ok(Self::new(config, key))
    }

    pub fn endpoint(&self) -> String {
        format!("{}/v1/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn send_once(&self, body: &str) -> Result<(u16, String), ureq::Error> {
        let mut response = self
            .agent
            .post(&self.endpoint())
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .header("Content-Type", "application/json")
            .send(body)?;
        let status = response.status().as_u16();
        let text = response.body_mut().read_to_string()?;
        Ok((status, text))
    }
}

/// Request body: two messages, temperature, and the nonce-shifted seed.
pub(crate) fn request_body(request: &ChatRequest) -> Value {
    let mut body = json!({
        "model": request.model_name,
        "messages": [
            {"role": "system", "content": request.system},
            {"role": "user", "content": request.user},
        ],
        "temperature": request.temperature,
    });
    if let Some(seed) = request.wire_seed() {
        body["seed"] = json!(seed);
    }
    body
}

pub(crate) fn first_choice_content(body: &str) -> Result<String, GatewayError> {
    let value: Value = serde_json::from_str(body).map_err(|e| GatewayError::MalformedResponse(e.to_string()))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| GatewayError::MalformedResponse(excerpt(body)))
}

fn excerpt(text: &str) -> String {
    if text.len() <= EXCERPT_LIMIT {
        return text.to_string();
    }
    let mut end = EXCERPT_LIMIT;
    while !text.is_char_boundary(end) {
        end -= 1;
    }
    format!("{}...", &text[..end])
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        let body = request_body(request).to_string();
        let attempts = self.config.max_attempts.max(1);
        let mut delay = self.config.initial_backoff;
        let mut last_error = String::new();
        for attempt in 1..=attempts {
            match self.send_once(&body) {
                Ok((status, text)) if (200..300).contains(&status) => {
                    return first_choice_content(&text);
                }
                Ok((status, text)) => {
                    return Err(GatewayError::Endpoint {
                        status,
                        excerpt: excerpt(&text),
                    })
                }
                Err(e) => {
                    last_error = e.to_string();
                    if attempt < attempts {
                        std::thread::sleep(delay);
                        delay *= 2;
                    }
                }
            }
        }
        Err(GatewayError::Transport {
            attempts,
            message: last_error,
        })
    }
}
