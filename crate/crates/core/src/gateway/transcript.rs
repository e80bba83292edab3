use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{ChatBackend, ChatRequest, GatewayError};

/// One request/response pair; one line of a transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub request_digest: String,
    #[serde(flatten)]
    pub request: ChatRequest,
    pub response_text: String,
    pub timestamp: DateTime<Utc>,
}

impl ChatExchange {
    pub fn new(request: ChatRequest, response_text: String) -> Self {
        Self {
            request_digest: request.digest(),
            request,
            response_text,
            timestamp: Utc::now(),
        }
    }
}

fn transcript_error(path: &Path, message: impl Into<String>) -> GatewayError {
    GatewayError::Transcript {
        path: path.display().to_string(),
        message: message.into(),
    }
}

/// Reads every exchange from a line-delimited transcript, checking digests.
pub fn load_transcript(path: &Path) -> Result<Vec<ChatExchange>, GatewayError> {
    let file = File::open(path).map_err(|e| transcript_error(path, e.to_string()))?;
    let mut exchanges = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| transcript_error(path, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let exchange: ChatExchange =
            serde_json::from_str(&line).map_err(|e| transcript_error(path, format!("line {}: {e}", lineno + 1)))?;
        let recomputed = exchange.request.digest();
        if recomputed != exchange.request_digest {
            return Err(transcript_error(
                path,
                format!(
                    "line {}: stored digest {} does not match request ({recomputed})",
                    lineno + 1,
                    exchange.request_digest
                ),
            ));
        }
        exchanges.push(exchange);
    }
    Ok(exchanges)
}

/// Answers requests from a recorded transcript. Never touches the network.
#[derive(Debug, Default)]
pub struct ReplayBackend {
    responses: HashMap<String, String>,
}

impl ReplayBackend {
    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        Ok(Self::from_exchanges(load_transcript(path)?))
    }

    /// Loads several transcripts; earlier files win on digest collisions.
    pub fn load_all<P: AsRef<Path>>(paths: &[P]) -> Result<Self, GatewayError> {
        let mut all = Vec::new();
        for p in paths {
            all.extend(load_transcript(p.as_ref())?);
        }
        Ok(Self::from_exchanges(all))
    }

    /// First occurrence of a digest wins.
    pub fn from_exchanges(exchanges: impl IntoIterator<Item = ChatExchange>) -> Self {
        let mut responses = HashMap::new();
        for ex in exchanges {
            responses.entry(ex.request_digest).or_insert(ex.response_text);
        }
        Self { responses }
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl ChatBackend for ReplayBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        let digest = request.digest();
        self.responses
            .get(&digest)
            .cloned()
            .ok_or(GatewayError::TranscriptGap { digest })
    }
}

/// Forwards to an inner backend and appends every exchange to a transcript.
pub struct RecordBackend<B> {
    inner: B,
    sink: Mutex<File>,
}

impl<B: ChatBackend> RecordBackend<B> {
    /// Opens `path` for appending, creating it if needed.
    pub fn create(inner: B, path: &Path) -> Result<Self, GatewayError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| transcript_error(path, e.to_string()))?;
        Ok(Self {
            inner,
            sink: Mutex::new(file),
        })
    }
}

impl<B: ChatBackend> ChatBackend for RecordBackend<B> {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        let response = self.inner.complete(request)?;
        let exchange = ChatExchange::new(request.clone(), response.clone());
        let mut line = serde_json::to_string(&exchange).expect("exchange encodes");
        line.push('\n');
        let mut sink = self.sink.lock().unwrap_or_else(|p| p.into_inner());
        sink.write_all(line.as_bytes())
            .and_then(|_| sink.flush())
            .map_err(|e| GatewayError::Transcript {
                path: "<record sink>".into(),
                message: e.to_string(),
            })?;
        Ok(response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::FnBackend;

    fn echo() -> FnBackend<impl Fn(&ChatRequest) -> Result<String, GatewayError> + Send + Sync> {
        FnBackend(|r: &ChatRequest| Ok(format!("echo:{}:{}", r.user, r.attempt_nonce)))
    }

    #[test]
    fn record_then_replay_reproduces_responses() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let requests: Vec<_> = (0..4)
            .map(|i| ChatRequest::new("s", format!("q{i}"), "m").with_nonce(i % 2))
            .collect();
        let recorded: Vec<String> = {
            let rec = RecordBackend::create(echo(), &path).unwrap();
            requests.iter().map(|r| rec.complete(r).unwrap()).collect()
        };
        let replay = ReplayBackend::load(&path).unwrap();
        let replayed: Vec<String> = requests.iter().map(|r| replay.complete(r).unwrap()).collect();
        assert_eq!(recorded, replayed);
    }

    #[test]
    fn replay_miss_names_the_digest() {
        let replay = ReplayBackend::default();
        let req = ChatRequest::new("s", "u", "m");
        match replay.complete(&req) {
            Err(GatewayError::TranscriptGap { digest }) => assert_eq!(digest, req.digest()),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn transcript_lines_carry_the_documented_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        RecordBackend::create(echo(), &path)
            .unwrap()
            .complete(&ChatRequest::new("s", "u", "m").with_seed(Some(3)))
            .unwrap();
        let line = std::fs::read_to_string(&path).unwrap();
        let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
        for key in [
            "request_digest",
            "model",
            "system",
            "user",
            "temperature",
            "seed",
            "attempt_nonce",
            "response_text",
            "timestamp",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn tampered_transcript_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        RecordBackend::create(echo(), &path)
            .unwrap()
            .complete(&ChatRequest::new("s", "u", "m"))
            .unwrap();
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace("\"user\":\"u\"", "\"user\":\"v\"");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(
            ReplayBackend::load(&path),
            Err(GatewayError::Transcript { .. })
        ));
    }
}
