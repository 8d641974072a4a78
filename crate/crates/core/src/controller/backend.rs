use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::script::Origin;

pub const ENV_ENDPOINT: &str = "GEOSCRIPT_LLM_ENDPOINT";
pub const ENV_MODEL: &str = "GEOSCRIPT_LLM_MODEL";
pub const ENV_API_KEY: &str = "GEOSCRIPT_LLM_API_KEY";
pub const ENV_TEMPERATURE: &str = "GEOSCRIPT_LLM_TEMPERATURE";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("empty completion")]
    EmptyCompletion,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: &str, content: impl Into<String>) -> Self {
        ChatMessage {
            role: role.to_string(),
            content: content.into(),
        }
    }
}

/// Fixture key for a query: hex sha256 of the trimmed text.
pub fn query_digest(query: &str) -> String {
    hex::encode(Sha256::digest(query.trim().as_bytes()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum Canned {
    One(String),
    Many(Vec<String>),
}

/// Canned completions keyed by [`query_digest`]. An entry may hold one
/// completion per attempt; the last one repeats.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScriptedBackend {
    completions: BTreeMap<String, Vec<String>>,
}

impl ScriptedBackend {
    pub fn from_pairs<Q: AsRef<str>>(pairs: impl IntoIterator<Item = (Q, Vec<String>)>) -> Self {
        let mut b = ScriptedBackend::default();
        for (q, c) in pairs {
            b.insert(q.as_ref(), c);
        }
        b
    }

    pub fn insert(&mut self, query: &str, completions: Vec<String>) {
        self.completions.insert(query_digest(query), completions);
    }

    /// Reads a JSON object `{digest: completion | [completion, ...]}`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::BackendUnavailable(format!("{}: {e}", path.display())))?;
        let raw: BTreeMap<String, Canned> = serde_json::from_str(&text)
            .map_err(|e| BackendError::BackendUnavailable(format!("{}: {e}", path.display())))?;
        let completions = raw
            .into_iter()
            .map(|(k, v)| {
                let list = match v {
                    Canned::One(s) => vec![s],
                    Canned::Many(l) => l,
                };
                (k, list)
            })
            .collect();
        Ok(ScriptedBackend { completions })
    }

    pub fn len(&self) -> usize {
        self.completions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.completions.is_empty()
    }

    pub fn complete(&self, query: &str, attempt: usize) -> Result<String, BackendError> {
        let key = query_digest(query);
        let list = self
            .completions
            .get(&key)
            .filter(|l| !l.is_empty())
            .ok_or_else(|| BackendError::BackendUnavailable(format!("no scripted completion for query {key}")))?;
        Ok(list[attempt.min(list.len() - 1)].clone())
    }
}

/// Any endpoint speaking the chat-completions JSON shape with bearer auth.
#[derive(Debug, Clone, PartialEq)]
pub struct RemoteBackend {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

impl RemoteBackend {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        RemoteBackend {
            endpoint: endpoint.into(),
            model: model.into(),
            temperature: 0.0,
            api_key: None,
            timeout: Duration::from_secs(120),
        }
    }

    pub fn from_env() -> Result<Self, BackendError> {
        let endpoint = std::env::var(ENV_ENDPOINT)
            .map_err(|_| BackendError::BackendUnavailable(format!("{ENV_ENDPOINT} is not set")))?;
        let model = std::env::var(ENV_MODEL).unwrap_or_else(|_| "gpt-4o".to_string());
        let mut b = RemoteBackend::new(endpoint, model);
        b.api_key = std::env::var(ENV_API_KEY).ok().filter(|k| !k.is_empty());
        if let Ok(t) = std::env::var(ENV_TEMPERATURE) {
            b.temperature = t
                .parse()
                .map_err(|_| BackendError::BackendUnavailable(format!("{ENV_TEMPERATURE}={t} is not a number")))?;
        }
        Ok(b)
    }

    pub fn request_body(&self, messages: &[ChatMessage]) -> serde_json::Value {
        json!({
            "model": self.model,
            "temperature": self.temperature,
            "messages": messages,
        })
    }

    pub fn complete(&self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        let unavailable = |e: String| BackendError::BackendUnavailable(e);
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| unavailable(e.to_string()))?;
        let mut req = client.post(&self.endpoint).json(&self.request_body(messages));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| unavailable(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let body = resp.text().unwrap_or_default();
            return Err(unavailable(format!("{} returned {status}: {}", self.endpoint, body.trim())));
        }
        let body: serde_json::Value = resp.json().map_err(|e| unavailable(e.to_string()))?;
        parse_completion(&body)
    }
}

pub fn parse_completion(body: &serde_json::Value) -> Result<String, BackendError> {
    let content = body
        .pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .ok_or_else(|| BackendError::BackendUnavailable("response has no choices[0].message.content".into()))?;
    if content.trim().is_empty() {
        return Err(BackendError::EmptyCompletion);
    }
    Ok(content.to_string())
}

#[derive(Debug, Clone)]
pub enum LlmBackend {
    Scripted(ScriptedBackend),
    Remote(RemoteBackend),
}

impl LlmBackend {
    pub fn origin(&self) -> Origin {
        match self {
            LlmBackend::Scripted(_) => Origin::Fixture,
            LlmBackend::Remote(_) => Origin::Llm,
        }
    }

    /// One completion. `attempt` counts regenerations; the scripted
    /// backend uses it to pick a canned reply.
    pub fn complete(&self, query: &str, attempt: usize, messages: &[ChatMessage]) -> Result<String, BackendError> {
        let out = match self {
            LlmBackend::Scripted(s) => s.complete(query, attempt)?,
            LlmBackend::Remote(r) => r.complete(messages)?,
        };
        if out.trim().is_empty() {
            return Err(BackendError::EmptyCompletion);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripted_lookup_by_digest() {
        let b = ScriptedBackend::from_pairs([("q", vec!["a".to_string(), "b".to_string()])]);
        assert_eq!(b.complete(" q ", 0).unwrap(), "a");
        assert_eq!(b.complete("q", 5).unwrap(), "b");
        assert!(matches!(b.complete("other", 0), Err(BackendError::BackendUnavailable(_))));
    }

    #[test]
    fn fixture_file_accepts_both_shapes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.json");
        let body = json!({ query_digest("x"): "print(1)", query_digest("y"): ["bad", "print(2)"] });
        std::fs::write(&p, body.to_string()).unwrap();
        let b = ScriptedBackend::load(&p).unwrap();
        assert_eq!(b.complete("y", 1).unwrap(), "print(2)");
        assert_eq!(b.complete("x", 1).unwrap(), "print(1)");
    }

    #[test]
    fn completion_parsing() {
        let ok = json!({"choices": [{"message": {"role": "assistant", "content": "print(1)"}}]});
        assert_eq!(parse_completion(&ok).unwrap(), "print(1)");
        let empty = json!({"choices": [{"message": {"content": " "}}]});
        assert_eq!(parse_completion(&empty), Err(BackendError::EmptyCompletion));
        assert!(parse_completion(&json!({})).is_err());
    }

    #[test]
    fn unreachable_remote_is_unavailable() {
        let mut r = RemoteBackend::new("http://127.0.0.1:9/v1/chat/completions", "m");
        r.timeout = Duration::from_secs(2);
        assert!(matches!(r.complete(&[]), Err(BackendError::BackendUnavailable(_))));
    }
}
