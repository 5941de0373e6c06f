//! Model backends. Every backend is blocking; concurrency is handled by the
//! caller.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::model::TokenUsage;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("provider returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unexpected provider response: {0}")]
    BadResponse(String),
    #[error("no canned reply for example {0:?}")]
    NoReply(String),
    #[error("environment variable {0} is not set")]
    MissingApiKey(String),
    #[error("cannot read replies from {path}: {message}")]
    Replies { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub example_id: String,
    pub prompt: String,
    pub temperature: f64,
    pub seed: u64,
    /// Present for constrained decoding.
    pub schema: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Completion {
    pub text: String,
    /// Reasoning the provider returned separately from the answer.
    pub reasoning: Option<String>,
    pub usage: TokenUsage,
    pub latency_s: f64,
    /// Provider-reported generation settings, when any.
    pub echo: Option<Value>,
}

pub trait ProviderAdapter: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion, ProviderError>;
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReplyLine {
    example_id: String,
    responses: Vec<String>,
    #[serde(default)]
    latency_s: f64,
    #[serde(default)]
    usage: TokenUsage,
}

/// Replays canned responses keyed by example id. The n-th request for an
/// example gets the n-th response; the last one repeats once exhausted.
#[derive(Debug, Default)]
pub struct MockAdapter {
    replies: HashMap<String, ReplyLine>,
    attempts: Mutex<HashMap<String, usize>>,
}

impl MockAdapter {
    pub fn new(replies: impl IntoIterator<Item = (String, Vec<String>)>) -> Self {
        let replies = replies
            .into_iter()
            .map(|(example_id, responses)| {
                let line = ReplyLine {
                    example_id: example_id.clone(),
                    responses,
                    latency_s: 0.0,
                    usage: TokenUsage::default(),
                };
                (example_id, line)
            })
            .collect();
        Self {
            replies,
            attempts: Mutex::default(),
        }
    }

    /// Load `{example_id, responses, latency_s?, usage?}` lines.
    pub fn from_jsonl(path: &Path) -> Result<Self, ProviderError> {
        let err = |message: String| ProviderError::Replies {
            path: path.display().to_string(),
            message,
        };
        let file = File::open(path).map_err(|e| err(e.to_string()))?;
        let mut replies = HashMap::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| err(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let reply: ReplyLine = serde_json::from_str(&line).map_err(|e| err(format!("line {}: {e}", i + 1)))?;
            if reply.responses.is_empty() {
                return Err(err(format!("line {}: no responses", i + 1)));
            }
            replies.insert(reply.example_id.clone(), reply);
        }
        Ok(Self {
            replies,
            attempts: Mutex::default(),
        })
    }

    /// Requests received so far for one example.
    pub fn attempts(&self, example_id: &str) -> usize {
        let attempts = self.attempts.lock().unwrap_or_else(|e| e.into_inner());
        attempts.get(example_id).copied().unwrap_or(0)
    }
}

impl ProviderAdapter for MockAdapter {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion, ProviderError> {
        let n = {
            let mut attempts = self.attempts.lock().unwrap_or_else(|e| e.into_inner());
            let n = attempts.entry(request.example_id.clone()).or_insert(0);
            *n += 1;
            *n - 1
        };
        let reply = self
            .replies
            .get(&request.example_id)
            .ok_or_else(|| ProviderError::NoReply(request.example_id.clone()))?;
        let text = reply.responses[n.min(reply.responses.len() - 1)].clone();
        Ok(Completion {
            text,
            reasoning: None,
            usage: reply.usage,
            latency_s: reply.latency_s,
            echo: None,
        })
    }
}

/// Chat-completions endpoint of any OpenAI-compatible server.
pub struct OpenAiCompatible {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    api_key: Option<String>,
}

impl OpenAiCompatible {
    pub fn new(base_url: &str, model: &str, api_key: Option<String>, timeout: Duration) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        Ok(Self {
            client,
            endpoint: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            model: model.to_owned(),
            api_key,
        })
    }

    /// Read the key from the named environment variable.
    pub fn from_env(base_url: &str, model: &str, api_key_env: Option<&str>, timeout: Duration) -> Result<Self, ProviderError> {
        let api_key = match api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| ProviderError::MissingApiKey(var.to_owned()))?),
            None => None,
        };
        Self::new(base_url, model, api_key, timeout)
    }

    fn body(&self, request: &CompletionRequest) -> Value {
        let mut body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "seed": request.seed,
        });
        if let Some(schema) = &request.schema {
            body["response_format"] = json!({
                "type": "json_schema",
                "json_schema": {"name": "annotations", "strict": true, "schema": schema}
            });
        }
        body
    }
}

impl ProviderAdapter for OpenAiCompatible {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion, ProviderError> {
        let started = Instant::now();
        let mut call = self.client.post(&self.endpoint).json(&self.body(request));
        if let Some(key) = &self.api_key {
            call = call.bearer_auth(key);
        }
        let response = call.send().map_err(|e| ProviderError::Transport(e.without_url().to_string()))?;
        let status = response.status();
        let body = response.text().map_err(|e| ProviderError::Transport(e.to_string()))?;
        let latency_s = started.elapsed().as_secs_f64();
        if !status.is_success() {
            return Err(ProviderError::Status {
                status: status.as_u16(),
                body: body.chars().take(500).collect(),
            });
        }
        let value: Value = serde_json::from_str(&body).map_err(|e| ProviderError::BadResponse(e.to_string()))?;
        let message = &value["choices"][0]["message"];
        let text = message["content"]
            .as_str()
            .ok_or_else(|| ProviderError::BadResponse("missing choices[0].message.content".into()))?
            .to_owned();
        let reasoning = message["reasoning_content"]
            .as_str()
            .or_else(|| message["reasoning"].as_str())
            .map(str::to_owned);
        let usage = TokenUsage {
            prompt_tokens: value["usage"]["prompt_tokens"].as_u64().unwrap_or(0),
            completion_tokens: value["usage"]["completion_tokens"].as_u64().unwrap_or(0),
        };
        let mut echo = serde_json::Map::new();
        for key in ["model", "system_fingerprint"] {
            if let Some(v) = value.get(key).filter(|v| !v.is_null()) {
                echo.insert(key.to_owned(), v.clone());
            }
        }
        Ok(Completion {
            text,
            reasoning,
            usage,
            latency_s,
            echo: (!echo.is_empty()).then_some(Value::Object(echo)),
        })
    }
}
