//! Chat-completions client.
//!
//! `POST {base}/chat/completions` with
//! `{"model", "messages": [{"role": "user", "content": prompt}], "temperature", "top_p"}`
//! and, when configured, a leading system message and `max_tokens`. The answer is
//! read from `choices[0].message.content`. The bearer key comes from
//! `SYNTHLINE_API_KEY`.

use std::time::Duration;

use async_trait::async_trait;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};

use super::backend::{BackendError, CompletionBackend};
use super::GenerationParams;

pub const API_KEY_ENV: &str = "SYNTHLINE_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub top_p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

impl ChatRequest {
    pub fn new(prompt: &str, params: &GenerationParams, system: Option<&str>) -> Self {
        let mut messages = Vec::with_capacity(2);
        if let Some(s) = system {
            messages.push(ChatMessage { role: "system".into(), content: s.into() });
        }
        messages.push(ChatMessage { role: "user".into(), content: prompt.into() });
        ChatRequest {
            model: params.model_name.clone(),
            messages,
            temperature: params.temperature,
            top_p: params.top_p,
            max_tokens: params.max_tokens,
        }
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChatMessage,
}

/// Pulls the first choice's content out of a response body.
pub fn parse_response(body: &str) -> Result<String, BackendError> {
    let r: ChatResponse =
        serde_json::from_str(body).map_err(|e| BackendError::Permanent(format!("unexpected response body: {e}")))?;
    let text = r
        .choices
        .into_iter()
        .next()
        .map(|c| c.message.content.trim().to_string())
        .unwrap_or_default();
    if text.is_empty() {
        return Err(BackendError::Transient("empty completion".into()));
    }
    Ok(text)
}

pub fn classify_status(status: StatusCode, body: &str) -> BackendError {
    let detail = format!("HTTP {status}: {}", body.chars().take(200).collect::<String>());
    if status == StatusCode::TOO_MANY_REQUESTS || status == StatusCode::REQUEST_TIMEOUT || status.is_server_error() {
        BackendError::Transient(detail)
    } else {
        BackendError::Permanent(detail)
    }
}

#[derive(Debug, Clone)]
pub struct ChatBackend {
    client: reqwest::Client,
    endpoint: String,
    api_key: Option<String>,
    system: Option<String>,
}

impl ChatBackend {
    /// `base_url` is the API root, e.g. `https://api.openai.com/v1`.
    pub fn new(base_url: &str) -> Self {
        Self::with_timeout(base_url, Duration::from_secs(120))
    }

    pub fn with_timeout(base_url: &str, timeout: Duration) -> Self {
        ChatBackend {
            client: reqwest::Client::builder().timeout(timeout).build().expect("http client"),
            endpoint: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            system: None,
        }
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    pub fn with_system(mut self, system: Option<String>) -> Self {
        self.system = system;
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

#[async_trait]
impl CompletionBackend for ChatBackend {
    async fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<String, BackendError> {
        let mut req = self
            .client
            .post(&self.endpoint)
            .json(&ChatRequest::new(prompt, params, self.system.as_deref()));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().await.map_err(|e| {
            if e.is_timeout() || e.is_connect() || e.is_request() {
                BackendError::Transient(e.to_string())
            } else {
                BackendError::Permanent(e.to_string())
            }
        })?;
        let status = resp.status();
        let body = resp.text().await.map_err(|e| BackendError::Transient(e.to_string()))?;
        if !status.is_success() {
            return Err(classify_status(status, &body));
        }
        parse_response(&body)
    }

    fn name(&self) -> String {
        self.endpoint.clone()
    }
}
