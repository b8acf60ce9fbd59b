//! Embeddings from an HTTP endpoint.
//!
//! Request: `POST <url>` with `{"model": .., "input": [texts]}`. The response is
//! either `{"data": [{"index": i, "embedding": [..]}, ..]}` or
//! `{"embeddings": [[..], ..]}`. A bearer key is read from `SYNTHLINE_EMBED_KEY`.

use std::time::Duration;

use serde::Deserialize;
use synthline_core::metrics::{EmbedError, Embedder, EmbeddingVector};

pub const EMBED_KEY_ENV: &str = "SYNTHLINE_EMBED_KEY";

#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    client: reqwest::blocking::Client,
    url: String,
    model: String,
    api_key: Option<String>,
    batch_size: usize,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Response {
    Data { data: Vec<Item> },
    Plain { embeddings: Vec<Vec<f64>> },
}

#[derive(Deserialize)]
struct Item {
    #[serde(default)]
    index: Option<usize>,
    embedding: Vec<f64>,
}

impl HttpEmbedder {
    pub fn new(url: impl Into<String>, model: impl Into<String>) -> Self {
        HttpEmbedder {
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(120))
                .build()
                .expect("http client"),
            url: url.into(),
            model: model.into(),
            api_key: std::env::var(EMBED_KEY_ENV).ok().filter(|k| !k.is_empty()),
            batch_size: 64,
        }
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    pub fn with_batch_size(mut self, n: usize) -> Self {
        self.batch_size = n.max(1);
        self
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let mut req = self
            .client
            .post(&self.url)
            .json(&serde_json::json!({ "model": self.model, "input": texts }));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| EmbedError(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let body = resp.text().unwrap_or_default();
            return Err(EmbedError(format!("{status}: {}", body.chars().take(200).collect::<String>())));
        }
        let parsed: Response = resp.json().map_err(|e| EmbedError(format!("bad response: {e}")))?;
        let vectors = match parsed {
            Response::Plain { embeddings } => embeddings,
            Response::Data { mut data } => {
                if data.iter().all(|d| d.index.is_some()) {
                    data.sort_by_key(|d| d.index);
                }
                data.into_iter().map(|d| d.embedding).collect()
            }
        };
        if vectors.len() != texts.len() {
            return Err(EmbedError(format!("asked for {} embeddings, got {}", texts.len(), vectors.len())));
        }
        Ok(vectors)
    }
}

impl Embedder for HttpEmbedder {
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.batch_size) {
            for v in self.embed_batch(chunk)? {
                out.push(EmbeddingVector::new(v).map_err(|e| EmbedError(e.to_string()))?);
            }
        }
        if let Some(first) = out.first() {
            if out.iter().any(|v| v.dimension() != first.dimension()) {
                return Err(EmbedError("endpoint returned vectors of differing dimension".into()));
            }
        }
        Ok(out)
    }

    fn name(&self) -> String {
        format!("http:{}", self.model)
    }
}
