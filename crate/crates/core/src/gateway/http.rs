//! OpenAI-style chat-completion client.
//!
//! Request body: `{"model": .., "temperature": .., "messages": [{"role": "user", "content": <prompt>}]}`
//! with `Authorization: Bearer <key>`. The reply text is `choices[0].message.content`.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ApiKey, ChatProvider, ChatRequest, ProviderError};

#[derive(Debug, Serialize)]
struct WireMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Debug, Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    temperature: f64,
    messages: [WireMessage<'a>; 1],
}

#[derive(Debug, Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Debug, Deserialize)]
struct WireChoice {
    message: WireReply,
}

#[derive(Debug, Deserialize)]
struct WireReply {
    content: Option<String>,
}

pub struct HttpProvider {
    endpoint: String,
    client: reqwest::blocking::Client,
}

impl std::fmt::Debug for HttpProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpProvider").field("endpoint", &self.endpoint).finish()
    }
}

impl HttpProvider {
    pub fn new(endpoint: &str) -> Result<Self, reqwest::Error> {
        Ok(HttpProvider {
            endpoint: endpoint.to_string(),
            client: reqwest::blocking::Client::builder().build()?,
        })
    }

    pub(crate) fn body(request: &ChatRequest) -> serde_json::Value {
        serde_json::to_value(WireRequest {
            model: &request.model,
            temperature: request.temperature,
            messages: [WireMessage {
                role: "user",
                content: &request.prompt,
            }],
        })
        .expect("request body serializes")
    }

    pub(crate) fn extract(body: &str) -> Result<String, ProviderError> {
        let parsed: WireResponse = serde_json::from_str(body).map_err(|e| ProviderError::Malformed(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| ProviderError::Malformed("no choices[0].message.content".into()))
    }
}

impl ChatProvider for HttpProvider {
    fn send(&self, request: &ChatRequest, key: &ApiKey, timeout: Duration) -> Result<String, ProviderError> {
        let classify = |e: reqwest::Error| {
            if e.is_timeout() {
                ProviderError::Timeout
            } else {
                ProviderError::Transport(e.without_url().to_string())
            }
        };
        let resp = self
            .client
            .post(&self.endpoint)
            .bearer_auth(key.expose())
            .json(&Self::body(request))
            .timeout(timeout)
            .send()
            .map_err(classify)?;
        let status = resp.status();
        let text = resp.text().map_err(classify)?;
        if !status.is_success() {
            return Err(ProviderError::Status {
                code: status.as_u16(),
                body: text,
            });
        }
        Self::extract(&text)
    }
}
