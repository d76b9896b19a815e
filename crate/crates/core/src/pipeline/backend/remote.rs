use std::time::Duration;

use serde::Deserialize;

use super::{BackendError, BackendKind, ChatRequest, ModelBackend};

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    content: Option<String>,
}

/// Chat-completions client for hosted endpoints and the local stub.
#[derive(Debug)]
pub struct RemoteBackend {
    kind: BackendKind,
    endpoint: String,
    model: String,
    timeout: Duration,
    credential: Option<String>,
    client: reqwest::blocking::Client,
}

impl RemoteBackend {
    pub fn new(kind: BackendKind, endpoint: String, model: String, timeout: Duration, credential: Option<String>) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .expect("HTTP client builds with static options");
        Self {
            kind,
            endpoint,
            model,
            timeout,
            credential,
            client,
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

impl ModelBackend for RemoteBackend {
    fn id(&self) -> String {
        let kind = match self.kind {
            BackendKind::Stub => "stub",
            _ => "remote",
        };
        format!("{kind}:{}@{}", self.model, self.endpoint)
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let mut body = request.clone();
        body.model = self.model.clone();
        let mut builder = self.client.post(&self.endpoint).json(&body);
        if let Some(token) = &self.credential {
            builder = builder.bearer_auth(token);
        }
        let response = builder.send().map_err(|e| self.classify(e))?;
        let status = response.status();
        let text = response.text().map_err(|e| self.classify(e))?;
        if !status.is_success() {
            return Err(BackendError::Http {
                status: status.as_u16(),
                body: text.chars().take(500).collect(),
            });
        }
        let parsed: CompletionResponse =
            serde_json::from_str(&text).map_err(|e| BackendError::Malformed(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::Malformed("response has no message content".into()))
    }
}

impl RemoteBackend {
    fn classify(&self, err: reqwest::Error) -> BackendError {
        if err.is_timeout() {
            BackendError::Timeout(self.timeout)
        } else {
            BackendError::Transport(err.to_string())
        }
    }
}
