//! Model backends: a chat-completions HTTP client (remote endpoints and the
//! bundled stub server), the deterministic mock, and closure-backed test
//! doubles.

mod mock;
mod remote;
mod scripted;
mod stub;

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use mock::{mock_decide, MockBackend, MockOutcome, MockRule};
pub use remote::RemoteBackend;
pub use scripted::FnBackend;
pub use stub::{request_fingerprint, RecordedRequest, StubReply, StubRule, StubScript, StubServer};

/// Pipeline stage a request belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Extract,
    Reason,
    Finalize,
    Summarize,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Extract, Stage::Reason, Stage::Finalize, Stage::Summarize];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Extract => "extract",
            Stage::Reason => "reason",
            Stage::Finalize => "finalize",
            Stage::Summarize => "summarize",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageUrl {
    pub url: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ContentPart {
    Text { text: String },
    ImageUrl { image_url: ImageUrl },
}

impl ContentPart {
    pub fn text(text: impl Into<String>) -> Self {
        ContentPart::Text { text: text.into() }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            ContentPart::Text { text } => Some(text),
            ContentPart::ImageUrl { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MessageContent {
    Text(String),
    Parts(Vec<ContentPart>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: MessageContent,
}

impl ChatMessage {
    pub fn system(text: impl Into<String>) -> Self {
        Self {
            role: "system".into(),
            content: MessageContent::Text(text.into()),
        }
    }

    pub fn user(parts: Vec<ContentPart>) -> Self {
        Self {
            role: "user".into(),
            content: MessageContent::Parts(parts),
        }
    }

    /// All text in the message, parts joined by newlines.
    pub fn text(&self) -> String {
        match &self.content {
            MessageContent::Text(t) => t.clone(),
            MessageContent::Parts(parts) => parts.iter().filter_map(ContentPart::as_text).collect::<Vec<_>>().join("\n"),
        }
    }
}

/// Chat-completions request body. `stage` is local routing metadata and is
/// never sent over the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    #[serde(skip)]
    pub stage: Option<Stage>,
}

impl ChatRequest {
    pub fn system_text(&self) -> String {
        self.messages.iter().filter(|m| m.role == "system").map(ChatMessage::text).collect::<Vec<_>>().join("\n")
    }

    pub fn user_text(&self) -> String {
        self.messages.iter().filter(|m| m.role == "user").map(ChatMessage::text).collect::<Vec<_>>().join("\n")
    }

    pub fn user_parts(&self) -> Vec<&ContentPart> {
        self.messages
            .iter()
            .filter(|m| m.role == "user")
            .flat_map(|m| match &m.content {
                MessageContent::Parts(parts) => parts.iter().collect::<Vec<_>>(),
                MessageContent::Text(_) => Vec::new(),
            })
            .collect()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("request timed out after {0:?}")]
    Timeout(Duration),
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("backend cannot serve this request: {0}")]
    Unsupported(String),
}

/// A text-generation backend speaking the chat-completions shape.
pub trait ModelBackend: Send + Sync {
    fn id(&self) -> String;

    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError>;

    /// True when replies depend only on the request (enables frozen
    /// latencies and inline evaluation for bit-exact replays).
    fn deterministic(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Remote,
    Stub,
    Mock,
}

#[derive(Debug, Error, PartialEq)]
pub enum BackendConfigError {
    #[error("backend.endpoint is required for {0:?} backends")]
    MissingEndpoint(BackendKind),
    #[error("backend.timeout_secs must be > 0, got {0}")]
    BadTimeout(f64),
    #[error("credential environment variable `{0}` is not set")]
    MissingCredential(String),
    #[error("backend.credential_env is required for remote backends")]
    MissingCredentialEnv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendDescriptor {
    pub kind: BackendKind,
    /// full URL of the chat-completions endpoint
    pub endpoint: Option<String>,
    pub model: String,
    pub timeout_secs: f64,
    pub max_retries: u32,
    /// name of the env var holding the bearer credential
    pub credential_env: Option<String>,
}

impl Default for BackendDescriptor {
    fn default() -> Self {
        Self {
            kind: BackendKind::Mock,
            endpoint: None,
            model: "gpt-4o".into(),
            timeout_secs: 20.0,
            max_retries: 2,
            credential_env: None,
        }
    }
}

impl BackendDescriptor {
    pub fn mock() -> Self {
        Self::default()
    }

    pub fn stub(endpoint: impl Into<String>, timeout_secs: f64, max_retries: u32) -> Self {
        Self {
            kind: BackendKind::Stub,
            endpoint: Some(endpoint.into()),
            model: "stub".into(),
            timeout_secs,
            max_retries,
            credential_env: None,
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }

    /// Static checks; does not read the environment.
    pub fn violations(&self) -> Vec<BackendConfigError> {
        let mut v = Vec::new();
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            v.push(BackendConfigError::BadTimeout(self.timeout_secs));
        }
        if matches!(self.kind, BackendKind::Remote | BackendKind::Stub) && self.endpoint.is_none() {
            v.push(BackendConfigError::MissingEndpoint(self.kind));
        }
        if self.kind == BackendKind::Remote && self.credential_env.is_none() {
            v.push(BackendConfigError::MissingCredentialEnv);
        }
        v
    }

    /// Reads the bearer credential from the configured env var. Required for
    /// remote backends, optional for the stub.
    pub fn credential(&self) -> Result<Option<String>, BackendConfigError> {
        let Some(var) = &self.credential_env else {
            return Ok(None);
        };
        match std::env::var(var) {
            Ok(value) if !value.is_empty() => Ok(Some(value)),
            _ if self.kind == BackendKind::Remote => Err(BackendConfigError::MissingCredential(var.clone())),
            _ => Ok(None),
        }
    }

    pub fn build(&self) -> Result<Arc<dyn ModelBackend>, BackendConfigError> {
        if let Some(first) = self.violations().into_iter().next() {
            return Err(first);
        }
        Ok(match self.kind {
            BackendKind::Mock => Arc::new(MockBackend::new()),
            BackendKind::Remote | BackendKind::Stub => Arc::new(RemoteBackend::new(
                self.kind,
                self.endpoint.clone().expect("validated"),
                self.model.clone(),
                self.timeout(),
                self.credential()?,
            )),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_wire_shape() {
        let req = ChatRequest {
            model: "m".into(),
            messages: vec![
                ChatMessage::system("sys"),
                ChatMessage::user(vec![
                    ContentPart::text("hello"),
                    ContentPart::ImageUrl {
                        image_url: ImageUrl {
                            url: "data:image/png;base64,AA==".into(),
                        },
                    },
                ]),
            ],
            stage: Some(Stage::Reason),
        };
        let json = serde_json::to_value(&req).unwrap();
        assert_eq!(
            json,
            serde_json::json!({
                "model": "m",
                "messages": [
                    {"role": "system", "content": "sys"},
                    {"role": "user", "content": [
                        {"type": "text", "text": "hello"},
                        {"type": "image_url", "image_url": {"url": "data:image/png;base64,AA=="}}
                    ]}
                ]
            })
        );
        let back: ChatRequest = serde_json::from_value(json).unwrap();
        assert_eq!(back.stage, None);
        assert_eq!(back.messages, req.messages);
    }

    #[test]
    fn descriptor_validation() {
        let mut d = BackendDescriptor {
            kind: BackendKind::Remote,
            ..BackendDescriptor::default()
        };
        let v = d.violations();
        assert!(v.contains(&BackendConfigError::MissingEndpoint(BackendKind::Remote)));
        assert!(v.contains(&BackendConfigError::MissingCredentialEnv));
        d.endpoint = Some("http://localhost:1/v1/chat/completions".into());
        d.credential_env = Some("VALUEVAC_TEST_SURELY_UNSET_VAR".into());
        assert!(d.violations().is_empty());
        assert!(matches!(d.build(), Err(BackendConfigError::MissingCredential(_))));
        assert!(BackendDescriptor::mock().build().is_ok());
        let bad = BackendDescriptor {
            timeout_secs: 0.0,
            ..BackendDescriptor::default()
        };
        assert_eq!(bad.violations(), vec![BackendConfigError::BadTimeout(0.0)]);
    }
}
