use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::Router;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tokio::sync::oneshot;

use super::{ChatMessage, ChatRequest, MockBackend, ModelBackend, Stage};
use crate::pipeline::prompt::detect_stage;

/// Fingerprint of a request: sha256 over the serialized message list.
pub fn request_fingerprint(messages: &[ChatMessage]) -> String {
    let json = serde_json::to_string(messages).expect("messages serialize");
    hex::encode(Sha256::digest(json.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StubReply {
    /// a normal completion carrying this content
    Text { content: String },
    /// a raw HTTP error
    Status { status: u16, body: String },
}

impl StubReply {
    pub fn text(content: impl Into<String>) -> Self {
        StubReply::Text { content: content.into() }
    }
}

/// Canned reply for requests whose body contains `contains` (and whose
/// stage matches, when given). Replies are served in order and the last
/// one repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StubRule {
    #[serde(default)]
    pub stage: Option<Stage>,
    #[serde(default)]
    pub contains: Option<String>,
    pub replies: Vec<StubReply>,
    #[serde(default)]
    pub delay_ms: u64,
}

impl StubRule {
    pub fn for_stage(stage: Stage, reply: StubReply) -> Self {
        Self {
            stage: Some(stage),
            contains: None,
            replies: vec![reply],
            delay_ms: 0,
        }
    }

    pub fn delayed(mut self, delay: Duration) -> Self {
        self.delay_ms = delay.as_millis() as u64;
        self
    }
}

/// What the stub answers. Lookup order: exact fingerprint, first matching
/// rule, then the fallback (the mock's answer when `fallback` is `None`).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StubScript {
    #[serde(default)]
    pub fingerprints: HashMap<String, StubReply>,
    #[serde(default)]
    pub rules: Vec<StubRule>,
    #[serde(default)]
    pub fallback: Option<StubReply>,
}

#[derive(Debug, Clone)]
pub struct RecordedRequest {
    pub body: String,
    pub request: Option<ChatRequest>,
    pub stage: Option<Stage>,
    pub authorization: Option<String>,
}

struct StubState {
    script: StubScript,
    served: Vec<usize>,
    recorded: Vec<RecordedRequest>,
}

impl StubState {
    fn choose(&mut self, body: &str, request: Option<&ChatRequest>, stage: Option<Stage>) -> (StubReply, Duration) {
        if let Some(req) = request {
            if let Some(reply) = self.script.fingerprints.get(&request_fingerprint(&req.messages)) {
                return (reply.clone(), Duration::ZERO);
            }
        }
        let hit = self.script.rules.iter().position(|rule| {
            rule.stage.is_none_or(|s| Some(s) == stage) && rule.contains.as_deref().is_none_or(|c| body.contains(c))
        });
        if let Some(i) = hit {
            let rule = &self.script.rules[i];
            let n = self.served[i];
            self.served[i] += 1;
            let reply = rule.replies.get(n).or(rule.replies.last()).cloned().unwrap_or(StubReply::Status {
                status: 500,
                body: "rule has no replies".into(),
            });
            return (reply, Duration::from_millis(rule.delay_ms));
        }
        if let Some(reply) = &self.script.fallback {
            return (reply.clone(), Duration::ZERO);
        }
        let reply = match request.map(|r| MockBackend.complete(r)) {
            Some(Ok(content)) => StubReply::Text { content },
            Some(Err(e)) => StubReply::Status {
                status: 422,
                body: e.to_string(),
            },
            None => StubReply::Status {
                status: 400,
                body: "request is not a chat completion".into(),
            },
        };
        (reply, Duration::ZERO)
    }
}

type Shared = Arc<Mutex<StubState>>;

async fn completions(State(state): State<Shared>, headers: HeaderMap, body: String) -> Response {
    let request: Option<ChatRequest> = serde_json::from_str(&body).ok();
    let stage = request.as_ref().and_then(|r| detect_stage(&r.system_text()));
    let (reply, delay) = {
        let mut guard = state.lock().expect("stub state lock");
        let chosen = guard.choose(&body, request.as_ref(), stage);
        guard.recorded.push(RecordedRequest {
            body: body.clone(),
            request: request.clone(),
            stage,
            authorization: headers
                .get("authorization")
                .and_then(|v| v.to_str().ok())
                .map(str::to_string),
        });
        chosen
    };
    if !delay.is_zero() {
        tokio::time::sleep(delay).await;
    }
    match reply {
        StubReply::Text { content } => axum::Json(serde_json::json!({
            "id": "stub",
            "object": "chat.completion",
            "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}],
        }))
        .into_response(),
        StubReply::Status { status, body } => {
            (StatusCode::from_u16(status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR), body).into_response()
        }
    }
}

/// Local chat-completions endpoint with canned replies that records every
/// request it receives. Shuts down on drop.
pub struct StubServer {
    addr: SocketAddr,
    state: Shared,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl StubServer {
    pub fn start(script: StubScript) -> std::io::Result<Self> {
        let listener = std::net::TcpListener::bind("127.0.0.1:0")?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let state: Shared = Arc::new(Mutex::new(StubState {
            served: vec![0; script.rules.len()],
            script,
            recorded: Vec::new(),
        }));
        let (tx, rx) = oneshot::channel();
        let app = Router::new()
            .route("/v1/chat/completions", post(completions))
            .with_state(state.clone());
        let runtime = tokio::runtime::Builder::new_current_thread().enable_all().build()?;
        let thread = std::thread::Builder::new().name("stub-backend".into()).spawn(move || {
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener).expect("listener registers");
                tokio::select! {
                    res = axum::serve(listener, app) => {
                        if let Err(e) = res {
                            log::error!("stub server stopped: {e}");
                        }
                    }
                    _ = rx => {}
                }
            });
        })?;
        Ok(Self {
            addr,
            state,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn endpoint(&self) -> String {
        format!("http://{}/v1/chat/completions", self.addr)
    }

    pub fn requests(&self) -> Vec<RecordedRequest> {
        self.state.lock().expect("stub state lock").recorded.clone()
    }

    pub fn requests_for(&self, stage: Stage) -> Vec<RecordedRequest> {
        self.requests().into_iter().filter(|r| r.stage == Some(stage)).collect()
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(thread) = self.thread.take() {
            let _ = thread.join();
        }
    }
}
