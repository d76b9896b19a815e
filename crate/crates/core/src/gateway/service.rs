use std::net::SocketAddr;
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::{Arc, RwLock};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::ws::{CloseFrame, Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::{broadcast, oneshot};

use super::config::GatewayConfig;
use super::journal::JsonlLog;
use crate::controller::{ActivityKind, Mode};
use crate::harness::{
    apply_event, EventAction, LogDraft, LogRecord, OverrideCommand, OverrideError, RecordSink, ScenarioError, SimSnapshot,
    Simulation, SimulationConfig, SimulationError, SinkError, TimedEvent,
};
use crate::world::{Pose, WallClock, TICK_SECONDS};

/// Bounded per-client backlog; a client that falls further behind is
/// disconnected.
pub const PUSH_BUFFER: usize = 256;
/// Real-time interval between pose pushes.
pub const POSE_PUSH_INTERVAL: Duration = Duration::from_millis(100);
const SEND_TIMEOUT: Duration = Duration::from_secs(2);

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("backend: {0}")]
    Backend(String),
    #[error("cannot open log {path}: {source}")]
    Log {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error("clock_acceleration must be > 0 to serve, got {0}")]
    Acceleration(f64),
}

/// Messages on the `/events` stream.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PushMessage {
    Record { record: LogRecord },
    Pose(PoseUpdate),
    Degraded { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseUpdate {
    pub tick: u64,
    pub sim_time: f64,
    pub wall_clock: WallClock,
    pub mode: Mode,
    pub activity: ActivityKind,
    pub pose: Pose,
    pub wait_timer: f64,
}

impl PoseUpdate {
    fn of(s: &SimSnapshot) -> Self {
        Self {
            tick: s.tick,
            sim_time: s.sim_time,
            wall_clock: s.wall_clock,
            mode: s.mode,
            activity: s.activity,
            pose: s.pose,
            wait_timer: s.wait_timer,
        }
    }
}

/// Body of `GET /state`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateView {
    pub scenario: String,
    pub last_summary: Option<String>,
    #[serde(flatten)]
    pub snapshot: SimSnapshot,
}

/// Body of `POST /scenario/event`; `at` defaults to now.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventRequest {
    #[serde(default)]
    pub at: Option<f64>,
    pub action: EventAction,
}

enum Command {
    Override(OverrideCommand, oneshot::Sender<Result<(u64, Mode), OverrideError>>),
    Event(EventRequest, oneshot::Sender<Result<f64, String>>),
    Shutdown,
}

/// Everything the log has written, plus the push stream.
struct Feed {
    records: RwLock<Vec<LogRecord>>,
    push: broadcast::Sender<Arc<str>>,
}

struct Shared {
    scenario: String,
    snapshot: RwLock<SimSnapshot>,
    feed: Arc<Feed>,
    commands: mpsc::Sender<Command>,
}

impl Feed {
    fn publish(&self, msg: &PushMessage) {
        let text: Arc<str> = serde_json::to_string(msg).expect("push messages serialize").into();
        // No subscribers is fine.
        let _ = self.push.send(text);
    }
}

/// Persists to the JSONL log, then mirrors each record to `/log` and the
/// push stream.
struct ServiceSink {
    log: JsonlLog,
    feed: Arc<Feed>,
}

impl RecordSink for ServiceSink {
    fn append(&mut self, draft: LogDraft) -> Result<LogRecord, SinkError> {
        let record = self.log.append(draft)?;
        self.feed.records.write().expect("records lock").push(record.clone());
        self.feed.publish(&PushMessage::Record { record: record.clone() });
        Ok(record)
    }
}

/// A running service: simulation thread plus HTTP server thread.
pub struct GatewayHandle {
    addr: SocketAddr,
    shared: Arc<Shared>,
    stop_server: Option<oneshot::Sender<()>>,
    sim: Option<JoinHandle<()>>,
    server: Option<JoinHandle<()>>,
}

impl GatewayHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn snapshot(&self) -> SimSnapshot {
        self.shared.snapshot.read().expect("snapshot lock").clone()
    }

    pub fn records(&self) -> Vec<LogRecord> {
        self.shared.feed.records.read().expect("records lock").clone()
    }

    /// Blocks until the server stops.
    pub fn wait(mut self) {
        if let Some(server) = self.server.take() {
            let _ = server.join();
        }
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        let _ = self.shared.commands.send(Command::Shutdown);
        if let Some(tx) = self.stop_server.take() {
            let _ = tx.send(());
        }
        if let Some(sim) = self.sim.take() {
            let _ = sim.join();
        }
        if let Some(server) = self.server.take() {
            let _ = server.join();
        }
    }
}

impl Drop for GatewayHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Starts the service described by `config`, logging to its `log_path`.
pub fn serve(config: &GatewayConfig) -> Result<GatewayHandle, GatewayError> {
    let (log, existing) = JsonlLog::open(&config.log_path).map_err(|source| GatewayError::Log {
        path: config.log_path.display().to_string(),
        source,
    })?;
    serve_with_log(config, log, existing)
}

/// Like [`serve`] with an already-open log; `existing` seeds `GET /log`.
pub fn serve_with_log(
    config: &GatewayConfig,
    log: JsonlLog,
    existing: Vec<LogRecord>,
) -> Result<GatewayHandle, GatewayError> {
    let acceleration = config.clock_acceleration;
    if !(acceleration > 0.0 && acceleration.is_finite()) {
        return Err(GatewayError::Acceleration(acceleration));
    }
    let scenario = config.scenario()?;
    let pipeline = config.pipeline().map_err(GatewayError::Backend)?;
    let listener = std::net::TcpListener::bind(config.listen).map_err(|source| GatewayError::Bind {
        addr: config.listen,
        source,
    })?;
    listener.set_nonblocking(true).map_err(|source| GatewayError::Bind {
        addr: config.listen,
        source,
    })?;
    let addr = listener.local_addr().map_err(|source| GatewayError::Bind {
        addr: config.listen,
        source,
    })?;

    let (push, _) = broadcast::channel(PUSH_BUFFER);
    let feed = Arc::new(Feed {
        records: RwLock::new(existing),
        push,
    });
    let sim_config = SimulationConfig {
        cadence: config.cadence.clone(),
        speeds: config.speeds.clone(),
        ..SimulationConfig::for_pipeline(&pipeline)
    };
    let sink = ServiceSink { log, feed: feed.clone() };
    let sim = Simulation::new(&scenario, pipeline, sim_config, Box::new(sink))?;
    let (commands, command_rx) = mpsc::channel();
    let shared = Arc::new(Shared {
        scenario: scenario.name.clone(),
        snapshot: RwLock::new(sim.snapshot()),
        feed,
        commands,
    });

    let sim_shared = shared.clone();
    let sim_thread = std::thread::Builder::new()
        .name("simulation".into())
        .spawn(move || sim_loop(sim, sim_shared, command_rx, acceleration))
        .expect("spawn simulation thread");

    let (stop_server, stop_rx) = oneshot::channel::<()>();
    let app = router(shared.clone());
    let server_thread = std::thread::Builder::new()
        .name("http".into())
        .spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()
                .expect("tokio runtime");
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener).expect("listener registers with runtime");
                let _ = axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = stop_rx.await;
                    })
                    .await;
            });
        })
        .expect("spawn http thread");

    log::info!("serving on http://{addr}");
    Ok(GatewayHandle {
        addr,
        shared,
        stop_server: Some(stop_server),
        sim: Some(sim_thread),
        server: Some(server_thread),
    })
}

fn sim_loop(mut sim: Simulation, shared: Arc<Shared>, commands: mpsc::Receiver<Command>, acceleration: f64) {
    let tick_real = Duration::from_secs_f64(TICK_SECONDS / acceleration);
    let mut next = Instant::now();
    let mut last_pose = Instant::now() - POSE_PUSH_INTERVAL;
    let mut degraded_sent = false;
    loop {
        sim.tick();
        let snap = sim.snapshot();
        if last_pose.elapsed() >= POSE_PUSH_INTERVAL {
            shared.feed.publish(&PushMessage::Pose(PoseUpdate::of(&snap)));
            last_pose = Instant::now();
        }
        if let (Some(reason), false) = (&snap.degraded, degraded_sent) {
            shared.feed.publish(&PushMessage::Degraded { reason: reason.clone() });
            degraded_sent = true;
        }
        *shared.snapshot.write().expect("snapshot lock") = snap;

        next += tick_real;
        let now = Instant::now();
        if next + Duration::from_secs(1) < now {
            // Far behind real time; drop the backlog instead of bursting.
            next = now;
        }
        // Commands land between ticks, as soon as they arrive.
        loop {
            let wait = next.saturating_duration_since(Instant::now());
            match commands.recv_timeout(wait) {
                Ok(Command::Shutdown) | Err(RecvTimeoutError::Disconnected) => return,
                Ok(cmd) => {
                    handle(&mut sim, cmd);
                    let snap = sim.snapshot();
                    shared.feed.publish(&PushMessage::Pose(PoseUpdate::of(&snap)));
                    *shared.snapshot.write().expect("snapshot lock") = snap;
                }
                Err(RecvTimeoutError::Timeout) => break,
            }
        }
    }
}

fn handle(sim: &mut Simulation, cmd: Command) {
    match cmd {
        Command::Override(c, reply) => {
            let result = sim.apply_override(c).map(|id| (id, sim.controller().mode()));
            let _ = reply.send(result);
        }
        Command::Event(req, reply) => {
            let now = sim.sim_time();
            let at = req.at.unwrap_or(now);
            let result = if !(at.is_finite() && at >= 0.0) {
                Err(format!("`at` must be a finite time >= 0, got {at}"))
            } else if at <= now {
                // Due now: dry-run so an impossible action is refused up front.
                let mut world = sim.robot().world.clone();
                let mut clock = sim.robot().clock.clone();
                apply_event(&mut world, &mut clock, &req.action).map_err(|e| e.to_string())
            } else {
                Ok(())
            };
            let result = result.map(|()| {
                sim.inject_event(TimedEvent { at, action: req.action });
                at
            });
            let _ = reply.send(result);
        }
        Command::Shutdown => {}
    }
}

fn router(shared: Arc<Shared>) -> Router {
    Router::new()
        .route("/state", get(get_state))
        .route("/log", get(get_log))
        .route("/override", post(post_override))
        .route("/scenario/event", post(post_event))
        .route("/events", get(events))
        .with_state(shared)
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
}

fn reject(status: StatusCode, error: impl Into<String>) -> Response {
    (status, Json(ErrorBody { error: error.into() })).into_response()
}

async fn get_state(State(shared): State<Arc<Shared>>) -> Json<StateView> {
    let snapshot = shared.snapshot.read().expect("snapshot lock").clone();
    Json(StateView {
        scenario: shared.scenario.clone(),
        last_summary: snapshot.last_decision.as_ref().map(|d| d.summary.clone()),
        snapshot,
    })
}

#[derive(Debug, Deserialize)]
struct LogQuery {
    #[serde(default)]
    since: u64,
    #[serde(default)]
    limit: Option<usize>,
}

async fn get_log(State(shared): State<Arc<Shared>>, query: Result<Query<LogQuery>, QueryRejection>) -> Response {
    let Query(q) = match query {
        Ok(q) => q,
        Err(e) => return reject(StatusCode::BAD_REQUEST, e.body_text()),
    };
    let records = shared.feed.records.read().expect("records lock");
    let start = records.partition_point(|r| r.id <= q.since);
    let end = q.limit.map_or(records.len(), |n| (start + n).min(records.len()));
    Json(records[start..end].to_vec()).into_response()
}

async fn post_override(State(shared): State<Arc<Shared>>, body: Result<Json<OverrideCommand>, JsonRejection>) -> Response {
    let Json(cmd) = match body {
        Ok(b) => b,
        Err(e) => return reject(StatusCode::BAD_REQUEST, e.body_text()),
    };
    let (tx, rx) = oneshot::channel();
    if shared.commands.send(Command::Override(cmd, tx)).is_err() {
        return reject(StatusCode::SERVICE_UNAVAILABLE, "simulation stopped");
    }
    match rx.await {
        Ok(Ok((id, mode))) => Json(serde_json::json!({ "id": id, "mode": mode })).into_response(),
        Ok(Err(e)) => {
            let status = match e {
                OverrideError::NotAllowed { .. } => StatusCode::UNPROCESSABLE_ENTITY,
                OverrideError::MissingOperator => StatusCode::BAD_REQUEST,
                OverrideError::Degraded => StatusCode::SERVICE_UNAVAILABLE,
            };
            reject(status, e.to_string())
        }
        Err(_) => reject(StatusCode::SERVICE_UNAVAILABLE, "simulation stopped"),
    }
}

async fn post_event(State(shared): State<Arc<Shared>>, body: Result<Json<EventRequest>, JsonRejection>) -> Response {
    let Json(req) = match body {
        Ok(b) => b,
        Err(e) => return reject(StatusCode::BAD_REQUEST, e.body_text()),
    };
    let (tx, rx) = oneshot::channel();
    if shared.commands.send(Command::Event(req, tx)).is_err() {
        return reject(StatusCode::SERVICE_UNAVAILABLE, "simulation stopped");
    }
    match rx.await {
        Ok(Ok(at)) => (StatusCode::ACCEPTED, Json(serde_json::json!({ "queued": true, "at": at }))).into_response(),
        Ok(Err(reason)) => reject(StatusCode::UNPROCESSABLE_ENTITY, reason),
        Err(_) => reject(StatusCode::SERVICE_UNAVAILABLE, "simulation stopped"),
    }
}

async fn events(ws: WebSocketUpgrade, State(shared): State<Arc<Shared>>) -> Response {
    let rx = shared.feed.push.subscribe();
    ws.on_upgrade(move |socket| push_client(socket, rx))
}

async fn push_client(mut socket: WebSocket, mut rx: broadcast::Receiver<Arc<str>>) {
    loop {
        tokio::select! {
            msg = rx.recv() => match msg {
                Ok(text) => {
                    let send = socket.send(Message::Text(text.as_ref().into()));
                    match tokio::time::timeout(SEND_TIMEOUT, send).await {
                        Ok(Ok(())) => {}
                        _ => break,
                    }
                }
                Err(broadcast::error::RecvError::Lagged(missed)) => {
                    let frame = CloseFrame {
                        code: 1008,
                        reason: format!("client too slow, {missed} messages dropped").into(),
                    };
                    let _ = tokio::time::timeout(SEND_TIMEOUT, socket.send(Message::Close(Some(frame)))).await;
                    break;
                }
                Err(broadcast::error::RecvError::Closed) => break,
            },
            incoming = socket.recv() => match incoming {
                None | Some(Err(_)) | Some(Ok(Message::Close(_))) => break,
                Some(Ok(_)) => {}
            },
        }
    }
}
