use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use futures::StreamExt;
use serde_json::{json, Value};
use tokio_tungstenite::tungstenite::Message;

use valuevac_core::controller::{ActivityKind, Mode};
use valuevac_core::gateway::{serve, serve_with_log, GatewayConfig, GatewayError, GatewayHandle, JsonlLog, StateView};
use valuevac_core::harness::{
    replay, timeline_of, EventRecord, LogBody, LogDraft, LogRecord, RecordSink, LOG_SCHEMA_VERSION,
};

const CHORES: &str = r#"{"name": "chores", "floorplan": "living_room", "wall_clock_start": "10:00", "start_mode": "cleaning"}"#;
const QUIET: &str = r#"{"name": "quiet", "floorplan": "living_room", "wall_clock_start": "10:00"}"#;

fn config(dir: &Path, scenario_json: &str, acceleration: f64) -> GatewayConfig {
    let scenario = dir.join("scenario.json");
    std::fs::write(&scenario, scenario_json).unwrap();
    GatewayConfig {
        listen: "127.0.0.1:0".parse().unwrap(),
        log_path: dir.join("log.jsonl"),
        scenario: Some(scenario.display().to_string()),
        clock_acceleration: acceleration,
        ..GatewayConfig::default()
    }
}

fn url(h: &GatewayHandle, path: &str) -> String {
    format!("http://{}{}", h.local_addr(), path)
}

fn state(h: &GatewayHandle) -> StateView {
    reqwest::blocking::get(url(h, "/state")).unwrap().json().unwrap()
}

fn log_since(h: &GatewayHandle, since: u64) -> Vec<LogRecord> {
    reqwest::blocking::get(url(h, &format!("/log?since={since}"))).unwrap().json().unwrap()
}

fn post(h: &GatewayHandle, path: &str, body: Value) -> (u16, Value) {
    let resp = reqwest::blocking::Client::new().post(url(h, path)).json(&body).send().unwrap();
    let status = resp.status().as_u16();
    (status, resp.json().unwrap_or(Value::Null))
}

fn wait_for(what: &str, limit: Duration, mut check: impl FnMut() -> bool) {
    let start = Instant::now();
    while !check() {
        assert!(start.elapsed() < limit, "timed out waiting for {what}");
        std::thread::sleep(Duration::from_millis(20));
    }
}

#[test]
fn state_and_log_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let h = serve(&config(dir.path(), QUIET, 20.0)).unwrap();
    wait_for("a decision", Duration::from_secs(10), || state(&h).snapshot.last_decision.is_some());
    let s = state(&h);
    assert_eq!(s.scenario, "quiet");
    assert!(s.last_summary.as_deref().is_some_and(|t| !t.is_empty()));

    let all = log_since(&h, 0);
    assert!(matches!(all[0].body, LogBody::Event(EventRecord::RunStart { .. })));
    assert!(all.iter().all(|r| r.v == LOG_SCHEMA_VERSION));
    assert!(all.windows(2).all(|w| w[1].id == w[0].id + 1));
    let tail = log_since(&h, 2);
    assert_eq!(tail[0].id, 3);
    let limited: Vec<LogRecord> = reqwest::blocking::get(url(&h, "/log?since=0&limit=2")).unwrap().json().unwrap();
    assert_eq!(limited.len(), 2);
    let bad = reqwest::blocking::get(url(&h, "/log?since=minus")).unwrap();
    assert_eq!(bad.status().as_u16(), 400);
}

#[test]
fn dock_override_logs_override_then_mode_change() {
    let dir = tempfile::tempdir().unwrap();
    let h = serve(&config(dir.path(), CHORES, 20.0)).unwrap();
    let (status, body) = post(&h, "/override", json!({"operator_id": "alex", "token": "DOCK"}));
    assert_eq!(status, 200, "{body}");
    assert_eq!(body["mode"], "docking");
    let id = body["id"].as_u64().unwrap();
    let records = log_since(&h, id - 1);
    assert_eq!(records[0].id, id);
    match &records[0].body {
        LogBody::Override(o) => {
            assert_eq!(o.operator_id, "alex");
            assert_eq!(o.mode, Mode::Cleaning);
        }
        other => panic!("expected override, got {other:?}"),
    }
    match &records[1].body {
        LogBody::ModeChange(c) => {
            assert_eq!((c.cause, c.from, c.to), (id, Mode::Cleaning, Mode::Docking));
        }
        other => panic!("expected mode change, got {other:?}"),
    }
    assert_eq!(state(&h).snapshot.mode, Mode::Docking);
}

#[test]
fn rejected_overrides_change_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let h = serve(&config(dir.path(), CHORES, 20.0)).unwrap();
    post(&h, "/override", json!({"operator_id": "alex", "token": "DOCK"}));
    let before = h.records().len();
    for (body, want) in [
        (json!({"operator_id": "alex", "token": "FLY"}), 400),
        (json!({"token": "CLEAN"}), 400),
        (json!({"operator_id": " ", "token": "CLEAN"}), 400),
        (json!({"operator_id": "alex", "token": "CONTINUE"}), 422),
    ] {
        let (status, reply) = post(&h, "/override", body.clone());
        assert_eq!(status, want, "{body} -> {reply}");
        assert!(reply["error"].is_string());
    }
    assert_eq!(state(&h).snapshot.mode, Mode::Docking);
    assert!(!h.records()[before..].iter().any(|r| matches!(r.body, LogBody::Override(_) | LogBody::ModeChange(_))));
}

#[test]
fn spawned_pet_shows_up_in_next_features() {
    let dir = tempfile::tempdir().unwrap();
    let h = serve(&config(dir.path(), QUIET, 5.0)).unwrap();
    let (status, reply) = post(
        &h,
        "/scenario/event",
        json!({"action": {"type": "spawn", "entity": {"id": "rex", "kind": "pet", "pose": [3.0, 1.4, 0.0], "activity": "sitting"}}}),
    );
    assert_eq!(status, 202, "{reply}");
    assert_eq!(reply["queued"], true);
    wait_for("a decision", Duration::from_secs(10), || state(&h).snapshot.last_decision.is_some());
    let decision = state(&h).snapshot.last_decision.unwrap();
    assert!(decision.features.unwrap().entity("rex").is_some());
    assert!(state(&h).snapshot.entities.iter().any(|e| e.id.0 == "rex"));

    let (status, reply) = post(&h, "/scenario/event", json!({"action": {"type": "despawn", "id": "ghost"}}));
    assert_eq!(status, 422);
    assert!(reply["error"].as_str().unwrap().contains("ghost"));
}

#[tokio::test(flavor = "multi_thread")]
async fn websocket_streams_poses_and_records() {
    let dir = tempfile::tempdir().unwrap();
    let h = serve(&config(dir.path(), QUIET, 20.0)).unwrap();
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{}/events", h.local_addr())).await.unwrap();
    let started = Instant::now();
    let (mut poses, mut records) = (0, 0);
    while started.elapsed() < Duration::from_secs(2) {
        let Ok(Some(Ok(Message::Text(text)))) = tokio::time::timeout(Duration::from_millis(500), ws.next()).await else {
            continue;
        };
        let msg: Value = serde_json::from_str(&text).unwrap();
        match msg["type"].as_str().unwrap() {
            "pose" => poses += 1,
            "record" => records += 1,
            other => panic!("unexpected push {other}"),
        }
    }
    assert!(poses >= 10, "{poses} poses in 2 s");
    assert!(records > 0);
    tokio::task::spawn_blocking(move || drop(h)).await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn stalled_websocket_client_is_dropped() {
    let dir = tempfile::tempdir().unwrap();
    let h = serve(&config(dir.path(), CHORES, 5000.0)).unwrap();
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{}/events", h.local_addr())).await.unwrap();
    tokio::time::sleep(Duration::from_secs(4)).await;
    let deadline = Instant::now() + Duration::from_secs(30);
    let mut ended = false;
    while Instant::now() < deadline {
        match tokio::time::timeout(Duration::from_secs(5), ws.next()).await {
            Ok(Some(Ok(Message::Close(_)))) | Ok(None) | Ok(Some(Err(_))) => {
                ended = true;
                break;
            }
            Ok(Some(Ok(_))) => {}
            Err(_) => break,
        }
    }
    assert!(ended, "slow client was never disconnected");
    tokio::task::spawn_blocking(move || drop(h)).await.unwrap();
}

#[test]
fn port_in_use_is_a_startup_error() {
    let dir = tempfile::tempdir().unwrap();
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let mut cfg = config(dir.path(), QUIET, 20.0);
    cfg.listen = taken.local_addr().unwrap();
    assert!(matches!(serve(&cfg), Err(GatewayError::Bind { .. })));
    cfg.listen = "127.0.0.1:0".parse().unwrap();
    cfg.clock_acceleration = 0.0;
    assert!(matches!(serve(&cfg), Err(GatewayError::Acceleration(_))));
}

/// Accepts a fixed number of writes, then fails like a full disk.
struct FailingDisk {
    writes_left: usize,
}

impl Write for FailingDisk {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        if self.writes_left == 0 {
            return Err(std::io::Error::other("no space left on device"));
        }
        self.writes_left -= 1;
        Ok(buf.len())
    }
    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

#[test]
fn write_failure_degrades_and_stops_the_robot() {
    let dir = tempfile::tempdir().unwrap();
    let log = JsonlLog::with_writer(Box::new(FailingDisk { writes_left: 20 }), 0);
    let h = serve_with_log(&config(dir.path(), CHORES, 20.0), log, Vec::new()).unwrap();
    wait_for("degraded", Duration::from_secs(10), || state(&h).snapshot.degraded.is_some());
    let s = state(&h);
    assert_eq!(s.snapshot.activity, ActivityKind::Held);
    let pose = s.snapshot.pose;
    std::thread::sleep(Duration::from_millis(300));
    assert_eq!(state(&h).snapshot.pose, pose);
    let (status, _) = post(&h, "/override", json!({"operator_id": "alex", "token": "DOCK"}));
    assert_eq!(status, 503);
    assert_eq!(h.records().len(), 20);
}

fn draft(n: u64) -> LogDraft {
    LogDraft {
        sim_time: n as f64 * 0.05,
        wall_clock: "08:00".parse().unwrap(),
        body: LogBody::Event(EventRecord::Degraded { reason: format!("marker {n}") }),
    }
}

#[test]
fn ten_thousand_appends_one_line_each() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.jsonl");
    let (mut log, _) = JsonlLog::open(&path).unwrap();
    for n in 0..10_000 {
        log.append(draft(n)).unwrap();
    }
    drop(log);
    let text = std::fs::read_to_string(&path).unwrap();
    let ids: Vec<u64> = text
        .lines()
        .map(|l| serde_json::from_str::<LogRecord>(l).unwrap().id)
        .collect();
    assert_eq!(ids.len(), 10_000);
    assert_eq!(ids.iter().max(), Some(&10_000));
    assert!(ids.windows(2).all(|w| w[1] == w[0] + 1));
}

#[test]
fn restart_continues_ids_and_timeline_replays() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), CHORES, 20.0);
    let h = serve(&cfg).unwrap();
    wait_for("a decision", Duration::from_secs(10), || state(&h).snapshot.last_decision.is_some());
    post(&h, "/override", json!({"operator_id": "alex", "token": "INTERRUPT"}));
    let first_run = h.records();
    h.shutdown();
    let last = first_run.last().unwrap().id;

    let h = serve(&cfg).unwrap();
    wait_for("new records", Duration::from_secs(10), || h.records().len() > first_run.len());
    let all = log_since(&h, 0);
    let lines = |rs: &[LogRecord]| rs.iter().map(LogRecord::to_json_line).collect::<Vec<_>>();
    assert_eq!(lines(&all[..first_run.len()]), lines(&first_run));
    assert_eq!(all[first_run.len()].id, last + 1);
    assert!(matches!(all[first_run.len()].body, LogBody::Event(EventRecord::RunStart { .. })));
    h.shutdown();

    let on_disk: Vec<LogRecord> = std::fs::read_to_string(&cfg.log_path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(replay(&cfg.log_path).unwrap(), timeline_of(&on_disk));
}

#[test]
fn state_agrees_with_logged_timeline() {
    let dir = tempfile::tempdir().unwrap();
    let h = serve(&config(dir.path(), QUIET, 40.0)).unwrap();
    for _ in 0..10 {
        std::thread::sleep(Duration::from_millis(150));
        let s = state(&h).snapshot;
        let records = log_since(&h, 0);
        let mode = timeline_of(&records)
            .iter()
            .filter(|t| t.sim_time < s.sim_time)
            .last()
            .map_or(Mode::Observation, |t| t.to);
        assert_eq!(s.mode, mode, "at {} s", s.sim_time);
        if let Some(id) = s.last_decision_id {
            assert!(records.iter().any(|r| r.id == id && r.decision().is_some()));
        }
    }
}
