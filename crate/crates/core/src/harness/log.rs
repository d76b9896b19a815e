use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::scenario::EventAction;
use crate::controller::{ControllerEvent, DecisionToken, Mode};
use crate::pipeline::DecisionRecord;
use crate::world::WallClock;

pub const LOG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeChange {
    /// id of the decision or override record that caused the change
    pub cause: u64,
    pub from: Mode,
    pub to: Mode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverrideRecord {
    pub operator_id: String,
    pub token: DecisionToken,
    /// operator-side time of issue, when supplied
    #[serde(default)]
    pub issued_wall_clock: Option<WallClock>,
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventRecord {
    RunStart {
        scenario: String,
        mode: Mode,
        seed: u64,
        backend_id: String,
    },
    EvalSubmitted {
        eval_id: u64,
        mode: Mode,
        frame_seqs: Vec<u64>,
    },
    EvalDiscarded {
        eval_id: u64,
        reason: String,
    },
    Scenario {
        action: EventAction,
    },
    Controller {
        detail: ControllerEvent,
    },
    Degraded {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum LogBody {
    Decision(DecisionRecord),
    ModeChange(ModeChange),
    Override(OverrideRecord),
    Event(EventRecord),
    Error(ErrorRecord),
}

/// One line of the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub v: u32,
    pub id: u64,
    pub sim_time: f64,
    pub wall_clock: WallClock,
    #[serde(flatten)]
    pub body: LogBody,
}

impl LogRecord {
    pub fn kind(&self) -> &'static str {
        match self.body {
            LogBody::Decision(_) => "decision",
            LogBody::ModeChange(_) => "mode_change",
            LogBody::Override(_) => "override",
            LogBody::Event(_) => "event",
            LogBody::Error(_) => "error",
        }
    }

    pub fn decision(&self) -> Option<&DecisionRecord> {
        match &self.body {
            LogBody::Decision(d) => Some(d),
            _ => None,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("log records serialize")
    }
}

/// A record before the sink assigns its id.
#[derive(Debug, Clone, PartialEq)]
pub struct LogDraft {
    pub sim_time: f64,
    pub wall_clock: WallClock,
    pub body: LogBody,
}

impl LogDraft {
    pub fn into_record(self, id: u64) -> LogRecord {
        LogRecord {
            v: LOG_SCHEMA_VERSION,
            id,
            sim_time: self.sim_time,
            wall_clock: self.wall_clock,
            body: self.body,
        }
    }
}

#[derive(Debug, Error)]
pub enum SinkError {
    #[error("log write failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("log is read-only after an earlier write failure")]
    Degraded,
}

/// Destination for log records; assigns strictly increasing ids.
pub trait RecordSink: Send {
    fn append(&mut self, draft: LogDraft) -> Result<LogRecord, SinkError>;
}

/// In-memory sink used by scenario runs.
#[derive(Debug, Default)]
pub struct MemorySink {
    records: Vec<LogRecord>,
}

impl MemorySink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<LogRecord> {
        self.records
    }
}

impl RecordSink for MemorySink {
    fn append(&mut self, draft: LogDraft) -> Result<LogRecord, SinkError> {
        let id = self.records.last().map_or(1, |r| r.id + 1);
        let record = draft.into_record(id);
        self.records.push(record.clone());
        Ok(record)
    }
}

/// Serializes records as JSONL, one per line.
pub fn to_jsonl(records: &[LogRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_json_line());
        out.push('\n');
    }
    out
}
