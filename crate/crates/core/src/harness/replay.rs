use std::io::BufRead;
use std::path::Path;

use thiserror::Error;

use super::log::{EventRecord, LogBody, LogRecord, ModeChange};
use super::run::TimelineEntry;
use crate::controller::{transition, CadenceConfig, ControllerState, Decision, Mode};

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: not a log record: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Integrity(#[from] IntegrityError),
}

/// The first record at which the log stops agreeing with the transition
/// function.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("record {record_id}: {reason}")]
pub struct IntegrityError {
    pub record_id: u64,
    pub reason: String,
}

fn diverged(record_id: u64, reason: impl Into<String>) -> IntegrityError {
    IntegrityError {
        record_id,
        reason: reason.into(),
    }
}

/// Re-derives the mode timeline from decision and override records and
/// checks it against the logged mode changes.
pub fn replay_records(records: &[LogRecord]) -> Result<Vec<TimelineEntry>, IntegrityError> {
    let cadence = CadenceConfig::default();
    let mut state: Option<ControllerState> = None;
    // (cause id, from, to) the next record must confirm
    let mut expected: Option<(u64, Mode, Mode)> = None;
    let mut timeline = Vec::new();
    let mut last_id = 0u64;

    for r in records {
        if r.id <= last_id {
            return Err(diverged(r.id, format!("id does not increase (previous {last_id})")));
        }
        last_id = r.id;

        if let Some((cause, from, to)) = expected.take() {
            match &r.body {
                LogBody::ModeChange(mc) if *mc == (ModeChange { cause, from, to }) => {
                    timeline.push(TimelineEntry {
                        record_id: r.id,
                        cause,
                        sim_time: r.sim_time,
                        from,
                        to,
                    });
                    continue;
                }
                LogBody::ModeChange(mc) => {
                    return Err(diverged(
                        cause,
                        format!(
                            "expected mode change {from} -> {to}, record {} logs {} -> {} (cause {})",
                            r.id, mc.from, mc.to, mc.cause
                        ),
                    ))
                }
                _ => {
                    return Err(diverged(
                        cause,
                        format!("expected mode change {from} -> {to}, record {} is a {}", r.id, r.kind()),
                    ))
                }
            }
        }

        let decision = match &r.body {
            LogBody::Event(EventRecord::RunStart { mode, seed, .. }) => {
                state = Some(ControllerState::new(*mode, *seed));
                continue;
            }
            LogBody::ModeChange(mc) => {
                return Err(diverged(
                    r.id,
                    format!("unexplained mode change {} -> {} (cause {})", mc.from, mc.to, mc.cause),
                ))
            }
            LogBody::Decision(d) => {
                check_mode(r.id, &state, d.mode)?;
                d.decision
            }
            LogBody::Override(o) => {
                check_mode(r.id, &state, o.mode)?;
                Decision::operator(o.token)
            }
            LogBody::Event(_) | LogBody::Error(_) => continue,
        };
        let current = state.as_ref().expect("checked by check_mode");
        let next = transition(current, &decision, &cadence).map_err(|e| diverged(r.id, e.to_string()))?;
        if next.mode != current.mode {
            expected = Some((r.id, current.mode, next.mode));
        }
        state = Some(next);
    }
    if let Some((cause, from, to)) = expected {
        return Err(diverged(cause, format!("log ends before the mode change {from} -> {to}")));
    }
    Ok(timeline)
}

fn check_mode(id: u64, state: &Option<ControllerState>, logged: Mode) -> Result<(), IntegrityError> {
    match state {
        None => Err(diverged(id, "record precedes run_start")),
        Some(s) if s.mode != logged => Err(diverged(
            id,
            format!("record says mode {logged}, replay is in {}", s.mode),
        )),
        Some(_) => Ok(()),
    }
}

pub fn read_log(path: &Path) -> Result<Vec<LogRecord>, ReplayError> {
    let io_err = |source| ReplayError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::open(path).map_err(io_err)?;
    let mut records = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(|source| ReplayError::Parse { line: i + 1, source })?);
    }
    Ok(records)
}

pub fn replay(path: &Path) -> Result<Vec<TimelineEntry>, ReplayError> {
    Ok(replay_records(&read_log(path)?)?)
}
