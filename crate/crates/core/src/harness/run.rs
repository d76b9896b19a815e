use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::log::{to_jsonl, LogBody, LogRecord, MemorySink, ModeChange, RecordSink, SinkError, LogDraft};
use super::scenario::Scenario;
use super::simulation::{Simulation, SimulationConfig, SimulationError};
use crate::controller::{CadenceConfig, Mode, SpeedConfig};
use crate::pipeline::{DecisionRecord, Pipeline};
use crate::world::TICK_SECONDS;

pub const DEFAULT_ACCELERATION: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunUntil {
    FirstDecision,
    SimSeconds(f64),
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub until: RunUntil,
    /// sim seconds per real second; 0 runs unpaced (deterministic
    /// backends only)
    pub acceleration: f64,
    /// hard stop for `FirstDecision` runs
    pub max_sim_seconds: f64,
    pub cadence: CadenceConfig,
    pub speeds: SpeedConfig,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            until: RunUntil::FirstDecision,
            acceleration: DEFAULT_ACCELERATION,
            max_sim_seconds: 3600.0,
            cadence: CadenceConfig::default(),
            speeds: SpeedConfig::default(),
        }
    }
}

impl RunOptions {
    pub fn unpaced(until: RunUntil) -> Self {
        Self {
            until,
            acceleration: 0.0,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineEntry {
    /// id of the mode_change record
    pub record_id: u64,
    pub cause: u64,
    pub sim_time: f64,
    pub from: Mode,
    pub to: Mode,
}

/// Mode changes in log order.
pub fn timeline_of(records: &[LogRecord]) -> Vec<TimelineEntry> {
    records
        .iter()
        .filter_map(|r| match &r.body {
            LogBody::ModeChange(ModeChange { cause, from, to }) => Some(TimelineEntry {
                record_id: r.id,
                cause: *cause,
                sim_time: r.sim_time,
                from: *from,
                to: *to,
            }),
            _ => None,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub scenario: String,
    pub records: Vec<LogRecord>,
    pub timeline: Vec<TimelineEntry>,
}

impl RunLog {
    pub fn decisions(&self) -> impl Iterator<Item = &DecisionRecord> {
        self.records.iter().filter_map(LogRecord::decision)
    }

    pub fn first_decision(&self) -> Option<&DecisionRecord> {
        self.decisions().next()
    }

    pub fn to_jsonl(&self) -> String {
        to_jsonl(&self.records)
    }
}

struct SharedSink(std::sync::Arc<std::sync::Mutex<MemorySink>>);

impl RecordSink for SharedSink {
    fn append(&mut self, draft: LogDraft) -> Result<LogRecord, SinkError> {
        self.0.lock().expect("sink lock").append(draft)
    }
}

/// Runs the closed loop on the simulated clock, paced at the configured
/// acceleration.
pub fn run_scenario(scenario: &Scenario, pipeline: &Pipeline, options: &RunOptions) -> Result<RunLog, SimulationError> {
    if !(options.acceleration >= 0.0 && options.acceleration.is_finite()) {
        return Err(SimulationError::Config(format!(
            "clock acceleration must be finite and >= 0, got {}",
            options.acceleration
        )));
    }
    if options.acceleration == 0.0 && !pipeline.deterministic() {
        return Err(SimulationError::Config(
            "unpaced runs need a deterministic backend; set a clock acceleration".into(),
        ));
    }
    let sink = std::sync::Arc::new(std::sync::Mutex::new(MemorySink::new()));
    let config = SimulationConfig {
        cadence: options.cadence.clone(),
        speeds: options.speeds.clone(),
        ..SimulationConfig::for_pipeline(pipeline)
    };
    let mut sim = Simulation::new(scenario, pipeline.clone(), config, Box::new(SharedSink(sink.clone())))?;

    let limit = match options.until {
        RunUntil::FirstDecision => options.max_sim_seconds,
        RunUntil::SimSeconds(s) => s,
    };
    let max_ticks = (limit / TICK_SECONDS).round() as u64;
    let tick_real = (options.acceleration > 0.0).then(|| TICK_SECONDS / options.acceleration);
    let started = Instant::now();
    for k in 0..max_ticks {
        sim.tick();
        if options.until == RunUntil::FirstDecision && sim.decisions() > 0 {
            break;
        }
        if sim.degraded().is_some() {
            break;
        }
        if let Some(step) = tick_real {
            let target = started + Duration::from_secs_f64(step * (k + 1) as f64);
            let now = Instant::now();
            if target > now {
                std::thread::sleep(target - now);
            }
        }
    }
    drop(sim);
    let records = std::mem::take(&mut *sink.lock().expect("sink lock")).into_records();
    Ok(RunLog {
        scenario: scenario.name.clone(),
        timeline: timeline_of(&records),
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::DecisionToken;

    fn first(name: &str) -> RunLog {
        let scenario = Scenario::bundled(name).unwrap();
        run_scenario(&scenario, &Pipeline::mock(), &RunOptions::unpaced(RunUntil::FirstDecision)).unwrap()
    }

    #[test]
    fn bundled_scenarios_reach_their_expected_decision() {
        for name in super::super::scenario::bundled_names() {
            let scenario = Scenario::bundled(name).unwrap();
            let log = first(name);
            let d = log.first_decision().unwrap_or_else(|| panic!("{name}: no decision"));
            assert_eq!(Some(d.decision.token), scenario.expected, "{name}: {:?}", d.trace);
        }
    }

    #[test]
    fn visitor_is_seen_as_transient() {
        let log = first("transient_visitor");
        let d = log.first_decision().unwrap();
        let features = d.features.as_ref().unwrap();
        assert!(features.entities.iter().any(|e| e.id == "visitor" && e.transient), "{features:?}");
        assert_eq!(d.decision.token, DecisionToken::Clean);
    }

    #[test]
    fn identical_runs_give_identical_logs() {
        let scenario = Scenario::bundled("pet_dog").unwrap();
        let opts = RunOptions::unpaced(RunUntil::SimSeconds(120.0));
        let a = run_scenario(&scenario, &Pipeline::mock(), &opts).unwrap().to_jsonl();
        let b = run_scenario(&scenario, &Pipeline::mock(), &opts).unwrap().to_jsonl();
        assert!(a.lines().count() > 3);
        assert_eq!(a, b);
    }

    #[test]
    fn paced_runs_need_a_valid_acceleration() {
        let scenario = Scenario::bundled("empty_room").unwrap();
        let opts = RunOptions {
            acceleration: f64::INFINITY,
            ..RunOptions::default()
        };
        assert!(run_scenario(&scenario, &Pipeline::mock(), &opts).is_err());
    }

    #[test]
    fn logged_timeline_replays() {
        let scenario = Scenario::bundled("movie_night").unwrap();
        let log = run_scenario(&scenario, &Pipeline::mock(), &RunOptions::unpaced(RunUntil::SimSeconds(200.0))).unwrap();
        let replayed = super::super::replay_records(&log.records).unwrap();
        assert_eq!(replayed, log.timeline);
    }
}
