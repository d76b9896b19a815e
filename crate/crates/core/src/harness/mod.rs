//! Scenario files, the closed-loop simulation, consistency trials and log
//! replay.

mod evaluator;
mod log;
mod replay;
mod robot;
mod run;
mod scenario;
mod simulation;
mod trials;

pub use self::log::{
    to_jsonl, ErrorRecord, EventRecord, LogBody, LogDraft, LogRecord, MemorySink, ModeChange, OverrideRecord, RecordSink,
    SinkError, LOG_SCHEMA_VERSION,
};
pub use evaluator::EvaluatorKind;
pub use replay::{read_log, replay, replay_records, IntegrityError, ReplayError};
pub use robot::{apply_event, EventError, SimRobot};
pub use run::{run_scenario, timeline_of, RunLog, RunOptions, RunUntil, TimelineEntry, DEFAULT_ACCELERATION};
pub use scenario::{
    bundled_names, load_scenario, EventAction, Scenario, ScenarioError, TimedEvent, LIVING_ROOM,
};
pub use simulation::{OverrideCommand, OverrideError, SimSnapshot, Simulation, SimulationConfig, SimulationError};
pub use trials::{agreement_rate, histogram, run_trials, ConsistencyReport, LatencyStat, TrialError};
