use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::evaluator::{Evaluator, EvaluatorKind};
use super::log::{ErrorRecord, EventRecord, LogBody, LogDraft, LogRecord, ModeChange, OverrideRecord, RecordSink};
use super::robot::SimRobot;
use super::scenario::{EventAction, Scenario, TimedEvent};
use crate::controller::{
    decision_allowed, ActivityKind, CadenceConfig, Controller, Decision, DecisionToken, EvaluationGate, Mode,
    SpeedConfig,
};
use crate::pipeline::{DecisionRecord, EvaluationJob, Pipeline};
use crate::world::{DriveCommand, EntitySnapshot, Pose, SceneFrame, WallClock, WorldError, TICKS_PER_SECOND};

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("scenario cannot start: {0}")]
    World(#[from] WorldError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum OverrideError {
    #[error("{token} is not accepted in {mode} mode")]
    NotAllowed { token: DecisionToken, mode: Mode },
    #[error("operator_id must not be empty")]
    MissingOperator,
    #[error("service is read-only after a log failure")]
    Degraded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverrideCommand {
    pub operator_id: String,
    pub token: DecisionToken,
    #[serde(default)]
    pub issued_wall_clock: Option<WallClock>,
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub cadence: CadenceConfig,
    pub speeds: SpeedConfig,
    pub evaluator: EvaluatorKind,
}

impl SimulationConfig {
    /// Inline evaluation for deterministic backends, threaded otherwise.
    pub fn for_pipeline(pipeline: &Pipeline) -> Self {
        Self {
            cadence: CadenceConfig::default(),
            speeds: SpeedConfig::default(),
            evaluator: if pipeline.deterministic() {
                EvaluatorKind::Inline { latency_ticks: 1 }
            } else {
                EvaluatorKind::Threaded
            },
        }
    }
}

/// Point-in-time view for the operator surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSnapshot {
    pub tick: u64,
    pub sim_time: f64,
    pub wall_clock: WallClock,
    pub mode: Mode,
    pub activity: ActivityKind,
    pub pose: Pose,
    pub command: DriveCommand,
    pub wait_timer: f64,
    pub blocked_cycles: u32,
    pub evaluation_in_flight: bool,
    pub last_decision_id: Option<u64>,
    pub last_decision: Option<DecisionRecord>,
    pub entities: Vec<EntitySnapshot>,
    pub degraded: Option<String>,
}

/// Closed loop of world, controller, pipeline and log, advanced one tick at
/// a time. Owns all mutable run state.
pub struct Simulation {
    scenario: String,
    robot: SimRobot,
    controller: Controller,
    evaluator: Evaluator,
    sink: Box<dyn RecordSink>,
    events: Vec<TimedEvent>,
    next_event: usize,
    gate: EvaluationGate,
    /// eval id -> epoch at submission
    pending: BTreeMap<u64, u64>,
    /// bumped on every mode change and override; older results are stale
    epoch: u64,
    next_eval_id: u64,
    decisions: u64,
    last_decision: Option<(u64, DecisionRecord)>,
    degraded: Option<String>,
}

impl Simulation {
    pub fn new(
        scenario: &Scenario,
        pipeline: Pipeline,
        config: SimulationConfig,
        sink: Box<dyn RecordSink>,
    ) -> Result<Self, SimulationError> {
        let violations: Vec<String> = config
            .cadence
            .violations()
            .into_iter()
            .chain(config.speeds.violations())
            .map(|v| v.to_string())
            .collect();
        if !violations.is_empty() {
            return Err(SimulationError::Config(violations.join("; ")));
        }
        let robot = SimRobot::from_scenario(scenario)?;
        let backend_id = pipeline.backend_id();
        let mut sim = Self {
            scenario: scenario.name.clone(),
            robot,
            controller: Controller::new(scenario.start_mode, scenario.seed, config.cadence, config.speeds),
            evaluator: Evaluator::new(config.evaluator, pipeline),
            sink,
            events: scenario.events.clone(),
            next_event: 0,
            gate: EvaluationGate::default(),
            pending: BTreeMap::new(),
            epoch: 0,
            next_eval_id: 1,
            decisions: 0,
            last_decision: None,
            degraded: None,
        };
        sim.log(LogBody::Event(EventRecord::RunStart {
            scenario: scenario.name.clone(),
            mode: scenario.start_mode,
            seed: scenario.seed,
            backend_id,
        }));
        Ok(sim)
    }

    pub fn scenario_name(&self) -> &str {
        &self.scenario
    }

    pub fn robot(&self) -> &SimRobot {
        &self.robot
    }

    pub fn controller(&self) -> &Controller {
        &self.controller
    }

    pub fn tick_count(&self) -> u64 {
        self.robot.clock.tick()
    }

    pub fn sim_time(&self) -> f64 {
        self.robot.clock.sim_time()
    }

    /// Number of decision records logged so far.
    pub fn decisions(&self) -> u64 {
        self.decisions
    }

    pub fn last_decision(&self) -> Option<&DecisionRecord> {
        self.last_decision.as_ref().map(|(_, d)| d)
    }

    pub fn degraded(&self) -> Option<&str> {
        self.degraded.as_deref()
    }

    pub fn snapshot(&self) -> SimSnapshot {
        let state = self.controller.state();
        SimSnapshot {
            tick: self.tick_count(),
            sim_time: self.sim_time(),
            wall_clock: self.robot.clock.wall_clock(),
            mode: state.mode,
            activity: self.controller.activity(),
            pose: self.robot.world.robot_pose(),
            command: self.controller.last_command(),
            wait_timer: state.wait_timer,
            blocked_cycles: state.blocked_cycles,
            evaluation_in_flight: self.gate.in_flight(),
            last_decision_id: self.last_decision.as_ref().map(|(id, _)| *id),
            last_decision: self.last_decision.as_ref().map(|(_, d)| d.clone()),
            entities: self.robot.world.entities().iter().map(|e| e.snapshot()).collect(),
            degraded: self.degraded.clone(),
        }
    }

    fn log(&mut self, body: LogBody) -> Option<LogRecord> {
        if self.degraded.is_some() {
            return None;
        }
        let draft = LogDraft {
            sim_time: self.robot.clock.sim_time(),
            wall_clock: self.robot.clock.wall_clock(),
            body,
        };
        match self.sink.append(draft) {
            Ok(record) => Some(record),
            Err(err) => {
                log::error!("entering degraded mode: {err}");
                self.degraded = Some(err.to_string());
                self.controller.hold();
                None
            }
        }
    }

    /// Applies an operator decision at the current tick boundary.
    pub fn apply_override(&mut self, cmd: OverrideCommand) -> Result<u64, OverrideError> {
        if self.degraded.is_some() {
            return Err(OverrideError::Degraded);
        }
        if cmd.operator_id.trim().is_empty() {
            return Err(OverrideError::MissingOperator);
        }
        let mode = self.controller.mode();
        let decision = Decision::operator(cmd.token);
        if !decision_allowed(mode, &decision) {
            return Err(OverrideError::NotAllowed { token: cmd.token, mode });
        }
        let record = self
            .log(LogBody::Override(OverrideRecord {
                operator_id: cmd.operator_id,
                token: cmd.token,
                issued_wall_clock: cmd.issued_wall_clock,
                mode,
            }))
            .ok_or(OverrideError::Degraded)?;
        self.epoch += 1;
        self.gate.drop_buffered();
        self.apply(&decision, record.id);
        Ok(record.id)
    }

    /// Queues a scenario event; it fires on the first tick at or after
    /// `event.at` (immediately on the next tick if that is in the past).
    pub fn inject_event(&mut self, event: TimedEvent) {
        let pos = self.events[self.next_event..]
            .iter()
            .position(|e| e.at > event.at)
            .map_or(self.events.len(), |p| p + self.next_event);
        self.events.insert(pos, event);
    }

    fn apply(&mut self, decision: &Decision, record_id: u64) {
        match self.controller.apply(decision, Some(record_id)) {
            Ok(applied) if applied.changed() => {
                self.epoch += 1;
                self.gate.drop_buffered();
                self.log(LogBody::ModeChange(ModeChange {
                    cause: record_id,
                    from: applied.from,
                    to: applied.to,
                }));
            }
            Ok(_) => {}
            Err(err) => {
                self.log(LogBody::Error(ErrorRecord {
                    message: err.to_string(),
                }));
            }
        }
    }

    fn submit(&mut self, frames: Vec<SceneFrame>) {
        let eval_id = self.next_eval_id;
        self.next_eval_id += 1;
        let state = self.controller.state();
        let job = EvaluationJob {
            eval_id,
            mode: state.mode,
            wall_clock: self.robot.clock.wall_clock(),
            blocked_cycles: state.blocked_cycles,
            frames,
        };
        self.log(LogBody::Event(EventRecord::EvalSubmitted {
            eval_id,
            mode: job.mode,
            frame_seqs: job.frames.iter().map(|f| f.seq).collect(),
        }));
        self.pending.insert(eval_id, self.epoch);
        let tick = self.tick_count();
        self.evaluator.submit(job, tick);
    }

    fn due_tick(at: f64) -> u64 {
        (at * TICKS_PER_SECOND as f64 - 1e-9).ceil().max(0.0) as u64
    }

    fn poll_evaluator(&mut self) {
        let Some((eval_id, outcome)) = self.evaluator.poll(self.tick_count()) else {
            return;
        };
        let fresh = self.pending.remove(&eval_id) == Some(self.epoch);
        match outcome {
            Ok(record) if fresh && self.degraded.is_none() => {
                if let Some(logged) = self.log(LogBody::Decision(record.clone())) {
                    self.decisions += 1;
                    self.last_decision = Some((logged.id, record.clone()));
                    self.apply(&record.decision, logged.id);
                }
            }
            Ok(_) => {
                self.log(LogBody::Event(EventRecord::EvalDiscarded {
                    eval_id,
                    reason: "stale: the mode changed while it was being evaluated".into(),
                }));
            }
            Err(err) => {
                self.log(LogBody::Event(EventRecord::EvalDiscarded {
                    eval_id,
                    reason: err.to_string(),
                }));
            }
        }
        // Batches held back meanwhile belong to the current mode.
        if let Some(batch) = self.gate.complete(true) {
            self.submit(batch);
        }
    }

    /// One control tick: due scenario events, evaluation results, the
    /// controller, then the world and clock.
    pub fn tick(&mut self) {
        let tick = self.tick_count();
        while self.next_event < self.events.len() && Self::due_tick(self.events[self.next_event].at) <= tick {
            let action: EventAction = self.events[self.next_event].action.clone();
            self.next_event += 1;
            match self.robot.apply_event(&action) {
                Ok(()) => {
                    self.log(LogBody::Event(EventRecord::Scenario { action }));
                }
                Err(err) => {
                    self.log(LogBody::Error(ErrorRecord {
                        message: format!("scenario event failed: {err}"),
                    }));
                }
            }
        }

        self.poll_evaluator();

        let out = self.controller.tick(&mut self.robot);
        for detail in out.events {
            self.log(LogBody::Event(EventRecord::Controller { detail }));
        }
        if let Some(batch) = out.batch {
            if self.degraded.is_none() {
                if let Some(batch) = self.gate.offer(batch) {
                    self.submit(batch);
                }
            }
        }
        crate::controller::DrivableRobot::drive(&mut self.robot, out.command);
    }
}
