use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cleaning::{cleaning_tick, BurstRun, BurstStep, TurnInPlace};
use super::docking::{DockEvent, DockingRun};
use super::sweep::{SweepRun, SweepStep};
use super::{transition, CadenceConfig, ControllerState, Decision, Mode, RobotIo, SpeedConfig, TransitionError};
use crate::world::{DriveCommand, SceneFrame, TICK_SECONDS};

/// Sub-state within the current mode.
#[derive(Debug, Clone)]
enum Activity {
    Sweeping(SweepRun),
    AwaitingDecision,
    Waiting,
    Cleaning(CleaningRun),
    Docking(DockingRun),
    Held,
}

#[derive(Debug, Clone)]
struct CleaningRun {
    turn: Option<TurnInPlace>,
    burst: BurstRun,
}

/// Coarse activity label exposed to the operator surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivityKind {
    Sweeping,
    AwaitingDecision,
    Waiting,
    Cleaning,
    Docking,
    Docked,
    Stranded,
    Held,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ControllerEvent {
    SweepStarted,
    SweepAborted { reason: String },
    BurstDropped { reason: String },
    Bump { heading: f64 },
    EscapeTurn { start_heading: f64, end_heading: f64, delta: f64 },
    Docked,
    Stranded,
}

/// Everything the controller produced on one tick.
#[derive(Debug, Clone, Default)]
pub struct TickOutput {
    pub command: DriveCommand,
    /// Completed sweep or burst ready for evaluation.
    pub batch: Option<Vec<SceneFrame>>,
    pub events: Vec<ControllerEvent>,
}

/// Mode change produced by applying a decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Applied {
    pub from: Mode,
    pub to: Mode,
}

impl Applied {
    pub fn changed(&self) -> bool {
        self.from != self.to
    }
}

/// The three-mode behavior machine, advanced one tick at a time. Mode
/// changes only happen through [`Controller::apply`].
#[derive(Debug, Clone)]
pub struct Controller {
    state: ControllerState,
    cadence: CadenceConfig,
    speeds: SpeedConfig,
    rng: ChaCha8Rng,
    activity: Activity,
    last_command: DriveCommand,
}

impl Controller {
    pub fn new(mode: Mode, seed: u64, cadence: CadenceConfig, speeds: SpeedConfig) -> Self {
        let mut controller = Self {
            state: ControllerState::new(mode, seed),
            rng: ChaCha8Rng::seed_from_u64(seed),
            activity: Activity::AwaitingDecision,
            cadence,
            speeds,
            last_command: DriveCommand::STOP,
        };
        controller.activity = controller.entry_activity(mode);
        controller
    }

    fn entry_activity(&self, mode: Mode) -> Activity {
        match mode {
            Mode::Observation => Activity::Sweeping(SweepRun::new(&self.cadence)),
            Mode::Cleaning => Activity::Cleaning(CleaningRun {
                turn: None,
                burst: BurstRun::new(&self.cadence),
            }),
            Mode::Docking => Activity::Docking(DockingRun::new()),
        }
    }

    pub fn state(&self) -> &ControllerState {
        &self.state
    }

    pub fn mode(&self) -> Mode {
        self.state.mode
    }

    pub fn cadence(&self) -> &CadenceConfig {
        &self.cadence
    }

    pub fn speeds(&self) -> &SpeedConfig {
        &self.speeds
    }

    pub fn last_command(&self) -> DriveCommand {
        self.last_command
    }

    pub fn activity(&self) -> ActivityKind {
        match &self.activity {
            Activity::Sweeping(_) => ActivityKind::Sweeping,
            Activity::AwaitingDecision => ActivityKind::AwaitingDecision,
            Activity::Waiting => ActivityKind::Waiting,
            Activity::Cleaning(_) => ActivityKind::Cleaning,
            Activity::Docking(run) if run.arrived() => ActivityKind::Docked,
            Activity::Docking(run) if run.stranded() => ActivityKind::Stranded,
            Activity::Docking(_) => ActivityKind::Docking,
            Activity::Held => ActivityKind::Held,
        }
    }

    pub fn stranded(&self) -> bool {
        matches!(&self.activity, Activity::Docking(run) if run.stranded())
    }

    /// Stops all motion and capture for good, leaving the mode untouched.
    /// Used when the decision log can no longer be written.
    pub fn hold(&mut self) {
        self.activity = Activity::Held;
        self.state.wait_timer = 0.0;
    }

    pub fn is_held(&self) -> bool {
        matches!(self.activity, Activity::Held)
    }

    /// Applies a decision at a tick boundary. `record_id` is the log id of
    /// the record that carries it.
    pub fn apply(&mut self, decision: &Decision, record_id: Option<u64>) -> Result<Applied, TransitionError> {
        let from = self.state.mode;
        let mut next = transition(&self.state, decision, &self.cadence)?;
        next.last_decision = record_id.or(self.state.last_decision);
        self.state = next;
        let to = self.state.mode;
        if self.is_held() {
            return Ok(Applied { from, to });
        }
        self.activity = match (from, to) {
            (Mode::Cleaning, Mode::Cleaning) => std::mem::replace(&mut self.activity, Activity::Held),
            (_, Mode::Observation) if self.state.wait_timer > 0.0 => Activity::Waiting,
            (_, to) => self.entry_activity(to),
        };
        Ok(Applied { from, to })
    }

    pub fn tick(&mut self, io: &mut dyn RobotIo) -> TickOutput {
        let mut out = TickOutput::default();
        if matches!(self.activity, Activity::Waiting) {
            self.state.wait_timer -= TICK_SECONDS;
            if self.state.wait_timer <= 1e-9 {
                self.state.wait_timer = 0.0;
                self.activity = Activity::Sweeping(SweepRun::new(&self.cadence));
                out.events.push(ControllerEvent::SweepStarted);
            }
        }

        out.command = match &mut self.activity {
            Activity::Sweeping(sweep) => match sweep.tick(io) {
                Ok(SweepStep::Rotating(cmd)) => cmd,
                Ok(SweepStep::Done(frames)) => {
                    out.batch = Some(frames);
                    self.activity = Activity::AwaitingDecision;
                    DriveCommand::STOP
                }
                Err(err) => {
                    out.events.push(ControllerEvent::SweepAborted {
                        reason: err.to_string(),
                    });
                    self.activity = Activity::AwaitingDecision;
                    DriveCommand::STOP
                }
            },
            Activity::AwaitingDecision | Activity::Waiting | Activity::Held => DriveCommand::STOP,
            Activity::Cleaning(run) => {
                match run.burst.tick(io) {
                    BurstStep::Complete(frames) => out.batch = Some(frames),
                    BurstStep::Dropped(err) => out.events.push(ControllerEvent::BurstDropped {
                        reason: err.to_string(),
                    }),
                    BurstStep::Idle | BurstStep::Captured => {}
                }
                if run.turn.as_ref().is_some_and(TurnInPlace::is_done) {
                    let turn = run.turn.take().expect("checked above");
                    out.events.push(ControllerEvent::EscapeTurn {
                        start_heading: turn.start_heading,
                        end_heading: io.pose().heading(),
                        delta: turn.total,
                    });
                }
                match &mut run.turn {
                    Some(turn) => turn.command(self.speeds.max_turn_rate),
                    None => {
                        let step = cleaning_tick(&self.speeds, io.proximity(), io.collided(), &mut self.rng);
                        if let Some(delta) = step.escape_turn {
                            let heading = io.pose().heading();
                            out.events.push(ControllerEvent::Bump { heading });
                            run.turn = Some(TurnInPlace::new(heading, delta));
                        }
                        step.command
                    }
                }
            }
            Activity::Docking(run) => {
                let was_terminal = run.arrived() || run.stranded();
                let step = run.tick(io, &self.speeds, &mut self.rng);
                if !was_terminal {
                    match step.event {
                        Some(DockEvent::Arrived) => out.events.push(ControllerEvent::Docked),
                        Some(DockEvent::Stranded) => out.events.push(ControllerEvent::Stranded),
                        Some(DockEvent::EscapeTurn {
                            start_heading,
                            end_heading,
                            delta,
                        }) => out.events.push(ControllerEvent::EscapeTurn {
                            start_heading,
                            end_heading,
                            delta,
                        }),
                        None => {}
                    }
                }
                step.command
            }
        };
        self.last_command = out.command;
        out
    }
}
