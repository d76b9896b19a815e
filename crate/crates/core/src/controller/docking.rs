use rand::Rng;

use super::cleaning::{random_escape_turn, TurnInPlace};
use super::{RobotIo, SpeedConfig};
use crate::world::{heading_difference, DriveCommand, TICK_SECONDS};

/// Heading error above which the robot stops to re-aim at the dock.
const REAIM_THRESHOLD_DEG: f64 = 2.0;
/// Straight run after an escape turn before re-aiming.
const BACKOFF_DISTANCE_M: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
enum DockPhase {
    Aim,
    Drive,
    Escape(TurnInPlace),
    BackOff { remaining: f64 },
    Arrived,
    Stranded,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DockEvent {
    Arrived,
    Stranded,
    EscapeTurn { start_heading: f64, end_heading: f64, delta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DockStep {
    pub command: DriveCommand,
    pub event: Option<DockEvent>,
}

/// Return-to-dock: aim, drive straight, bump-and-turn around obstacles,
/// give up after `dock_timeout` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct DockingRun {
    phase: DockPhase,
    elapsed: f64,
}

impl Default for DockingRun {
    fn default() -> Self {
        Self::new()
    }
}

impl DockingRun {
    pub fn new() -> Self {
        Self {
            phase: DockPhase::Aim,
            elapsed: 0.0,
        }
    }

    pub fn arrived(&self) -> bool {
        self.phase == DockPhase::Arrived
    }

    pub fn stranded(&self) -> bool {
        self.phase == DockPhase::Stranded
    }

    pub fn elapsed(&self) -> f64 {
        self.elapsed
    }

    pub fn tick(&mut self, io: &dyn RobotIo, speeds: &SpeedConfig, rng: &mut impl Rng) -> DockStep {
        let stop = |event| DockStep {
            command: DriveCommand::STOP,
            event,
        };
        if matches!(self.phase, DockPhase::Arrived | DockPhase::Stranded) {
            return stop(None);
        }
        let pose = io.pose();
        let to_dock = io.dock_pose().position() - pose.position();
        if to_dock.length() <= speeds.dock_tolerance {
            self.phase = DockPhase::Arrived;
            return stop(Some(DockEvent::Arrived));
        }
        if self.elapsed >= speeds.dock_timeout {
            self.phase = DockPhase::Stranded;
            return stop(Some(DockEvent::Stranded));
        }
        self.elapsed += TICK_SECONDS;

        let bearing_error = heading_difference(pose.heading(), to_dock.heading());
        let mut event = None;

        if let DockPhase::Escape(turn) = &self.phase {
            if turn.is_done() {
                event = Some(DockEvent::EscapeTurn {
                    start_heading: turn.start_heading,
                    end_heading: pose.heading(),
                    delta: turn.total,
                });
                self.phase = DockPhase::BackOff {
                    remaining: BACKOFF_DISTANCE_M,
                };
            }
        }

        let moving = matches!(self.phase, DockPhase::Drive | DockPhase::BackOff { .. });
        if moving && io.collided() {
            let turn = TurnInPlace::new(pose.heading(), random_escape_turn(rng));
            self.phase = DockPhase::Escape(turn);
            return DockStep {
                command: DriveCommand::STOP,
                event,
            };
        }

        if self.phase == DockPhase::Drive && bearing_error.abs() > REAIM_THRESHOLD_DEG {
            self.phase = DockPhase::Aim;
        }
        if self.phase == DockPhase::Aim && bearing_error.abs() <= 1e-9 {
            self.phase = DockPhase::Drive;
        }

        let command = match &mut self.phase {
            DockPhase::Aim => {
                let step = bearing_error.abs().min(speeds.max_turn_rate * TICK_SECONDS);
                DriveCommand::rotate(step.copysign(bearing_error) / TICK_SECONDS)
            }
            DockPhase::Escape(turn) => turn.command(speeds.max_turn_rate),
            DockPhase::Drive => DriveCommand::straight(approach_speed(io, speeds)),
            DockPhase::BackOff { remaining } => {
                let linear = approach_speed(io, speeds);
                *remaining -= linear * TICK_SECONDS;
                if *remaining <= 0.0 {
                    self.phase = DockPhase::Aim;
                }
                DriveCommand::straight(linear)
            }
            DockPhase::Arrived | DockPhase::Stranded => DriveCommand::STOP,
        };
        DockStep { command, event }
    }
}

fn approach_speed(io: &dyn RobotIo, speeds: &SpeedConfig) -> f64 {
    if io.proximity().distance < speeds.slow_threshold {
        speeds.slow
    } else {
        speeds.cruise
    }
}
