use rand::Rng;

use super::{CadenceConfig, RobotIo, SpeedConfig};
use crate::world::{seconds_to_ticks, DriveCommand, FrameError, ProximityReading, SceneFrame, TICK_SECONDS};

pub const ESCAPE_TURN_MIN: f64 = 90.0;
pub const ESCAPE_TURN_MAX: f64 = 270.0;

/// Relative heading change after a bump, uniform in [90, 270] degrees.
pub fn random_escape_turn(rng: &mut impl Rng) -> f64 {
    rng.random_range(ESCAPE_TURN_MIN..=ESCAPE_TURN_MAX)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CleaningStep {
    pub command: DriveCommand,
    /// Set when a bump was detected; the turn starts on the next tick.
    pub escape_turn: Option<f64>,
}

/// Straight-line cleaning: stop and schedule a random turn on contact,
/// slow down near obstacles, otherwise cruise.
pub fn cleaning_tick(
    speeds: &SpeedConfig,
    proximity: ProximityReading,
    collided: bool,
    rng: &mut impl Rng,
) -> CleaningStep {
    if collided {
        return CleaningStep {
            command: DriveCommand::STOP,
            escape_turn: Some(random_escape_turn(rng)),
        };
    }
    let linear = if proximity.distance < speeds.slow_threshold {
        speeds.slow
    } else {
        speeds.cruise
    };
    CleaningStep {
        command: DriveCommand::straight(linear),
        escape_turn: None,
    }
}

/// In-place turn executed over several ticks at up to `rate` deg/s.
#[derive(Debug, Clone, PartialEq)]
pub struct TurnInPlace {
    pub start_heading: f64,
    pub total: f64,
    remaining: f64,
}

impl TurnInPlace {
    pub fn new(start_heading: f64, total: f64) -> Self {
        Self {
            start_heading,
            total,
            remaining: total,
        }
    }

    pub fn is_done(&self) -> bool {
        self.remaining.abs() <= 1e-12
    }

    /// Command for the next tick; the last tick is shortened to land exactly.
    pub fn command(&mut self, rate: f64) -> DriveCommand {
        let step = self.remaining.abs().min(rate * TICK_SECONDS);
        let signed = step.copysign(self.remaining);
        self.remaining -= signed;
        DriveCommand::rotate(signed / TICK_SECONDS)
    }
}

pub enum BurstStep {
    Idle,
    Captured,
    Complete(Vec<SceneFrame>),
    Dropped(FrameError),
}

/// Continuous frame stream during cleaning, one frame every
/// `burst_interval`, grouped into bursts of `burst_frames`.
#[derive(Debug, Clone)]
pub struct BurstRun {
    frames: Vec<SceneFrame>,
    total: usize,
    interval_ticks: u64,
    elapsed_ticks: u64,
}

impl BurstRun {
    pub fn new(cadence: &CadenceConfig) -> Self {
        Self {
            frames: Vec::with_capacity(cadence.burst_frames),
            total: cadence.burst_frames,
            interval_ticks: seconds_to_ticks(cadence.burst_interval).max(1),
            elapsed_ticks: 0,
        }
    }

    pub fn tick(&mut self, io: &mut dyn RobotIo) -> BurstStep {
        let due = self.elapsed_ticks % self.interval_ticks == 0;
        self.elapsed_ticks += 1;
        if !due {
            return BurstStep::Idle;
        }
        match io.capture(self.frames.len()) {
            Ok(frame) => {
                self.frames.push(frame);
                if self.frames.len() == self.total {
                    BurstStep::Complete(std::mem::take(&mut self.frames))
                } else {
                    BurstStep::Captured
                }
            }
            Err(err) => {
                self.frames.clear();
                BurstStep::Dropped(err)
            }
        }
    }
}

/// Keeps at most one burst evaluation in flight. A burst completed while
/// another is being evaluated is held back (newest wins) and released when
/// the evaluation finishes.
#[derive(Debug, Default, Clone)]
pub struct EvaluationGate {
    in_flight: bool,
    buffered: Option<Vec<SceneFrame>>,
}

impl EvaluationGate {
    pub fn in_flight(&self) -> bool {
        self.in_flight
    }

    pub fn has_buffered(&self) -> bool {
        self.buffered.is_some()
    }

    /// Returns the batch to submit now, if any.
    pub fn offer(&mut self, batch: Vec<SceneFrame>) -> Option<Vec<SceneFrame>> {
        if self.in_flight {
            self.buffered = Some(batch);
            None
        } else {
            self.in_flight = true;
            Some(batch)
        }
    }

    /// Marks the in-flight evaluation finished. When `release` is set, a
    /// buffered batch is returned for immediate submission.
    pub fn complete(&mut self, release: bool) -> Option<Vec<SceneFrame>> {
        self.in_flight = false;
        let next = self.buffered.take();
        match next {
            Some(batch) if release => {
                self.in_flight = true;
                Some(batch)
            }
            _ => None,
        }
    }

    pub fn reset(&mut self) {
        self.in_flight = false;
        self.buffered = None;
    }

    /// Forgets a held-back batch (it belongs to a mode that has ended) but
    /// keeps the in-flight flag.
    pub fn drop_buffered(&mut self) {
        self.buffered = None;
    }
}
