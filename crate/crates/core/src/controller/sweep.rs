use super::{CadenceConfig, DrivableRobot, RobotIo};
use crate::world::{seconds_to_ticks, DriveCommand, FrameError, SceneFrame};

pub enum SweepStep {
    Rotating(DriveCommand),
    Done(Vec<SceneFrame>),
}

/// In-place rotation capturing `sweep_frames` frames spaced
/// `sweep_interval` apart, first and last frame `sweep_span` degrees apart.
#[derive(Debug, Clone)]
pub struct SweepRun {
    frames: Vec<SceneFrame>,
    total: usize,
    interval_ticks: u64,
    elapsed_ticks: u64,
    rate: f64,
}

impl SweepRun {
    pub fn new(cadence: &CadenceConfig) -> Self {
        Self {
            frames: Vec::with_capacity(cadence.sweep_frames),
            total: cadence.sweep_frames,
            interval_ticks: seconds_to_ticks(cadence.sweep_interval).max(1),
            elapsed_ticks: 0,
            rate: cadence.sweep_rate(),
        }
    }

    pub fn frames_captured(&self) -> usize {
        self.frames.len()
    }

    /// Captures when a frame is due, then returns the command for this tick.
    pub fn tick(&mut self, io: &mut dyn RobotIo) -> Result<SweepStep, FrameError> {
        if self.elapsed_ticks % self.interval_ticks == 0 {
            let frame = io.capture(self.frames.len())?;
            self.frames.push(frame);
            if self.frames.len() == self.total {
                return Ok(SweepStep::Done(std::mem::take(&mut self.frames)));
            }
        }
        self.elapsed_ticks += 1;
        Ok(SweepStep::Rotating(DriveCommand::rotate(self.rate)))
    }
}

/// Drives a full observation sweep to completion and returns its frames.
pub fn run_observation_sweep(
    robot: &mut dyn DrivableRobot,
    cadence: &CadenceConfig,
) -> Result<Vec<SceneFrame>, FrameError> {
    let mut sweep = SweepRun::new(cadence);
    loop {
        match sweep.tick(robot)? {
            SweepStep::Done(frames) => {
                robot.drive(DriveCommand::STOP);
                return Ok(frames);
            }
            SweepStep::Rotating(cmd) => robot.drive(cmd),
        }
    }
}
