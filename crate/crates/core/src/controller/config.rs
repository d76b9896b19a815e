use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::TICKS_PER_SECOND;

#[derive(Debug, Error, PartialEq)]
#[error("{field}: {reason}")]
pub struct ConfigViolation {
    pub field: String,
    pub reason: String,
}

impl ConfigViolation {
    fn new(field: &str, reason: impl Into<String>) -> Self {
        Self {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}

fn on_tick_grid(seconds: f64) -> bool {
    let ticks = seconds * TICKS_PER_SECOND as f64;
    (ticks - ticks.round()).abs() < 1e-9
}

/// Capture cadence for observation sweeps and cleaning bursts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CadenceConfig {
    pub sweep_frames: usize,
    /// seconds between sweep frames
    pub sweep_interval: f64,
    /// degrees covered from first to last sweep frame
    pub sweep_span: f64,
    pub burst_frames: usize,
    /// seconds between burst frames
    pub burst_interval: f64,
    /// seconds to idle after a WAIT before sweeping again
    pub wait_duration: f64,
}

impl Default for CadenceConfig {
    fn default() -> Self {
        Self {
            sweep_frames: 10,
            sweep_interval: 1.0,
            sweep_span: 180.0,
            burst_frames: 3,
            burst_interval: 0.5,
            wait_duration: 60.0,
        }
    }
}

impl CadenceConfig {
    /// Heading change between consecutive sweep frames.
    pub fn sweep_step(&self) -> f64 {
        self.sweep_span / (self.sweep_frames - 1) as f64
    }

    /// Rotation rate during a sweep, degrees per second.
    pub fn sweep_rate(&self) -> f64 {
        self.sweep_step() / self.sweep_interval
    }

    pub fn violations(&self) -> Vec<ConfigViolation> {
        let mut v = Vec::new();
        if self.sweep_frames < 2 {
            v.push(ConfigViolation::new("cadence.sweep_frames", "must be at least 2"));
        }
        if !(self.sweep_span > 0.0 && self.sweep_span <= 360.0) {
            v.push(ConfigViolation::new("cadence.sweep_span", "must be in (0, 360]"));
        }
        if self.burst_frames < 1 {
            v.push(ConfigViolation::new("cadence.burst_frames", "must be at least 1"));
        }
        for (field, value) in [
            ("cadence.sweep_interval", self.sweep_interval),
            ("cadence.burst_interval", self.burst_interval),
            ("cadence.wait_duration", self.wait_duration),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                v.push(ConfigViolation::new(field, "must be > 0"));
            } else if !on_tick_grid(value) {
                v.push(ConfigViolation::new(field, "must be a multiple of the 50 ms tick"));
            }
        }
        v
    }
}

/// Drive speeds and docking limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpeedConfig {
    /// m/s
    pub cruise: f64,
    /// m/s
    pub slow: f64,
    /// m; proximity below this triggers the slow speed
    pub slow_threshold: f64,
    /// deg/s
    pub max_turn_rate: f64,
    /// m; docking counts as arrived within this distance
    pub dock_tolerance: f64,
    /// s; docking gives up after this long
    pub dock_timeout: f64,
}

impl Default for SpeedConfig {
    fn default() -> Self {
        Self {
            cruise: 0.3,
            slow: 0.1,
            slow_threshold: 0.5,
            max_turn_rate: 90.0,
            dock_tolerance: 0.1,
            dock_timeout: 600.0,
        }
    }
}

impl SpeedConfig {
    pub fn violations(&self) -> Vec<ConfigViolation> {
        let mut v = Vec::new();
        for (field, value) in [
            ("speeds.cruise", self.cruise),
            ("speeds.slow", self.slow),
            ("speeds.slow_threshold", self.slow_threshold),
            ("speeds.max_turn_rate", self.max_turn_rate),
            ("speeds.dock_tolerance", self.dock_tolerance),
            ("speeds.dock_timeout", self.dock_timeout),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                v.push(ConfigViolation::new(field, "must be > 0"));
            }
        }
        if self.cruise < self.slow {
            v.push(ConfigViolation::new(
                "speeds.cruise",
                format!("must be >= speeds.slow ({} < {})", self.cruise, self.slow),
            ));
        }
        v
    }
}
