use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Fixed simulation tick: 50 ms.
pub const TICKS_PER_SECOND: u64 = 20;
pub const TICK_SECONDS: f64 = 1.0 / TICKS_PER_SECOND as f64;

#[derive(Debug, Error, PartialEq)]
#[error("invalid wall clock `{0}`, expected 24-hour HH:MM")]
pub struct WallClockError(pub String);

/// Time of day at one-second resolution, displayed as `HH:MM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct WallClock {
    seconds_of_day: u32,
}

impl WallClock {
    pub fn new(hour: u32, minute: u32) -> Result<Self, WallClockError> {
        if hour > 23 || minute > 59 {
            return Err(WallClockError(format!("{hour:02}:{minute:02}")));
        }
        Ok(Self {
            seconds_of_day: hour * 3600 + minute * 60,
        })
    }

    pub fn hour(&self) -> u32 {
        self.seconds_of_day / 3600
    }

    pub fn minute(&self) -> u32 {
        (self.seconds_of_day / 60) % 60
    }

    /// Moves forward by whole seconds, wrapping at midnight.
    pub fn advanced(&self, seconds: f64) -> Self {
        let whole = seconds.max(0.0).floor() as u64;
        Self {
            seconds_of_day: ((self.seconds_of_day as u64 + whole) % 86_400) as u32,
        }
    }
}

impl fmt::Display for WallClock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}:{:02}", self.hour(), self.minute())
    }
}

impl FromStr for WallClock {
    type Err = WallClockError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || WallClockError(s.to_string());
        let (h, m) = s.split_once(':').ok_or_else(bad)?;
        if h.len() != 2 || m.len() != 2 {
            return Err(bad());
        }
        let hour = h.parse().map_err(|_| bad())?;
        let minute = m.parse().map_err(|_| bad())?;
        WallClock::new(hour, minute).map_err(|_| bad())
    }
}

impl TryFrom<String> for WallClock {
    type Error = WallClockError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<WallClock> for String {
    fn from(c: WallClock) -> Self {
        c.to_string()
    }
}

/// Tick counter plus the mapping from simulated seconds to time of day.
#[derive(Debug, Clone, PartialEq)]
pub struct SimClock {
    tick: u64,
    anchor_time: f64,
    anchor_clock: WallClock,
}

impl SimClock {
    pub fn new(start: WallClock) -> Self {
        Self {
            tick: 0,
            anchor_time: 0.0,
            anchor_clock: start,
        }
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    /// Seconds since scenario start. Computed from the tick count so that
    /// multiples of the tick land on exact values.
    pub fn sim_time(&self) -> f64 {
        self.tick as f64 / TICKS_PER_SECOND as f64
    }

    pub fn wall_clock(&self) -> WallClock {
        self.anchor_clock.advanced(self.sim_time() - self.anchor_time)
    }

    pub fn set_wall_clock(&mut self, clock: WallClock) {
        self.anchor_time = self.sim_time();
        self.anchor_clock = clock;
    }

    pub fn advance(&mut self) {
        self.tick += 1;
    }
}

/// Number of whole ticks covering `seconds`, rounded to the nearest tick.
pub fn seconds_to_ticks(seconds: f64) -> u64 {
    (seconds * TICKS_PER_SECOND as f64).round().max(0.0) as u64
}
