use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;

/// Wraps any finite angle into [0, 360).
pub fn normalize_heading(degrees: f64) -> f64 {
    let h = degrees.rem_euclid(360.0);
    // rem_euclid rounds tiny negative inputs up to exactly 360.0
    if h >= 360.0 {
        0.0
    } else {
        h
    }
}

/// Signed smallest rotation from `from` to `to`, in (-180, 180].
pub fn heading_difference(from: f64, to: f64) -> f64 {
    let d = normalize_heading(to - from);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}

/// Planar robot or entity pose. Heading is in degrees, counter-clockwise
/// from +x, always normalized to [0, 360).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRepr")]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        debug_assert!(x.is_finite() && y.is_finite() && heading.is_finite());
        Self {
            x,
            y,
            heading: normalize_heading(heading),
        }
    }

    pub fn at(position: Vec2, heading: f64) -> Self {
        Self::new(position.x, position.y, heading)
    }

    pub fn heading(&self) -> f64 {
        self.heading
    }

    pub fn set_heading(&mut self, heading: f64) {
        self.heading = normalize_heading(heading);
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn direction(&self) -> Vec2 {
        Vec2::from_heading(self.heading)
    }

    pub fn rotated(&self, delta: f64) -> Self {
        Self::new(self.x, self.y, self.heading + delta)
    }
}

/// Accepts `[x, y, heading]` or `{"x":..,"y":..,"heading":..}`.
#[derive(Deserialize)]
#[serde(untagged)]
enum PoseRepr {
    Array([f64; 3]),
    Object { x: f64, y: f64, heading: f64 },
}

impl TryFrom<PoseRepr> for Pose {
    type Error = String;

    fn try_from(repr: PoseRepr) -> Result<Self, Self::Error> {
        let (x, y, heading) = match repr {
            PoseRepr::Array([x, y, h]) => (x, y, h),
            PoseRepr::Object { x, y, heading } => (x, y, heading),
        };
        if !(x.is_finite() && y.is_finite() && heading.is_finite()) {
            return Err(format!("pose components must be finite, got ({x}, {y}, {heading})"));
        }
        Ok(Pose::new(x, y, heading))
    }
}
