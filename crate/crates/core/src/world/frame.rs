use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{EntitySnapshot, Pose, WallClock, World};
use crate::geometry::Vec2;

pub const CAMERA_FOV_DEG: f64 = 70.0;
pub const CAMERA_RANGE_M: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrameError {
    #[error("fixture image missing: {}", path.display())]
    MissingFixture { path: PathBuf },
    #[error("camera unavailable: {0}")]
    Unavailable(String),
}

/// Sequencing and timing assigned to a frame at capture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameStamp {
    pub seq: u64,
    pub sim_time: f64,
    pub wall_clock: WallClock,
    /// Position of the frame inside its sweep or burst.
    pub batch_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticView {
    pub entities: Vec<EntitySnapshot>,
    pub clues: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FramePayload {
    Fixture { image: PathBuf },
    Synthetic(SyntheticView),
}

/// One timestamped camera observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFrame {
    pub seq: u64,
    pub sim_time: f64,
    pub wall_clock: WallClock,
    pub batch_index: usize,
    pub pose: Pose,
    pub payload: FramePayload,
}

impl SceneFrame {
    pub fn synthetic(&self) -> Option<&SyntheticView> {
        match &self.payload {
            FramePayload::Synthetic(view) => Some(view),
            FramePayload::Fixture { .. } => None,
        }
    }
}

/// Binds a fixture image to frames by batch index and/or a sim-time window
/// `[start, end)`. Both keys must match when both are given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureBinding {
    #[serde(default)]
    pub frame_index: Option<usize>,
    #[serde(default)]
    pub window: Option<[f64; 2]>,
    pub image: PathBuf,
}

impl FixtureBinding {
    pub fn matches(&self, stamp: &FrameStamp) -> bool {
        if self.frame_index.is_none() && self.window.is_none() {
            return false;
        }
        let index_ok = self.frame_index.is_none_or(|i| i == stamp.batch_index);
        let window_ok = self
            .window
            .is_none_or(|[start, end]| stamp.sim_time >= start && stamp.sim_time < end);
        index_ok && window_ok
    }
}

/// A scene cue such as `tv_on`. Positioned clues are only seen when in view;
/// unpositioned ones are ambient and appear in every synthetic frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Clue {
    pub tag: String,
    #[serde(default)]
    pub at: Option<Vec2>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub fov_deg: f64,
    pub range_m: f64,
    pub fixtures: Vec<FixtureBinding>,
}

impl Default for Camera {
    fn default() -> Self {
        Self {
            fov_deg: CAMERA_FOV_DEG,
            range_m: CAMERA_RANGE_M,
            fixtures: Vec::new(),
        }
    }
}

impl Camera {
    pub fn with_fixtures(fixtures: Vec<FixtureBinding>) -> Self {
        Self {
            fixtures,
            ..Self::default()
        }
    }

    /// Fixture bindings take precedence; otherwise the frame carries a
    /// synthetic description of what is in view.
    pub fn capture(&self, world: &World, pose: Pose, stamp: FrameStamp) -> Result<SceneFrame, FrameError> {
        let payload = match self.fixtures.iter().find(|b| b.matches(&stamp)) {
            Some(binding) => {
                if !binding.image.is_file() {
                    return Err(FrameError::MissingFixture {
                        path: binding.image.clone(),
                    });
                }
                FramePayload::Fixture {
                    image: binding.image.clone(),
                }
            }
            None => FramePayload::Synthetic(SyntheticView {
                entities: world.visible_entities(pose, self.fov_deg, self.range_m),
                clues: world.visible_clues(pose, self.fov_deg, self.range_m),
            }),
        };
        Ok(SceneFrame {
            seq: stamp.seq,
            sim_time: stamp.sim_time,
            wall_clock: stamp.wall_clock,
            batch_index: stamp.batch_index,
            pose,
            payload,
        })
    }
}
