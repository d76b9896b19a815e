//! Deterministic 2D home simulation: floorplan, robot kinematics, people and
//! pets, proximity and collision sensing, and camera frame capture.

mod clock;
mod entity;
mod floorplan;
mod frame;
mod pose;
mod sim;

pub use clock::{seconds_to_ticks, SimClock, WallClock, WallClockError, TICKS_PER_SECOND, TICK_SECONDS};
pub use entity::{Entity, EntityError, EntityId, EntityKind, EntitySnapshot, PERSON_RADIUS, PET_RADIUS};
pub use floorplan::{Bounds, FloorPlan, FloorPlanError};
pub use frame::{
    Camera, Clue, FixtureBinding, FrameError, FramePayload, FrameStamp, SceneFrame, SyntheticView,
    CAMERA_FOV_DEG, CAMERA_RANGE_M,
};
pub use pose::{heading_difference, normalize_heading, Pose};
pub use sim::{DriveCommand, ProximityReading, World, WorldError, PROXIMITY_MAX_RANGE, ROBOT_RADIUS};
