use crate::world::{DriveCommand, FrameError, Pose, ProximityReading, SceneFrame};

/// What the controller needs from a robot. The simulator implements it;
/// a hardware bridge would implement the same trait.
pub trait RobotIo {
    fn pose(&self) -> Pose;
    fn proximity(&self) -> ProximityReading;
    /// Contact reported by the last motion step.
    fn collided(&self) -> bool;
    fn dock_pose(&self) -> Pose;
    /// Takes one camera frame; `batch_index` is its position in the current
    /// sweep or burst.
    fn capture(&mut self, batch_index: usize) -> Result<SceneFrame, FrameError>;
}

/// A robot that can be commanded and advanced by one control tick.
pub trait DrivableRobot: RobotIo {
    fn drive(&mut self, command: DriveCommand);
}
