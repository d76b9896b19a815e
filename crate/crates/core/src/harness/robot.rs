use thiserror::Error;

use super::scenario::{EventAction, Scenario};
use crate::controller::{DrivableRobot, RobotIo};
use crate::world::{
    Camera, DriveCommand, EntityError, FrameError, FrameStamp, Pose, ProximityReading, SceneFrame, SimClock, World,
    WorldError, TICK_SECONDS,
};

#[derive(Debug, Error, PartialEq)]
pub enum EventError {
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Entity(#[from] EntityError),
}

/// The simulated robot: world, camera and clock behind the controller's
/// robot interface. `drive` advances everything by one tick.
#[derive(Debug, Clone)]
pub struct SimRobot {
    pub world: World,
    pub camera: Camera,
    pub clock: SimClock,
    next_seq: u64,
}

impl SimRobot {
    pub fn new(world: World, camera: Camera, clock: SimClock) -> Self {
        Self {
            world,
            camera,
            clock,
            next_seq: 0,
        }
    }

    pub fn from_scenario(scenario: &Scenario) -> Result<Self, WorldError> {
        let mut world = World::new(scenario.floorplan.clone(), scenario.robot)?;
        for e in &scenario.entities {
            world.spawn(e.clone())?;
        }
        for c in &scenario.clues {
            world.add_clue(c.clone());
        }
        Ok(Self::new(
            world,
            Camera::with_fixtures(scenario.fixtures.clone()),
            SimClock::new(scenario.wall_clock_start),
        ))
    }

    /// Frames captured so far.
    pub fn frames_taken(&self) -> u64 {
        self.next_seq
    }

    pub fn apply_event(&mut self, action: &EventAction) -> Result<(), EventError> {
        apply_event(&mut self.world, &mut self.clock, action)
    }
}

/// Applies one scenario action. Nothing else in the world is touched.
pub fn apply_event(world: &mut World, clock: &mut SimClock, action: &EventAction) -> Result<(), EventError> {
    match action {
        EventAction::Spawn { entity } => world.spawn(entity.clone())?,
        EventAction::Despawn { id } => {
            world.despawn(id)?;
        }
        EventAction::SetActivity { id, activity } => world.entity_mut(id)?.set_activity(activity)?,
        EventAction::SetMotion { id, speed, waypoints } => world.entity_mut(id)?.set_motion(*speed, waypoints.clone())?,
        EventAction::SetWallClock { clock: wall } => clock.set_wall_clock(*wall),
    }
    Ok(())
}

impl RobotIo for SimRobot {
    fn pose(&self) -> Pose {
        self.world.robot_pose()
    }

    fn proximity(&self) -> ProximityReading {
        self.world.raycast_proximity(self.world.robot_pose())
    }

    fn collided(&self) -> bool {
        self.world.collided()
    }

    fn dock_pose(&self) -> Pose {
        self.world.floorplan().dock()
    }

    fn capture(&mut self, batch_index: usize) -> Result<SceneFrame, FrameError> {
        let stamp = FrameStamp {
            seq: self.next_seq,
            sim_time: self.clock.sim_time(),
            wall_clock: self.clock.wall_clock(),
            batch_index,
        };
        let frame = self.camera.capture(&self.world, self.world.robot_pose(), stamp)?;
        self.next_seq += 1;
        Ok(frame)
    }
}

impl DrivableRobot for SimRobot {
    fn drive(&mut self, command: DriveCommand) {
        self.world.set_command(command);
        self.world.step(TICK_SECONDS);
        self.clock.advance();
    }
}
