use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{heading_difference, Clue, Entity, EntityError, EntityId, EntitySnapshot, FloorPlan, Pose};
use crate::geometry::{ray_circle, ray_segment, sweep_circle_circle, sweep_circle_segment, Segment, Vec2};

pub const ROBOT_RADIUS: f64 = 0.17;
pub const PROXIMITY_MAX_RANGE: f64 = 2.0;
/// Smallest reading the proximity sensor reports when in contact.
const PROXIMITY_FLOOR: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("robot pose ({x:.3}, {y:.3}) is not in free space")]
    RobotNotFree { x: f64, y: f64 },
    #[error("entity `{0}` already exists")]
    DuplicateEntity(String),
    #[error("no entity with id `{0}`")]
    UnknownEntity(String),
    #[error(transparent)]
    Entity(#[from] EntityError),
}

/// Velocity command for the drive base.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DriveCommand {
    /// meters per second
    pub linear: f64,
    /// degrees per second, counter-clockwise positive
    pub angular: f64,
}

impl DriveCommand {
    pub const STOP: DriveCommand = DriveCommand {
        linear: 0.0,
        angular: 0.0,
    };

    pub fn straight(linear: f64) -> Self {
        Self { linear, angular: 0.0 }
    }

    pub fn rotate(angular: f64) -> Self {
        Self { linear: 0.0, angular }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProximityReading {
    pub distance: f64,
    pub saturated: bool,
}

/// The simulated home: floorplan, robot body, people, pets and scene clues.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    floorplan: FloorPlan,
    robot: Pose,
    command: DriveCommand,
    collided: bool,
    entities: Vec<Entity>,
    clues: Vec<Clue>,
}

impl World {
    pub fn new(floorplan: FloorPlan, robot: Pose) -> Result<Self, WorldError> {
        let world = Self {
            floorplan,
            robot,
            command: DriveCommand::STOP,
            collided: false,
            entities: Vec::new(),
            clues: Vec::new(),
        };
        if world.wall_clearance(robot.position()) < 0.0 {
            return Err(WorldError::RobotNotFree { x: robot.x, y: robot.y });
        }
        Ok(world)
    }

    pub fn floorplan(&self) -> &FloorPlan {
        &self.floorplan
    }

    pub fn robot_pose(&self) -> Pose {
        self.robot
    }

    pub fn command(&self) -> DriveCommand {
        self.command
    }

    pub fn set_command(&mut self, command: DriveCommand) {
        self.command = command;
    }

    /// True when the last step was cut short by contact.
    pub fn collided(&self) -> bool {
        self.collided
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn entity(&self, id: &EntityId) -> Option<&Entity> {
        self.entities.iter().find(|e| &e.id == id)
    }

    pub fn entity_mut(&mut self, id: &EntityId) -> Result<&mut Entity, WorldError> {
        self.entities
            .iter_mut()
            .find(|e| &e.id == id)
            .ok_or_else(|| WorldError::UnknownEntity(id.0.clone()))
    }

    pub fn spawn(&mut self, entity: Entity) -> Result<(), WorldError> {
        entity.validate()?;
        if self.entity(&entity.id).is_some() {
            return Err(WorldError::DuplicateEntity(entity.id.0));
        }
        self.entities.push(entity);
        Ok(())
    }

    pub fn despawn(&mut self, id: &EntityId) -> Result<Entity, WorldError> {
        let index = self
            .entities
            .iter()
            .position(|e| &e.id == id)
            .ok_or_else(|| WorldError::UnknownEntity(id.0.clone()))?;
        Ok(self.entities.remove(index))
    }

    pub fn clues(&self) -> &[Clue] {
        &self.clues
    }

    pub fn add_clue(&mut self, clue: Clue) {
        self.clues.push(clue);
    }

    /// Advances entities along their scripts and integrates the robot under
    /// the current drive command. Robot translation stops at first contact.
    pub fn step(&mut self, dt: f64) {
        debug_assert!(dt > 0.0);
        for entity in &mut self.entities {
            entity.advance(dt);
        }

        let start = self.robot;
        let turn = self.command.angular * dt;
        let travel = self.command.linear * dt;
        let heading_mid = start.heading() + turn / 2.0;
        let delta = Vec2::from_heading(heading_mid) * travel;
        let p0 = start.position();

        let mut fraction = 1.0;
        let mut contact = false;
        if travel != 0.0 {
            for wall in self.floorplan.walls() {
                if let Some(s) = sweep_circle_segment(p0, delta, ROBOT_RADIUS, wall) {
                    if s <= fraction {
                        fraction = s;
                        contact = true;
                    }
                }
            }
            for e in &self.entities {
                let c = e.pose.position();
                if let Some(s) = sweep_circle_circle(p0, delta, ROBOT_RADIUS, c, e.body_radius()) {
                    if s <= fraction {
                        fraction = s;
                        contact = true;
                    }
                }
            }
        }

        let mut end = p0 + delta * fraction;
        if self.wall_clearance(end) < 0.0 {
            // Rounding put the contact point a hair inside; back off to the
            // last clear fraction. p0 is clear by induction.
            let (mut lo, mut hi) = (0.0, fraction);
            for _ in 0..60 {
                let mid = (lo + hi) / 2.0;
                if self.wall_clearance(p0 + delta * mid) >= 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            end = p0 + delta * lo;
            contact = true;
        }

        self.robot = Pose::at(end, start.heading() + turn);
        self.collided = contact;
    }

    /// Min over walls of (distance - robot radius). Negative means overlap.
    fn wall_clearance(&self, p: Vec2) -> f64 {
        self.floorplan
            .walls()
            .iter()
            .map(|w| w.distance_to(p) - ROBOT_RADIUS)
            .fold(f64::INFINITY, f64::min)
    }

    /// Deepest wall penetration of the robot body, 0 when clear.
    pub fn wall_penetration(&self) -> f64 {
        (-self.wall_clearance(self.robot.position())).max(0.0)
    }

    /// Single forward ray from the front of the robot body to the nearest
    /// wall or entity, clamped to the sensor range.
    pub fn raycast_proximity(&self, pose: Pose) -> ProximityReading {
        let dir = pose.direction();
        let origin = pose.position() + dir * ROBOT_RADIUS;
        let walls = self.floorplan.walls().iter().filter_map(|w| ray_segment(origin, dir, w));
        let bodies = self
            .entities
            .iter()
            .filter_map(|e| ray_circle(origin, dir, e.pose.position(), e.body_radius()));
        let nearest = walls.chain(bodies).fold(f64::INFINITY, f64::min);
        if nearest >= PROXIMITY_MAX_RANGE {
            ProximityReading {
                distance: PROXIMITY_MAX_RANGE,
                saturated: true,
            }
        } else {
            ProximityReading {
                distance: nearest.max(PROXIMITY_FLOOR),
                saturated: false,
            }
        }
    }

    fn in_view(&self, pose: Pose, target: Vec2, fov_deg: f64, range_m: f64) -> bool {
        let offset = target - pose.position();
        let dist = offset.length();
        if dist > range_m {
            return false;
        }
        if dist > 0.0 && heading_difference(pose.heading(), offset.heading()).abs() > fov_deg / 2.0 {
            return false;
        }
        let sight = Segment::new(pose.position(), target);
        !self.floorplan.walls().iter().any(|w| w.intersects(&sight))
    }

    /// Entities whose centers fall inside the view cone and range with a clear
    /// line of sight, in world insertion order.
    pub fn visible_entities(&self, pose: Pose, fov_deg: f64, range_m: f64) -> Vec<EntitySnapshot> {
        self.entities
            .iter()
            .filter(|e| self.in_view(pose, e.pose.position(), fov_deg, range_m))
            .map(Entity::snapshot)
            .collect()
    }

    pub fn visible_clues(&self, pose: Pose, fov_deg: f64, range_m: f64) -> Vec<String> {
        self.clues
            .iter()
            .filter(|c| c.at.is_none_or(|at| self.in_view(pose, at, fov_deg, range_m)))
            .map(|c| c.tag.clone())
            .collect()
    }

    /// Strict overlap of the robot body with any wall or entity body.
    pub fn detect_collision(&self, pose: Pose) -> bool {
        let p = pose.position();
        self.floorplan.walls().iter().any(|w| w.distance_to(p) < ROBOT_RADIUS)
            || self
                .entities
                .iter()
                .any(|e| e.pose.position().distance(p) < ROBOT_RADIUS + e.body_radius())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::EntityKind;

    fn room(size: f64) -> World {
        let plan = FloorPlan::rectangle(size, size, Pose::new(size / 2.0, size / 2.0, 0.0)).unwrap();
        World::new(plan, Pose::new(size / 2.0, size / 2.0, 0.0)).unwrap()
    }

    fn open_world(robot: Pose) -> World {
        // Far-away walls so nothing interferes.
        let plan = FloorPlan::rectangle(100.0, 100.0, Pose::new(50.0, 50.0, 0.0)).unwrap();
        World::new(plan, robot).unwrap()
    }

    #[test]
    fn straight_line_integration() {
        let plan = FloorPlan::rectangle(10.0, 10.0, Pose::new(5.0, 5.0, 0.0)).unwrap();
        let shift = |p: Pose| Pose::new(p.x - 5.0, p.y - 5.0, p.heading());
        let mut w = World::new(plan, Pose::new(5.0, 5.0, 0.0)).unwrap();
        w.set_command(DriveCommand::straight(0.3));
        w.step(1.0);
        let p = shift(w.robot_pose());
        assert!((p.x - 0.3).abs() < 1e-12 && p.y.abs() < 1e-12);
        assert!(!w.collided());
    }

    #[test]
    fn rotation_advances_exactly_180_in_nine_seconds() {
        let mut w = room(10.0);
        w.set_command(DriveCommand::rotate(20.0));
        w.step(9.0);
        assert!((w.robot_pose().heading() - 180.0).abs() < 1e-9);
    }

    #[test]
    fn step_stops_at_wall_contact() {
        let plan = FloorPlan::rectangle(4.0, 4.0, Pose::new(2.0, 2.0, 0.0)).unwrap();
        let start_x = 4.0 - ROBOT_RADIUS - 0.05;
        let mut w = World::new(plan, Pose::new(start_x, 2.0, 0.0)).unwrap();
        w.set_command(DriveCommand::straight(0.3));
        w.step(1.0);
        assert!(w.collided());
        assert_eq!(w.wall_penetration(), 0.0);
        assert!((w.robot_pose().x - (4.0 - ROBOT_RADIUS)).abs() < 1e-9);
    }

    #[test]
    fn proximity_center_of_square_room() {
        let w = room(4.0);
        let r = w.raycast_proximity(w.robot_pose());
        assert!(!r.saturated);
        assert!((r.distance - (2.0 - ROBOT_RADIUS)).abs() < 1e-12);
    }

    #[test]
    fn proximity_saturates_when_clear() {
        let w = open_world(Pose::new(50.0, 50.0, 0.0));
        let r = w.raycast_proximity(w.robot_pose());
        assert!(r.saturated);
        assert_eq!(r.distance, PROXIMITY_MAX_RANGE);
    }

    #[test]
    fn proximity_to_person_ahead_of_sensor() {
        let mut w = open_world(Pose::new(50.0, 50.0, 0.0));
        let center = 50.0 + ROBOT_RADIUS + 1.0;
        w.spawn(Entity::new("p", EntityKind::Person, Pose::new(center, 50.0, 0.0), "idle"))
            .unwrap();
        let r = w.raycast_proximity(w.robot_pose());
        // Oracle: analytic ray/circle front-surface distance.
        assert!((r.distance - (1.0 - 0.25)).abs() < 1e-12);
    }

    #[test]
    fn visibility_cone_and_occlusion() {
        let mut w = open_world(Pose::new(50.0, 50.0, 0.0));
        w.spawn(Entity::new("ahead", EntityKind::Person, Pose::new(52.0, 50.0, 0.0), "idle"))
            .unwrap();
        w.spawn(Entity::new("behind", EntityKind::Person, Pose::new(48.0, 50.0, 0.0), "idle"))
            .unwrap();
        let seen = w.visible_entities(w.robot_pose(), 70.0, 5.0);
        assert_eq!(seen.len(), 1);
        assert_eq!(seen[0].id.0, "ahead");

        let walled = FloorPlan::rectangle(100.0, 100.0, Pose::new(50.0, 50.0, 0.0))
            .unwrap()
            .with_extra_walls([Segment::new(Vec2::new(51.0, 49.0), Vec2::new(51.0, 51.0))]);
        let mut w2 = World::new(walled, Pose::new(50.0, 50.0, 0.0)).unwrap();
        w2.spawn(Entity::new("ahead", EntityKind::Person, Pose::new(52.0, 50.0, 0.0), "idle"))
            .unwrap();
        assert!(w2.visible_entities(w2.robot_pose(), 70.0, 5.0).is_empty());
    }

    #[test]
    fn collision_is_strict() {
        let plan = FloorPlan::rectangle(4.0, 4.0, Pose::new(2.0, 2.0, 0.0)).unwrap();
        let w = World::new(plan, Pose::new(2.0, 2.0, 0.0)).unwrap();
        let r = ROBOT_RADIUS;
        assert!(!w.detect_collision(Pose::new(2.0 * r, 2.0, 0.0)));
        assert!(w.detect_collision(Pose::new(0.9 * r, 2.0, 0.0)));
        assert!(!w.detect_collision(Pose::new(r, 2.0, 0.0)));
    }

    #[test]
    fn spawn_despawn_bookkeeping() {
        let mut w = room(4.0);
        let dog = Entity::new("dog", EntityKind::Pet, Pose::new(1.0, 1.0, 0.0), "playing");
        w.spawn(dog.clone()).unwrap();
        assert_eq!(w.spawn(dog), Err(WorldError::DuplicateEntity("dog".into())));
        w.despawn(&EntityId::from("dog")).unwrap();
        assert!(matches!(w.despawn(&EntityId::from("dog")), Err(WorldError::UnknownEntity(_))));
    }

    #[test]
    fn robot_must_start_in_free_space() {
        let plan = FloorPlan::rectangle(4.0, 4.0, Pose::new(2.0, 2.0, 0.0)).unwrap();
        assert!(World::new(plan, Pose::new(0.05, 2.0, 0.0)).is_err());
    }
}
