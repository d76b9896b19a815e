use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Pose;
use crate::geometry::Vec2;

pub const PERSON_RADIUS: f64 = 0.25;
pub const PET_RADIUS: f64 = 0.15;

/// Activities that only make sense for people.
const PERSON_ONLY_ACTIVITIES: &[&str] = &["using_phone", "watching_tv", "video_call", "phone_call"];

#[derive(Debug, Error, PartialEq)]
pub enum EntityError {
    #[error("entity id must not be empty")]
    EmptyId,
    #[error("entity {id}: motion_speed must be finite and >= 0, got {speed}")]
    BadSpeed { id: String, speed: f64 },
    #[error("entity {id}: pets cannot have activity `{activity}`")]
    PetActivity { id: String, activity: String },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub String);

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        EntityId(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Person,
    Pet,
}

impl EntityKind {
    pub fn body_radius(self) -> f64 {
        match self {
            EntityKind::Person => PERSON_RADIUS,
            EntityKind::Pet => PET_RADIUS,
        }
    }
}

/// A person or pet in the home.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entity {
    pub id: EntityId,
    pub kind: EntityKind,
    pub pose: Pose,
    #[serde(default = "default_activity")]
    pub activity: String,
    #[serde(default)]
    pub motion_speed: f64,
    /// Waypoints followed in a loop at `motion_speed`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub motion_script: Vec<Vec2>,
    #[serde(default, skip_serializing)]
    next_waypoint: usize,
}

fn default_activity() -> String {
    "idle".to_string()
}

impl Entity {
    pub fn new(id: &str, kind: EntityKind, pose: Pose, activity: &str) -> Self {
        Self {
            id: EntityId::from(id),
            kind,
            pose,
            activity: activity.to_string(),
            motion_speed: 0.0,
            motion_script: Vec::new(),
            next_waypoint: 0,
        }
    }

    pub fn with_motion(mut self, speed: f64, script: Vec<Vec2>) -> Self {
        self.motion_speed = speed;
        self.motion_script = script;
        self.next_waypoint = 0;
        self
    }

    pub fn validate(&self) -> Result<(), EntityError> {
        if self.id.0.is_empty() {
            return Err(EntityError::EmptyId);
        }
        if !(self.motion_speed.is_finite() && self.motion_speed >= 0.0) {
            return Err(EntityError::BadSpeed {
                id: self.id.0.clone(),
                speed: self.motion_speed,
            });
        }
        if self.kind == EntityKind::Pet && PERSON_ONLY_ACTIVITIES.contains(&self.activity.as_str()) {
            return Err(EntityError::PetActivity {
                id: self.id.0.clone(),
                activity: self.activity.clone(),
            });
        }
        Ok(())
    }

    pub fn set_activity(&mut self, activity: &str) -> Result<(), EntityError> {
        let mut probe = self.clone();
        probe.activity = activity.to_string();
        probe.validate()?;
        self.activity = probe.activity;
        Ok(())
    }

    pub fn set_motion(&mut self, speed: f64, script: Option<Vec<Vec2>>) -> Result<(), EntityError> {
        let mut probe = self.clone();
        probe.motion_speed = speed;
        probe.validate()?;
        self.motion_speed = speed;
        if let Some(script) = script {
            self.motion_script = script;
            self.next_waypoint = 0;
        }
        Ok(())
    }

    pub fn body_radius(&self) -> f64 {
        self.kind.body_radius()
    }

    /// Advances along the motion script. Entities without a script stay put
    /// even when they report a nonzero speed (fidgeting in place).
    pub fn advance(&mut self, dt: f64) {
        if self.motion_script.is_empty() || self.motion_speed <= 0.0 {
            return;
        }
        let mut budget = self.motion_speed * dt;
        let mut pos = self.pose.position();
        let mut heading = self.pose.heading();
        // Bounded by the script length so a degenerate script cannot spin.
        for _ in 0..=self.motion_script.len() {
            let target = self.motion_script[self.next_waypoint % self.motion_script.len()];
            let to_target = target - pos;
            let dist = to_target.length();
            if dist > 0.0 {
                heading = to_target.heading();
            }
            if dist > budget {
                pos = pos + to_target * (budget / dist);
                break;
            }
            pos = target;
            budget -= dist;
            self.next_waypoint = (self.next_waypoint + 1) % self.motion_script.len();
            if budget <= 0.0 {
                break;
            }
        }
        self.pose = Pose::at(pos, heading);
    }

    pub fn snapshot(&self) -> EntitySnapshot {
        EntitySnapshot {
            id: self.id.clone(),
            kind: self.kind,
            pose: self.pose,
            activity: self.activity.clone(),
            motion_speed: self.motion_speed,
        }
    }
}

/// What a camera frame records about an entity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntitySnapshot {
    pub id: EntityId,
    pub kind: EntityKind,
    pub pose: Pose,
    pub activity: String,
    pub motion_speed: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pets_reject_screen_activities() {
        let dog = Entity::new("dog", EntityKind::Pet, Pose::new(0.0, 0.0, 0.0), "watching_tv");
        assert!(matches!(dog.validate(), Err(EntityError::PetActivity { .. })));
        let mut dog = Entity::new("dog", EntityKind::Pet, Pose::new(0.0, 0.0, 0.0), "playing");
        assert!(dog.set_activity("using_phone").is_err());
        assert_eq!(dog.activity, "playing");
    }

    #[test]
    fn negative_speed_rejected() {
        let mut p = Entity::new("p", EntityKind::Person, Pose::new(0.0, 0.0, 0.0), "idle");
        assert!(p.set_motion(-0.1, None).is_err());
        assert_eq!(p.motion_speed, 0.0);
    }

    #[test]
    fn follows_looping_script() {
        let mut p = Entity::new("p", EntityKind::Person, Pose::new(0.0, 0.0, 0.0), "walking")
            .with_motion(1.0, vec![Vec2::new(1.0, 0.0), Vec2::new(0.0, 0.0)]);
        p.advance(0.5);
        assert!((p.pose.x - 0.5).abs() < 1e-12);
        p.advance(1.0);
        assert!((p.pose.x - 0.5).abs() < 1e-12);
        assert_eq!(p.pose.heading(), 180.0);
        p.advance(0.5);
        assert!(p.pose.x.abs() < 1e-12);
    }

    #[test]
    fn scriptless_entity_stays_put() {
        let mut dog = Entity::new("dog", EntityKind::Pet, Pose::new(1.0, 1.0, 0.0), "playing")
            .with_motion(0.5, vec![]);
        dog.advance(1.0);
        assert_eq!(dog.pose, Pose::new(1.0, 1.0, 0.0));
    }
}
