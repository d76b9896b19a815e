use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::controller::{DecisionToken, Mode};
use crate::geometry::Vec2;
use crate::world::{Clue, Entity, EntityError, EntityId, FixtureBinding, FloorPlan, FloorPlanError, Pose, WallClock};

pub const LIVING_ROOM: &str = include_str!("../../assets/floorplans/living_room.json");

const BUNDLED: [(&str, &str); 5] = [
    ("movie_night", include_str!("../../assets/scenarios/movie_night.json")),
    ("phone_user", include_str!("../../assets/scenarios/phone_user.json")),
    ("pet_dog", include_str!("../../assets/scenarios/pet_dog.json")),
    ("empty_room", include_str!("../../assets/scenarios/empty_room.json")),
    ("transient_visitor", include_str!("../../assets/scenarios/transient_visitor.json")),
];

pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(name, _)| *name)
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("failed to read scenario {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{origin}: {source}")]
    Schema {
        origin: String,
        source: serde_json::Error,
    },
    #[error("{origin}: floorplan `{floorplan}`: {source}")]
    Floorplan {
        origin: String,
        floorplan: String,
        source: FloorPlanError,
    },
    #[error("{origin}: missing fixture image(s): {}", .paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    MissingFixtures { origin: String, paths: Vec<PathBuf> },
    #[error("{origin}: {field}: {reason}")]
    Invalid {
        origin: String,
        field: String,
        reason: String,
    },
    #[error("no bundled scenario named `{0}`")]
    UnknownBundled(String),
}

/// Scenario-time mutation of the world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventAction {
    Spawn {
        entity: Entity,
    },
    Despawn {
        id: EntityId,
    },
    SetActivity {
        id: EntityId,
        activity: String,
    },
    SetMotion {
        id: EntityId,
        speed: f64,
        #[serde(default)]
        waypoints: Option<Vec<Vec2>>,
    },
    SetWallClock {
        clock: WallClock,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimedEvent {
    /// sim seconds; fires on the first tick at or after this time
    #[serde(deserialize_with = "non_negative")]
    pub at: f64,
    pub action: EventAction,
}

fn non_negative<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    let v = f64::deserialize(d)?;
    if !(v.is_finite() && v >= 0.0) {
        return Err(serde::de::Error::custom(format!("`at` must be a finite time >= 0, got {v}")));
    }
    Ok(v)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    /// a bundled floorplan name or a path relative to the scenario file
    floorplan: String,
    wall_clock_start: WallClock,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_mode")]
    start_mode: Mode,
    #[serde(default)]
    robot: Option<Pose>,
    #[serde(default)]
    entities: Vec<Entity>,
    #[serde(default)]
    clues: Vec<Clue>,
    #[serde(default)]
    events: Vec<TimedEvent>,
    #[serde(default)]
    fixtures: Vec<FixtureBinding>,
    #[serde(default)]
    expected: Option<DecisionToken>,
}

fn default_mode() -> Mode {
    Mode::Observation
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub floorplan: FloorPlan,
    pub wall_clock_start: WallClock,
    pub seed: u64,
    pub start_mode: Mode,
    /// defaults to the dock pose
    pub robot: Pose,
    pub entities: Vec<Entity>,
    pub clues: Vec<Clue>,
    /// sorted by `at`, stable
    pub events: Vec<TimedEvent>,
    /// image paths resolved against the scenario file
    pub fixtures: Vec<FixtureBinding>,
    /// first decision the scenario should produce, in the start mode's
    /// vocabulary
    pub expected: Option<DecisionToken>,
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    Scenario::from_json(&text, &path.display().to_string(), base)
}

impl Scenario {
    pub fn bundled(name: &str) -> Result<Self, ScenarioError> {
        let (_, text) = BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| ScenarioError::UnknownBundled(name.to_string()))?;
        Self::from_json(text, &format!("bundled:{name}"), Path::new("."))
    }

    /// Bundled name, or a path to a scenario file.
    pub fn resolve(name_or_path: &str) -> Result<Self, ScenarioError> {
        if BUNDLED.iter().any(|(n, _)| *n == name_or_path) {
            return Self::bundled(name_or_path);
        }
        load_scenario(Path::new(name_or_path))
    }

    /// An empty scenario on the given floorplan.
    pub fn empty(name: &str, floorplan: FloorPlan, wall_clock_start: WallClock, seed: u64) -> Self {
        Self {
            name: name.to_string(),
            robot: floorplan.dock(),
            floorplan,
            wall_clock_start,
            seed,
            start_mode: Mode::Observation,
            entities: Vec::new(),
            clues: Vec::new(),
            events: Vec::new(),
            fixtures: Vec::new(),
            expected: None,
        }
    }

    /// Parses and validates scenario JSON. `origin` names the source in
    /// errors; relative paths resolve against `base`.
    pub fn from_json(text: &str, origin: &str, base: &Path) -> Result<Self, ScenarioError> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|source| ScenarioError::Schema {
            origin: origin.to_string(),
            source,
        })?;
        let invalid = |field: &str, reason: String| ScenarioError::Invalid {
            origin: origin.to_string(),
            field: field.to_string(),
            reason,
        };

        let floorplan = if file.floorplan == "living_room" {
            FloorPlan::from_json(LIVING_ROOM)
        } else {
            FloorPlan::load(&base.join(&file.floorplan))
        }
        .map_err(|source| ScenarioError::Floorplan {
            origin: origin.to_string(),
            floorplan: file.floorplan.clone(),
            source,
        })?;

        if let Some(token) = file.expected {
            if !file.start_mode.vocabulary().contains(&token) {
                return Err(invalid(
                    "expected",
                    format!("{token} is not a decision available in {} mode", file.start_mode),
                ));
            }
        }

        let mut ids = BTreeSet::new();
        for (i, e) in file.entities.iter().enumerate() {
            e.validate().map_err(|err| invalid(&format!("entities[{i}]"), err.to_string()))?;
            if !ids.insert(e.id.clone()) {
                return Err(invalid(&format!("entities[{i}].id"), format!("duplicate id `{}`", e.id)));
            }
        }

        let mut events = file.events;
        events.sort_by(|a, b| a.at.total_cmp(&b.at));
        for (i, ev) in events.iter().enumerate() {
            check_event(&mut ids, &ev.action).map_err(|reason| invalid(&format!("events[{i}] (at {} s)", ev.at), reason))?;
        }

        let fixtures: Vec<FixtureBinding> = file
            .fixtures
            .into_iter()
            .map(|mut f| {
                f.image = base.join(&f.image);
                f
            })
            .collect();
        let missing: Vec<PathBuf> = fixtures.iter().filter(|f| !f.image.is_file()).map(|f| f.image.clone()).collect();
        if !missing.is_empty() {
            return Err(ScenarioError::MissingFixtures {
                origin: origin.to_string(),
                paths: missing,
            });
        }

        Ok(Self {
            name: file.name,
            robot: file.robot.unwrap_or(floorplan.dock()),
            floorplan,
            wall_clock_start: file.wall_clock_start,
            seed: file.seed,
            start_mode: file.start_mode,
            entities: file.entities,
            clues: file.clues,
            events,
            fixtures,
            expected: file.expected,
        })
    }
}

/// Dry-runs one event against the set of live entity ids.
fn check_event(ids: &mut BTreeSet<EntityId>, action: &EventAction) -> Result<(), String> {
    let known = |ids: &BTreeSet<EntityId>, id: &EntityId| {
        if ids.contains(id) {
            Ok(())
        } else {
            Err(format!("no entity `{id}` exists at this point"))
        }
    };
    match action {
        EventAction::Spawn { entity } => {
            entity.validate().map_err(|e: EntityError| e.to_string())?;
            if !ids.insert(entity.id.clone()) {
                return Err(format!("entity `{}` already exists", entity.id));
            }
            Ok(())
        }
        EventAction::Despawn { id } => {
            known(ids, id)?;
            ids.remove(id);
            Ok(())
        }
        EventAction::SetActivity { id, .. } => known(ids, id),
        EventAction::SetMotion { id, speed, .. } => {
            known(ids, id)?;
            if speed.is_finite() && *speed >= 0.0 {
                Ok(())
            } else {
                Err(format!("speed must be >= 0, got {speed}"))
            }
        }
        EventAction::SetWallClock { .. } => Ok(()),
    }
}
