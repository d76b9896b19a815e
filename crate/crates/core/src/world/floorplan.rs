use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Pose, ROBOT_RADIUS};
use crate::geometry::{Segment, Vec2};

#[derive(Debug, Error)]
pub enum FloorPlanError {
    #[error("failed to read floorplan {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed floorplan: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("wall {index} has zero length")]
    DegenerateWall { index: usize },
    #[error("bounds are empty or inverted")]
    EmptyBounds,
    #[error("dock pose ({x:.3}, {y:.3}) lies outside bounds")]
    DockOutOfBounds { x: f64, y: f64 },
    #[error("dock pose ({x:.3}, {y:.3}) is within robot radius of wall {wall}")]
    DockBlocked { x: f64, y: f64, wall: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Bounds {
    pub min: Vec2,
    pub max: Vec2,
}

impl Bounds {
    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

impl From<[f64; 4]> for Bounds {
    fn from(v: [f64; 4]) -> Self {
        Bounds {
            min: Vec2::new(v[0], v[1]),
            max: Vec2::new(v[2], v[3]),
        }
    }
}

impl From<Bounds> for [f64; 4] {
    fn from(b: Bounds) -> Self {
        [b.min.x, b.min.y, b.max.x, b.max.y]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
struct WallRepr(Segment);

impl From<[f64; 4]> for WallRepr {
    fn from(v: [f64; 4]) -> Self {
        WallRepr(Segment::new(Vec2::new(v[0], v[1]), Vec2::new(v[2], v[3])))
    }
}

impl From<WallRepr> for [f64; 4] {
    fn from(w: WallRepr) -> Self {
        [w.0.a.x, w.0.a.y, w.0.b.x, w.0.b.y]
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FloorPlanFile {
    walls: Vec<WallRepr>,
    dock: Pose,
    bounds: Bounds,
}

/// Static home geometry: wall segments, the charging dock, and the outer
/// bounds of the map.
#[derive(Debug, Clone, PartialEq)]
pub struct FloorPlan {
    walls: Vec<Segment>,
    dock: Pose,
    bounds: Bounds,
}

impl FloorPlan {
    pub fn new(walls: Vec<Segment>, dock: Pose, bounds: Bounds) -> Result<Self, FloorPlanError> {
        if bounds.min.x >= bounds.max.x || bounds.min.y >= bounds.max.y {
            return Err(FloorPlanError::EmptyBounds);
        }
        if let Some(index) = walls.iter().position(|w| !(w.length() > 0.0)) {
            return Err(FloorPlanError::DegenerateWall { index });
        }
        let dock_pos = dock.position();
        if !bounds.contains(dock_pos) {
            return Err(FloorPlanError::DockOutOfBounds { x: dock.x, y: dock.y });
        }
        if let Some(wall) = walls.iter().position(|w| w.distance_to(dock_pos) < ROBOT_RADIUS) {
            return Err(FloorPlanError::DockBlocked { x: dock.x, y: dock.y, wall });
        }
        Ok(Self { walls, dock, bounds })
    }

    /// Closed rectangular room with no interior walls.
    pub fn rectangle(width: f64, height: f64, dock: Pose) -> Result<Self, FloorPlanError> {
        let c = [
            Vec2::new(0.0, 0.0),
            Vec2::new(width, 0.0),
            Vec2::new(width, height),
            Vec2::new(0.0, height),
        ];
        let walls = (0..4).map(|i| Segment::new(c[i], c[(i + 1) % 4])).collect();
        Self::new(walls, dock, Bounds::from([0.0, 0.0, width, height]))
    }

    pub fn from_json(text: &str) -> Result<Self, FloorPlanError> {
        let file: FloorPlanFile = serde_json::from_str(text)?;
        Self::new(file.walls.into_iter().map(|w| w.0).collect(), file.dock, file.bounds)
    }

    pub fn load(path: &Path) -> Result<Self, FloorPlanError> {
        let text = std::fs::read_to_string(path).map_err(|source| FloorPlanError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let file = FloorPlanFile {
            walls: self.walls.iter().copied().map(WallRepr).collect(),
            dock: self.dock,
            bounds: self.bounds,
        };
        serde_json::to_string(&file).expect("floorplan serializes")
    }

    pub fn walls(&self) -> &[Segment] {
        &self.walls
    }

    pub fn dock(&self) -> Pose {
        self.dock
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn with_extra_walls(mut self, extra: impl IntoIterator<Item = Segment>) -> Self {
        self.walls.extend(extra);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_schema() {
        let plan = FloorPlan::from_json(
            r#"{"walls": [[0,0,4,0],[4,0,4,4],[4,4,0,4],[0,4,0,0]], "dock": [0.5,2,0], "bounds": [0,0,4,4]}"#,
        )
        .unwrap();
        assert_eq!(plan.walls().len(), 4);
        assert_eq!(plan.dock(), Pose::new(0.5, 2.0, 0.0));
        let again = FloorPlan::from_json(&plan.to_json()).unwrap();
        assert_eq!(plan, again);
    }

    #[test]
    fn rejects_zero_length_wall() {
        let err = FloorPlan::from_json(
            r#"{"walls": [[1,1,1,1]], "dock": [2,2,0], "bounds": [0,0,4,4]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, FloorPlanError::DegenerateWall { index: 0 }));
    }

    #[test]
    fn rejects_dock_against_wall() {
        let err = FloorPlan::rectangle(4.0, 4.0, Pose::new(0.1, 2.0, 0.0)).unwrap_err();
        assert!(matches!(err, FloorPlanError::DockBlocked { .. }));
        let err = FloorPlan::rectangle(4.0, 4.0, Pose::new(5.0, 2.0, 0.0)).unwrap_err();
        assert!(matches!(err, FloorPlanError::DockOutOfBounds { .. }));
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(FloorPlan::from_json(
            r#"{"walls": [], "dock": [2,2,0], "bounds": [0,0,4,4], "doors": []}"#
        )
        .is_err());
    }
}
