use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::EntityKind;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureParseError {
    #[error("no JSON object in extraction output")]
    NoJson,
    #[error("extraction output is not valid: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonObservation {
    pub id: String,
    #[serde(default = "unknown_activity")]
    pub activity: String,
}

fn unknown_activity() -> String {
    "unknown".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PetObservation {
    pub id: String,
    /// estimated m/s; 0 when the pet looks still
    #[serde(default)]
    pub motion_speed: f64,
}

/// Salient elements the model reported for one frame.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FrameFeatures {
    pub seq: u64,
    #[serde(default)]
    pub people: Vec<PersonObservation>,
    #[serde(default)]
    pub pets: Vec<PetObservation>,
    #[serde(default)]
    pub clues: Vec<String>,
}

impl FrameFeatures {
    fn contains(&self, id: &str) -> bool {
        self.people.iter().any(|p| p.id == id) || self.pets.iter().any(|p| p.id == id)
    }
}

/// Per-individual aggregate over the whole batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityFeature {
    pub id: String,
    pub kind: EntityKind,
    /// last activity reported (people) or `pet`
    pub activity: String,
    /// fastest motion reported
    pub motion_speed: f64,
    /// fraction of frames in which the individual appears
    pub presence_ratio: f64,
    /// seen in under half of the frames and gone from the final one
    pub transient: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExtractedFeatures {
    pub frames: Vec<FrameFeatures>,
    /// sorted by id
    pub entities: Vec<EntityFeature>,
    /// union of all clue tags, sorted
    pub clues: Vec<String>,
}

impl ExtractedFeatures {
    /// Aggregates per-frame observations. `frame_seqs` is the batch in
    /// capture order; frames the model skipped count as empty.
    pub fn aggregate(frame_seqs: &[u64], reported: Vec<FrameFeatures>) -> Self {
        let mut by_seq: BTreeMap<u64, FrameFeatures> = BTreeMap::new();
        for f in reported {
            by_seq.entry(f.seq).or_insert(f);
        }
        let frames: Vec<FrameFeatures> = frame_seqs
            .iter()
            .map(|seq| {
                by_seq.remove(seq).unwrap_or(FrameFeatures {
                    seq: *seq,
                    ..FrameFeatures::default()
                })
            })
            .collect();

        let total = frames.len().max(1) as f64;
        let last = frames.last();
        let mut entities: BTreeMap<String, EntityFeature> = BTreeMap::new();
        let mut clues = BTreeSet::new();
        for frame in &frames {
            // An individual counts once per frame even if listed twice.
            let mut seen_here = BTreeSet::new();
            for p in &frame.people {
                let e = entities.entry(p.id.clone()).or_insert_with(|| blank(&p.id, EntityKind::Person));
                if e.kind == EntityKind::Person {
                    e.activity = p.activity.clone();
                }
                seen_here.insert(p.id.clone());
            }
            for p in &frame.pets {
                let e = entities.entry(p.id.clone()).or_insert_with(|| blank(&p.id, EntityKind::Pet));
                if p.motion_speed.is_finite() {
                    e.motion_speed = e.motion_speed.max(p.motion_speed);
                }
                seen_here.insert(p.id.clone());
            }
            for id in seen_here {
                if let Some(e) = entities.get_mut(&id) {
                    e.presence_ratio += 1.0;
                }
            }
            clues.extend(frame.clues.iter().cloned());
        }
        for e in entities.values_mut() {
            e.presence_ratio /= total;
            let in_last = last.is_some_and(|f| f.contains(&e.id));
            e.transient = e.presence_ratio < 0.5 && !in_last;
        }
        Self {
            frames,
            entities: entities.into_values().collect(),
            clues: clues.into_iter().collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn any_transient(&self) -> bool {
        self.entities.iter().any(|e| e.transient)
    }

    pub fn entity(&self, id: &str) -> Option<&EntityFeature> {
        self.entities.iter().find(|e| e.id == id)
    }
}

fn blank(id: &str, kind: EntityKind) -> EntityFeature {
    EntityFeature {
        id: id.to_string(),
        kind,
        activity: match kind {
            EntityKind::Person => unknown_activity(),
            EntityKind::Pet => "pet".to_string(),
        },
        motion_speed: 0.0,
        presence_ratio: 0.0,
        transient: false,
    }
}

#[derive(Deserialize)]
struct ExtractionReply {
    frames: Vec<FrameFeatures>,
}

/// Pulls the `{"frames": [...]}` object out of a model reply, tolerating
/// markdown fences or prose around it.
pub fn parse_extraction(text: &str) -> Result<Vec<FrameFeatures>, FeatureParseError> {
    let start = text.find('{').ok_or(FeatureParseError::NoJson)?;
    let end = text.rfind('}').ok_or(FeatureParseError::NoJson)?;
    if end < start {
        return Err(FeatureParseError::NoJson);
    }
    let reply: ExtractionReply =
        serde_json::from_str(&text[start..=end]).map_err(|e| FeatureParseError::Invalid(e.to_string()))?;
    Ok(reply.frames)
}
