use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use base64::Engine;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::backend::{ChatMessage, ChatRequest, ContentPart, ImageUrl, Stage};
use super::features::{EntityFeature, ExtractedFeatures};
use super::trace::Aspect;
use crate::controller::{DecisionToken, Mode};
use crate::world::{EntityKind, FramePayload, SceneFrame, SyntheticView, WallClock};

pub const ROLE: &str = "You are a value-aware vacuum cleaner.";
pub const OBJECTIVE: &str = "Your objective is to maintain cleanliness while respecting the homeowner's values, ensuring a comfortable and harmonious living environment.";

#[derive(Debug, Error, PartialEq)]
pub enum PromptError {
    #[error("prompt.modes.{0}: description is missing or empty")]
    MissingModeDescription(Mode),
    #[error("cannot read fixture image {path}: {reason}")]
    Fixture { path: PathBuf, reason: String },
}

/// Per-mode capability descriptions, keyed by mode name in config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModeDescriptions(pub BTreeMap<Mode, String>);

impl Default for ModeDescriptions {
    fn default() -> Self {
        let mut map = BTreeMap::new();
        map.insert(
            Mode::Observation,
            "Observation mode: I stay in place and rotate to take 10 pictures over a 180-degree view, one per second. From them I decide whether to start cleaning (CLEAN), wait and look again later (WAIT), or return to my charging station (DOCK).".to_string(),
        );
        map.insert(
            Mode::Cleaning,
            "Cleaning mode: I drive in straight lines, slow down near obstacles and turn in a random direction after a bump. Every 0.5 seconds I take pictures in groups of 3 and decide whether to keep cleaning (CONTINUE) or stop and go back to observing (INTERRUPT).".to_string(),
        );
        map.insert(
            Mode::Docking,
            "Docking mode: I drive back to my charging station and stay there until the homeowner sends me out again.".to_string(),
        );
        Self(map)
    }
}

impl ModeDescriptions {
    pub fn get(&self, mode: Mode) -> Option<&str> {
        self.0.get(&mode).map(String::as_str)
    }
}

/// The three-part system prompt: role, objective, mode descriptions.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemPrompt {
    pub role: String,
    pub objective: String,
    /// always in Observation, Cleaning, Docking order
    pub modes: Vec<(Mode, String)>,
}

impl SystemPrompt {
    pub fn new(descriptions: &ModeDescriptions) -> Result<Self, PromptError> {
        let modes = Mode::ALL
            .iter()
            .map(|mode| match descriptions.get(*mode).map(str::trim) {
                Some(text) if !text.is_empty() => Ok((*mode, text.to_string())),
                _ => Err(PromptError::MissingModeDescription(*mode)),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            role: ROLE.to_string(),
            objective: OBJECTIVE.to_string(),
            modes,
        })
    }

    pub fn render(&self) -> String {
        let mut out = format!("{}\n\n{}\n\nYou operate in three modes:", self.role, self.objective);
        for (_, text) in &self.modes {
            out.push_str("\n- ");
            out.push_str(text);
        }
        out
    }
}

pub fn compose_system_prompt(descriptions: &ModeDescriptions) -> Result<String, PromptError> {
    SystemPrompt::new(descriptions).map(|p| p.render())
}

const EXTRACT_MARKER: &str = "TASK: FEATURE EXTRACTION";
const REASON_MARKER: &str = "TASK: STEP-BY-STEP REASONING";
const FINALIZE_MARKER: &str = "TASK: FINAL DECISION";
const SUMMARIZE_MARKER: &str = "TASK: SUMMARY";

/// Recovers the stage from a request built by [`PromptBundle`].
pub fn detect_stage(system_text: &str) -> Option<Stage> {
    [
        (EXTRACT_MARKER, Stage::Extract),
        (REASON_MARKER, Stage::Reason),
        (FINALIZE_MARKER, Stage::Finalize),
        (SUMMARIZE_MARKER, Stage::Summarize),
    ]
    .into_iter()
    .find(|(marker, _)| system_text.contains(marker))
    .map(|(_, stage)| stage)
}

fn token_list(mode: Mode) -> String {
    mode.vocabulary().iter().map(|t| t.as_str()).collect::<Vec<_>>().join(", ")
}

fn extract_instructions() -> String {
    format!(
        "{EXTRACT_MARKER}\nLook at each frame and extract the key elements, focusing on the presence of people or pets, human activities, and contextual clues (for example tv_on or toys_on_floor). Use the same id for the same individual across frames. Give each pet an estimated motion_speed in m/s (0 when still). Reply with JSON only, in this shape:\n{{\"frames\":[{{\"seq\":0,\"people\":[{{\"id\":\"person_1\",\"activity\":\"watching_tv\"}}],\"pets\":[{{\"id\":\"dog_1\",\"motion_speed\":0.0}}],\"clues\":[\"tv_on\"]}}]}}"
    )
}

fn reason_instructions() -> String {
    let headings = Aspect::ALL
        .iter()
        .map(|a| format!("{}: {}", a.heading(), a.guidance()))
        .collect::<Vec<_>>()
        .join("\n");
    format!(
        "{REASON_MARKER}\nReason step by step about whether to act now. Write exactly these five sections, each starting on its own line with its heading:\n{headings}\nDo not state a final decision yet."
    )
}

fn finalize_instructions(mode: Mode) -> String {
    format!(
        "{FINALIZE_MARKER}\nYou are given your own step-by-step reasoning. Take the final decision based on it. Allowed decisions in {mode} mode: {}. End your reply with exactly one line of the form\nDECISION: <TOKEN>",
        token_list(mode)
    )
}

fn summarize_instructions() -> String {
    format!(
        "{SUMMARIZE_MARKER}\nSummarise your reasoning and decision for the homeowner in one short, user-friendly paragraph of at most {} characters. Do not include a DECISION line.",
        super::summary::SUMMARY_MAX_CHARS
    )
}

/// Structured observation sent for synthetic frames.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SyntheticObservation {
    #[serde(default)]
    pub people: Vec<ObservedIndividual>,
    #[serde(default)]
    pub pets: Vec<ObservedIndividual>,
    #[serde(default)]
    pub clues: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedIndividual {
    pub id: String,
    pub activity: String,
    pub motion_speed: f64,
    pub distance_m: f64,
}

impl SyntheticObservation {
    pub fn from_frame(frame: &SceneFrame, view: &SyntheticView) -> Self {
        let mut obs = Self {
            clues: view.clues.clone(),
            ..Self::default()
        };
        for e in &view.entities {
            let individual = ObservedIndividual {
                id: e.id.0.clone(),
                activity: e.activity.clone(),
                motion_speed: round3(e.motion_speed),
                distance_m: round3(e.pose.position().distance(frame.pose.position())),
            };
            match e.kind {
                EntityKind::Person => obs.people.push(individual),
                EntityKind::Pet => obs.pets.push(individual),
            }
        }
        obs
    }
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

const OBSERVATION_PREFIX: &str = "Synthetic observation: ";

pub fn frame_header(frame: &SceneFrame) -> String {
    format!(
        "Frame {} (t={:.2} s, {}, heading {:.1} deg)",
        frame.seq,
        frame.sim_time,
        frame.wall_clock,
        frame.pose.heading()
    )
}

/// Parses the per-frame text parts of an extraction request back into
/// `(seq, observation)` pairs. Image frames yield `None`.
pub fn parse_frame_parts(parts: &[&str]) -> Vec<(u64, Option<SyntheticObservation>)> {
    let mut out = Vec::new();
    for part in parts {
        let Some(rest) = part.strip_prefix("Frame ") else {
            continue;
        };
        let Some(seq) = rest.split_whitespace().next().and_then(|s| s.parse().ok()) else {
            continue;
        };
        let obs = part
            .lines()
            .find_map(|l| l.strip_prefix(OBSERVATION_PREFIX))
            .and_then(|json| serde_json::from_str(json).ok());
        out.push((seq, obs));
    }
    out
}

fn frame_parts(frame: &SceneFrame) -> Result<Vec<ContentPart>, PromptError> {
    match &frame.payload {
        FramePayload::Synthetic(view) => {
            let obs = SyntheticObservation::from_frame(frame, view);
            let json = serde_json::to_string(&obs).expect("observation serializes");
            Ok(vec![ContentPart::text(format!("{}\n{OBSERVATION_PREFIX}{json}", frame_header(frame)))])
        }
        FramePayload::Fixture { image } => Ok(vec![
            ContentPart::text(format!("{}\nImage attached.", frame_header(frame))),
            ContentPart::ImageUrl {
                image_url: ImageUrl { url: data_url(image)? },
            },
        ]),
    }
}

fn data_url(path: &Path) -> Result<String, PromptError> {
    let bytes = std::fs::read(path).map_err(|e| PromptError::Fixture {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let mime = match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("webp") => "image/webp",
        _ => "application/octet-stream",
    };
    Ok(format!(
        "data:{mime};base64,{}",
        base64::engine::general_purpose::STANDARD.encode(bytes)
    ))
}

/// Situational facts shared by the reasoning, decision and summary stages.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptContext {
    pub wall_clock: WallClock,
    pub mode: Mode,
    pub blocked_cycles: u32,
    pub entities: Vec<EntityFeature>,
    pub clues: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct FeatureDigest {
    entities: Vec<EntityFeature>,
    clues: Vec<String>,
}

impl PromptContext {
    pub fn render(&self) -> String {
        let digest = FeatureDigest {
            entities: self.entities.clone(),
            clues: self.clues.clone(),
        };
        format!(
            "Current time: {}\nActive mode: {}\nConsecutive deferrals: {}\nExtracted features: {}",
            self.wall_clock,
            self.mode,
            self.blocked_cycles,
            serde_json::to_string(&digest).expect("features serialize")
        )
    }

    /// Inverse of [`PromptContext::render`]; scans any text for the block.
    pub fn parse(text: &str) -> Option<Self> {
        let field = |name: &str| text.lines().find_map(|l| l.strip_prefix(name)).map(str::trim);
        let digest: FeatureDigest = serde_json::from_str(field("Extracted features:")?).ok()?;
        Some(Self {
            wall_clock: field("Current time:")?.parse().ok()?,
            mode: field("Active mode:")?.parse().ok()?,
            blocked_cycles: field("Consecutive deferrals:")?.parse().ok()?,
            entities: digest.entities,
            clues: digest.clues,
        })
    }

    pub fn features(&self) -> ExtractedFeatures {
        ExtractedFeatures {
            frames: Vec::new(),
            entities: self.entities.clone(),
            clues: self.clues.clone(),
        }
    }
}

/// Everything needed to build the stage requests for one evaluation.
#[derive(Debug, Clone)]
pub struct PromptBundle {
    pub system_prompt: SystemPrompt,
    pub model: String,
    pub mode: Mode,
    pub wall_clock: WallClock,
    pub blocked_cycles: u32,
    pub frames: Vec<SceneFrame>,
}

impl PromptBundle {
    fn system(&self, instructions: &str) -> ChatMessage {
        ChatMessage::system(format!(
            "{}\n\n{instructions}\n\nCurrent time: {}",
            self.system_prompt.render(),
            self.wall_clock
        ))
    }

    fn request(&self, stage: Stage, instructions: &str, parts: Vec<ContentPart>) -> ChatRequest {
        ChatRequest {
            model: self.model.clone(),
            messages: vec![self.system(instructions), ChatMessage::user(parts)],
            stage: Some(stage),
        }
    }

    pub fn context(&self, features: &ExtractedFeatures) -> PromptContext {
        PromptContext {
            wall_clock: self.wall_clock,
            mode: self.mode,
            blocked_cycles: self.blocked_cycles,
            entities: features.entities.clone(),
            clues: features.clues.clone(),
        }
    }

    pub fn extract_request(&self) -> Result<ChatRequest, PromptError> {
        let mut parts = vec![ContentPart::text(format!(
            "Current time: {}\nActive mode: {}\n{} frames follow.",
            self.wall_clock,
            self.mode,
            self.frames.len()
        ))];
        for frame in &self.frames {
            parts.extend(frame_parts(frame)?);
        }
        Ok(self.request(Stage::Extract, &extract_instructions(), parts))
    }

    /// Reasoning request. Frame payloads travel along with the extracted
    /// elements so the model can look again.
    pub fn reason_request(&self, features: &ExtractedFeatures, reprompt: Option<&str>) -> Result<ChatRequest, PromptError> {
        let mut parts = vec![ContentPart::text(self.context(features).render())];
        for frame in &self.frames {
            parts.extend(frame_parts(frame)?);
        }
        if let Some(note) = reprompt {
            parts.push(ContentPart::text(note));
        }
        Ok(self.request(Stage::Reason, &reason_instructions(), parts))
    }

    pub fn finalize_request(&self, features: &ExtractedFeatures, trace_raw: &str, reprompt: Option<&str>) -> ChatRequest {
        let mut parts = vec![
            ContentPart::text(self.context(features).render()),
            ContentPart::text(format!("Your reasoning:\n{trace_raw}")),
        ];
        if let Some(note) = reprompt {
            parts.push(ContentPart::text(note));
        }
        self.request(Stage::Finalize, &finalize_instructions(self.mode), parts)
    }

    pub fn summarize_request(
        &self,
        features: &ExtractedFeatures,
        trace_raw: &str,
        decision: DecisionToken,
        reprompt: Option<&str>,
    ) -> ChatRequest {
        let mut parts = vec![
            ContentPart::text(self.context(features).render()),
            ContentPart::text(format!("Your reasoning:\n{trace_raw}")),
            ContentPart::text(format!("Decision taken: {decision}")),
        ];
        if let Some(note) = reprompt {
            parts.push(ContentPart::text(note));
        }
        self.request(Stage::Summarize, &summarize_instructions(), parts)
    }
}

pub fn missing_aspects_reprompt(missing: &[Aspect]) -> String {
    let names = missing.iter().map(|a| a.heading()).collect::<Vec<_>>().join(", ");
    format!("Your previous answer was missing these sections: {names}. Answer again with all five sections.")
}

pub fn decision_reprompt(mode: Mode) -> String {
    format!(
        "Your previous reply had no valid decision. Reply with one line: DECISION: <TOKEN>, where TOKEN is one of {}.",
        token_list(mode)
    )
}

pub fn brevity_reprompt(length: usize) -> String {
    format!(
        "Your previous summary was {length} characters long. Rewrite it as one paragraph of at most {} characters.",
        super::summary::SUMMARY_MAX_CHARS
    )
}
