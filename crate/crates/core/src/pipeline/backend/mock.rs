use serde::{Deserialize, Serialize};

use super::{BackendError, ChatRequest, ModelBackend, Stage};
use crate::controller::{DecisionToken, Mode};
use crate::pipeline::features::{EntityFeature, ExtractedFeatures};
use crate::pipeline::parse::render_decision;
use crate::pipeline::prompt::{detect_stage, parse_frame_parts, PromptContext};
use crate::pipeline::trace::ReasoningTrace;
use crate::world::EntityKind;

const NOISE_SENSITIVE: [&str; 3] = ["watching_tv", "sleeping", "video_call"];
const NOISE_TOLERANT: [&str; 3] = ["using_phone", "cooking", "exercising"];
const PET_SPEED_THRESHOLD: f64 = 0.2;
const PET_PRESENCE_THRESHOLD: f64 = 0.5;
const DOCK_AFTER_BLOCKED: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockRule {
    PetSafety,
    NoiseSensitive,
    Persistence,
    NoiseTolerant,
    EmptyRoom,
    Cautious,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MockOutcome {
    pub rule: MockRule,
    pub decision: DecisionToken,
    pub trace: ReasoningTrace,
    pub summary: String,
}

fn pick(mode: Mode, observation: DecisionToken, cleaning: DecisionToken) -> DecisionToken {
    match mode {
        Mode::Cleaning => cleaning,
        _ => observation,
    }
}

fn phrase(activity: &str) -> String {
    match activity {
        "watching_tv" => "watching TV".into(),
        "sleeping" => "sleeping".into(),
        "video_call" => "on a video call".into(),
        "using_phone" => "using their phone".into(),
        "cooking" => "cooking".into(),
        "exercising" => "exercising".into(),
        other => other.replace('_', " "),
    }
}

fn resident_people(features: &ExtractedFeatures) -> impl Iterator<Item = &EntityFeature> {
    features.entities.iter().filter(|e| e.kind == EntityKind::Person && !e.transient)
}

/// Rule-based stand-in for the model. The first matching rule fires:
///
/// 1. a pet moving faster than 0.2 m/s in at least half the frames
/// 2. a resident person doing something that needs quiet
/// 3. three or more deferrals in a row (observation only)
/// 4. a resident person doing something that tolerates noise
/// 5. nobody present apart from people passing through
/// 6. anything else: hold back
pub fn mock_decide(features: &ExtractedFeatures, mode: Mode, blocked_cycles: u32) -> MockOutcome {
    let stop = pick(mode, DecisionToken::Wait, DecisionToken::Interrupt);
    let go = pick(mode, DecisionToken::Clean, DecisionToken::Continue);
    let (defer_verb, go_verb) = match mode {
        Mode::Cleaning => ("stopped cleaning", "kept cleaning"),
        _ => ("decided to wait before cleaning", "started cleaning"),
    };

    let moving_pet = features.entities.iter().find(|e| {
        e.kind == EntityKind::Pet
            && e.motion_speed > PET_SPEED_THRESHOLD
            && e.presence_ratio >= PET_PRESENCE_THRESHOLD
    });
    if let Some(pet) = moving_pet {
        let id = &pet.id;
        return outcome(
            MockRule::PetSafety,
            stop,
            [
                &format!("{id} is moving around a lot close to me. Creating a safe and enjoyable environment for the house owners includes keeping their animals safe, and that outweighs cleanliness right now."),
                "The time of day does not change the risk to a moving pet.",
                "If I clean now I could bump into the pet or get in its way, and the noise would follow it around the room. If I hold back, only the cleaning is delayed.",
                &format!("Cleaning is not advisable for {id}'s physical safety while it moves this much near me. The loud noise of the vacuum could also scare the pet and cause it fear and stress."),
                "My purpose is to clean, and I can do that once the pet has settled or left the area.",
            ],
            format!("I {defer_verb} because a pet ({id}) was moving around close to me. Driving and vacuuming near a moving pet could hurt it, and the loud noise could scare it. I will check again shortly and clean once it has calmed down."),
        );
    }

    if let Some(person) = resident_people(features).find(|e| NOISE_SENSITIVE.contains(&e.activity.as_str())) {
        let (id, doing) = (&person.id, phrase(&person.activity));
        return outcome(
            MockRule::NoiseSensitive,
            stop,
            [
                &format!("{id} is {doing}. Respecting their comfort means not disturbing them with the noise of the vacuum; creating a safe and enjoyable environment for the house owners matters more than cleaning this minute."),
                "Someone is relaxing at this time, so it is not a good moment for a noisy task.",
                &format!("Cleaning now would produce noise that interrupts {id}. Waiting keeps the room quiet and only delays the cleaning."),
                &format!("The noise produced by cleaning would disturb {id} while {doing}, so deferring the cleaning is the respectful choice."),
                "Cleaning remains my purpose, and I can do it later when it will not disturb anyone.",
            ],
            format!("I {defer_verb} because someone is {doing} and the noise of the vacuum would disturb them. I will look at the room again later and clean when it will not bother anyone."),
        );
    }

    if mode == Mode::Observation && blocked_cycles >= DOCK_AFTER_BLOCKED {
        return outcome(
            MockRule::Persistence,
            DecisionToken::Dock,
            [
                &format!("I have already deferred cleaning {blocked_cycles} times in a row. The room is still busy, and staying here keeps me in the way of the people using it."),
                "The situation has not changed over several checks.",
                "Waiting again would likely give the same result. Returning to my charging station frees the room and keeps me ready for later.",
                &format!("After {blocked_cycles} consecutive deferrals it is better to stop trying for now and dock rather than keep hovering in an occupied room."),
                "I can clean when the homeowner sends me out again.",
            ],
            format!("I returned to my charging station because the room has been busy for {blocked_cycles} checks in a row. I will clean when I am sent out again."),
        );
    }

    if let Some(person) = resident_people(features).find(|e| NOISE_TOLERANT.contains(&e.activity.as_str())) {
        let (id, doing) = (&person.id, phrase(&person.activity));
        return outcome(
            MockRule::NoiseTolerant,
            go,
            [
                &format!("{id} is {doing}, which does not require silence. I can balance the users' comfort with the purpose of cleaning."),
                "Nothing about the current time suggests that someone needs quiet.",
                &format!("Cleaning now makes some noise, but {id} can carry on {doing}. Waiting would leave the room dirty for no clear benefit."),
                &format!("Being {doing} does not require silence, so cleaning will not meaningfully disturb {id}."),
                "Cleaning now fulfils my core purpose while respecting the people in the room.",
            ],
            format!("I {go_verb} because someone is {doing}, which does not require silence. I will keep an eye on the room in case that changes."),
        );
    }

    if resident_people(features).next().is_none() && !features.entities.iter().any(|e| e.kind == EntityKind::Pet && !e.transient) {
        let visitor_note = if features.any_transient() {
            " Someone passed through briefly but has already left the room, so they are not affected."
        } else {
            ""
        };
        return outcome(
            MockRule::EmptyRoom,
            go,
            [
                &format!("The room is empty, so cleaning does not conflict with anyone's comfort.{visitor_note}"),
                "With nobody around, the time of day does not matter for this choice.",
                "Cleaning now leaves the room tidy without bothering anyone. Waiting would gain nothing.",
                &format!("No one is disturbed by cleaning now.{visitor_note}"),
                "Cleaning an empty room is exactly my purpose.",
            ],
            if visitor_note.is_empty() {
                format!("I {go_verb} because the room is empty and no one will be disturbed.")
            } else {
                format!("I {go_verb} because the room is empty. Someone passed through briefly but left, so no one will be disturbed.")
            },
        );
    }

    let ids = features.entities.iter().filter(|e| !e.transient).map(|e| e.id.as_str()).collect::<Vec<_>>().join(", ");
    outcome(
        MockRule::Cautious,
        stop,
        [
            &format!("I can see {ids} but I am unsure how cleaning would affect them. Their comfort and safety come first."),
            "The time of day gives no clear signal either way.",
            "Cleaning now might disturb them. Waiting only delays the cleaning.",
            "When in doubt, the cautious choice is to hold back and look again.",
            "I will clean once I am confident it will not bother anyone.",
        ],
        format!("I {defer_verb} because I was not sure cleaning would be welcome right now. I will check the room again soon."),
    )
}

fn outcome(rule: MockRule, decision: DecisionToken, sections: [&str; 5], summary: String) -> MockOutcome {
    MockOutcome {
        rule,
        decision,
        trace: ReasoningTrace::from_sections(sections),
        summary,
    }
}

/// Deterministic backend that answers every stage from [`mock_decide`].
/// Image frames are ignored.
#[derive(Debug, Clone, Default)]
pub struct MockBackend;

impl MockBackend {
    pub fn new() -> Self {
        Self
    }

    fn extract(request: &ChatRequest) -> String {
        let parts = request.user_parts();
        let texts: Vec<&str> = parts.iter().filter_map(|p| p.as_text()).collect();
        let frames: Vec<serde_json::Value> = parse_frame_parts(&texts)
            .into_iter()
            .map(|(seq, obs)| {
                let obs = obs.unwrap_or_default();
                serde_json::json!({
                    "seq": seq,
                    "people": obs.people.iter().map(|p| serde_json::json!({"id": p.id, "activity": p.activity})).collect::<Vec<_>>(),
                    "pets": obs.pets.iter().map(|p| serde_json::json!({"id": p.id, "motion_speed": p.motion_speed})).collect::<Vec<_>>(),
                    "clues": obs.clues,
                })
            })
            .collect();
        serde_json::json!({ "frames": frames }).to_string()
    }
}

impl ModelBackend for MockBackend {
    fn id(&self) -> String {
        "mock".into()
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let stage = request
            .stage
            .or_else(|| detect_stage(&request.system_text()))
            .ok_or_else(|| BackendError::Unsupported("unknown stage".into()))?;
        if stage == Stage::Extract {
            return Ok(Self::extract(request));
        }
        let context = PromptContext::parse(&request.user_text())
            .ok_or_else(|| BackendError::Unsupported("request carries no context block".into()))?;
        let out = mock_decide(&context.features(), context.mode, context.blocked_cycles);
        Ok(match stage {
            Stage::Reason => out.trace.raw_text,
            Stage::Finalize => format!(
                "Based on my reasoning, {}.\n{}",
                out.trace.rationale.trim_end_matches('.').to_lowercase(),
                render_decision(out.decision)
            ),
            Stage::Summarize => out.summary,
            Stage::Extract => unreachable!("handled above"),
        })
    }
}
