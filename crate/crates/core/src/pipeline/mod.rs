//! Language pipeline turning a batch of frames into a decision: feature
//! extraction, step-by-step reasoning, trace-fed final decision, summary.

pub mod backend;
mod features;
mod orchestrator;
mod parse;
mod prompt;
mod record;
mod summary;
mod trace;

pub use features::{parse_extraction, EntityFeature, ExtractedFeatures, FeatureParseError, FrameFeatures, PersonObservation, PetObservation};
pub use orchestrator::{EvaluationJob, Pipeline, PipelineError, StageError};
pub use parse::{parse_decision, render_decision, ParseFailure};
pub use prompt::{
    compose_system_prompt, detect_stage, frame_header, parse_frame_parts, ModeDescriptions, ObservedIndividual, PromptBundle,
    PromptContext, PromptError, SyntheticObservation, SystemPrompt, OBJECTIVE, ROLE,
};
pub use record::{DecisionRecord, StageLatencies, Stopwatch};
pub use summary::{clean_summary, truncate_at_sentence, SUMMARY_MAX_CHARS};
pub use trace::{Aspect, MissingAspects, ReasoningTrace};
