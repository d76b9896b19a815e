use std::sync::Arc;

use thiserror::Error;

use super::backend::{ChatRequest, ModelBackend, Stage};
use super::features::{parse_extraction, ExtractedFeatures};
use super::parse::parse_decision;
use super::prompt::{
    brevity_reprompt, decision_reprompt, missing_aspects_reprompt, ModeDescriptions, PromptBundle, PromptError, SystemPrompt,
};
use super::record::{DecisionRecord, LatencyMeter, Stopwatch};
use super::summary::{char_len, clean_summary, truncate_at_sentence, SUMMARY_MAX_CHARS};
use super::trace::ReasoningTrace;
use crate::controller::{Decision, DecisionToken, Mode};
use crate::world::{SceneFrame, WallClock};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("nothing to evaluate: the batch has no frames")]
    NoFrames,
    #[error("no decisions are taken in {0} mode")]
    NoVocabulary(Mode),
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error("{stage:?} stage: {source}")]
    Prompt {
        stage: Stage,
        #[source]
        source: PromptError,
    },
    #[error("{stage:?} stage gave up after {attempts} attempt(s): {last}")]
    Exhausted { stage: Stage, attempts: u32, last: String },
}

impl StageError {
    pub fn stage(&self) -> Stage {
        match self {
            StageError::Prompt { stage, .. } | StageError::Exhausted { stage, .. } => *stage,
        }
    }
}

/// One batch of frames to evaluate.
#[derive(Debug, Clone)]
pub struct EvaluationJob {
    pub eval_id: u64,
    pub mode: Mode,
    pub wall_clock: WallClock,
    pub blocked_cycles: u32,
    pub frames: Vec<SceneFrame>,
}

struct Rejected<T> {
    note: Option<String>,
    reason: String,
    /// accepted instead of failing once attempts run out
    fallback: Option<T>,
}

impl<T> Rejected<T> {
    fn retry(reason: impl Into<String>) -> Self {
        Self {
            note: None,
            reason: reason.into(),
            fallback: None,
        }
    }
}

/// Four-stage evaluation: extract, reason, finalize, summarize. Each stage
/// gets at most `max_retries + 1` backend calls, reprompts included.
#[derive(Clone)]
pub struct Pipeline {
    backend: Arc<dyn ModelBackend>,
    system_prompt: SystemPrompt,
    model: String,
    max_retries: u32,
    stopwatch: Stopwatch,
}

impl Pipeline {
    pub fn new(backend: Arc<dyn ModelBackend>, system_prompt: SystemPrompt, model: &str, max_retries: u32) -> Self {
        let stopwatch = if backend.deterministic() {
            Stopwatch::Frozen
        } else {
            Stopwatch::Wall
        };
        Self {
            backend,
            system_prompt,
            model: model.to_string(),
            max_retries,
            stopwatch,
        }
    }

    /// Deterministic offline pipeline with the default mode descriptions.
    pub fn mock() -> Self {
        let prompt = SystemPrompt::new(&ModeDescriptions::default()).expect("default descriptions are complete");
        Self::new(Arc::new(super::backend::MockBackend::new()), prompt, "mock", 2)
    }

    pub fn with_stopwatch(mut self, stopwatch: Stopwatch) -> Self {
        self.stopwatch = stopwatch;
        self
    }

    pub fn backend_id(&self) -> String {
        self.backend.id()
    }

    pub fn deterministic(&self) -> bool {
        self.backend.deterministic()
    }

    pub fn bundle(&self, job: &EvaluationJob) -> PromptBundle {
        PromptBundle {
            system_prompt: self.system_prompt.clone(),
            model: self.model.clone(),
            mode: job.mode,
            wall_clock: job.wall_clock,
            blocked_cycles: job.blocked_cycles,
            frames: job.frames.clone(),
        }
    }

    fn run_stage<T>(
        &self,
        stage: Stage,
        max_reprompts: u32,
        mut build: impl FnMut(Option<&str>) -> Result<ChatRequest, PromptError>,
        mut accept: impl FnMut(&str, u32) -> Result<T, Rejected<T>>,
    ) -> Result<T, StageError> {
        let budget = self.max_retries + 1;
        let mut note: Option<String> = None;
        let mut reprompts = 0;
        let mut last = String::new();
        for attempt in 1..=budget {
            let request = build(note.as_deref()).map_err(|source| StageError::Prompt { stage, source })?;
            let text = match self.backend.complete(&request) {
                Ok(text) => text,
                Err(e) => {
                    log::warn!("{stage:?} attempt {attempt}/{budget} failed: {e}");
                    last = e.to_string();
                    continue;
                }
            };
            match accept(&text, reprompts) {
                Ok(value) => return Ok(value),
                Err(rejected) => {
                    last = rejected.reason;
                    if attempt == budget {
                        if let Some(value) = rejected.fallback {
                            return Ok(value);
                        }
                    }
                    if rejected.note.is_some() {
                        if reprompts >= max_reprompts {
                            return Err(StageError::Exhausted { stage, attempts: attempt, last });
                        }
                        reprompts += 1;
                        note = rejected.note;
                    }
                }
            }
        }
        Err(StageError::Exhausted {
            stage,
            attempts: budget,
            last,
        })
    }

    pub fn extract_features(&self, bundle: &PromptBundle) -> Result<ExtractedFeatures, StageError> {
        let seqs: Vec<u64> = bundle.frames.iter().map(|f| f.seq).collect();
        self.run_stage(
            Stage::Extract,
            0,
            |_| bundle.extract_request(),
            |text, _| {
                parse_extraction(text)
                    .map(|frames| ExtractedFeatures::aggregate(&seqs, frames))
                    .map_err(|e| Rejected::retry(e.to_string()))
            },
        )
    }

    pub fn reason(&self, bundle: &PromptBundle, features: &ExtractedFeatures) -> Result<ReasoningTrace, StageError> {
        self.run_stage(
            Stage::Reason,
            1,
            |note| bundle.reason_request(features, note),
            |text, _| {
                ReasoningTrace::parse(text).map_err(|e| Rejected {
                    note: Some(missing_aspects_reprompt(&e.missing)),
                    reason: e.to_string(),
                    fallback: None,
                })
            },
        )
    }

    pub fn finalize_decision(
        &self,
        bundle: &PromptBundle,
        features: &ExtractedFeatures,
        trace: &ReasoningTrace,
    ) -> Result<Decision, StageError> {
        self.run_stage(
            Stage::Finalize,
            self.max_retries,
            |note| Ok(bundle.finalize_request(features, &trace.raw_text, note)),
            |text, _| {
                parse_decision(text, bundle.mode).map_err(|e| Rejected {
                    note: Some(decision_reprompt(bundle.mode)),
                    reason: e.to_string(),
                    fallback: None,
                })
            },
        )
    }

    pub fn summarize(
        &self,
        bundle: &PromptBundle,
        features: &ExtractedFeatures,
        trace: &ReasoningTrace,
        decision: DecisionToken,
    ) -> Result<String, StageError> {
        self.run_stage(
            Stage::Summarize,
            1,
            |note| Ok(bundle.summarize_request(features, &trace.raw_text, decision, note)),
            |text, reprompts| {
                let summary = clean_summary(text);
                let len = char_len(&summary);
                if len == 0 {
                    return Err(Rejected::retry("empty summary"));
                }
                if len <= SUMMARY_MAX_CHARS {
                    return Ok(summary);
                }
                let truncated = truncate_at_sentence(&summary, SUMMARY_MAX_CHARS);
                if reprompts > 0 {
                    return Ok(truncated);
                }
                Err(Rejected {
                    note: Some(brevity_reprompt(len)),
                    reason: format!("summary is {len} characters"),
                    fallback: Some(truncated),
                })
            },
        )
    }

    /// Runs all stages. Any stage failure yields the mode's safe default;
    /// the only errors are jobs that cannot be evaluated at all.
    pub fn evaluate(&self, job: &EvaluationJob) -> Result<DecisionRecord, PipelineError> {
        if job.frames.is_empty() {
            return Err(PipelineError::NoFrames);
        }
        let safe = Decision::safe_default(job.mode).ok_or(PipelineError::NoVocabulary(job.mode))?;
        let bundle = self.bundle(job);
        let mut meter = LatencyMeter::start(self.stopwatch);
        let mut record = DecisionRecord {
            eval_id: job.eval_id,
            mode: job.mode,
            decision: safe,
            features: None,
            trace: None,
            summary: String::new(),
            latencies: Default::default(),
            backend_id: self.backend.id(),
            frame_seqs: job.frames.iter().map(|f| f.seq).collect(),
            failure: None,
        };

        let result = (|| {
            meter.begin(Stage::Extract);
            let features = self.extract_features(&bundle)?;
            record.features = Some(features.clone());
            meter.begin(Stage::Reason);
            let trace = self.reason(&bundle, &features)?;
            record.trace = Some(trace.clone());
            meter.begin(Stage::Finalize);
            let decision = self.finalize_decision(&bundle, &features, &trace)?;
            meter.begin(Stage::Summarize);
            let summary = self.summarize(&bundle, &features, &trace, decision.token)?;
            Ok::<_, StageError>((decision, summary))
        })();

        match result {
            Ok((decision, summary)) => {
                record.decision = decision;
                record.summary = summary;
            }
            Err(err) => {
                log::warn!("evaluation {} fell back to {}: {err}", job.eval_id, safe.token);
                record.summary = failure_summary(job.mode, &err);
                record.failure = Some(err.to_string());
            }
        }
        record.latencies = meter.finish();
        Ok(record)
    }
}

fn failure_summary(mode: Mode, err: &StageError) -> String {
    let action = match mode {
        Mode::Cleaning => "stopped cleaning",
        _ => "am holding off on cleaning",
    };
    format!(
        "I could not finish evaluating the room (the {} step failed), so I {action} to be safe and will look again shortly.",
        err.stage().as_str()
    )
}
