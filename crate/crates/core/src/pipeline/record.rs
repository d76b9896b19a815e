use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::backend::Stage;
use super::features::ExtractedFeatures;
use super::trace::ReasoningTrace;
use crate::controller::{Decision, Mode};

/// Per-stage wall time in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageLatencies {
    pub extract: f64,
    pub reason: f64,
    pub finalize: f64,
    pub summarize: f64,
    pub total: f64,
}

impl StageLatencies {
    pub fn stage(&self, stage: Stage) -> f64 {
        match stage {
            Stage::Extract => self.extract,
            Stage::Reason => self.reason,
            Stage::Finalize => self.finalize,
            Stage::Summarize => self.summarize,
        }
    }

    fn stage_mut(&mut self, stage: Stage) -> &mut f64 {
        match stage {
            Stage::Extract => &mut self.extract,
            Stage::Reason => &mut self.reason,
            Stage::Finalize => &mut self.finalize,
            Stage::Summarize => &mut self.summarize,
        }
    }

    pub fn stage_sum(&self) -> f64 {
        self.extract + self.reason + self.finalize + self.summarize
    }
}

/// Outcome of one evaluation, as logged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub eval_id: u64,
    /// mode the evaluation was made in
    pub mode: Mode,
    pub decision: Decision,
    pub features: Option<ExtractedFeatures>,
    pub trace: Option<ReasoningTrace>,
    pub summary: String,
    pub latencies: StageLatencies,
    pub backend_id: String,
    pub frame_seqs: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// How stage latencies are measured. `Frozen` reports zeros so that runs
/// against a deterministic backend log byte-identical records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stopwatch {
    #[default]
    Wall,
    Frozen,
}

pub(crate) struct LatencyMeter {
    mode: Stopwatch,
    started: Instant,
    stage_start: Option<(Stage, Instant)>,
    pub(crate) latencies: StageLatencies,
}

impl LatencyMeter {
    pub(crate) fn start(mode: Stopwatch) -> Self {
        Self {
            mode,
            started: Instant::now(),
            stage_start: None,
            latencies: StageLatencies::default(),
        }
    }

    pub(crate) fn begin(&mut self, stage: Stage) {
        self.end();
        self.stage_start = Some((stage, Instant::now()));
    }

    pub(crate) fn end(&mut self) {
        if let Some((stage, t)) = self.stage_start.take() {
            if self.mode == Stopwatch::Wall {
                *self.latencies.stage_mut(stage) = t.elapsed().as_secs_f64() * 1000.0;
            }
        }
    }

    pub(crate) fn finish(mut self) -> StageLatencies {
        self.end();
        if self.mode == Stopwatch::Wall {
            self.latencies.total = self.started.elapsed().as_secs_f64() * 1000.0;
        }
        self.latencies
    }
}
