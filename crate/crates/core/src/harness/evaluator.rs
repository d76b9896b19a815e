use std::collections::VecDeque;
use std::sync::mpsc::{self, Receiver, Sender};

use crate::pipeline::{DecisionRecord, EvaluationJob, Pipeline, PipelineError};

pub type EvalOutcome = (u64, Result<DecisionRecord, PipelineError>);

/// How evaluations run relative to the simulation loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvaluatorKind {
    /// Evaluated synchronously at submission; the result is delivered
    /// `latency_ticks` (at least 1) ticks later. Fully deterministic.
    Inline { latency_ticks: u64 },
    /// Evaluated on a worker thread while the simulation keeps ticking.
    Threaded,
}

pub(crate) enum Evaluator {
    Inline {
        pipeline: Pipeline,
        latency_ticks: u64,
        ready: VecDeque<(u64, EvalOutcome)>,
    },
    Threaded {
        jobs: Sender<EvaluationJob>,
        results: Receiver<EvalOutcome>,
    },
}

impl Evaluator {
    pub(crate) fn new(kind: EvaluatorKind, pipeline: Pipeline) -> Self {
        match kind {
            EvaluatorKind::Inline { latency_ticks } => Evaluator::Inline {
                pipeline,
                latency_ticks: latency_ticks.max(1),
                ready: VecDeque::new(),
            },
            EvaluatorKind::Threaded => {
                let (jobs, job_rx) = mpsc::channel::<EvaluationJob>();
                let (result_tx, results) = mpsc::channel();
                std::thread::Builder::new()
                    .name("evaluator".into())
                    .spawn(move || {
                        for job in job_rx {
                            let outcome = pipeline.evaluate(&job);
                            if result_tx.send((job.eval_id, outcome)).is_err() {
                                break;
                            }
                        }
                    })
                    .expect("spawn evaluator thread");
                Evaluator::Threaded { jobs, results }
            }
        }
    }

    pub(crate) fn submit(&mut self, job: EvaluationJob, now_tick: u64) {
        match self {
            Evaluator::Inline {
                pipeline,
                latency_ticks,
                ready,
            } => {
                let outcome = pipeline.evaluate(&job);
                ready.push_back((now_tick + *latency_ticks, (job.eval_id, outcome)));
            }
            Evaluator::Threaded { jobs, .. } => {
                // The worker only exits when this sender is dropped.
                let _ = jobs.send(job);
            }
        }
    }

    pub(crate) fn poll(&mut self, now_tick: u64) -> Option<EvalOutcome> {
        match self {
            Evaluator::Inline { ready, .. } => match ready.front() {
                Some((due, _)) if *due <= now_tick => ready.pop_front().map(|(_, outcome)| outcome),
                _ => None,
            },
            Evaluator::Threaded { results, .. } => results.try_recv().ok(),
        }
    }
}
