use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::run::{run_scenario, RunOptions, RunUntil};
use super::scenario::Scenario;
use super::simulation::SimulationError;
use crate::controller::DecisionToken;
use crate::pipeline::{backend::Stage, DecisionRecord, Pipeline};

#[derive(Debug, Error)]
pub enum TrialError {
    #[error("trials must be >= 1")]
    NoTrials,
    #[error("trial {trial}: {source}")]
    Startup {
        trial: usize,
        #[source]
        source: SimulationError,
    },
    #[error("trial {trial} produced no decision within {seconds} sim seconds")]
    NoDecision { trial: usize, seconds: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LatencyStat {
    pub mean: f64,
    pub p95: f64,
}

impl LatencyStat {
    /// Mean and nearest-rank 95th percentile.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let rank = ((0.95 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
        Self {
            mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
            p95: sorted[rank - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub scenario: String,
    pub trials: usize,
    pub histogram: BTreeMap<DecisionToken, usize>,
    pub agreement_rate: f64,
    /// per stage plus `total`, milliseconds
    pub latency_ms: BTreeMap<String, LatencyStat>,
    pub backend_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<DecisionToken>,
    /// every trial matched `expected`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passed: Option<bool>,
}

/// Largest decision count over the number of decisions.
pub fn agreement_rate(decisions: &[DecisionToken]) -> f64 {
    if decisions.is_empty() {
        return 0.0;
    }
    let hist = histogram(decisions);
    *hist.values().max().expect("non-empty") as f64 / decisions.len() as f64
}

pub fn histogram(decisions: &[DecisionToken]) -> BTreeMap<DecisionToken, usize> {
    let mut hist = BTreeMap::new();
    for d in decisions {
        *hist.entry(*d).or_insert(0) += 1;
    }
    hist
}

impl ConsistencyReport {
    pub fn from_records(scenario: &str, expected: Option<DecisionToken>, records: &[DecisionRecord]) -> Self {
        let tokens: Vec<DecisionToken> = records.iter().map(|r| r.decision.token).collect();
        let mut latency_ms = BTreeMap::new();
        for stage in Stage::ALL {
            let values: Vec<f64> = records.iter().map(|r| r.latencies.stage(stage)).collect();
            latency_ms.insert(stage.as_str().to_string(), LatencyStat::of(&values));
        }
        let totals: Vec<f64> = records.iter().map(|r| r.latencies.total).collect();
        latency_ms.insert("total".to_string(), LatencyStat::of(&totals));
        Self {
            scenario: scenario.to_string(),
            trials: records.len(),
            histogram: histogram(&tokens),
            agreement_rate: agreement_rate(&tokens),
            latency_ms,
            backend_id: records.first().map(|r| r.backend_id.clone()).unwrap_or_default(),
            expected,
            passed: expected.map(|e| !tokens.is_empty() && tokens.iter().all(|t| *t == e)),
        }
    }
}

/// Runs `n` independent trials to the first decision, in parallel.
pub fn run_trials(
    scenario: &Scenario,
    n: usize,
    pipeline: &Pipeline,
    options: &RunOptions,
) -> Result<ConsistencyReport, TrialError> {
    if n == 0 {
        return Err(TrialError::NoTrials);
    }
    let options = RunOptions {
        until: RunUntil::FirstDecision,
        ..options.clone()
    };
    // Paced trials mostly sleep, so run them all at once regardless of
    // core count.
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(n.min(64))
        .build()
        .expect("trial thread pool");
    let records: Vec<DecisionRecord> = pool.install(|| {
        (0..n)
            .into_par_iter()
            .map(|trial| {
                let log = run_scenario(scenario, pipeline, &options).map_err(|source| TrialError::Startup { trial, source })?;
                log.first_decision().cloned().ok_or(TrialError::NoDecision {
                    trial,
                    seconds: options.max_sim_seconds,
                })
            })
            .collect::<Result<_, _>>()
    })?;
    Ok(ConsistencyReport::from_records(&scenario.name, scenario.expected, &records))
}
