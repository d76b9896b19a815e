use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CadenceConfig, Decision, DecisionSource, DecisionToken, Mode};

/// A decision that does not belong to the current mode. This is a
/// programming error in the caller, not a runtime condition.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransitionError {
    #[error("{origin:?} decision {token} is not valid in {mode} mode")]
    VocabularyMismatch {
        mode: Mode,
        token: DecisionToken,
        origin: DecisionSource,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    pub mode: Mode,
    /// consecutive WAIT decisions since the last CLEAN
    pub blocked_cycles: u32,
    /// seconds of idle waiting left; > 0 only while waiting in observation
    pub wait_timer: f64,
    pub rng_seed: u64,
    /// log id of the record that produced the last applied decision
    pub last_decision: Option<u64>,
}

impl ControllerState {
    pub fn new(mode: Mode, rng_seed: u64) -> Self {
        Self {
            mode,
            blocked_cycles: 0,
            wait_timer: 0.0,
            rng_seed,
            last_decision: None,
        }
    }
}

/// Whether `decision` may be applied in `mode`.
pub fn decision_allowed(mode: Mode, decision: &Decision) -> bool {
    let vocabulary = match decision.source {
        DecisionSource::OperatorOverride => mode.override_vocabulary(),
        DecisionSource::Model | DecisionSource::SafeDefault => mode.vocabulary(),
    };
    vocabulary.contains(&decision.token)
}

/// Pure mode transition. Docking only accepts operator decisions.
pub fn transition(
    state: &ControllerState,
    decision: &Decision,
    cadence: &CadenceConfig,
) -> Result<ControllerState, TransitionError> {
    if !decision_allowed(state.mode, decision) {
        return Err(TransitionError::VocabularyMismatch {
            mode: state.mode,
            token: decision.token,
            origin: decision.source,
        });
    }
    let mut next = state.clone();
    next.wait_timer = 0.0;
    match decision.token {
        DecisionToken::Clean => {
            next.mode = Mode::Cleaning;
            next.blocked_cycles = 0;
        }
        DecisionToken::Wait => {
            next.mode = Mode::Observation;
            next.wait_timer = cadence.wait_duration;
            next.blocked_cycles += 1;
        }
        DecisionToken::Dock => next.mode = Mode::Docking,
        DecisionToken::Continue => next.mode = Mode::Cleaning,
        DecisionToken::Interrupt => next.mode = Mode::Observation,
    }
    Ok(next)
}
