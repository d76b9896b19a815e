use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use crate::controller::{Decision, DecisionToken, Mode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseFailure {
    #[error("no decision token found")]
    NoToken,
    #[error("{token} is not a valid decision in {mode} mode")]
    WrongVocabulary { token: DecisionToken, mode: Mode },
}

static GRAMMAR: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\bdecision[\s*_`]*:[\s*_`]*(clean|wait|dock|continue|interrupt)\b").expect("valid regex")
});

static STANDALONE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(clean|wait|dock|continue|interrupt)\b").expect("valid regex"));

/// Extracts the decision from model output.
///
/// The last `DECISION: <TOKEN>` occurrence wins. Without one, the last
/// standalone token of the current mode's vocabulary is used.
pub fn parse_decision(text: &str, mode: Mode) -> Result<Decision, ParseFailure> {
    let vocabulary = mode.vocabulary();
    if let Some(caps) = GRAMMAR.captures_iter(text).last() {
        let token: DecisionToken = caps[1].parse().expect("regex only matches tokens");
        if !vocabulary.contains(&token) {
            return Err(ParseFailure::WrongVocabulary { token, mode });
        }
        return Ok(Decision::model(token));
    }
    STANDALONE
        .captures_iter(text)
        .filter_map(|c| c[1].parse::<DecisionToken>().ok())
        .filter(|t| vocabulary.contains(t))
        .last()
        .map(Decision::model)
        .ok_or(ParseFailure::NoToken)
}

pub fn render_decision(token: DecisionToken) -> String {
    format!("DECISION: {token}")
}
