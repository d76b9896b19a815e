use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The three operating modes of the robot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Observation,
    Cleaning,
    Docking,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Observation, Mode::Cleaning, Mode::Docking];

    /// Tokens the reasoning pipeline may emit in this mode.
    pub fn vocabulary(self) -> &'static [DecisionToken] {
        match self {
            Mode::Observation => &[DecisionToken::Clean, DecisionToken::Wait, DecisionToken::Dock],
            Mode::Cleaning => &[DecisionToken::Continue, DecisionToken::Interrupt],
            Mode::Docking => &[],
        }
    }

    /// Tokens an operator may issue in this mode. DOCK is always allowed and
    /// a docked robot can be sent back out with the observation tokens.
    pub fn override_vocabulary(self) -> &'static [DecisionToken] {
        match self {
            Mode::Observation | Mode::Docking => {
                &[DecisionToken::Clean, DecisionToken::Wait, DecisionToken::Dock]
            }
            Mode::Cleaning => &[DecisionToken::Continue, DecisionToken::Interrupt, DecisionToken::Dock],
        }
    }

    /// Conservative action when the pipeline fails.
    pub fn safe_default(self) -> Option<DecisionToken> {
        match self {
            Mode::Observation => Some(DecisionToken::Wait),
            Mode::Cleaning => Some(DecisionToken::Interrupt),
            Mode::Docking => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Observation => "observation",
            Mode::Cleaning => "cleaning",
            Mode::Docking => "docking",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("unknown mode `{0}`")]
pub struct UnknownMode(pub String);

impl FromStr for Mode {
    type Err = UnknownMode;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "observation" => Ok(Mode::Observation),
            "cleaning" => Ok(Mode::Cleaning),
            "docking" => Ok(Mode::Docking),
            _ => Err(UnknownMode(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DecisionToken {
    Clean,
    Wait,
    Dock,
    Continue,
    Interrupt,
}

impl DecisionToken {
    pub const ALL: [DecisionToken; 5] = [
        DecisionToken::Clean,
        DecisionToken::Wait,
        DecisionToken::Dock,
        DecisionToken::Continue,
        DecisionToken::Interrupt,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DecisionToken::Clean => "CLEAN",
            DecisionToken::Wait => "WAIT",
            DecisionToken::Dock => "DOCK",
            DecisionToken::Continue => "CONTINUE",
            DecisionToken::Interrupt => "INTERRUPT",
        }
    }

    /// The mode whose model vocabulary contains this token.
    pub fn home_mode(self) -> Mode {
        match self {
            DecisionToken::Clean | DecisionToken::Wait | DecisionToken::Dock => Mode::Observation,
            DecisionToken::Continue | DecisionToken::Interrupt => Mode::Cleaning,
        }
    }
}

impl fmt::Display for DecisionToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("unknown decision token `{0}`")]
pub struct UnknownToken(pub String);

impl FromStr for DecisionToken {
    type Err = UnknownToken;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DecisionToken::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownToken(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionSource {
    Model,
    SafeDefault,
    OperatorOverride,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Decision {
    pub token: DecisionToken,
    pub source: DecisionSource,
}

impl Decision {
    pub fn model(token: DecisionToken) -> Self {
        Self {
            token,
            source: DecisionSource::Model,
        }
    }

    pub fn safe_default(mode: Mode) -> Option<Self> {
        mode.safe_default().map(|token| Self {
            token,
            source: DecisionSource::SafeDefault,
        })
    }

    pub fn operator(token: DecisionToken) -> Self {
        Self {
            token,
            source: DecisionSource::OperatorOverride,
        }
    }
}
