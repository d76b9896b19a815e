use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The reasoning aspects the model is asked to cover, in prompt order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aspect {
    ValueAlignment,
    TimeContext,
    ActionChoiceAndConsequences,
    Rationale,
    PurposeReflection,
}

impl Aspect {
    pub const ALL: [Aspect; 5] = [
        Aspect::ValueAlignment,
        Aspect::TimeContext,
        Aspect::ActionChoiceAndConsequences,
        Aspect::Rationale,
        Aspect::PurposeReflection,
    ];

    pub fn heading(self) -> &'static str {
        match self {
            Aspect::ValueAlignment => "VALUE ALIGNMENT",
            Aspect::TimeContext => "TIME CONTEXT",
            Aspect::ActionChoiceAndConsequences => "ACTION CHOICE AND CONSEQUENCES",
            Aspect::Rationale => "RATIONALE",
            Aspect::PurposeReflection => "PURPOSE",
        }
    }

    pub fn guidance(self) -> &'static str {
        match self {
            Aspect::ValueAlignment => {
                "which household values are at stake, creating a safe and enjoyable environment for the house owners"
            }
            Aspect::TimeContext => "what the current time implies for the people at home",
            Aspect::ActionChoiceAndConsequences => "the available actions and the consequences of each",
            Aspect::Rationale => "why the preferred action is right in this situation",
            Aspect::PurposeReflection => "how the choice reflects your core purpose of cleaning",
        }
    }

    fn from_heading(heading: &str) -> Option<Aspect> {
        let upper = heading.to_ascii_uppercase();
        Aspect::ALL.into_iter().find(|a| a.heading() == upper)
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("reasoning output is missing sections: {missing:?}")]
pub struct MissingAspects {
    pub missing: Vec<Aspect>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningTrace {
    pub value_alignment: String,
    pub time_context: String,
    pub action_choice_and_consequences: String,
    pub rationale: String,
    pub purpose_reflection: String,
    /// full model output, verbatim
    pub raw_text: String,
}

static HEADING: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?im)^[\s#>*_\-\d.)]*(value alignment|time context|action choice and consequences|rationale|purpose)[\s*_]*:[\s*_]*",
    )
    .expect("valid regex")
});

impl ReasoningTrace {
    /// Splits model output on the aspect headings. A heading repeated later
    /// overrides the earlier section.
    pub fn parse(raw: &str) -> Result<Self, MissingAspects> {
        let marks: Vec<(Aspect, usize, usize)> = HEADING
            .captures_iter(raw)
            .filter_map(|c| {
                let whole = c.get(0)?;
                Some((Aspect::from_heading(c.get(1)?.as_str())?, whole.start(), whole.end()))
            })
            .collect();
        let mut sections: [Option<String>; 5] = Default::default();
        for (i, (aspect, _, body_start)) in marks.iter().enumerate() {
            let body_end = marks.get(i + 1).map_or(raw.len(), |m| m.1);
            let body = raw[*body_start..body_end].trim();
            if !body.is_empty() {
                sections[index(*aspect)] = Some(body.to_string());
            }
        }
        let missing: Vec<Aspect> = Aspect::ALL.into_iter().filter(|a| sections[index(*a)].is_none()).collect();
        if !missing.is_empty() {
            return Err(MissingAspects { missing });
        }
        let [value_alignment, time_context, action, rationale, purpose] = sections.map(Option::unwrap);
        Ok(Self {
            value_alignment,
            time_context,
            action_choice_and_consequences: action,
            rationale,
            purpose_reflection: purpose,
            raw_text: raw.to_string(),
        })
    }

    /// Builds a trace and its canonical raw text from section bodies.
    pub fn from_sections(sections: [&str; 5]) -> Self {
        let raw_text = Aspect::ALL
            .iter()
            .zip(sections)
            .map(|(a, body)| format!("{}: {body}", a.heading()))
            .collect::<Vec<_>>()
            .join("\n");
        let [value_alignment, time_context, action, rationale, purpose] = sections.map(str::to_string);
        Self {
            value_alignment,
            time_context,
            action_choice_and_consequences: action,
            rationale,
            purpose_reflection: purpose,
            raw_text,
        }
    }

    pub fn aspect(&self, aspect: Aspect) -> &str {
        match aspect {
            Aspect::ValueAlignment => &self.value_alignment,
            Aspect::TimeContext => &self.time_context,
            Aspect::ActionChoiceAndConsequences => &self.action_choice_and_consequences,
            Aspect::Rationale => &self.rationale,
            Aspect::PurposeReflection => &self.purpose_reflection,
        }
    }
}

fn index(aspect: Aspect) -> usize {
    Aspect::ALL.iter().position(|a| *a == aspect).expect("aspect listed")
}
