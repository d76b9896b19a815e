use std::sync::LazyLock;

use regex::Regex;

pub const SUMMARY_MAX_CHARS: usize = 600;

static GRAMMAR_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\**\bdecision[\s*_`]*:[\s*_`]*(clean|wait|dock|continue|interrupt)\b[\s*_`.]*").expect("valid regex")
});

/// Normalizes model output to one paragraph without decision lines.
pub fn clean_summary(text: &str) -> String {
    let stripped = GRAMMAR_LINE.replace_all(text, " ");
    stripped.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Cuts `text` to at most `max` characters, preferring the end of the last
/// complete sentence, then a word boundary with an ellipsis.
pub fn truncate_at_sentence(text: &str, max: usize) -> String {
    if char_len(text) <= max {
        return text.to_string();
    }
    let prefix: String = text.chars().take(max).collect();
    let sentence_end = prefix
        .char_indices()
        .filter(|(i, c)| {
            matches!(c, '.' | '!' | '?') && prefix[i + c.len_utf8()..].chars().next().is_none_or(char::is_whitespace)
        })
        .map(|(i, c)| i + c.len_utf8())
        .last();
    if let Some(end) = sentence_end.filter(|end| *end > 0) {
        return prefix[..end].to_string();
    }
    let shorter: String = prefix.chars().take(max.saturating_sub(1)).collect();
    let cut = shorter.rfind(char::is_whitespace).unwrap_or(shorter.len());
    format!("{}…", shorter[..cut].trim_end())
}
