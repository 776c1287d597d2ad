use thiserror::Error;

use crate::game::{ActionId, Game};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("empty response {raw:?}")]
    Empty { raw: String },
    #[error("response {raw:?} mentions several actions ({})", .candidates.iter().collect::<String>())]
    Ambiguous { raw: String, candidates: Vec<char> },
    #[error("response {raw:?} names no action of this game")]
    NoMatch { raw: String },
}

impl ParseError {
    pub fn raw(&self) -> &str {
        match self {
            ParseError::Empty { raw } | ParseError::Ambiguous { raw, .. } | ParseError::NoMatch { raw } => raw,
        }
    }
}

fn is_wrapper(c: char) -> bool {
    c.is_whitespace() || matches!(c, '\'' | '"' | '`' | '.' | '\u{2018}' | '\u{2019}' | '\u{201c}' | '\u{201d}')
}

fn word_action(word: &str, game: &Game) -> Option<ActionId> {
    let mut chars = word.chars();
    if let (Some(c), None) = (chars.next(), chars.next()) {
        return game.lookup(c.to_ascii_uppercase()).ok();
    }
    game.action_ids().find(|&id| {
        let label = &game.action(id).label;
        word.eq_ignore_ascii_case(label)
            || label
                .strip_suffix('s')
                .is_some_and(|singular| singular.len() > 1 && word.eq_ignore_ascii_case(singular))
    })
}

/// Maps a raw model reply to an action.
///
/// Surrounding whitespace, quotes and periods are stripped, then the text is
/// matched case-insensitively against symbols and then labels. Failing an
/// exact match, every word is inspected; exactly one distinct action must be
/// mentioned.
pub fn parse_response(raw: &str, game: &Game) -> Result<ActionId, ParseError> {
    let core = raw.trim_matches(is_wrapper);
    if core.is_empty() {
        return Err(ParseError::Empty { raw: raw.to_string() });
    }
    if let Some(id) = word_action(core, game) {
        return Ok(id);
    }
    let mut found: Vec<ActionId> = Vec::new();
    for word in core.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()) {
        if let Some(id) = word_action(word, game) {
            if !found.contains(&id) {
                found.push(id);
            }
        }
    }
    match found.len() {
        1 => Ok(found[0]),
        0 => Err(ParseError::NoMatch { raw: raw.to_string() }),
        _ => Err(ParseError::Ambiguous {
            raw: raw.to_string(),
            candidates: found.iter().map(|&id| game.symbol(id)).collect(),
        }),
    }
}
