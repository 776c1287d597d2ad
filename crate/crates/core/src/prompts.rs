//! Prompt templates, rendering and history serialization.
//!
//! Template files look like
//!
//! ```text
//! template_id: p1_base
//! game_name: rps
//! sha256: <hex digest of the body bytes>
//! ---
//! <body>
//! ```
//!
//! The body is everything after the `---` line minus one trailing newline.
//! A body may contain one `{history}` and one `{nonce}` slot; when a slot is
//! absent the corresponding block is appended after a blank line:
//!
//! * one-shot: `session: <nonce>`
//! * repeated: `Game history: (none)` or `Game history:` followed by one
//!   [`serialize_history`] line per round.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::players::DecisionContext;
use crate::transcript::RoundRecord;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("unknown template '{0}'")]
    UnknownTemplate(String),
    #[error("template '{id}' is for game '{expected}', not '{actual}'")]
    GameMismatch { id: String, expected: String, actual: String },
    #[error("template '{id}': {message}")]
    Placeholder { id: String, message: String },
    #[error("template '{id}' failed its integrity check (expected sha256 {expected}, found {actual})")]
    Integrity { id: String, expected: String, actual: String },
    #[error("malformed template file {path}: {message}")]
    Malformed { path: String, message: String },
    #[error("history rounds must be contiguous from 1; found round {found} at position {expected}")]
    HistoryGap { expected: u32, found: u32 },
    #[error("template '{0}' is already in the catalog")]
    Duplicate(String),
    #[error("{0}")]
    Io(String),
}

/// Content hashes of the shipped templates; a shipped id whose body differs is rejected.
pub const SHIPPED: [(&str, &str); 10] = [
    ("p1_base", "758f43ad906b5bf4453bd63519d7798d7f7b46757bddfdf057ffb582712e16e0"),
    ("p2_rock_first", "ec7556e93619f606bdec0e639ddca273d10dfd6a67276c641a4718dfdd303a7b"),
    ("p2_paper_first", "fbb207865a1dcde1f62510f151eecfca81d688134d6c77c6a4dcff3858ffe90b"),
    ("p2_scissors_first", "b74ad97b2692035b1cd260b1b0f1ab699a30fc0bfe7ce893e695997e11a2fb8a"),
    ("p3a_classic", "ca056411d95bc35c238f8e11655a7383beffe81b9f8e621eb35665e900e9b22e"),
    ("p3b_random", "5e5905799e21048858a2d2f2fee57fcc636f31d6c108a5805406448bb5bcc1e5"),
    ("p3c_optimal", "42dd929ef20456194cc187ab63a350622f0433c47eb05d6517390c7eceddfed9"),
    ("p4_clear_points", "cadae2feeb402f774f6c6e35cc07a75bf03c2c5d645eda934109047318ca14ed"),
    ("pd1_base", "221a47f17cb0f708c04c5a15618fb77fb4636fd4823a5b72d8f3434c4676af24"),
    ("pd2_express", "17ab1b7d1f634da654a469e3087ae19aec981165f69f0cf23faa80b01b1dc029"),
];

const SHIPPED_FILES: [(&str, &str); 10] = [
    ("p1_base", include_str!("../templates/p1_base.prompt")),
    ("p2_rock_first", include_str!("../templates/p2_rock_first.prompt")),
    ("p2_paper_first", include_str!("../templates/p2_paper_first.prompt")),
    ("p2_scissors_first", include_str!("../templates/p2_scissors_first.prompt")),
    ("p3a_classic", include_str!("../templates/p3a_classic.prompt")),
    ("p3b_random", include_str!("../templates/p3b_random.prompt")),
    ("p3c_optimal", include_str!("../templates/p3c_optimal.prompt")),
    ("p4_clear_points", include_str!("../templates/p4_clear_points.prompt")),
    ("pd1_base", include_str!("../templates/pd1_base.prompt")),
    ("pd2_express", include_str!("../templates/pd2_express.prompt")),
];

pub const NONCE_LABEL: &str = "session: ";
pub const HISTORY_LABEL: &str = "Game history:";
pub const EMPTY_HISTORY: &str = "Game history: (none)";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub template_id: String,
    pub game_name: String,
    pub body: String,
    pub sha256: String,
}

pub fn content_hash(body: &str) -> String {
    hex::encode(Sha256::digest(body.as_bytes()))
}

impl PromptTemplate {
    pub fn new(template_id: &str, game_name: &str, body: &str) -> Result<Self, PromptError> {
        for slot in ["{history}", "{nonce}"] {
            if body.matches(slot).count() > 1 {
                return Err(PromptError::Placeholder {
                    id: template_id.to_string(),
                    message: format!("{slot} appears more than once"),
                });
            }
        }
        Ok(PromptTemplate {
            template_id: template_id.to_string(),
            game_name: game_name.to_string(),
            body: body.to_string(),
            sha256: content_hash(body),
        })
    }

    /// Parses the on-disk form, checking the declared hash against the body.
    pub fn parse(text: &str, origin: &str) -> Result<Self, PromptError> {
        let malformed = |message: &str| PromptError::Malformed {
            path: origin.to_string(),
            message: message.to_string(),
        };
        let (head, body) = text
            .split_once("\n---\n")
            .ok_or_else(|| malformed("missing '---' separator"))?;
        let body = body.strip_suffix('\n').unwrap_or(body);
        let mut fields = BTreeMap::new();
        for line in head.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once(':')
                .ok_or_else(|| malformed("header lines must be 'key: value'"))?;
            fields.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| fields.get(k).cloned().ok_or_else(|| malformed(&format!("missing '{k}'")));
        let template = PromptTemplate::new(&get("template_id")?, &get("game_name")?, body)?;
        let declared = get("sha256")?;
        if declared != template.sha256 {
            return Err(PromptError::Integrity {
                id: template.template_id,
                expected: declared,
                actual: template.sha256,
            });
        }
        Ok(template)
    }

    /// The on-disk form, inverse of [`PromptTemplate::parse`].
    pub fn to_file_text(&self) -> String {
        format!(
            "template_id: {}\ngame_name: {}\nsha256: {}\n---\n{}\n",
            self.template_id, self.game_name, self.sha256, self.body
        )
    }

    pub fn render(&self, ctx: &DecisionContext<'_>) -> Result<String, PromptError> {
        render(self, ctx)
    }
}

/// Immutable set of templates keyed by id.
#[derive(Debug, Clone)]
pub struct PromptCatalog {
    templates: BTreeMap<String, Arc<PromptTemplate>>,
}

impl Default for PromptCatalog {
    fn default() -> Self {
        Self::shipped()
    }
}

impl PromptCatalog {
    /// The ten shipped templates.
    pub fn shipped() -> Self {
        let mut c = PromptCatalog {
            templates: BTreeMap::new(),
        };
        for (id, text) in SHIPPED_FILES {
            let t = PromptTemplate::parse(text, id).expect("shipped template parses");
            c.insert(t).expect("shipped templates pass their integrity check");
        }
        c
    }

    pub fn insert(&mut self, template: PromptTemplate) -> Result<(), PromptError> {
        if let Some((_, frozen)) = SHIPPED.iter().find(|(id, _)| *id == template.template_id) {
            if *frozen != template.sha256 {
                return Err(PromptError::Integrity {
                    id: template.template_id.clone(),
                    expected: frozen.to_string(),
                    actual: template.sha256.clone(),
                });
            }
        }
        if let Some(existing) = self.templates.get(&template.template_id) {
            if **existing == template {
                return Ok(());
            }
            return Err(PromptError::Duplicate(template.template_id));
        }
        self.templates.insert(template.template_id.clone(), Arc::new(template));
        Ok(())
    }

    /// Adds every `*.prompt` file in `dir`.
    pub fn load_dir(&mut self, dir: &Path) -> Result<usize, PromptError> {
        let io = |e: std::io::Error| PromptError::Io(format!("{}: {e}", dir.display()));
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "prompt"))
            .collect();
        paths.sort();
        for p in &paths {
            let text = std::fs::read_to_string(p).map_err(io)?;
            self.insert(PromptTemplate::parse(&text, &p.display().to_string())?)?;
        }
        Ok(paths.len())
    }

    pub fn get(&self, id: &str) -> Result<Arc<PromptTemplate>, PromptError> {
        self.templates
            .get(id)
            .cloned()
            .ok_or_else(|| PromptError::UnknownTemplate(id.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }
}

/// One line per round:
/// `{'round': 1, 'moves': {'Player_1': 'R', 'Player_2': 'R'}, 'payoffs': {'Player_1': 0, 'Player_2': 0}}`
pub fn serialize_history(rounds: &[RoundRecord]) -> Result<String, PromptError> {
    let mut lines = Vec::with_capacity(rounds.len());
    for (i, r) in rounds.iter().enumerate() {
        let expected = i as u32 + 1;
        if r.round != expected {
            return Err(PromptError::HistoryGap {
                expected,
                found: r.round,
            });
        }
        lines.push(format!(
            "{{'round': {}, 'moves': {{'Player_1': '{}', 'Player_2': '{}'}}, 'payoffs': {{'Player_1': {}, 'Player_2': {}}}}}",
            r.round, r.moves.first, r.moves.second, r.payoffs.first, r.payoffs.second
        ));
    }
    Ok(lines.join("\n"))
}

/// The block appended to repeated-game prompts.
pub fn history_block(rounds: &[RoundRecord]) -> Result<String, PromptError> {
    if rounds.is_empty() {
        Ok(EMPTY_HISTORY.to_string())
    } else {
        Ok(format!("{HISTORY_LABEL}\n{}", serialize_history(rounds)?))
    }
}

pub fn render(template: &PromptTemplate, ctx: &DecisionContext<'_>) -> Result<String, PromptError> {
    if template.game_name != ctx.game.name() {
        return Err(PromptError::GameMismatch {
            id: template.template_id.clone(),
            expected: template.game_name.clone(),
            actual: ctx.game.name().to_string(),
        });
    }
    let slot_error = |message: &str| PromptError::Placeholder {
        id: template.template_id.clone(),
        message: message.to_string(),
    };
    let body = &template.body;
    match ctx.nonce {
        Some(nonce) => {
            if body.contains("{history}") {
                return Err(slot_error("{history} slot cannot be filled in a one-shot game"));
            }
            if !ctx.history.is_empty() {
                return Err(slot_error("one-shot context carries history"));
            }
            let line = format!("{NONCE_LABEL}{nonce}");
            Ok(if body.contains("{nonce}") {
                body.replace("{nonce}", &line)
            } else {
                format!("{body}\n\n{line}")
            })
        }
        None => {
            if body.contains("{nonce}") {
                return Err(slot_error("{nonce} slot needs a one-shot context"));
            }
            let block = history_block(ctx.history)?;
            Ok(if body.contains("{history}") {
                body.replace("{history}", &block)
            } else {
                format!("{body}\n\n{block}")
            })
        }
    }
}

/// 128-bit random token (122 random bits, UUIDv4) in lowercase hex.
pub fn make_nonce() -> String {
    uuid::Uuid::new_v4().simple().to_string()
}
