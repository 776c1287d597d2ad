//! Integrity audit: re-derives every payoff from the recorded moves and,
//! where prompts were audited, every embedded history block.

use std::fmt;

use serde::Serialize;

use crate::prompts::{history_block, HISTORY_LABEL, NONCE_LABEL};
use crate::transcript::{Seat, Transcript};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MismatchKind {
    Payoff,
    Move,
    RoundIndex,
    History,
    Nonce,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Mismatch {
    /// 1-based simulation index for one-shot containers.
    pub simulation: Option<u32>,
    pub round: u32,
    pub kind: MismatchKind,
    pub detail: String,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(s) = self.simulation {
            write!(f, "simulation {s} ")?;
        }
        write!(f, "round {}: {}", self.round, self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ReplayReport {
    pub games: usize,
    pub rounds: usize,
    pub prompts_checked: usize,
    pub mismatches: Vec<Mismatch>,
}

impl ReplayReport {
    pub fn is_clean(&self) -> bool {
        self.mismatches.is_empty()
    }

    /// Round indices with at least one mismatch, in file order.
    pub fn rounds_with_mismatch(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.mismatches.iter().map(|m| m.round).collect();
        v.dedup();
        v
    }
}

pub fn replay(transcripts: &[Transcript]) -> ReplayReport {
    let mut report = ReplayReport::default();
    for t in transcripts {
        replay_one(t, &mut report);
    }
    report
}

fn replay_one(t: &Transcript, report: &mut ReplayReport) {
    report.games += 1;
    let game = t.game();
    let sim = t.header.simulation;
    let one_shot = t.header.config.mode.is_one_shot();
    let mut push = |round: u32, kind: MismatchKind, detail: String| {
        report.mismatches.push(Mismatch {
            simulation: sim,
            round,
            kind,
            detail,
        })
    };
    for (i, r) in t.rounds.iter().enumerate() {
        let expected_round = i as u32 + 1;
        if r.round != expected_round {
            push(r.round, MismatchKind::RoundIndex, format!("expected round index {expected_round}"));
        }
        match game.evaluate_symbols(r.moves.first, r.moves.second) {
            Ok((a, b)) => {
                if (a, b) != (r.payoffs.first, r.payoffs.second) {
                    push(
                        r.round,
                        MismatchKind::Payoff,
                        format!(
                            "recorded payoffs ({}, {}) but ({}, {}) gives ({a}, {b})",
                            r.payoffs.first, r.payoffs.second, r.moves.first, r.moves.second
                        ),
                    );
                }
            }
            Err(e) => push(r.round, MismatchKind::Move, e.to_string()),
        }
        for seat in Seat::BOTH {
            let Some(prompt) = r.llm.get(&seat).and_then(|tr| tr.prompt.as_deref()) else { continue };
            let history = &t.rounds[..i];
            if one_shot {
                let tail = prompt.rsplit("\n\n").next().unwrap_or("");
                if !tail.starts_with(NONCE_LABEL) {
                    push(r.round, MismatchKind::Nonce, format!("{seat} prompt lacks a trailing nonce line"));
                }
                if prompt.contains(HISTORY_LABEL) {
                    push(r.round, MismatchKind::History, format!("{seat} one-shot prompt carries history"));
                }
            } else {
                let ok = history_block(history).map(|b| embeds(prompt, &b)).unwrap_or(false);
                if !ok {
                    push(
                        r.round,
                        MismatchKind::History,
                        format!("{seat} prompt does not embed the history of rounds 1..{}", r.round.saturating_sub(1)),
                    );
                }
            }
            report.prompts_checked += 1;
        }
        report.rounds += 1;
    }
}

/// The block appears and is not followed by a further history line.
fn embeds(prompt: &str, block: &str) -> bool {
    prompt
        .match_indices(block)
        .any(|(at, _)| !prompt[at + block.len()..].starts_with("\n{'round'"))
}
