//! In-memory transcript model: seats, rounds, headers and termination.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentSnapshot;
use crate::game::{Game, GameError, Points};

/// Current transcript schema major version.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Seat {
    #[serde(rename = "Player_1")]
    First,
    #[serde(rename = "Player_2")]
    Second,
}

impl Seat {
    pub const BOTH: [Seat; 2] = [Seat::First, Seat::Second];

    pub fn name(self) -> &'static str {
        match self {
            Seat::First => "Player_1",
            Seat::Second => "Player_2",
        }
    }

    pub fn other(self) -> Seat {
        match self {
            Seat::First => Seat::Second,
            Seat::Second => Seat::First,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Seat::First => 0,
            Seat::Second => 1,
        }
    }
}

impl fmt::Display for Seat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A value for each of the two seats, serialized as `{"Player_1": .., "Player_2": ..}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct PerSeat<T> {
    #[serde(rename = "Player_1")]
    pub first: T,
    #[serde(rename = "Player_2")]
    pub second: T,
}

impl<T> PerSeat<T> {
    pub fn new(first: T, second: T) -> Self {
        PerSeat { first, second }
    }

    pub fn get(&self, seat: Seat) -> &T {
        match seat {
            Seat::First => &self.first,
            Seat::Second => &self.second,
        }
    }

    pub fn get_mut(&mut self, seat: Seat) -> &mut T {
        match seat {
            Seat::First => &mut self.first,
            Seat::Second => &mut self.second,
        }
    }
}

impl<T> std::ops::Index<Seat> for PerSeat<T> {
    type Output = T;
    fn index(&self, seat: Seat) -> &T {
        self.get(seat)
    }
}

/// One model call as recorded in a transcript. Never carries key material.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeRecord {
    /// Provider response text, verbatim.
    pub raw: String,
    /// Transport-level attempts this call needed.
    pub attempts: u32,
    pub key_index: usize,
    pub latency_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requested_at: Option<String>,
}

/// Everything an LLM-backed player did to produce one move.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmTrace {
    /// Rendered prompt, present only when prompt auditing is enabled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    pub exchanges: Vec<ExchangeRecord>,
}

impl LlmTrace {
    pub fn raw_responses(&self) -> Vec<String> {
        self.exchanges.iter().map(|e| e.raw.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    pub moves: PerSeat<char>,
    pub payoffs: PerSeat<Points>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub llm: BTreeMap<Seat, LlmTrace>,
}

impl RoundRecord {
    /// Builds a record with payoffs taken from the game's table.
    pub fn scored(game: &Game, round: u32, first: char, second: char) -> Result<Self, GameError> {
        let (a, b) = game.evaluate_symbols(first, second)?;
        Ok(RoundRecord {
            round,
            moves: PerSeat::new(first, second),
            payoffs: PerSeat::new(a, b),
            llm: BTreeMap::new(),
        })
    }

    /// The seat whose payoff strictly exceeds the other's, if any.
    pub fn winner(&self) -> Option<Seat> {
        use std::cmp::Ordering::*;
        match self.payoffs.first.cmp(&self.payoffs.second) {
            Greater => Some(Seat::First),
            Less => Some(Seat::Second),
            Equal => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub schema_version: u32,
    pub experiment_id: String,
    pub config: ExperimentSnapshot,
    /// Template id to content hash, for every LLM player's template.
    #[serde(default)]
    pub templates: BTreeMap<String, String>,
    pub code_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_at: Option<String>,
    pub message_shape: String,
    pub rng: String,
    /// 1-based simulation index; set on one-shot games.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    Aborted {
        reason: String,
        /// Round at which the failure happened; earlier rounds are intact.
        round: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seat: Option<Seat>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        raw_responses: Vec<String>,
    },
}

impl Termination {
    pub fn is_completed(&self) -> bool {
        matches!(self, Termination::Completed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub header: Header,
    pub rounds: Vec<RoundRecord>,
    pub termination: Termination,
}

impl Transcript {
    pub fn game(&self) -> &Game {
        &self.header.config.game
    }

    pub fn is_completed(&self) -> bool {
        self.termination.is_completed()
    }

    pub fn totals(&self) -> PerSeat<Points> {
        let mut t = PerSeat::new(Points::ZERO, Points::ZERO);
        for r in &self.rounds {
            t.first += r.payoffs.first;
            t.second += r.payoffs.second;
        }
        t
    }
}
