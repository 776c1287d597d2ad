//! Player specifications, the decision context, and the strategy registry.
//!
//! A player is either a scripted [`Strategy`] looked up by id in a
//! [`StrategyRegistry`], or an LLM-backed player that renders a prompt and
//! parses the model's reply (see [`llm`]).

pub mod llm;
mod parse;
mod strategies;

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{ActionId, Game, Points};
use crate::transcript::{LlmTrace, RoundRecord, Seat};

pub use llm::{LlmPlayer, ModelParams};
pub use parse::{parse_response, ParseError};
pub use strategies::{
    AlwaysAction, CounterLast, Cycle, FixedBias, GrimTrigger, TitForTat, UniformRandom,
};

/// Free-form strategy parameters as written in config files.
pub type StrategyParams = BTreeMap<String, serde_json::Value>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlayerError {
    #[error("unknown strategy '{0}'")]
    UnknownStrategy(String),
    #[error("strategy '{0}' is already registered")]
    DuplicateStrategy(String),
    #[error("strategy '{strategy}': {message}")]
    BadParams { strategy: String, message: String },
    #[error("strategy '{strategy}' failed: {message}")]
    Failed { strategy: String, message: String },
}

/// What a player is, as written in an experiment config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlayerSpec {
    Scripted {
        strategy: String,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        params: StrategyParams,
    },
    Llm {
        template: String,
        #[serde(flatten)]
        model: ModelParams,
    },
}

impl PlayerSpec {
    pub fn scripted(strategy: &str) -> Self {
        PlayerSpec::Scripted {
            strategy: strategy.to_string(),
            params: StrategyParams::new(),
        }
    }

    pub fn scripted_with(strategy: &str, params: StrategyParams) -> Self {
        PlayerSpec::Scripted {
            strategy: strategy.to_string(),
            params,
        }
    }

    pub fn llm(template: &str, model: ModelParams) -> Self {
        PlayerSpec::Llm {
            template: template.to_string(),
            model,
        }
    }

    pub fn is_llm(&self) -> bool {
        matches!(self, PlayerSpec::Llm { .. })
    }

    /// The explicit `seed` parameter of a scripted player, if any.
    pub fn own_seed(&self) -> Option<u64> {
        match self {
            PlayerSpec::Scripted { params, .. } => params.get("seed").and_then(|v| v.as_u64()),
            PlayerSpec::Llm { .. } => None,
        }
    }
}

/// Everything a player may look at when choosing a move.
#[derive(Debug, Clone, Copy)]
pub struct DecisionContext<'a> {
    pub game: &'a Game,
    pub seat: Seat,
    /// Rounds `1..round`, empty for one-shot games.
    pub history: &'a [RoundRecord],
    /// Cache-busting token; present only in one-shot mode.
    pub nonce: Option<&'a str>,
    /// 1-based.
    pub round: u32,
    /// Seed for this single decision, derived by the engine.
    pub seed: u64,
    /// Gateway simulation ticket used for per-simulation key rotation.
    pub ticket: u64,
}

impl<'a> DecisionContext<'a> {
    /// A fresh generator for this decision; identical contexts give identical streams.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    pub fn self_name(&self) -> &'static str {
        self.seat.name()
    }

    /// The opponent's move in the previous round.
    pub fn opponent_last(&self) -> Option<ActionId> {
        let last = self.history.last()?;
        self.game.lookup(last.moves[self.seat.other()]).ok()
    }

    /// Points this seat scores for playing `mine` against `theirs`.
    pub fn own_payoff(&self, mine: ActionId, theirs: ActionId) -> (Points, Points) {
        let (a, b) = match self.seat {
            Seat::First => self.game.evaluate(mine, theirs),
            Seat::Second => self.game.evaluate(theirs, mine).map(|(x, y)| (y, x)),
        }
        .expect("ids come from the same game");
        (a, b)
    }
}

/// A scripted decision rule.
///
/// Implementations must be pure functions of `(params, ctx)`: any per-game
/// state has to be recoverable from `ctx.history`.
pub trait Strategy: Send + Sync {
    fn decide(&self, params: &StrategyParams, ctx: &DecisionContext<'_>) -> Result<ActionId, PlayerError>;

    fn validate(&self, _params: &StrategyParams, _game: &Game) -> Result<(), PlayerError> {
        Ok(())
    }

    /// Whether the strategy draws from `ctx.rng()` and so needs a seed.
    fn randomized(&self) -> bool {
        false
    }
}

impl<F> Strategy for F
where
    F: Fn(&StrategyParams, &DecisionContext<'_>) -> Result<ActionId, PlayerError> + Send + Sync,
{
    fn decide(&self, params: &StrategyParams, ctx: &DecisionContext<'_>) -> Result<ActionId, PlayerError> {
        self(params, ctx)
    }
}

#[derive(Clone)]
pub struct StrategyRegistry {
    entries: HashMap<String, Arc<dyn Strategy>>,
}

impl std::fmt::Debug for StrategyRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut ids: Vec<_> = self.entries.keys().collect();
        ids.sort();
        f.debug_struct("StrategyRegistry").field("ids", &ids).finish()
    }
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        StrategyRegistry {
            entries: HashMap::new(),
        }
    }

    /// Registry holding the shipped baselines. `always_<symbol>` and
    /// `always_<label>` ids (`always_D`, `always_defect`) are resolved on
    /// demand against the game's alphabet.
    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        let builtins: [(&str, Arc<dyn Strategy>); 8] = [
            ("uniform_random", Arc::new(UniformRandom)),
            ("fixed_bias", Arc::new(FixedBias)),
            ("fixed", Arc::new(AlwaysAction::from_params())),
            ("cycle", Arc::new(Cycle)),
            ("tit_for_tat", Arc::new(TitForTat)),
            ("grim_trigger", Arc::new(GrimTrigger)),
            ("grim", Arc::new(GrimTrigger)),
            ("counter_last", Arc::new(CounterLast)),
        ];
        for (id, s) in builtins {
            r.entries.insert(id.to_string(), s);
        }
        r
    }

    pub fn register(&mut self, id: &str, strategy: Arc<dyn Strategy>) -> Result<(), PlayerError> {
        if self.entries.contains_key(id) || id.starts_with("always_") {
            return Err(PlayerError::DuplicateStrategy(id.to_string()));
        }
        self.entries.insert(id.to_string(), strategy);
        Ok(())
    }

    pub fn resolve(&self, id: &str, game: &Game) -> Result<Arc<dyn Strategy>, PlayerError> {
        if let Some(s) = self.entries.get(id) {
            return Ok(s.clone());
        }
        if let Some(sym) = id.strip_prefix("always_") {
            let by_label = || game.action_ids().find(|&a| game.action(a).label.eq_ignore_ascii_case(sym));
            if let Some(action) = game.lookup_str(sym).ok().or_else(by_label) {
                return Ok(Arc::new(AlwaysAction::fixed(action)));
            }
        }
        Err(PlayerError::UnknownStrategy(id.to_string()))
    }

    pub fn contains(&self, id: &str, game: &Game) -> bool {
        self.resolve(id, game).is_ok()
    }
}

/// The outcome of one decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub action: ActionId,
    pub trace: Option<LlmTrace>,
}

/// A decision that could not be made; the engine aborts the game with it.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{seat} could not decide: {reason}")]
pub struct DecisionError {
    pub seat: Seat,
    pub reason: String,
    /// Every raw model response received while trying, verbatim.
    pub raw_responses: Vec<String>,
}

/// A resolved, ready-to-play participant.
#[derive(Clone)]
pub enum Player {
    Scripted {
        id: String,
        strategy: Arc<dyn Strategy>,
        params: StrategyParams,
    },
    Llm(LlmPlayer),
}

impl std::fmt::Debug for Player {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Player::Scripted { id, params, .. } => f
                .debug_struct("Scripted")
                .field("id", id)
                .field("params", params)
                .finish(),
            Player::Llm(p) => p.fmt(f),
        }
    }
}

impl Player {
    pub fn scripted(registry: &StrategyRegistry, id: &str, params: StrategyParams, game: &Game) -> Result<Self, PlayerError> {
        let strategy = registry.resolve(id, game)?;
        strategy.validate(&params, game)?;
        Ok(Player::Scripted {
            id: id.to_string(),
            strategy,
            params,
        })
    }

    pub fn is_llm(&self) -> bool {
        matches!(self, Player::Llm(_))
    }

    pub fn decide(&self, ctx: &DecisionContext<'_>) -> Result<Decision, DecisionError> {
        match self {
            Player::Scripted { strategy, params, .. } => {
                let action = strategy.decide(params, ctx).map_err(|e| DecisionError {
                    seat: ctx.seat,
                    reason: e.to_string(),
                    raw_responses: Vec::new(),
                })?;
                if action.0 >= ctx.game.len() {
                    return Err(DecisionError {
                        seat: ctx.seat,
                        reason: format!("strategy returned action #{} outside the game", action.0),
                        raw_responses: Vec::new(),
                    });
                }
                Ok(Decision { action, trace: None })
            }
            Player::Llm(p) => p.decide(ctx),
        }
    }
}

/// Reads a symbol-valued parameter.
pub(crate) fn symbol_param(
    strategy: &str,
    params: &StrategyParams,
    key: &str,
    game: &Game,
) -> Result<Option<ActionId>, PlayerError> {
    let Some(v) = params.get(key) else {
        return Ok(None);
    };
    let bad = |message: String| PlayerError::BadParams {
        strategy: strategy.to_string(),
        message,
    };
    let s = v
        .as_str()
        .ok_or_else(|| bad(format!("'{key}' must be an action symbol")))?;
    game.lookup_str(s).map(Some).map_err(|e| bad(e.to_string()))
}
