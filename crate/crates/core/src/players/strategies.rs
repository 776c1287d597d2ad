//! Shipped scripted baselines.

use rand::Rng;

use super::{symbol_param, DecisionContext, PlayerError, Strategy, StrategyParams};
use crate::game::{ActionId, Game};

/// Uniform over the whole alphabet.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformRandom;

impl Strategy for UniformRandom {
    fn decide(&self, _: &StrategyParams, ctx: &DecisionContext<'_>) -> Result<ActionId, PlayerError> {
        Ok(ActionId(ctx.rng().random_range(0..ctx.game.len())))
    }

    fn randomized(&self) -> bool {
        true
    }
}

/// Weighted categorical draw.
///
/// `weights` is a table keyed by symbol, e.g. `{ R = 0.5, P = 0.3, S = 0.2 }`.
/// Symbols left out get weight zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct FixedBias;

impl FixedBias {
    fn weights(params: &StrategyParams, game: &Game) -> Result<Vec<f64>, PlayerError> {
        let bad = |message: String| PlayerError::BadParams {
            strategy: "fixed_bias".into(),
            message,
        };
        let table = params
            .get("weights")
            .and_then(|v| v.as_object())
            .ok_or_else(|| bad("missing 'weights' table".into()))?;
        let mut w = vec![0.0; game.len()];
        for (sym, v) in table {
            let id = game.lookup_str(sym).map_err(|e| bad(e.to_string()))?;
            let x = v
                .as_f64()
                .filter(|x| x.is_finite() && *x >= 0.0)
                .ok_or_else(|| bad(format!("weight for '{sym}' must be a non-negative number")))?;
            w[id.0] = x;
        }
        if w.iter().sum::<f64>() <= 0.0 {
            return Err(bad("weights sum to zero".into()));
        }
        Ok(w)
    }
}

impl Strategy for FixedBias {
    fn decide(&self, params: &StrategyParams, ctx: &DecisionContext<'_>) -> Result<ActionId, PlayerError> {
        let w = Self::weights(params, ctx.game)?;
        let total: f64 = w.iter().sum();
        let mut x = ctx.rng().random::<f64>() * total;
        for (i, wi) in w.iter().enumerate() {
            if x < *wi {
                return Ok(ActionId(i));
            }
            x -= wi;
        }
        // Rounding can leave x marginally past the last bucket.
        Ok(ActionId(w.iter().rposition(|wi| *wi > 0.0).unwrap_or(0)))
    }

    fn validate(&self, params: &StrategyParams, game: &Game) -> Result<(), PlayerError> {
        Self::weights(params, game).map(|_| ())
    }

    fn randomized(&self) -> bool {
        true
    }
}

/// Constant play: either a fixed id (`always_<symbol>`) or the `action` parameter (`fixed`).
#[derive(Debug, Clone, Copy)]
pub struct AlwaysAction(Option<ActionId>);

impl AlwaysAction {
    pub fn fixed(action: ActionId) -> Self {
        AlwaysAction(Some(action))
    }

    pub fn from_params() -> Self {
        AlwaysAction(None)
    }

    fn action(&self, params: &StrategyParams, game: &Game) -> Result<ActionId, PlayerError> {
        match self.0 {
            Some(a) => Ok(a),
            None => symbol_param("fixed", params, "action", game)?.ok_or_else(|| PlayerError::BadParams {
                strategy: "fixed".into(),
                message: "missing 'action'".into(),
            }),
        }
    }
}

impl Strategy for AlwaysAction {
    fn decide(&self, params: &StrategyParams, ctx: &DecisionContext<'_>) -> Result<ActionId, PlayerError> {
        self.action(params, ctx.game)
    }

    fn validate(&self, params: &StrategyParams, game: &Game) -> Result<(), PlayerError> {
        self.action(params, game).map(|_| ())
    }
}

/// Steps through `sequence` (default: the alphabet in order) by round number.
#[derive(Debug, Clone, Copy, Default)]
pub struct Cycle;

impl Cycle {
    fn sequence(params: &StrategyParams, game: &Game) -> Result<Vec<ActionId>, PlayerError> {
        match params.get("sequence") {
            None => Ok(game.action_ids().collect()),
            Some(v) => {
                let bad = |message: String| PlayerError::BadParams {
                    strategy: "cycle".into(),
                    message,
                };
                let s = v.as_str().ok_or_else(|| bad("'sequence' must be a string of symbols".into()))?;
                let seq = s
                    .chars()
                    .filter(|c| !c.is_whitespace() && *c != ',')
                    .map(|c| game.lookup(c).map_err(|e| bad(e.to_string())))
                    .collect::<Result<Vec<_>, _>>()?;
                if seq.is_empty() {
                    return Err(bad("'sequence' is empty".into()));
                }
                Ok(seq)
            }
        }
    }
}

impl Strategy for Cycle {
    fn decide(&self, params: &StrategyParams, ctx: &DecisionContext<'_>) -> Result<ActionId, PlayerError> {
        let seq = Self::sequence(params, ctx.game)?;
        Ok(seq[(ctx.round as usize - 1) % seq.len()])
    }

    fn validate(&self, params: &StrategyParams, game: &Game) -> Result<(), PlayerError> {
        Self::sequence(params, game).map(|_| ())
    }
}

/// Opens with `open` (default: the first action, Cooperate in PD), then
/// copies the opponent's previous move.
#[derive(Debug, Clone, Copy, Default)]
pub struct TitForTat;

impl Strategy for TitForTat {
    fn decide(&self, params: &StrategyParams, ctx: &DecisionContext<'_>) -> Result<ActionId, PlayerError> {
        match ctx.opponent_last() {
            Some(a) => Ok(a),
            None => Ok(symbol_param("tit_for_tat", params, "open", ctx.game)?.unwrap_or(ActionId(0))),
        }
    }

    fn validate(&self, params: &StrategyParams, game: &Game) -> Result<(), PlayerError> {
        symbol_param("tit_for_tat", params, "open", game).map(|_| ())
    }
}

/// Plays `nice` (default first action) until the opponent has ever played
/// anything else, then `punish` (default last action) forever.
#[derive(Debug, Clone, Copy, Default)]
pub struct GrimTrigger;

impl GrimTrigger {
    fn actions(params: &StrategyParams, game: &Game) -> Result<(ActionId, ActionId), PlayerError> {
        let nice = symbol_param("grim_trigger", params, "nice", game)?.unwrap_or(ActionId(0));
        let punish = symbol_param("grim_trigger", params, "punish", game)?.unwrap_or(ActionId(game.len() - 1));
        Ok((nice, punish))
    }
}

impl Strategy for GrimTrigger {
    fn decide(&self, params: &StrategyParams, ctx: &DecisionContext<'_>) -> Result<ActionId, PlayerError> {
        let (nice, punish) = Self::actions(params, ctx.game)?;
        let nice_sym = ctx.game.symbol(nice);
        let other = ctx.seat.other();
        let triggered = ctx.history.iter().any(|r| r.moves[other] != nice_sym);
        Ok(if triggered { punish } else { nice })
    }

    fn validate(&self, params: &StrategyParams, game: &Game) -> Result<(), PlayerError> {
        Self::actions(params, game).map(|_| ())
    }
}

/// Best reply to the opponent's last move: the action maximizing own minus
/// opponent payoff against it (first in alphabet order on ties). Uniform in round 1.
#[derive(Debug, Clone, Copy, Default)]
pub struct CounterLast;

impl Strategy for CounterLast {
    fn decide(&self, params: &StrategyParams, ctx: &DecisionContext<'_>) -> Result<ActionId, PlayerError> {
        let Some(theirs) = ctx.opponent_last() else {
            return UniformRandom.decide(params, ctx);
        };
        let margin = |mine: ActionId| {
            let (own, opp) = ctx.own_payoff(mine, theirs);
            own.ratio() - opp.ratio()
        };
        let mut best = ActionId(0);
        for a in ctx.game.action_ids().skip(1) {
            if margin(a) > margin(best) {
                best = a;
            }
        }
        Ok(best)
    }

    fn randomized(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{prisoners_dilemma, rock_paper_scissors};
    use crate::transcript::{RoundRecord, Seat};
    use serde_json::json;

    fn ctx<'a>(game: &'a Game, history: &'a [RoundRecord], seat: Seat, seed: u64) -> DecisionContext<'a> {
        DecisionContext {
            game,
            seat,
            history,
            nonce: None,
            round: history.len() as u32 + 1,
            seed,
            ticket: 0,
        }
    }

    fn params(v: serde_json::Value) -> StrategyParams {
        serde_json::from_value(v).unwrap()
    }

    fn sym(game: &Game, a: ActionId) -> char {
        game.symbol(a)
    }

    #[test]
    fn uniform_is_deterministic_per_seed() {
        let g = rock_paper_scissors();
        let c = ctx(&g, &[], Seat::First, 42);
        let a = UniformRandom.decide(&StrategyParams::new(), &c).unwrap();
        let b = UniformRandom.decide(&StrategyParams::new(), &c).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tit_for_tat_opens_cooperative_then_copies() {
        let g = prisoners_dilemma();
        let none = StrategyParams::new();
        assert_eq!(sym(&g, TitForTat.decide(&none, &ctx(&g, &[], Seat::First, 0)).unwrap()), 'C');
        let h = vec![RoundRecord::scored(&g, 1, 'C', 'D').unwrap()];
        assert_eq!(sym(&g, TitForTat.decide(&none, &ctx(&g, &h, Seat::First, 0)).unwrap()), 'D');
        // Seat 2 copies seat 1.
        assert_eq!(sym(&g, TitForTat.decide(&none, &ctx(&g, &h, Seat::Second, 0)).unwrap()), 'C');
    }

    #[test]
    fn grim_never_forgives() {
        let g = prisoners_dilemma();
        let none = StrategyParams::new();
        let h = vec![
            RoundRecord::scored(&g, 1, 'C', 'D').unwrap(),
            RoundRecord::scored(&g, 2, 'D', 'C').unwrap(),
        ];
        assert_eq!(sym(&g, GrimTrigger.decide(&none, &ctx(&g, &h[..0], Seat::First, 0)).unwrap()), 'C');
        assert_eq!(sym(&g, GrimTrigger.decide(&none, &ctx(&g, &h, Seat::First, 0)).unwrap()), 'D');
    }

    #[test]
    fn counter_last_beats_previous_move() {
        let g = rock_paper_scissors();
        let none = StrategyParams::new();
        for (theirs, reply) in [('R', 'P'), ('P', 'S'), ('S', 'R')] {
            let h = vec![RoundRecord::scored(&g, 1, 'R', theirs).unwrap()];
            assert_eq!(sym(&g, CounterLast.decide(&none, &ctx(&g, &h, Seat::First, 0)).unwrap()), reply);
        }
        let pd = prisoners_dilemma();
        let h = vec![RoundRecord::scored(&pd, 1, 'C', 'C').unwrap()];
        assert_eq!(sym(&pd, CounterLast.decide(&none, &ctx(&pd, &h, Seat::Second, 0)).unwrap()), 'D');
    }

    #[test]
    fn cycle_and_fixed() {
        let g = rock_paper_scissors();
        let p = params(json!({"sequence": "SSR"}));
        let h: Vec<RoundRecord> = (1..=3).map(|i| RoundRecord::scored(&g, i, 'R', 'R').unwrap()).collect();
        let moves: String = (0..=3)
            .map(|k| sym(&g, Cycle.decide(&p, &ctx(&g, &h[..k], Seat::First, 0)).unwrap()))
            .collect();
        assert_eq!(moves, "SSRS");
        let fixed = AlwaysAction::from_params();
        assert!(fixed.validate(&StrategyParams::new(), &g).is_err());
        let p = params(json!({"action": "S"}));
        assert_eq!(sym(&g, fixed.decide(&p, &ctx(&g, &[], Seat::First, 0)).unwrap()), 'S');
    }

    #[test]
    fn fixed_bias_respects_zero_weights() {
        let g = rock_paper_scissors();
        let p = params(json!({"weights": {"R": 1.0, "S": 3.0}}));
        FixedBias.validate(&p, &g).unwrap();
        let mut counts = [0usize; 3];
        for seed in 0..4000 {
            counts[FixedBias.decide(&p, &ctx(&g, &[], Seat::First, seed)).unwrap().0] += 1;
        }
        assert_eq!(counts[1], 0);
        // Expected 1000 / 3000; 5 sigma is about 137.
        assert!((counts[0] as i64 - 1000).abs() < 140, "{counts:?}");
        assert!(FixedBias.validate(&params(json!({"weights": {"Q": 1.0}})), &g).is_err());
        assert!(FixedBias.validate(&params(json!({"weights": {"R": -1.0}})), &g).is_err());
        assert!(FixedBias.validate(&StrategyParams::new(), &g).is_err());
    }

    #[test]
    fn uniform_random_is_close_to_a_third() {
        // 100,000 draws; 99.99% binomial bound is about +-0.58pp.
        let g = rock_paper_scissors();
        let mut counts = [0u32; 3];
        let n = 100_000u64;
        for seed in 0..n {
            let s = crate::seeds::derive_seed(99, "Player_1", 0, seed as u32);
            counts[UniformRandom.decide(&StrategyParams::new(), &ctx(&g, &[], Seat::First, s)).unwrap().0] += 1;
        }
        for c in counts {
            let p = c as f64 / n as f64;
            assert!((p - 1.0 / 3.0).abs() < 0.01, "{counts:?}");
        }
    }

    proptest::proptest! {
        #[test]
        fn tit_for_tat_mirrors(opp in proptest::collection::vec(proptest::bool::ANY, 1..40)) {
            let g = prisoners_dilemma();
            let mut hist = Vec::new();
            for (i, d) in opp.iter().enumerate() {
                let mine = TitForTat.decide(&StrategyParams::new(), &ctx(&g, &hist, Seat::First, 0)).unwrap();
                if i > 0 {
                    proptest::prop_assert_eq!(g.symbol(mine), hist[i - 1].moves.second);
                }
                let theirs = if *d { 'D' } else { 'C' };
                hist.push(RoundRecord::scored(&g, i as u32 + 1, g.symbol(mine), theirs).unwrap());
            }
        }
    }
}
