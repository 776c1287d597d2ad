//! A game defined in TOML, played by a custom strategy registered next to the
//! builtins.

use std::sync::Arc;

use playbench::config::{parse_game, Mode};
use playbench::players::{DecisionContext, PlayerError, StrategyParams};
use playbench::{ActionId, Experiment, ExperimentConfig, PlayerSpec, StrategyRegistry};

const STAG_HUNT: &str = r#"
schema_version = 1
name = "stag_hunt"
actions = [{ symbol = "S", label = "Stag" }, { symbol = "H", label = "Hare" }]
payoff = [[[4, 4], [0, 3]], [[3, 0], [3, 3]]]
report_ties = false
"#;

/// Hunts stag until betrayed once.
fn wary(_: &StrategyParams, ctx: &DecisionContext<'_>) -> Result<ActionId, PlayerError> {
    let other = ctx.seat.other();
    let betrayed = ctx.history.iter().any(|r| r.moves[other] == 'H');
    ctx.game.lookup(if betrayed { 'H' } else { 'S' }).map_err(|e| PlayerError::Failed {
        strategy: "wary".into(),
        message: e.to_string(),
    })
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let game = parse_game(STAG_HUNT, "stag_hunt.toml")?;
    let opponents = [
        ("always_stag", PlayerSpec::scripted("always_stag")),
        ("cycle SSH", PlayerSpec::scripted_with("cycle", [("sequence".to_string(), serde_json::json!("SSH"))].into())),
        ("always_H", PlayerSpec::scripted("always_H")),
    ];
    for (opponent, p2) in opponents {
        let mut registry = StrategyRegistry::with_builtins();
        registry.register("wary", Arc::new(wary))?;
        let cfg = ExperimentConfig::new("stag", game.clone(), PlayerSpec::scripted("wary"), p2, Mode::Repeated { rounds: 12 });
        let t = Experiment::builder(cfg).registry(registry).build()?.run_repeated()?;
        let moves: String = t.rounds.iter().map(|r| r.moves.first).collect();
        let totals = t.totals();
        println!("wary vs {opponent:<12} {moves}  {} - {}", totals.first, totals.second);
    }
    Ok(())
}
