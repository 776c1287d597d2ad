//! An LLM seat driven by a scripted test double: prompts are rendered, replies
//! parsed and retried, and the whole exchange lands in the transcript.

use std::sync::Arc;

use playbench::config::Mode;
use playbench::gateway::{ApiKey, GatewayConfig, ResponseScript, ScriptEntry, ScriptedProvider};
use playbench::{rock_paper_scissors, Experiment, ExperimentConfig, Gateway, ModelParams, PlayerSpec, Seat};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let replies = ResponseScript::cycle(vec![
        ScriptEntry::text("Rock, obviously."),
        ScriptEntry::status(429),
        ScriptEntry::text("I'll go with P"),
        ScriptEntry::text("no idea"),
        ScriptEntry::text("S"),
    ]);
    let provider = Arc::new(ScriptedProvider::new(replies));
    let gateway = Arc::new(Gateway::new(GatewayConfig::new("test-double", vec![ApiKey::new("unused")]), provider.clone())?);

    let mut cfg = ExperimentConfig::new(
        "dry-run",
        rock_paper_scissors(),
        PlayerSpec::llm("p2_rock_first", ModelParams::new("test-double")),
        PlayerSpec::scripted("counter_last"),
        Mode::Repeated { rounds: 5 },
    )
    .with_seed(1);
    cfg.gateway = Some(Default::default());
    cfg.audit_prompts = true;
    let t = Experiment::builder(cfg).gateway(gateway).build()?.run_repeated()?;

    for r in &t.rounds {
        let raws = r.llm[&Seat::First].raw_responses();
        println!("round {}: {} vs {}  (raw: {raws:?})", r.round, r.moves.first, r.moves.second);
    }
    println!("provider calls: {}", provider.calls());
    if let Some(prompt) = t.rounds.last().and_then(|r| r.llm[&Seat::First].prompt.as_deref()) {
        println!("\nlast prompt:\n{prompt}");
    }
    Ok(())
}
