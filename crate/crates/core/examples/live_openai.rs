//! Live run against an OpenAI-compatible endpoint. Not run by the test suite.
//!
//!     PLAYBENCH_API_KEYS=sk-... cargo run --example live_openai -- gpt-4o-mini 10
//!
//! Keys come from `PLAYBENCH_API_KEYS` (comma separated) or from the file named
//! by `PLAYBENCH_SECRETS_FILE`. They are never written to transcripts.

use std::sync::Arc;

use playbench::analytics::distribution;
use playbench::config::{GatewaySettings, Mode};
use playbench::storage::write_container;
use playbench::{rock_paper_scissors, Clock, Experiment, ExperimentConfig, Gateway, ModelParams, PlayerSpec, Pooling, Seat};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let model = args.next().unwrap_or_else(|| "gpt-4o-mini".into());
    let n: u32 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(10);

    let settings = GatewaySettings::default();
    let keys = settings.load_keys(std::path::Path::new("."))?;
    let clock = Clock::from_env();
    let gateway = Arc::new(Gateway::http(settings.gateway_config(keys))?.with_clock(clock.clone()));

    let mut cfg = ExperimentConfig::new(
        "live-p1",
        rock_paper_scissors(),
        PlayerSpec::llm("p1_base", ModelParams::new(&model)),
        PlayerSpec::llm("p1_base", ModelParams::new(&model)),
        Mode::OneShot { simulations: n },
    );
    cfg.gateway = Some(settings);
    cfg.audit_prompts = true;
    let games = Experiment::builder(cfg).gateway(gateway).clock(clock).build()?.run_one_shot()?;

    let path = "live-p1.jsonl";
    write_container(path.as_ref(), "live-p1", &games)?;
    let stats = distribution(&games, Pooling::Player(Seat::First), &Default::default())?;
    for a in &stats.actions {
        println!("{}: {} ({:.0}%)", a.label, a.count, a.proportion * 100.0);
    }
    println!("aborted: {}  transcript: {path}", stats.excluded);
    Ok(())
}
