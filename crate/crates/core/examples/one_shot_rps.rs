//! Scripted one-shot Rock-Paper-Scissors, summarized against the uniform range.
//!
//!     cargo run --example one_shot_rps -- 500

use playbench::analytics::distribution;
use playbench::config::Mode;
use playbench::storage::{render_table, ReportBlock, ReportDocument, TableKind};
use playbench::{rock_paper_scissors, Clock, Experiment, ExperimentConfig, PlayerSpec, Pooling, UniformTestConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: u32 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(100);
    let rock_heavy = PlayerSpec::scripted_with(
        "fixed_bias",
        [("weights".to_string(), serde_json::json!({"R": 0.6, "P": 0.2, "S": 0.2}))].into(),
    );
    let rows = [("uniform", PlayerSpec::scripted("uniform_random")), ("rock-heavy", rock_heavy)];

    let mut doc = ReportDocument::new("one-shot-rps", &Clock::from_env());
    for (label, p1) in rows {
        let mode = Mode::OneShot { simulations: n };
        let cfg = ExperimentConfig::new(label, rock_paper_scissors(), p1, PlayerSpec::scripted("uniform_random"), mode)
            .with_seed(42);
        let games = Experiment::new(cfg)?.run_one_shot()?;
        let stats = distribution(&games, Pooling::Player(playbench::Seat::First), &UniformTestConfig::default())?;
        doc.push(ReportBlock::Distribution { label: label.into(), stats });
    }
    print!("{}", render_table(&doc, TableKind::Distribution)?);
    Ok(())
}
