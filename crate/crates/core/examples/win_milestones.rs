//! When each player first reached 20, 40, ... cumulative wins over a long game.

use playbench::analytics::milestones;
use playbench::config::Mode;
use playbench::storage::{render_table, ReportBlock, ReportDocument, TableKind};
use playbench::{rock_paper_scissors, Clock, Experiment, ExperimentConfig, PlayerSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let biased = PlayerSpec::scripted_with(
        "fixed_bias",
        [("weights".to_string(), serde_json::json!({"R": 0.7, "P": 0.2, "S": 0.1}))].into(),
    );
    let cfg = ExperimentConfig::new(
        "milestones",
        rock_paper_scissors(),
        biased,
        PlayerSpec::scripted("counter_last"),
        Mode::Repeated { rounds: 1000 },
    )
    .with_seed(2);
    let t = Experiment::new(cfg)?.run_repeated()?;
    let thresholds: Vec<u32> = (1..=20).map(|i| i * 20).collect();
    let table = milestones(&t, &thresholds)?;

    let mut doc = ReportDocument::new("milestones", &Clock::from_env());
    doc.push(ReportBlock::Milestones { label: "biased vs counter_last".into(), table });
    print!("{}", render_table(&doc, TableKind::Milestones)?);
    Ok(())
}
