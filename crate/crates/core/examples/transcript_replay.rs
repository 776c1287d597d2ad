//! Writes a 1000-round transcript, audits it, then tampers with one payoff and
//! audits again.

use playbench::config::Mode;
use playbench::replay::replay;
use playbench::storage::{read_transcripts, write_transcript};
use playbench::{rock_paper_scissors, Experiment, ExperimentConfig, PlayerSpec, Points};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ExperimentConfig::new(
        "replay-demo",
        rock_paper_scissors(),
        PlayerSpec::scripted("uniform_random"),
        PlayerSpec::scripted("counter_last"),
        Mode::Repeated { rounds: 1000 },
    )
    .with_seed(7);
    let t = Experiment::new(cfg)?.run_repeated()?;
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("replay-demo.jsonl");
    write_transcript(&path, &t)?;

    let report = replay(&read_transcripts(&path)?);
    println!("clean: {} rounds, {} mismatches", report.rounds, report.mismatches.len());

    let mut forged = read_transcripts(&path)?;
    forged[0].rounds[611].payoffs.second += Points::whole(1);
    for m in replay(&forged).mismatches {
        println!("forged: {m}");
    }
    Ok(())
}
