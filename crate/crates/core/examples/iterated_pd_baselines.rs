//! Round-robin of the shipped Prisoner's Dilemma baselines over 100 rounds.

use playbench::config::Mode;
use playbench::{prisoners_dilemma, Experiment, ExperimentConfig, PlayerSpec};

const ENTRANTS: [&str; 4] = ["tit_for_tat", "grim_trigger", "always_cooperate", "always_defect"];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("{:<18}{:<18}{:>6}{:>6}", "Player_1", "Player_2", "P1", "P2");
    for a in ENTRANTS {
        for b in ENTRANTS {
            let cfg = ExperimentConfig::new(
                "ipd",
                prisoners_dilemma(),
                PlayerSpec::scripted(a),
                PlayerSpec::scripted(b),
                Mode::Repeated { rounds: 100 },
            );
            let totals = Experiment::new(cfg)?.run_repeated()?.totals();
            println!("{a:<18}{b:<18}{:>6}{:>6}", totals.first.to_string(), totals.second.to_string());
        }
    }
    Ok(())
}
