//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use playbench::analytics::{distribution, milestones, pd_outcome_table, uniform_ci, MilestoneEntry};
use playbench::config::Mode;
use playbench::gateway::{ApiKey, ChatRequest, GatewayConfig, ResponseScript, RetryPolicy, RotationPolicy, ScriptEntry, ScriptedProvider};
use playbench::prompts::serialize_history;
use playbench::storage::write_transcript;
use playbench::synthetic::{one_shot_set, repeated};
use playbench::{
    prisoners_dilemma, rock_paper_scissors, Experiment, ExperimentConfig, Gateway, ModelParams, PlayerSpec, Points, Pooling,
    Seat, UniformTestConfig,
};

type Outcome = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn within_time(started: Instant, limit: Duration) -> Outcome {
    let took = started.elapsed();
    ensure!(took <= limit, "took {took:?}, limit {limit:?}");
    Ok(())
}

fn pts(a: i64, b: i64) -> (Points, Points) {
    (Points::whole(a), Points::whole(b))
}

fn payoff_fidelity() -> Outcome {
    let t = Instant::now();
    let rps = rock_paper_scissors();
    let rps_cells = [
        ('R', 'R', 0, 0),
        ('R', 'P', 0, 1),
        ('R', 'S', 1, 0),
        ('P', 'R', 1, 0),
        ('P', 'P', 0, 0),
        ('P', 'S', 0, 1),
        ('S', 'R', 0, 1),
        ('S', 'P', 1, 0),
        ('S', 'S', 0, 0),
    ];
    let pd = prisoners_dilemma();
    let pd_cells = [('C', 'C', 3, 3), ('C', 'D', 0, 10), ('D', 'C', 10, 0), ('D', 'D', 1, 1)];
    let mut checked = 0;
    for (game, cells) in [(&rps, &rps_cells[..]), (&pd, &pd_cells[..])] {
        for &(a, b, x, y) in cells {
            let got = game.evaluate_symbols(a, b).map_err(|e| e.to_string())?;
            ensure!(got == pts(x, y), "{} ({a},{b}) gave {got:?}", game.name());
            checked += 1;
        }
    }
    ensure!(checked == 13, "checked {checked} cells");
    within_time(t, Duration::from_secs(1))
}

fn pd_set(cells: [usize; 4]) -> Vec<playbench::Transcript> {
    let joint = [('C', 'C'), ('C', 'D'), ('D', 'C'), ('D', 'D')];
    let moves: Vec<_> = joint.iter().zip(cells).flat_map(|(&m, n)| std::iter::repeat_n(m, n)).collect();
    one_shot_set(&prisoners_dilemma(), &moves)
}

fn score_aggregation() -> Outcome {
    let t = Instant::now();
    for (cells, want) in [([93, 6, 1, 0], (289, 339)), ([76, 10, 12, 2], (350, 330))] {
        let table = pd_outcome_table(&pd_set(cells)).map_err(|e| e.to_string())?;
        let got = (table.scores.first, table.scores.second);
        ensure!(got == pts(want.0, want.1), "cells {cells:?} summed to {got:?}");
    }
    let pd = prisoners_dilemma();
    for (m, want) in [('C', 300), ('D', 100)] {
        let totals = repeated(&pd, &vec![(m, m); 100]).totals();
        ensure!((totals.first, totals.second) == pts(want, want), "all-{m} gave {totals:?}");
    }
    within_time(t, Duration::from_secs(1))
}

fn statistical_ranges() -> Outcome {
    let t = Instant::now();
    let cfg = UniformTestConfig::default();
    for (n, lo, hi) in [(200, 25.4, 41.3), (1800, 30.7, 36.0), (2000, 30.8, 35.9)] {
        let iv = uniform_ci(n, &cfg).map_err(|e| e.to_string())?;
        let (l, h) = ((iv.low * 1000.0).round() / 10.0, (iv.high * 1000.0).round() / 10.0);
        ensure!((l - lo).abs() <= 0.1 + 1e-9 && (h - hi).abs() <= 0.1 + 1e-9, "n={n}: {l}% - {h}%");
    }
    within_time(t, Duration::from_secs(1))
}

fn uniform_convergence() -> Outcome {
    let t = Instant::now();
    let cfg = ExperimentConfig::new(
        "uniform-10k",
        rock_paper_scissors(),
        PlayerSpec::scripted("uniform_random"),
        PlayerSpec::scripted("uniform_random"),
        Mode::OneShot { simulations: 10_000 },
    )
    .with_seed(20_240_601);
    let games = Experiment::new(cfg).map_err(|e| e.to_string())?.run_one_shot().map_err(|e| e.to_string())?;
    let stats = distribution(&games, Pooling::Pooled, &UniformTestConfig::default()).map_err(|e| e.to_string())?;
    ensure!(stats.n == 20_000, "n = {}", stats.n);
    for a in &stats.actions {
        ensure!((a.proportion - 1.0 / 3.0).abs() <= 0.015, "{} at {:.4}", a.symbol, a.proportion);
    }
    ensure!((stats.tie_rate - 1.0 / 3.0).abs() <= 0.015, "tie rate {:.4}", stats.tie_rate);
    for seat in Seat::BOTH {
        let s = stats.mean_score(seat, 100);
        ensure!((s - 33.3).abs() <= 2.0, "{seat} scored {s:.2} per 100 games");
    }
    within_time(t, Duration::from_secs(30))
}

fn ipd_total(a: &str, b: &str) -> Result<(Points, Points), String> {
    let cfg = ExperimentConfig::new(
        "ipd",
        prisoners_dilemma(),
        PlayerSpec::scripted(a),
        PlayerSpec::scripted(b),
        Mode::Repeated { rounds: 100 },
    );
    let t = Experiment::new(cfg).map_err(|e| e.to_string())?.run_repeated().map_err(|e| e.to_string())?;
    let totals = t.totals();
    Ok((totals.first, totals.second))
}

fn ipd_baselines() -> Outcome {
    let t = Instant::now();
    let got = ipd_total("tit_for_tat", "always_defect")?;
    ensure!(got == pts(99, 109), "tft vs always_defect gave {got:?}");
    let got = ipd_total("tit_for_tat", "tit_for_tat")?;
    ensure!(got == pts(300, 300), "tft vs tft gave {got:?}");
    within_time(t, Duration::from_secs(1))
}

fn entry(game: Option<u32>, increment: Option<u32>) -> MilestoneEntry {
    MilestoneEntry { game, increment }
}

fn milestone_rows() -> Outcome {
    let t = Instant::now();
    let rps = rock_paper_scissors();
    // Player_1 wins the first 30 rounds, then the players alternate wins.
    let mut moves = vec![('P', 'R'); 30];
    for i in 0..70 {
        moves.push(if i % 2 == 0 { ('R', 'P') } else { ('P', 'R') });
    }
    let table = milestones(&repeated(&rps, &moves), &[20, 40, 60, 80]).map_err(|e| e.to_string())?;
    // Player_1: 20 at round 20; 40 after ten more alternating wins at 31+2*9+1 = 50;
    // 60 lands at 90; 80 never. Player_2 wins on rounds 31, 33, ..., reaching 20 at 69.
    let want = [
        (20, entry(Some(20), Some(20)), entry(Some(69), Some(69))),
        (40, entry(Some(50), Some(30)), entry(None, None)),
        (60, entry(Some(90), Some(40)), entry(None, None)),
        (80, entry(None, None), entry(None, None)),
    ];
    ensure!(table.rows.len() == want.len(), "{} rows", table.rows.len());
    for (row, (th, p1, p2)) in table.rows.iter().zip(want) {
        ensure!(row.threshold == th, "threshold {}", row.threshold);
        ensure!(row.players.first == p1, "P1 at {th}: {:?}", row.players.first);
        ensure!(row.players.second == p2, "P2 at {th}: {:?}", row.players.second);
    }
    ensure!((table.wins.first, table.wins.second) == (65, 35), "wins {:?}", table.wins);

    let mut doc = playbench::storage::ReportDocument::new("m", &playbench::Clock::fixed_epoch(0));
    doc.push(playbench::storage::ReportBlock::Milestones {
        label: "constructed".into(),
        table,
    });
    let text = playbench::storage::render_table(&doc, playbench::storage::TableKind::Milestones).map_err(|e| e.to_string())?;
    let row80: Vec<&str> = text.lines().find(|l| l.trim_start().starts_with("80")).unwrap_or("").split_whitespace().collect();
    ensure!(row80 == ["80", "n/a", "n/a", "n/a", "n/a"], "rendered {row80:?}");
    within_time(t, Duration::from_secs(1))
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_playbench"));
    c.env("SOURCE_DATE_EPOCH", "1700000000").env_remove("PLAYBENCH_SECRETS_FILE");
    c
}

fn run_bin(args: &[&str], dir: Option<&Path>) -> Result<std::process::Output, String> {
    let mut c = bin();
    c.args(args);
    if let Some(d) = dir {
        c.current_dir(d);
    }
    c.output().map_err(|e| e.to_string())
}

fn replay_integrity(dir: &Path) -> Outcome {
    let cfg = ExperimentConfig::new(
        "replay-1000",
        rock_paper_scissors(),
        PlayerSpec::scripted("uniform_random"),
        PlayerSpec::scripted("counter_last"),
        Mode::Repeated { rounds: 1000 },
    )
    .with_seed(99);
    let t = Experiment::new(cfg).map_err(|e| e.to_string())?.run_repeated().map_err(|e| e.to_string())?;
    let path = dir.join("replay.jsonl");
    write_transcript(&path, &t).map_err(|e| e.to_string())?;
    let started = Instant::now();
    let ok = run_bin(&["replay", path.to_str().unwrap()], None)?;
    let took = started.elapsed();
    ensure!(ok.status.code() == Some(0), "clean replay exited {:?}", ok.status.code());
    ensure!(took <= Duration::from_secs(5), "1000-round replay took {took:?}");

    let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let target = 734;
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let line = &lines[target];
    let from = format!("\"payoffs\":{{\"Player_1\":{}", t.rounds[target - 1].payoffs.first);
    let flipped_value = if t.rounds[target - 1].payoffs.first == Points::ZERO { 1 } else { 0 };
    ensure!(line.contains(&from), "line {target} lacks {from}");
    lines[target] = line.replacen(&from, &format!("\"payoffs\":{{\"Player_1\":{flipped_value}"), 1);
    let bad = dir.join("replay-flipped.jsonl");
    std::fs::write(&bad, lines.join("\n") + "\n").map_err(|e| e.to_string())?;
    let out = run_bin(&["replay", bad.to_str().unwrap()], None)?;
    ensure!(out.status.code() != Some(0), "tampered replay exited 0");
    let said = String::from_utf8_lossy(&out.stdout);
    ensure!(said.contains(&format!("round {target}:")), "output did not name round {target}: {said}");
    Ok(())
}

fn double_gateway(keys: usize, script: ResponseScript) -> (Arc<Gateway>, Arc<ScriptedProvider>) {
    let provider = Arc::new(ScriptedProvider::new(script));
    let mut cfg = GatewayConfig::new("test-double", (0..keys).map(|i| ApiKey::new(format!("double-{i}"))).collect());
    cfg.rotation = RotationPolicy::PerRequest;
    cfg.retry = RetryPolicy { max_attempts: 1, base_ms: 0, cap_ms: 0 };
    (Arc::new(Gateway::new(cfg, provider.clone()).expect("gateway")), provider)
}

fn cache_busting() -> Outcome {
    // Nonces across 1000 one-shot prompts.
    let mut cfg = ExperimentConfig::new(
        "nonces",
        rock_paper_scissors(),
        PlayerSpec::llm("p1_base", ModelParams::new("double")),
        PlayerSpec::scripted("always_R"),
        Mode::OneShot { simulations: 1000 },
    );
    cfg.gateway = Some(Default::default());
    let (gw, provider) = double_gateway(1, ResponseScript::cycle(vec![ScriptEntry::text("P")]));
    Experiment::builder(cfg).gateway(gw).build().map_err(|e| e.to_string())?.run_one_shot().map_err(|e| e.to_string())?;
    let prompts = provider.prompts();
    ensure!(prompts.len() == 1000, "{} prompts", prompts.len());
    let nonces: HashSet<&str> = prompts
        .iter()
        .filter_map(|p| p.lines().rev().find(|l| l.starts_with("session: ")))
        .collect();
    ensure!(nonces.len() == 1000, "{} distinct nonce lines", nonces.len());

    // History embedding in repeated prompts.
    let mut cfg = ExperimentConfig::new(
        "history",
        playbench::prisoners_dilemma(),
        PlayerSpec::llm("pd1_base", ModelParams::new("double")),
        PlayerSpec::scripted("tit_for_tat"),
        Mode::Repeated { rounds: 25 },
    );
    cfg.gateway = Some(Default::default());
    cfg.audit_prompts = true;
    let replies = ["C", "D", "D", "C", "D"].map(ScriptEntry::text).to_vec();
    let (gw, _) = double_gateway(1, ResponseScript::cycle(replies));
    let t = Experiment::builder(cfg).gateway(gw).build().map_err(|e| e.to_string())?.run_repeated().map_err(|e| e.to_string())?;
    for (i, r) in t.rounds.iter().enumerate().skip(1) {
        let prompt = r.llm[&Seat::First].prompt.as_deref().unwrap_or("");
        let history = serialize_history(&t.rounds[..i]).map_err(|e| e.to_string())?;
        ensure!(prompt.contains(&history), "round {} prompt lacks prior history", i + 1);
        let longer = serialize_history(&t.rounds[..=i]).map_err(|e| e.to_string())?;
        ensure!(!prompt.contains(&longer), "round {} prompt leaks its own round", i + 1);
    }

    // Strict round-robin across two keys.
    let (gw, _) = double_gateway(2, ResponseScript::cycle(vec![ScriptEntry::text("R")]));
    for call in 0..100usize {
        let req = ChatRequest {
            model: "double".into(),
            temperature: 1.0,
            prompt: format!("call {call}"),
            seat: None,
            ticket: 0,
        };
        let x = gw.complete(&req).map_err(|e| e.to_string())?;
        ensure!(x.key_index == call % 2, "call {call} used key {}", x.key_index);
    }
    Ok(())
}

const UNIFORM_RUN: &str = r#"
schema_version = 1
experiment_id = "determinism"
game = "rps"
seed = 314
output = "run.jsonl"
[mode]
kind = "one_shot"
simulations = 500
[player1]
kind = "scripted"
strategy = "uniform_random"
[player2]
kind = "scripted"
strategy = "counter_last"
"#;

fn determinism(dir: &Path) -> Outcome {
    let mut artifacts = Vec::new();
    for name in ["a", "b"] {
        let d = dir.join(name);
        std::fs::create_dir_all(&d).map_err(|e| e.to_string())?;
        std::fs::write(d.join("exp.toml"), UNIFORM_RUN).map_err(|e| e.to_string())?;
        let run = run_bin(&["run", "--config", "exp.toml"], Some(&d))?;
        ensure!(run.status.code() == Some(0), "run exited {:?}", run.status.code());
        let report = run_bin(&["analyze", "run.jsonl", "--out", "report.json"], Some(&d))?;
        ensure!(report.status.code() == Some(0), "analyze exited {:?}", report.status.code());
        let text = run_bin(&["report", "report.json"], Some(&d))?;
        let read = |f: &str| std::fs::read(d.join(f)).map_err(|e| e.to_string());
        artifacts.push((read("run.jsonl")?, read("report.json")?, text.stdout));
    }
    ensure!(artifacts[0].0 == artifacts[1].0, "transcripts differ");
    ensure!(artifacts[0].1 == artifacts[1].1, "JSON reports differ");
    ensure!(artifacts[0].2 == artifacts[1].2, "text reports differ");
    Ok(())
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn offline_end_to_end(dir: &Path) -> Outcome {
    let cases = [
        ("rps_one_shot.toml", "rps_one_shot.report.txt", vec![]),
        ("rps_repeated.toml", "rps_repeated.report.txt", vec!["--boundary", "20", "--thresholds", "5,10,20"]),
    ];
    for (cfg, golden, extra) in cases {
        let transcript = dir.join(cfg.replace(".toml", ".jsonl"));
        let report_json = dir.join(cfg.replace(".toml", ".report.json"));
        let report_txt = dir.join(golden);
        let cfg_path = fixtures().join(cfg);
        let run = run_bin(&["run", "--config", cfg_path.to_str().unwrap(), "--dry-run", "--out", transcript.to_str().unwrap()], None)?;
        ensure!(run.status.code() == Some(0), "{cfg}: run exited {:?}", run.status.code());
        let mut args = vec!["analyze", transcript.to_str().unwrap(), "--out", report_json.to_str().unwrap()];
        args.extend(&extra);
        let analyze = run_bin(&args, None)?;
        ensure!(analyze.status.code() == Some(0), "{cfg}: analyze exited {:?}", analyze.status.code());
        let report = run_bin(&["report", report_json.to_str().unwrap(), "--out", report_txt.to_str().unwrap()], None)?;
        ensure!(report.status.code() == Some(0), "{cfg}: report exited {:?}", report.status.code());
        let got = std::fs::read(&report_txt).map_err(|e| e.to_string())?;
        let want = std::fs::read(fixtures().join("golden").join(golden)).map_err(|e| e.to_string())?;
        ensure!(got == want, "{golden} differs from the bundled golden:\n{}", String::from_utf8_lossy(&got));
    }
    Ok(())
}

fn main() {
    let scratch = tempfile::tempdir().expect("scratch dir");
    let dir = scratch.path();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("payoff fidelity", Box::new(payoff_fidelity)),
        ("score aggregation", Box::new(score_aggregation)),
        ("statistical ranges", Box::new(statistical_ranges)),
        ("uniform-play convergence", Box::new(uniform_convergence)),
        ("iterated PD baselines", Box::new(ipd_baselines)),
        ("milestones", Box::new(milestone_rows)),
        ("replay integrity", Box::new(|| replay_integrity(dir))),
        ("cache busting", Box::new(cache_busting)),
        ("determinism", Box::new(|| determinism(dir))),
        ("offline end-to-end", Box::new(|| offline_end_to_end(dir))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = check();
        let ms = started.elapsed().as_millis();
        match outcome {
            Ok(()) => println!("PASS {:>2} {name} ({ms} ms)", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({ms} ms): {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
