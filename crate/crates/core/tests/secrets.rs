//! Live-path runs against a local stub endpoint: keys must never reach disk or
//! the console.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::Path;
use std::process::Command;
use std::sync::{Arc, Mutex};

/// Answers every request with `R` plus an echo of the Authorization header,
/// the worst case for a leaking recorder.
fn stub() -> (String, Arc<Mutex<Vec<String>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut auth = String::new();
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if lower.starts_with("authorization:") {
                    auth = line["authorization:".len()..].trim().to_string();
                }
            }
            let mut body = vec![0u8; len];
            reader.read_exact(&mut body).unwrap();
            log.lock().unwrap().push(auth.clone());
            let reply = serde_json::json!({"choices": [{"message": {"content": format!("R\n(auth {auth})")}}]}).to_string();
            let resp = format!(
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                reply.len()
            );
            let _ = stream.write_all(resp.as_bytes());
        }
    });
    (url, seen)
}

fn config(dir: &Path, url: &str, extra: &str) -> std::path::PathBuf {
    let p = dir.join("live.toml");
    std::fs::write(
        &p,
        format!(
            r#"
schema_version = 1
experiment_id = "live-stub"
game = "rps"
audit_prompts = true
[mode]
kind = "one_shot"
simulations = 6
[player1]
kind = "llm"
template = "p1_base"
model = "stub"
[player2]
kind = "scripted"
strategy = "always_S"
[gateway]
endpoint = "{url}"
max_in_flight = 2
{extra}
"#
        ),
    )
    .unwrap();
    p
}

fn scan(dir: &Path, out: &std::process::Output, secrets: &[&str]) {
    let mut texts = vec![
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    ];
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "jsonl" || e == "json" || e == "txt") {
            texts.push(std::fs::read_to_string(&path).unwrap());
        }
    }
    for t in &texts {
        for s in secrets {
            assert!(!t.contains(s), "secret {s} leaked");
        }
    }
}

fn run_and_report(dir: &Path, cfg: &Path, keys_env: Option<&str>) -> std::process::Output {
    let bin = env!("CARGO_BIN_EXE_playbench");
    let out = dir.join("live.jsonl");
    let mut cmd = Command::new(bin);
    cmd.args(["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .env_remove("PLAYBENCH_API_KEYS")
        .env_remove("PLAYBENCH_SECRETS_FILE");
    if let Some(k) = keys_env {
        cmd.env("PLAYBENCH_API_KEYS", k);
    }
    let run = cmd.output().unwrap();
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let report = dir.join("report.json");
    let a = Command::new(bin)
        .args(["analyze", out.to_str().unwrap(), "--out", report.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(a.status.code(), Some(0));
    let games = playbench::storage::read_transcripts(&out).unwrap();
    assert_eq!(games.len(), 6);
    for g in &games {
        assert_eq!(g.rounds[0].moves.first, 'R');
        let raw = &g.rounds[0].llm[&playbench::Seat::First].exchanges[0].raw;
        assert!(raw.contains("Bearer ***"), "{raw}");
    }
    run
}

#[test]
fn keys_from_env_stay_out_of_artifacts() {
    let (url, seen) = stub();
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &url, "rotation = \"per_request\"");
    let run = run_and_report(dir.path(), &cfg, Some("sk-live-alpha-7731, sk-live-beta-9904"));
    scan(dir.path(), &run, &["sk-live-alpha-7731", "sk-live-beta-9904"]);
    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 6);
    let alpha = seen.iter().filter(|a| a.ends_with("alpha-7731")).count();
    assert_eq!(alpha, 3);
}

#[test]
fn keys_from_secrets_file_stay_out_of_artifacts() {
    let (url, _) = stub();
    let dir = tempfile::tempdir().unwrap();
    let secrets = tempfile::tempdir().unwrap();
    let path = secrets.path().join("keys.txt");
    std::fs::write(&path, "# stub keys\nsk-file-gamma-1200\n").unwrap();
    let cfg = config(dir.path(), &url, &format!("secrets_file = {:?}", path.to_str().unwrap()));
    let run = run_and_report(dir.path(), &cfg, None);
    scan(dir.path(), &run, &["sk-file-gamma-1200"]);
    let cfg_text = std::fs::read_to_string(&cfg).unwrap();
    assert!(!cfg_text.contains("sk-file"));
}
