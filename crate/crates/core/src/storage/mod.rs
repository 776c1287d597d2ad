//! On-disk transcripts and reports.
//!
//! A transcript file is JSON lines. Each line carries a `record` tag:
//!
//! ```text
//! {"record":"header", ...}
//! {"record":"round","round":1, ...}
//! ...
//! {"record":"termination","status":"completed"}
//! ```
//!
//! One-shot runs write a container: a `{"record":"container", ...}` line
//! followed by one header/round/termination group per simulation.

mod report;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::config::load_experiment as load_experiment_config;
pub use report::{render_json, render_table, render_text, RenderHints, ReportBlock, ReportDocument, TableKind};

use crate::engine::RoundSink;
use crate::transcript::{Header, RoundRecord, Termination, Transcript, SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: schema version {found} is newer than this build supports ({supported})")]
    Version { path: String, found: u32, supported: u32 },
    #[error("{path}: truncated after round {last_good_round} (line {line}: {message})")]
    Truncated {
        path: String,
        last_good_round: u32,
        line: usize,
        message: String,
    },
    #[error("{path} line {line}: {message}")]
    Malformed { path: String, line: usize, message: String },
    #[error("report has no {0} block")]
    MissingBlock(&'static str),
    #[error("{0}")]
    Invalid(String),
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> StorageError + '_ {
    move |e| StorageError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Line {
    Container(ContainerInfo),
    Header(Box<Header>),
    Round(RoundRecord),
    Termination(Termination),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainerInfo {
    pub schema_version: u32,
    pub experiment_id: String,
    pub games: u32,
}

fn line_text(line: &Line) -> String {
    serde_json::to_string(line).expect("records serialize")
}

/// Appends one transcript's records to a writer, one line each, flushing per line.
pub struct TranscriptWriter<W: Write> {
    out: W,
    path: PathBuf,
}

impl TranscriptWriter<BufWriter<File>> {
    pub fn create(path: &Path) -> Result<Self, StorageError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        let f = File::create(path).map_err(io_err(path))?;
        Ok(TranscriptWriter {
            out: BufWriter::new(f),
            path: path.to_path_buf(),
        })
    }

    /// Reopens a partial file for appending; used when resuming.
    pub fn append(path: &Path) -> Result<Self, StorageError> {
        let f = std::fs::OpenOptions::new().append(true).open(path).map_err(io_err(path))?;
        Ok(TranscriptWriter {
            out: BufWriter::new(f),
            path: path.to_path_buf(),
        })
    }
}

impl<W: Write> TranscriptWriter<W> {
    pub fn new(out: W) -> Self {
        TranscriptWriter {
            out,
            path: PathBuf::from("<memory>"),
        }
    }

    fn put(&mut self, line: &Line) -> Result<(), StorageError> {
        let p = self.path.clone();
        writeln!(self.out, "{}", line_text(line)).map_err(io_err(&p))?;
        self.out.flush().map_err(io_err(&p))
    }

    pub fn container(&mut self, info: &ContainerInfo) -> Result<(), StorageError> {
        self.put(&Line::Container(info.clone()))
    }

    pub fn write(&mut self, t: &Transcript) -> Result<(), StorageError> {
        self.put(&Line::Header(Box::new(t.header.clone())))?;
        for r in &t.rounds {
            self.put(&Line::Round(r.clone()))?;
        }
        self.put(&Line::Termination(t.termination.clone()))
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> RoundSink for TranscriptWriter<W> {
    fn header(&mut self, header: &Header) -> Result<(), String> {
        self.put(&Line::Header(Box::new(header.clone()))).map_err(|e| e.to_string())
    }
    fn round(&mut self, round: &RoundRecord) -> Result<(), String> {
        self.put(&Line::Round(round.clone())).map_err(|e| e.to_string())
    }
    fn finish(&mut self, termination: &Termination) -> Result<(), String> {
        self.put(&Line::Termination(termination.clone())).map_err(|e| e.to_string())
    }
}

pub fn write_transcript(path: &Path, t: &Transcript) -> Result<(), StorageError> {
    TranscriptWriter::create(path)?.write(t)
}

/// Writes one-shot games as a single container file.
pub fn write_container(path: &Path, experiment_id: &str, games: &[Transcript]) -> Result<(), StorageError> {
    let mut w = TranscriptWriter::create(path)?;
    w.container(&ContainerInfo {
        schema_version: SCHEMA_VERSION,
        experiment_id: experiment_id.to_string(),
        games: games.len() as u32,
    })?;
    for g in games {
        w.write(g)?;
    }
    Ok(())
}

/// Serializes transcripts the way [`write_transcript`] / [`write_container`] would.
pub fn transcript_bytes(experiment_id: &str, games: &[Transcript], container: bool) -> Vec<u8> {
    let mut w = TranscriptWriter::new(Vec::new());
    if container {
        w.container(&ContainerInfo {
            schema_version: SCHEMA_VERSION,
            experiment_id: experiment_id.to_string(),
            games: games.len() as u32,
        })
        .expect("memory write");
    }
    for g in games {
        w.write(g).expect("memory write");
    }
    w.into_inner()
}

#[derive(Debug)]
struct Partial {
    header: Header,
    rounds: Vec<RoundRecord>,
}

/// What a lenient read found.
#[derive(Debug)]
pub struct Recovered {
    pub games: Vec<Transcript>,
    /// A trailing game with no termination record, if any.
    pub unfinished: Option<Transcript>,
}

struct Reader<'a> {
    path: &'a Path,
    lenient: bool,
}

impl Reader<'_> {
    fn name(&self) -> String {
        self.path.display().to_string()
    }

    fn check_version(&self, v: &serde_json::Value) -> Result<(), StorageError> {
        if let Some(found) = v.get("schema_version").and_then(|x| x.as_u64()) {
            if found as u32 > SCHEMA_VERSION || found > u32::MAX as u64 {
                return Err(StorageError::Version {
                    path: self.name(),
                    found: found as u32,
                    supported: SCHEMA_VERSION,
                });
            }
        }
        Ok(())
    }

    fn read(&self) -> Result<(Option<ContainerInfo>, Recovered), StorageError> {
        let f = File::open(self.path).map_err(io_err(self.path))?;
        let mut container = None;
        let mut games = Vec::new();
        let mut current: Option<Partial> = None;
        let mut last_good = 0u32;
        let truncated = |line: usize, last_good: u32, message: String| StorageError::Truncated {
            path: self.name(),
            last_good_round: last_good,
            line,
            message,
        };
        let mut lines = BufReader::new(f).lines().enumerate().peekable();
        while let Some((i, text)) = lines.next() {
            let lineno = i + 1;
            let text = text.map_err(io_err(self.path))?;
            if text.trim().is_empty() {
                continue;
            }
            let is_last = lines.peek().is_none();
            let value: serde_json::Value = match serde_json::from_str(&text) {
                Ok(v) => v,
                Err(e) if is_last => {
                    if self.lenient {
                        break;
                    }
                    return Err(truncated(lineno, last_good, format!("incomplete record: {e}")));
                }
                Err(e) => {
                    return Err(StorageError::Malformed {
                        path: self.name(),
                        line: lineno,
                        message: e.to_string(),
                    })
                }
            };
            self.check_version(&value)?;
            let malformed = |message: String| StorageError::Malformed {
                path: self.name(),
                line: lineno,
                message,
            };
            let line: Line = serde_json::from_value(value).map_err(|e| malformed(e.to_string()))?;
            match line {
                Line::Container(info) => {
                    if lineno != 1 || container.is_some() {
                        return Err(malformed("container record must be the first line".into()));
                    }
                    container = Some(info);
                }
                Line::Header(h) => {
                    if current.is_some() {
                        return Err(malformed("header before the previous game's termination".into()));
                    }
                    if container.is_none() && !games.is_empty() {
                        return Err(malformed("several games in a file without a container record".into()));
                    }
                    last_good = 0;
                    current = Some(Partial {
                        header: *h,
                        rounds: Vec::new(),
                    });
                }
                Line::Round(r) => {
                    let p = current.as_mut().ok_or_else(|| malformed("round before any header".into()))?;
                    let expected = p.rounds.len() as u32 + 1;
                    if r.round != expected {
                        return Err(malformed(format!("expected round {expected}, found {}", r.round)));
                    }
                    last_good = r.round;
                    p.rounds.push(r);
                }
                Line::Termination(t) => {
                    let p = current.take().ok_or_else(|| malformed("termination before any header".into()))?;
                    games.push(Transcript {
                        header: p.header,
                        rounds: p.rounds,
                        termination: t,
                    });
                }
            }
        }
        let unfinished = match current {
            Some(p) if self.lenient => {
                let round = p.rounds.len() as u32 + 1;
                Some(Transcript {
                    header: p.header,
                    rounds: p.rounds,
                    termination: Termination::Aborted {
                        reason: "transcript file ends without a termination record".into(),
                        round,
                        seat: None,
                        raw_responses: Vec::new(),
                    },
                })
            }
            Some(_) => {
                return Err(truncated(0, last_good, "no termination record".into()));
            }
            None => None,
        };
        if !self.lenient {
            if let Some(info) = &container {
                if info.games as usize != games.len() {
                    return Err(StorageError::Truncated {
                        path: self.name(),
                        last_good_round: last_good,
                        line: 0,
                        message: format!("container declares {} games, found {}", info.games, games.len()),
                    });
                }
            }
            if games.is_empty() {
                return Err(StorageError::Invalid(format!("{}: no transcript records", self.name())));
            }
        }
        Ok((container, Recovered { games, unfinished }))
    }
}

/// Reads a single-game transcript file. Fails on containers with more than one game.
pub fn read_transcript(path: &Path) -> Result<Transcript, StorageError> {
    let mut games = read_transcripts(path)?;
    if games.len() != 1 {
        return Err(StorageError::Invalid(format!(
            "{}: holds {} games; use read_transcripts",
            path.display(),
            games.len()
        )));
    }
    Ok(games.remove(0))
}

/// Reads either a single transcript or a one-shot container.
pub fn read_transcripts(path: &Path) -> Result<Vec<Transcript>, StorageError> {
    let (_, r) = Reader { path, lenient: false }.read()?;
    Ok(r.games)
}

/// Reads as much as possible: complete games plus a trailing unfinished one.
pub fn recover_transcripts(path: &Path) -> Result<Recovered, StorageError> {
    Reader { path, lenient: true }.read().map(|(_, r)| r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{rock_paper_scissors, Points};
    use crate::synthetic::{one_shot_set, repeated};
    use crate::transcript::{ExchangeRecord, LlmTrace, Seat};

    fn big() -> Transcript {
        let moves: Vec<_> = (0..1000).map(|i| (['R', 'P', 'S'][i % 3], ['S', 'S', 'P'][i % 3])).collect();
        let mut t = repeated(&rock_paper_scissors(), &moves);
        t.rounds[3].llm.insert(
            Seat::First,
            LlmTrace {
                prompt: Some("line one\n\"quoted\" \u{2019}".into()),
                exchanges: vec![ExchangeRecord {
                    raw: "  Rock!\n\t".into(),
                    attempts: 2,
                    key_index: 1,
                    latency_ms: 12,
                    requested_at: Some("2024-01-01T00:00:00.000Z".into()),
                }],
            },
        );
        t
    }

    #[test]
    fn round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.jsonl");
        let t = big();
        write_transcript(&p, &t).unwrap();
        assert_eq!(read_transcript(&p).unwrap(), t);

        let games = one_shot_set(&rock_paper_scissors(), &[('R', 'P'), ('S', 'S')]);
        let c = dir.path().join("c.jsonl");
        write_container(&c, "x", &games).unwrap();
        assert_eq!(read_transcripts(&c).unwrap(), games);
        assert_eq!(std::fs::read(&c).unwrap(), transcript_bytes("x", &games, true));
    }

    #[test]
    fn truncation_names_last_good_round() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.jsonl");
        let mut t = big();
        t.rounds.truncate(510);
        write_transcript(&p, &t).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        // Keep header + 499 rounds, then half of round 500.
        let lines: Vec<&str> = text.lines().collect();
        let mut cut = lines[..500].join("\n");
        cut.push('\n');
        cut.push_str(&lines[500][..40]);
        std::fs::write(&p, &cut).unwrap();
        match read_transcript(&p) {
            Err(StorageError::Truncated { last_good_round, .. }) => assert_eq!(last_good_round, 499),
            other => panic!("{other:?}"),
        }
        let rec = recover_transcripts(&p).unwrap();
        assert_eq!(rec.unfinished.unwrap().rounds.len(), 499);

        // Clean cut at a line boundary, no termination.
        std::fs::write(&p, lines[..500].join("\n") + "\n").unwrap();
        match read_transcript(&p) {
            Err(StorageError::Truncated { last_good_round, .. }) => assert_eq!(last_good_round, 499),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn newer_schema_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.jsonl");
        write_transcript(&p, &repeated(&rock_paper_scissors(), &[('R', 'R')])).unwrap();
        let text = std::fs::read_to_string(&p).unwrap().replacen("\"schema_version\":1", "\"schema_version\":2", 1);
        std::fs::write(&p, text).unwrap();
        let err = read_transcript(&p).unwrap_err();
        assert!(matches!(err, StorageError::Version { found: 2, supported: 1, .. }), "{err}");
    }

    #[test]
    fn out_of_order_rounds_are_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.jsonl");
        let mut t = repeated(&rock_paper_scissors(), &[('R', 'R'), ('P', 'P')]);
        t.rounds[1].round = 3;
        write_transcript(&p, &t).unwrap();
        assert!(matches!(read_transcript(&p), Err(StorageError::Malformed { line: 3, .. })));
    }

    #[test]
    fn fractional_points_survive() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.jsonl");
        let mut t = repeated(&rock_paper_scissors(), &[('R', 'S')]);
        t.rounds[0].payoffs.first = Points::new(3, 2).unwrap();
        write_transcript(&p, &t).unwrap();
        assert!(std::fs::read_to_string(&p).unwrap().contains("\"3/2\""));
        assert_eq!(read_transcript(&p).unwrap(), t);
    }
}
