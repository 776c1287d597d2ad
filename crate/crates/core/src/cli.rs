//! Command-line front end. Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | file could not be read or written |
//! | 2 | invalid config, arguments or analysis request |
//! | 3 | a game aborted, or the gateway failed |
//! | 4 | integrity failure: replay mismatch, truncated or unsupported transcript |

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analytics::{
    distribution, milestones, pd_outcome_table, stationarity_split, AnalyticsError, CiMethod, Correction, Pooling,
    UniformTestConfig,
};
use crate::clock::Clock;
use crate::config::{load_experiment, read_experiment, ConfigError, ExperimentConfig, Mode};
use crate::engine::{EngineError, Experiment};
use crate::gateway::{ApiKey, Gateway, ResponseScript, ScriptedProvider};
use crate::players::StrategyRegistry;
use crate::prompts::PromptCatalog;
use crate::replay::replay;
use crate::storage::{
    read_transcripts, recover_transcripts, render_json, render_table, render_text, write_container, write_transcript,
    ReportBlock, ReportDocument, StorageError, TableKind, TranscriptWriter,
};
use crate::transcript::{Seat, Transcript};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_INTEGRITY: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "playbench", version, about = "Play, replay and analyse two-player normal-form games")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment and write its transcript.
    Run(RunArgs),
    /// Re-derive payoffs and prompt histories of recorded transcripts.
    Replay {
        #[arg(required = true)]
        transcripts: Vec<PathBuf>,
    },
    /// Compute statistics and write a structured report.
    Analyze(AnalyzeArgs),
    /// Render tables from a report file or directly from transcripts.
    Report(ReportArgs),
    /// Check a config file without running it.
    Validate {
        /// Experiment file (TOML)
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment file (TOML)
    #[arg(long)]
    pub config: PathBuf,
    /// Transcript path; defaults to the config's `output`, then `<experiment_id>.jsonl`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed for scripted randomness.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of one-shot simulations.
    #[arg(long)]
    pub n: Option<u32>,
    /// Number of rounds of a repeated game.
    #[arg(long)]
    pub rounds: Option<u32>,
    /// Answer LLM calls from the response script instead of the network.
    #[arg(long)]
    pub dry_run: bool,
    /// Response script for --dry-run; overrides `gateway.script`.
    #[arg(long, requires = "dry_run")]
    pub script: Option<PathBuf>,
    /// Record every rendered prompt in the transcript.
    #[arg(long)]
    pub audit_prompts: bool,
    /// Continue an aborted or truncated repeated-game transcript in place.
    #[arg(long, conflicts_with = "out")]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PoolingArg {
    Pooled,
    P1,
    P2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Wald,
    Exact,
}

#[derive(Debug, Args)]
pub struct AnalysisOptions {
    /// Significance level for the uniform ranges.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = MethodArg::Wald)]
    pub method: MethodArg,
    /// Skip the Bonferroni correction.
    #[arg(long)]
    pub no_correction: bool,
    #[arg(long, value_enum, default_value_t = PoolingArg::Pooled)]
    pub pooling: PoolingArg,
    /// Split repeated games into rounds 1..=B and B+1.. .
    #[arg(long)]
    pub boundary: Option<u32>,
    /// Win-count milestones for repeated games, e.g. 20,40,60.
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Vec<u32>,
}

impl AnalysisOptions {
    fn test(&self) -> UniformTestConfig {
        UniformTestConfig {
            alpha: self.alpha,
            k: 3,
            correction: if self.no_correction { Correction::None } else { Correction::Bonferroni },
            method: match self.method {
                MethodArg::Wald => CiMethod::Wald,
                MethodArg::Exact => CiMethod::ExactBinomial,
            },
        }
    }

    fn pooling(&self) -> Pooling {
        match self.pooling {
            PoolingArg::Pooled => Pooling::Pooled,
            PoolingArg::P1 => Pooling::Player(Seat::First),
            PoolingArg::P2 => Pooling::Player(Seat::Second),
        }
    }
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(required = true)]
    pub transcripts: Vec<PathBuf>,
    /// Report JSON path; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub options: AnalysisOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableArg {
    All,
    Distribution,
    Stationarity,
    Outcomes,
    Milestones,
    Json,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// A report JSON written by `analyze`, or transcript files.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = TableArg::All)]
    pub table: TableArg,
    /// Output path; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub options: AnalysisOptions,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        let code = match e {
            ConfigError::Read { .. } => EXIT_IO,
            _ => EXIT_VALIDATION,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<StorageError> for CliError {
    fn from(e: StorageError) -> Self {
        let code = match e {
            StorageError::Io { .. } => EXIT_IO,
            StorageError::Version { .. } | StorageError::Truncated { .. } | StorageError::Malformed { .. } => {
                EXIT_INTEGRITY
            }
            StorageError::MissingBlock(_) | StorageError::Invalid(_) => EXIT_VALIDATION,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        let code = match e {
            EngineError::Config(ConfigError::Read { .. }) => EXIT_IO,
            EngineError::Sink(_) => EXIT_IO,
            EngineError::Config(_) | EngineError::NoGateway { .. } | EngineError::WrongMode { .. } => EXIT_VALIDATION,
            EngineError::Resume(_) => EXIT_VALIDATION,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<AnalyticsError> for CliError {
    fn from(e: AnalyticsError) -> Self {
        CliError::new(EXIT_VALIDATION, e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

/// Parses `args` and runs the command; returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn execute(cmd: Command) -> CliResult<i32> {
    match cmd {
        Command::Run(args) => cmd_run(&args),
        Command::Replay { transcripts } => cmd_replay(&transcripts),
        Command::Analyze(args) => cmd_analyze(&args),
        Command::Report(args) => cmd_report(&args),
        Command::Validate { config } => cmd_validate(&config),
    }
}

fn apply_overrides(cfg: &mut ExperimentConfig, args: &RunArgs) -> CliResult<()> {
    if let Some(seed) = args.seed {
        cfg.seed = Some(seed);
    }
    match (&mut cfg.mode, args.n, args.rounds) {
        (Mode::OneShot { simulations }, Some(n), None) => *simulations = n,
        (Mode::Repeated { rounds }, None, Some(r)) => *rounds = r,
        (_, None, None) => {}
        (Mode::OneShot { .. }, _, Some(_)) => {
            return Err(CliError::new(EXIT_VALIDATION, "--rounds applies to repeated experiments"))
        }
        (Mode::Repeated { .. }, Some(_), _) => {
            return Err(CliError::new(EXIT_VALIDATION, "--n applies to one-shot experiments"))
        }
    }
    if args.audit_prompts {
        cfg.audit_prompts = true;
    }
    Ok(())
}

fn build_gateway(cfg: &ExperimentConfig, args: &RunArgs, clock: &Clock) -> CliResult<Option<Arc<Gateway>>> {
    if !cfg.has_llm_player() {
        return Ok(None);
    }
    let settings = cfg
        .gateway
        .as_ref()
        .ok_or_else(|| CliError::new(EXIT_VALIDATION, "LLM players need a [gateway] section"))?;
    let runtime = |e: crate::gateway::GatewayError| CliError::new(EXIT_VALIDATION, e.to_string());
    let gateway = if args.dry_run {
        let script_path = args
            .script
            .clone()
            .or_else(|| settings.script.as_ref().map(|p| cfg.resolve(p)))
            .ok_or_else(|| CliError::new(EXIT_VALIDATION, "--dry-run needs --script or gateway.script"))?;
        let script = ResponseScript::load(&script_path).map_err(|e| {
            let code = if matches!(e, crate::gateway::ScriptError::Read { .. }) { EXIT_IO } else { EXIT_VALIDATION };
            CliError::new(code, e.to_string())
        })?;
        let gw_cfg = settings.gateway_config(vec![ApiKey::new("dry-run")]);
        Gateway::new(gw_cfg, Arc::new(ScriptedProvider::new(script))).map_err(runtime)?
    } else {
        let keys = settings.load_keys(&cfg.base_dir)?;
        Gateway::http(settings.gateway_config(keys)).map_err(runtime)?
    };
    Ok(Some(Arc::new(gateway.with_clock(clock.clone()))))
}

fn catalog_for(cfg: &ExperimentConfig) -> CliResult<PromptCatalog> {
    let mut catalog = PromptCatalog::shipped();
    if let Some(dir) = &cfg.templates_dir {
        catalog
            .load_dir(&cfg.resolve(dir))
            .map_err(|e| CliError::new(EXIT_VALIDATION, e.to_string()))?;
    }
    Ok(catalog)
}

fn summary(transcripts: &[Transcript]) -> String {
    let doc = match summary_report(transcripts) {
        Ok(d) => d,
        Err(e) => return format!("no summary: {e}\n"),
    };
    render_table(&doc, TableKind::Distribution).unwrap_or_default()
}

fn summary_report(transcripts: &[Transcript]) -> Result<ReportDocument, AnalyticsError> {
    let stats = distribution(transcripts, Pooling::Pooled, &UniformTestConfig::default())?;
    let mut doc = ReportDocument::new("summary", &Clock::fixed_epoch(0));
    doc.push(ReportBlock::Distribution {
        label: "All games".into(),
        stats,
    });
    Ok(doc)
}

fn cmd_run(args: &RunArgs) -> CliResult<i32> {
    let mut cfg = read_experiment(&args.config)?;
    apply_overrides(&mut cfg, args)?;
    let catalog = catalog_for(&cfg)?;
    cfg.validate(&StrategyRegistry::with_builtins(), &catalog)?;
    let clock = Clock::from_env();
    let gateway = build_gateway(&cfg, args, &clock)?;
    let mut builder = Experiment::builder(cfg.clone()).catalog(catalog).clock(clock);
    if let Some(g) = gateway {
        builder = builder.gateway(g);
    }
    let exp = builder.build()?;

    if let Some(path) = &args.resume {
        return resume(&exp, path);
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(|p| cfg.resolve(p)))
        .unwrap_or_else(|| PathBuf::from(format!("{}.jsonl", cfg.experiment_id)));
    let transcripts = match cfg.mode {
        Mode::OneShot { .. } => {
            let games = exp.run_one_shot()?;
            write_container(&out, &cfg.experiment_id, &games)?;
            games
        }
        Mode::Repeated { .. } => {
            let mut writer = TranscriptWriter::create(&out)?;
            vec![exp.run_repeated_with(&mut writer)?]
        }
    };
    finish_run(&out, &transcripts)
}

fn finish_run(out: &Path, transcripts: &[Transcript]) -> CliResult<i32> {
    let aborted: Vec<_> = transcripts.iter().filter(|t| !t.is_completed()).collect();
    println!("transcript: {}", out.display());
    print!("{}", summary(transcripts));
    if aborted.is_empty() {
        return Ok(EXIT_OK);
    }
    for t in &aborted {
        if let crate::transcript::Termination::Aborted { reason, round, .. } = &t.termination {
            match t.header.simulation {
                Some(s) => eprintln!("simulation {s} aborted at round {round}: {reason}"),
                None => eprintln!("game aborted at round {round}: {reason}"),
            }
        }
    }
    eprintln!("{} of {} game(s) aborted", aborted.len(), transcripts.len());
    Ok(EXIT_RUNTIME)
}

fn resume(exp: &Experiment, path: &Path) -> CliResult<i32> {
    let rec = recover_transcripts(path)?;
    let partial = match (rec.games.len(), rec.unfinished) {
        (0, Some(t)) => t,
        (1, None) => rec.games.into_iter().next().expect("one game"),
        _ => return Err(CliError::new(EXIT_VALIDATION, "--resume takes a single repeated-game transcript")),
    };
    // Rewrite in full so the file ends with exactly one termination record.
    let done = exp.resume(partial)?;
    let tmp = path.with_extension("resume.tmp");
    write_transcript(&tmp, &done)?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::new(EXIT_IO, format!("{}: {e}", path.display())))?;
    finish_run(path, std::slice::from_ref(&done))
}

fn load_all(paths: &[PathBuf]) -> CliResult<Vec<(PathBuf, Vec<Transcript>)>> {
    paths.iter().map(|p| Ok((p.clone(), read_transcripts(p)?))).collect()
}

fn cmd_replay(paths: &[PathBuf]) -> CliResult<i32> {
    let mut failed = false;
    for (path, games) in load_all(paths)? {
        let r = replay(&games);
        if r.is_clean() {
            println!(
                "{}: ok ({} game(s), {} round(s), {} prompt(s) checked)",
                path.display(),
                r.games,
                r.rounds,
                r.prompts_checked
            );
        } else {
            failed = true;
            println!("{}: {} mismatch(es)", path.display(), r.mismatches.len());
            for m in &r.mismatches {
                println!("  {m}");
            }
        }
    }
    Ok(if failed { EXIT_INTEGRITY } else { EXIT_OK })
}

fn label_for(path: &Path, games: &[Transcript], taken: &[String]) -> String {
    let base = games
        .first()
        .map(|t| t.header.experiment_id.clone())
        .unwrap_or_else(|| path.display().to_string());
    if taken.contains(&base) {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        format!("{base} ({stem})")
    } else {
        base
    }
}

/// Builds the report document for a set of transcript files.
pub fn build_report(
    inputs: &[(PathBuf, Vec<Transcript>)],
    options: &AnalysisOptions,
    clock: &Clock,
) -> CliResult<ReportDocument> {
    let all: Vec<Transcript> = inputs.iter().flat_map(|(_, g)| g.iter().cloned()).collect();
    if all.is_empty() {
        return Err(CliError::new(EXIT_VALIDATION, "no transcripts to analyse"));
    }
    let game = all[0].game().clone();
    if let Some(t) = all.iter().find(|t| t.game() != &game) {
        return Err(AnalyticsError::MixedGames(game.name().into(), t.game().name().into()).into());
    }
    let test = options.test();
    let pooling = options.pooling();
    let experiment_id = {
        let mut ids: Vec<&str> = all.iter().map(|t| t.header.experiment_id.as_str()).collect();
        ids.dedup();
        ids.join("+")
    };
    let mut doc = ReportDocument::new(&experiment_id, clock);
    doc.sources = inputs.iter().map(|(p, _)| p.display().to_string()).collect();
    let mut labels = Vec::new();
    let mut extra = Vec::new();
    for (path, games) in inputs {
        let label = label_for(path, games, &labels);
        labels.push(label.clone());
        doc.push(ReportBlock::Distribution {
            label: label.clone(),
            stats: distribution(games, pooling, &test)?,
        });
        if game.len() == 2 {
            doc.push(ReportBlock::Outcomes {
                label: label.clone(),
                table: pd_outcome_table(games)?,
            });
        }
        let repeated: Vec<&Transcript> = games.iter().filter(|t| !t.header.config.mode.is_one_shot()).collect();
        if options.boundary.is_some() || !options.thresholds.is_empty() {
            if repeated.is_empty() {
                return Err(CliError::new(
                    EXIT_VALIDATION,
                    format!("{label}: --boundary and --thresholds need repeated-game transcripts"),
                ));
            }
        }
        for t in repeated {
            if let Some(b) = options.boundary {
                extra.push(ReportBlock::Stationarity {
                    label: label.clone(),
                    split: stationarity_split(t, b, pooling, &test)?,
                });
            }
            if !options.thresholds.is_empty() {
                extra.push(ReportBlock::Milestones {
                    label: label.clone(),
                    table: milestones(t, &options.thresholds)?,
                });
            }
        }
    }
    if inputs.len() > 1 {
        doc.push(ReportBlock::Distribution {
            label: "Pooled".into(),
            stats: distribution(&all, pooling, &test)?,
        });
        if game.len() == 2 {
            doc.push(ReportBlock::Outcomes {
                label: "Pooled".into(),
                table: pd_outcome_table(&all)?,
            });
        }
    }
    doc.blocks.extend(extra);
    Ok(doc)
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| CliError::new(EXIT_IO, format!("{}: {e}", dir.display())))?;
            }
            std::fs::write(p, text).map_err(|e| CliError::new(EXIT_IO, format!("{}: {e}", p.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_analyze(args: &AnalyzeArgs) -> CliResult<i32> {
    let inputs = load_all(&args.transcripts)?;
    let doc = build_report(&inputs, &args.options, &Clock::from_env())?;
    emit(args.out.as_deref(), &render_json(&doc))?;
    if args.out.is_some() {
        print!("{}", render_text(&doc)?);
    }
    Ok(EXIT_OK)
}

fn read_report(path: &Path) -> Option<ReportDocument> {
    let text = std::fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

fn cmd_report(args: &ReportArgs) -> CliResult<i32> {
    let doc = match args.inputs.as_slice() {
        [single] if read_report(single).is_some() => read_report(single).expect("just parsed"),
        paths => build_report(&load_all(paths)?, &args.options, &Clock::from_env())?,
    };
    let text = match args.table {
        TableArg::All => render_text(&doc)?,
        TableArg::Json => render_json(&doc),
        TableArg::Distribution => render_table(&doc, TableKind::Distribution)?,
        TableArg::Stationarity => render_table(&doc, TableKind::Stationarity)?,
        TableArg::Outcomes => render_table(&doc, TableKind::Outcomes)?,
        TableArg::Milestones => render_table(&doc, TableKind::Milestones)?,
    };
    emit(args.out.as_deref(), &text)?;
    Ok(EXIT_OK)
}

fn cmd_validate(path: &Path) -> CliResult<i32> {
    let (cfg, _) = load_experiment(path)?;
    let mode = match cfg.mode {
        Mode::OneShot { simulations } => format!("one-shot x {simulations}"),
        Mode::Repeated { rounds } => format!("repeated x {rounds}"),
    };
    println!("{}: ok ({}, {mode})", path.display(), cfg.game.name());
    for seat in Seat::BOTH {
        let desc = match &cfg.players[seat] {
            crate::players::PlayerSpec::Scripted { strategy, .. } => format!("scripted {strategy}"),
            crate::players::PlayerSpec::Llm { template, model } => {
                format!("llm {} via template {template}, temperature {}", model.model, model.temperature)
            }
        };
        println!("  {seat}: {desc}");
    }
    Ok(EXIT_OK)
}
