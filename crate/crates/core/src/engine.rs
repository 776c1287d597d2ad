//! Runs experiments: independent one-shot simulations or a single repeated game.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::clock::Clock;
use crate::config::{ConfigError, ExperimentConfig, Mode};
use crate::gateway::Gateway;
use crate::players::{DecisionContext, DecisionError, LlmPlayer, Player, PlayerSpec, StrategyRegistry};
use crate::prompts::{make_nonce, PromptCatalog};
use crate::seeds::{derive_seed, RNG_DESCRIPTION};
use crate::transcript::{Header, PerSeat, RoundRecord, Seat, Termination, Transcript, SCHEMA_VERSION};

pub const MESSAGE_SHAPE: &str = "single user message";

pub fn code_version() -> String {
    format!("playbench {}", env!("CARGO_PKG_VERSION"))
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{seat} is an LLM player but no gateway was supplied")]
    NoGateway { seat: Seat },
    #[error("experiment mode is {actual}, this operation needs {expected}")]
    WrongMode { expected: &'static str, actual: &'static str },
    #[error("cannot resume: {0}")]
    Resume(String),
    #[error("transcript sink failed: {0}")]
    Sink(String),
}

/// Receives a repeated game as it is played, so long runs survive crashes.
pub trait RoundSink {
    fn header(&mut self, header: &Header) -> Result<(), String>;
    fn round(&mut self, round: &RoundRecord) -> Result<(), String>;
    fn finish(&mut self, termination: &Termination) -> Result<(), String>;
}

/// Sink that discards everything.
pub struct NullSink;

impl RoundSink for NullSink {
    fn header(&mut self, _: &Header) -> Result<(), String> {
        Ok(())
    }
    fn round(&mut self, _: &RoundRecord) -> Result<(), String> {
        Ok(())
    }
    fn finish(&mut self, _: &Termination) -> Result<(), String> {
        Ok(())
    }
}

fn mode_name(mode: &Mode) -> &'static str {
    match mode {
        Mode::OneShot { .. } => "one_shot",
        Mode::Repeated { .. } => "repeated",
    }
}

pub struct ExperimentBuilder {
    config: ExperimentConfig,
    registry: StrategyRegistry,
    catalog: PromptCatalog,
    gateway: Option<Arc<Gateway>>,
    seat_gateways: BTreeMap<Seat, Arc<Gateway>>,
    clock: Clock,
}

impl ExperimentBuilder {
    pub fn registry(mut self, registry: StrategyRegistry) -> Self {
        self.registry = registry;
        self
    }

    pub fn catalog(mut self, catalog: PromptCatalog) -> Self {
        self.catalog = catalog;
        self
    }

    /// Gateway shared by every LLM seat without its own.
    pub fn gateway(mut self, gateway: Arc<Gateway>) -> Self {
        self.gateway = Some(gateway);
        self
    }

    pub fn seat_gateway(mut self, seat: Seat, gateway: Arc<Gateway>) -> Self {
        self.seat_gateways.insert(seat, gateway);
        self
    }

    pub fn clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn build(self) -> Result<Experiment, EngineError> {
        let cfg = self.config;
        cfg.validate(&self.registry, &self.catalog)?;
        let mut templates = BTreeMap::new();
        let mut build_seat = |seat: Seat| -> Result<Player, EngineError> {
            match &cfg.players[seat] {
                PlayerSpec::Scripted { strategy, params } => {
                    Player::scripted(&self.registry, strategy, params.clone(), &cfg.game)
                        .map_err(|source| ConfigError::Player { seat, source }.into())
                }
                PlayerSpec::Llm { template, model } => {
                    let template = self
                        .catalog
                        .get(template)
                        .map_err(|source| ConfigError::Prompt { seat, source })?;
                    let gateway = self
                        .seat_gateways
                        .get(&seat)
                        .or(self.gateway.as_ref())
                        .cloned()
                        .ok_or(EngineError::NoGateway { seat })?;
                    templates.insert(template.template_id.clone(), template.sha256.clone());
                    Ok(Player::Llm(LlmPlayer {
                        template,
                        model: model.clone(),
                        gateway,
                        audit_prompts: cfg.audit_prompts,
                    }))
                }
            }
        };
        let players = PerSeat::new(build_seat(Seat::First)?, build_seat(Seat::Second)?);
        let seeds = PerSeat::new(
            cfg.seat_seed(Seat::First).unwrap_or(0),
            cfg.seat_seed(Seat::Second).unwrap_or(0),
        );
        let mut gateways: Vec<Arc<Gateway>> = Vec::new();
        for p in [&players.first, &players.second] {
            if let Player::Llm(l) = p {
                if !gateways.iter().any(|g| Arc::ptr_eq(g, &l.gateway)) {
                    gateways.push(l.gateway.clone());
                }
            }
        }
        Ok(Experiment {
            config: cfg,
            players,
            seeds,
            templates,
            gateways,
            clock: self.clock,
        })
    }
}

/// A validated experiment with resolved players.
pub struct Experiment {
    config: ExperimentConfig,
    players: PerSeat<Player>,
    seeds: PerSeat<u64>,
    templates: BTreeMap<String, String>,
    gateways: Vec<Arc<Gateway>>,
    clock: Clock,
}

impl std::fmt::Debug for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Experiment")
            .field("experiment_id", &self.config.experiment_id)
            .field("players", &self.players)
            .finish()
    }
}

impl Experiment {
    pub fn builder(config: ExperimentConfig) -> ExperimentBuilder {
        ExperimentBuilder {
            config,
            registry: StrategyRegistry::with_builtins(),
            catalog: PromptCatalog::shipped(),
            gateway: None,
            seat_gateways: BTreeMap::new(),
            clock: Clock::from_env(),
        }
    }

    /// Scripted-only experiments with builtin strategies.
    pub fn new(config: ExperimentConfig) -> Result<Self, EngineError> {
        Self::builder(config).build()
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn header(&self, simulation: Option<u32>) -> Header {
        Header {
            schema_version: SCHEMA_VERSION,
            experiment_id: self.config.experiment_id.clone(),
            config: self.config.snapshot(),
            templates: self.templates.clone(),
            code_version: code_version(),
            started_at: Some(self.clock.stamp()),
            message_shape: MESSAGE_SHAPE.to_string(),
            rng: RNG_DESCRIPTION.to_string(),
            simulation,
        }
    }

    fn ticket(&self, fallback: u64) -> u64 {
        match self.gateways.first() {
            Some(g) => {
                let t = g.begin_simulation();
                for other in &self.gateways[1..] {
                    other.begin_simulation();
                }
                t
            }
            None => fallback,
        }
    }

    /// Plays one round from the given history; `order` is the sequence in
    /// which the two decisions are computed.
    fn play_round(
        &self,
        round: u32,
        history: &[RoundRecord],
        simulation: u32,
        ticket: u64,
        nonces: &PerSeat<Option<String>>,
        order: [Seat; 2],
    ) -> Result<RoundRecord, DecisionError> {
        let game = &self.config.game;
        let mut decided = BTreeMap::new();
        for seat in order {
            let ctx = DecisionContext {
                game,
                seat,
                history,
                nonce: nonces[seat].as_deref(),
                round,
                seed: derive_seed(self.seeds[seat], seat.name(), simulation, round),
                ticket,
            };
            decided.insert(seat, self.players[seat].decide(&ctx)?);
        }
        let first = &decided[&Seat::First];
        let second = &decided[&Seat::Second];
        let mut record = RoundRecord::scored(game, round, game.symbol(first.action), game.symbol(second.action))
            .expect("actions come from the game");
        for (seat, d) in decided {
            if let Some(trace) = d.trace {
                record.llm.insert(seat, trace);
            }
        }
        Ok(record)
    }

    fn aborted(round: u32, e: DecisionError) -> Termination {
        Termination::Aborted {
            reason: e.reason,
            round,
            seat: Some(e.seat),
            raw_responses: e.raw_responses,
        }
    }

    fn one_simulation(&self, index: u32, ticket: u64) -> Transcript {
        let nonces = PerSeat::new(Some(make_nonce()), Some(make_nonce()));
        let (rounds, termination) = match self.play_round(1, &[], index, ticket, &nonces, [Seat::First, Seat::Second]) {
            Ok(r) => (vec![r], Termination::Completed),
            Err(e) => (Vec::new(), Self::aborted(1, e)),
        };
        Transcript {
            header: self.header(Some(index)),
            rounds,
            termination,
        }
    }

    /// Runs every one-shot simulation, concurrently up to the gateway's
    /// admission limit. Results are ordered by simulation index.
    pub fn run_one_shot(&self) -> Result<Vec<Transcript>, EngineError> {
        let Mode::OneShot { simulations } = self.config.mode else {
            return Err(EngineError::WrongMode {
                expected: "one_shot",
                actual: mode_name(&self.config.mode),
            });
        };
        let n = simulations as usize;
        let tickets: Vec<u64> = (0..n).map(|i| self.ticket(i as u64)).collect();
        let workers = match self.gateways.iter().map(|g| g.max_in_flight()).min() {
            Some(limit) => limit,
            None => std::thread::available_parallelism().map(|p| p.get()).unwrap_or(1),
        }
        .clamp(1, n);
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<Transcript>>> = Mutex::new(vec![None; n]);
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= n {
                        break;
                    }
                    let t = self.one_simulation(i as u32 + 1, tickets[i]);
                    slots.lock().expect("result slots")[i] = Some(t);
                });
            }
        });
        Ok(slots
            .into_inner()
            .expect("result slots")
            .into_iter()
            .map(|t| t.expect("every simulation ran"))
            .collect())
    }

    pub fn run_repeated(&self) -> Result<Transcript, EngineError> {
        self.run_repeated_with(&mut NullSink)
    }

    /// Plays the repeated game, streaming header, rounds and termination to `sink`.
    pub fn run_repeated_with(&self, sink: &mut dyn RoundSink) -> Result<Transcript, EngineError> {
        let header = self.header(None);
        self.check_repeated()?;
        sink.header(&header).map_err(EngineError::Sink)?;
        self.continue_repeated(header, Vec::new(), sink)
    }

    fn check_repeated(&self) -> Result<u32, EngineError> {
        match self.config.mode {
            Mode::Repeated { rounds } => Ok(rounds),
            ref m => Err(EngineError::WrongMode {
                expected: "repeated",
                actual: mode_name(m),
            }),
        }
    }

    fn continue_repeated(
        &self,
        header: Header,
        mut rounds: Vec<RoundRecord>,
        sink: &mut dyn RoundSink,
    ) -> Result<Transcript, EngineError> {
        let total = self.check_repeated()?;
        let ticket = self.ticket(0);
        let nonces = PerSeat::new(None, None);
        let mut termination = Termination::Completed;
        for round in rounds.len() as u32 + 1..=total {
            match self.play_round(round, &rounds, 0, ticket, &nonces, [Seat::First, Seat::Second]) {
                Ok(r) => {
                    sink.round(&r).map_err(EngineError::Sink)?;
                    rounds.push(r);
                }
                Err(e) => {
                    termination = Self::aborted(round, e);
                    break;
                }
            }
        }
        sink.finish(&termination).map_err(EngineError::Sink)?;
        Ok(Transcript {
            header,
            rounds,
            termination,
        })
    }

    pub fn resume(&self, transcript: Transcript) -> Result<Transcript, EngineError> {
        self.resume_with(transcript, &mut NullSink)
    }

    /// Continues an aborted repeated game from its last completed round.
    /// The sink receives only the newly played rounds and the new termination.
    pub fn resume_with(&self, transcript: Transcript, sink: &mut dyn RoundSink) -> Result<Transcript, EngineError> {
        self.check_repeated()?;
        if transcript.is_completed() {
            return Err(EngineError::Resume("transcript is already completed".into()));
        }
        if !transcript.header.config.same_experiment(&self.config.snapshot()) {
            return Err(EngineError::Resume(
                "config does not match the transcript header (game, players, mode or seed differ)".into(),
            ));
        }
        for (i, r) in transcript.rounds.iter().enumerate() {
            if r.round != i as u32 + 1 {
                return Err(EngineError::Resume(format!(
                    "rounds are not contiguous: expected round {}, found {}",
                    i + 1,
                    r.round
                )));
            }
        }
        self.continue_repeated(transcript.header, transcript.rounds, sink)
    }
}
