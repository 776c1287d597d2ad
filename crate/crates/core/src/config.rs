//! Experiment and game definition files.
//!
//! Both are TOML with an explicit `schema_version`. Relative paths inside an
//! experiment file are resolved against the file's directory. See
//! `docs/formats.md` for the full field list.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{Action, Game, GameError, Points, TieRule};
use crate::gateway::{ApiKey, GatewayConfig, RetryPolicy, RotationPolicy};
use crate::players::{PlayerError, PlayerSpec, StrategyRegistry};
use crate::prompts::{PromptCatalog, PromptError};
use crate::transcript::{PerSeat, Seat};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";
pub const DEFAULT_KEYS_ENV: &str = "PLAYBENCH_API_KEYS";
/// Path to a secrets file, used when the config names none.
pub const SECRETS_FILE_ENV: &str = "PLAYBENCH_SECRETS_FILE";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("cannot parse {path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: schema_version {found} is not supported (this build reads version {supported})")]
    Version { path: String, found: u32, supported: u32 },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("{seat}: {source}")]
    Player { seat: Seat, source: PlayerError },
    #[error("{seat}: {source}")]
    Prompt { seat: Seat, source: PromptError },
    #[error(transparent)]
    Templates(PromptError),
    #[error("no API keys: {0}")]
    NoKeys(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Mode {
    /// `simulations` independent single-round games.
    OneShot { simulations: u32 },
    /// One game of `rounds` rounds with full history feedback.
    Repeated { rounds: u32 },
}

impl Mode {
    pub fn size(&self) -> u32 {
        match *self {
            Mode::OneShot { simulations } => simulations,
            Mode::Repeated { rounds } => rounds,
        }
    }

    pub fn is_one_shot(&self) -> bool {
        matches!(self, Mode::OneShot { .. })
    }
}

fn default_endpoint() -> String {
    DEFAULT_ENDPOINT.to_string()
}

fn default_in_flight() -> usize {
    4
}

fn default_timeout() -> u64 {
    60_000
}

/// Gateway section of an experiment file. Holds no key material: keys come
/// from `keys_env` (comma or newline separated) or `secrets_file` (one per line).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatewaySettings {
    #[serde(default = "default_endpoint")]
    pub endpoint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keys_env: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub secrets_file: Option<PathBuf>,
    #[serde(default)]
    pub rotation: RotationPolicy,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    #[serde(default)]
    pub retry: RetryPolicy,
    /// Response script for the offline test double (`--dry-run`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<PathBuf>,
}

impl Default for GatewaySettings {
    fn default() -> Self {
        GatewaySettings {
            endpoint: default_endpoint(),
            keys_env: None,
            secrets_file: None,
            rotation: RotationPolicy::default(),
            max_in_flight: default_in_flight(),
            timeout_ms: default_timeout(),
            retry: RetryPolicy::default(),
            script: None,
        }
    }
}

/// Splits key material on commas and newlines; blank entries and `#` comments are dropped.
pub fn parse_keys(text: &str) -> Vec<ApiKey> {
    text.split([',', '\n'])
        .map(str::trim)
        .filter(|k| !k.is_empty() && !k.starts_with('#'))
        .map(ApiKey::new)
        .collect()
}

impl GatewaySettings {
    /// Keys from `secrets_file`, else the file named by `PLAYBENCH_SECRETS_FILE`,
    /// else the `keys_env` variable. Error messages never include key text.
    pub fn load_keys(&self, base_dir: &Path) -> Result<Vec<ApiKey>, ConfigError> {
        let from_file = |path: PathBuf| -> Result<Vec<ApiKey>, ConfigError> {
            let text = read(&path)?;
            let keys = parse_keys(&text);
            if keys.is_empty() {
                return Err(ConfigError::NoKeys(format!("secrets file {} holds no keys", path.display())));
            }
            Ok(keys)
        };
        if let Some(p) = &self.secrets_file {
            return from_file(if p.is_absolute() { p.clone() } else { base_dir.join(p) });
        }
        if let Some(p) = std::env::var_os(SECRETS_FILE_ENV).filter(|v| !v.is_empty()) {
            return from_file(PathBuf::from(p));
        }
        let var = self.keys_env.as_deref().unwrap_or(DEFAULT_KEYS_ENV);
        let keys = std::env::var(var).map(|v| parse_keys(&v)).unwrap_or_default();
        if keys.is_empty() {
            return Err(ConfigError::NoKeys(format!(
                "set {var} (comma separated) or point {SECRETS_FILE_ENV} at a secrets file"
            )));
        }
        Ok(keys)
    }

    pub fn gateway_config(&self, api_keys: Vec<ApiKey>) -> GatewayConfig {
        GatewayConfig {
            endpoint_url: self.endpoint.clone(),
            api_keys,
            rotation: self.rotation,
            max_in_flight: self.max_in_flight,
            retry: self.retry,
            timeout_ms: self.timeout_ms,
        }
    }
}

/// The part of an experiment that defines what was played; stored in every
/// transcript header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSnapshot {
    pub experiment_id: String,
    pub game: Game,
    pub players: PerSeat<PlayerSpec>,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub audit_prompts: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gateway: Option<GatewaySettings>,
}

impl ExperimentSnapshot {
    /// Same game, players, mode and seed.
    pub fn same_experiment(&self, other: &ExperimentSnapshot) -> bool {
        self.experiment_id == other.experiment_id
            && self.game == other.game
            && self.players == other.players
            && self.mode == other.mode
            && self.seed == other.seed
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment_id: String,
    pub game: Game,
    pub players: PerSeat<PlayerSpec>,
    pub mode: Mode,
    /// Master seed for scripted randomness.
    pub seed: Option<u64>,
    pub gateway: Option<GatewaySettings>,
    pub output: Option<PathBuf>,
    pub audit_prompts: bool,
    pub templates_dir: Option<PathBuf>,
    /// Directory relative paths are resolved against.
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn new(experiment_id: &str, game: Game, player1: PlayerSpec, player2: PlayerSpec, mode: Mode) -> Self {
        ExperimentConfig {
            experiment_id: experiment_id.to_string(),
            game,
            players: PerSeat::new(player1, player2),
            mode,
            seed: None,
            gateway: None,
            output: None,
            audit_prompts: false,
            templates_dir: None,
            base_dir: PathBuf::from("."),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn snapshot(&self) -> ExperimentSnapshot {
        ExperimentSnapshot {
            experiment_id: self.experiment_id.clone(),
            game: self.game.clone(),
            players: self.players.clone(),
            mode: self.mode,
            seed: self.seed,
            audit_prompts: self.audit_prompts,
            gateway: self.gateway.clone(),
        }
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn has_llm_player(&self) -> bool {
        self.players.first.is_llm() || self.players.second.is_llm()
    }

    /// Base seed a seat's scripted randomness is derived from.
    pub fn seat_seed(&self, seat: Seat) -> Option<u64> {
        self.players[seat].own_seed().or(self.seed)
    }

    /// Checks everything that can be checked without touching the network.
    pub fn validate(&self, registry: &StrategyRegistry, catalog: &PromptCatalog) -> Result<(), ConfigError> {
        if self.experiment_id.trim().is_empty() {
            return Err(ConfigError::Invalid("experiment_id is empty".into()));
        }
        if self.mode.size() == 0 {
            return Err(ConfigError::Invalid(match self.mode {
                Mode::OneShot { .. } => "mode.simulations must be at least 1".into(),
                Mode::Repeated { .. } => "mode.rounds must be at least 1".into(),
            }));
        }
        for seat in Seat::BOTH {
            match &self.players[seat] {
                PlayerSpec::Scripted { strategy, params } => {
                    let player_err = |source| ConfigError::Player { seat, source };
                    let s = registry.resolve(strategy, &self.game).map_err(player_err)?;
                    s.validate(params, &self.game).map_err(player_err)?;
                    if s.randomized() && self.seat_seed(seat).is_none() {
                        return Err(ConfigError::Invalid(format!(
                            "{seat}: strategy '{strategy}' is randomized and needs a seed (set `seed` or player params.seed)"
                        )));
                    }
                }
                PlayerSpec::Llm { template, model } => {
                    let t = catalog.get(template).map_err(|source| ConfigError::Prompt { seat, source })?;
                    if t.game_name != self.game.name() {
                        return Err(ConfigError::Prompt {
                            seat,
                            source: PromptError::GameMismatch {
                                id: t.template_id.clone(),
                                expected: t.game_name.clone(),
                                actual: self.game.name().to_string(),
                            },
                        });
                    }
                    if !(model.temperature.is_finite() && model.temperature >= 0.0) {
                        return Err(ConfigError::Invalid(format!("{seat}: temperature must be >= 0")));
                    }
                    if model.model.trim().is_empty() {
                        return Err(ConfigError::Invalid(format!("{seat}: model name is empty")));
                    }
                }
            }
        }
        if self.has_llm_player() {
            let g = self
                .gateway
                .as_ref()
                .ok_or_else(|| ConfigError::Invalid("LLM players need a [gateway] section".into()))?;
            if g.max_in_flight == 0 || g.timeout_ms == 0 || g.retry.max_attempts == 0 {
                return Err(ConfigError::Invalid(
                    "gateway max_in_flight, timeout_ms and retry.max_attempts must be positive".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentFile {
    schema_version: u32,
    experiment_id: String,
    #[serde(default)]
    game: Option<String>,
    #[serde(default)]
    game_file: Option<PathBuf>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    output: Option<PathBuf>,
    #[serde(default)]
    audit_prompts: bool,
    #[serde(default)]
    templates_dir: Option<PathBuf>,
    mode: Mode,
    player1: PlayerSpec,
    player2: PlayerSpec,
    #[serde(default)]
    gateway: Option<GatewaySettings>,
}

fn default_report_ties() -> bool {
    true
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GameFile {
    schema_version: u32,
    name: String,
    actions: Vec<Action>,
    /// Row-major `[[p1, p2], ...]` cells; values are integers or "n/d" strings.
    payoff: Vec<Vec<(Points, Points)>>,
    #[serde(default)]
    tie_rule: TieRule,
    #[serde(default = "default_report_ties")]
    report_ties: bool,
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn check_version(path: &Path, found: u32) -> Result<(), ConfigError> {
    if found != CONFIG_SCHEMA_VERSION {
        return Err(ConfigError::Version {
            path: path.display().to_string(),
            found,
            supported: CONFIG_SCHEMA_VERSION,
        });
    }
    Ok(())
}

pub fn parse_game(text: &str, origin: &str) -> Result<Game, ConfigError> {
    let f: GameFile = toml::from_str(text).map_err(|e| ConfigError::Parse {
        path: origin.to_string(),
        message: e.to_string(),
    })?;
    check_version(Path::new(origin), f.schema_version)?;
    Ok(Game::new(f.name, f.actions, f.payoff, f.tie_rule, f.report_ties)?)
}

pub fn load_game(path: &Path) -> Result<Game, ConfigError> {
    parse_game(&read(path)?, &path.display().to_string())
}

/// Renders a game back into the game-file format.
pub fn game_to_toml(game: &Game) -> String {
    let file = GameFile {
        schema_version: CONFIG_SCHEMA_VERSION,
        name: game.name().to_string(),
        actions: game.actions().to_vec(),
        payoff: game
            .action_ids()
            .map(|r| game.action_ids().map(|c| game.evaluate(r, c).expect("own ids")).collect())
            .collect(),
        tie_rule: game.tie_rule(),
        report_ties: game.report_ties(),
    };
    toml::to_string(&file).expect("game serializes")
}

/// Parses an experiment file without validating strategies or templates.
pub fn parse_experiment(text: &str, origin: &Path) -> Result<ExperimentConfig, ConfigError> {
    let f: ExperimentFile = toml::from_str(text).map_err(|e| ConfigError::Parse {
        path: origin.display().to_string(),
        message: e.to_string(),
    })?;
    check_version(origin, f.schema_version)?;
    let base_dir = origin.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    let game = match (f.game, f.game_file) {
        (Some(name), None) => Game::builtin(&name)?,
        (None, Some(p)) => {
            let p = if p.is_absolute() { p } else { base_dir.join(p) };
            load_game(&p)?
        }
        (None, None) => return Err(ConfigError::Invalid("one of `game` or `game_file` is required".into())),
        (Some(_), Some(_)) => return Err(ConfigError::Invalid("set only one of `game` and `game_file`".into())),
    };
    Ok(ExperimentConfig {
        experiment_id: f.experiment_id,
        game,
        players: PerSeat::new(f.player1, f.player2),
        mode: f.mode,
        seed: f.seed,
        gateway: f.gateway,
        output: f.output,
        audit_prompts: f.audit_prompts,
        templates_dir: f.templates_dir,
        base_dir,
    })
}

/// Reads and fully validates an experiment file against the builtin
/// strategies, the shipped templates and any `templates_dir`.
/// Parses an experiment file without validating it, so callers can apply
/// overrides first.
pub fn read_experiment(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    parse_experiment(&read(path)?, path)
}

pub fn load_experiment(path: &Path) -> Result<(ExperimentConfig, PromptCatalog), ConfigError> {
    let cfg = read_experiment(path)?;
    let mut catalog = PromptCatalog::shipped();
    if let Some(dir) = &cfg.templates_dir {
        catalog.load_dir(&cfg.resolve(dir)).map_err(ConfigError::Templates)?;
    }
    cfg.validate(&StrategyRegistry::with_builtins(), &catalog)?;
    Ok((cfg, catalog))
}
