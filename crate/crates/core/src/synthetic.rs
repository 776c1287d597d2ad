//! Transcripts built from move lists, for checking analyses against known counts.

use crate::config::{ExperimentConfig, Mode};
use crate::engine::{code_version, MESSAGE_SHAPE};
use crate::game::Game;
use crate::players::PlayerSpec;
use crate::seeds::RNG_DESCRIPTION;
use crate::transcript::{Header, RoundRecord, Termination, Transcript, SCHEMA_VERSION};

fn header(game: &Game, mode: Mode, simulation: Option<u32>) -> Header {
    let cfg = ExperimentConfig::new(
        "synthetic",
        game.clone(),
        PlayerSpec::scripted("synthetic"),
        PlayerSpec::scripted("synthetic"),
        mode,
    );
    Header {
        schema_version: SCHEMA_VERSION,
        experiment_id: cfg.experiment_id.clone(),
        config: cfg.snapshot(),
        templates: Default::default(),
        code_version: code_version(),
        started_at: None,
        message_shape: MESSAGE_SHAPE.to_string(),
        rng: RNG_DESCRIPTION.to_string(),
        simulation,
    }
}

/// One completed single-round transcript per `(player1, player2)` pair.
///
/// Panics if a symbol is not in the game.
pub fn one_shot_set(game: &Game, moves: &[(char, char)]) -> Vec<Transcript> {
    let mode = Mode::OneShot {
        simulations: moves.len() as u32,
    };
    moves
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| Transcript {
            header: header(game, mode, Some(i as u32 + 1)),
            rounds: vec![RoundRecord::scored(game, 1, a, b).expect("symbols in game")],
            termination: Termination::Completed,
        })
        .collect()
}

/// A completed repeated game with one round per pair.
pub fn repeated(game: &Game, moves: &[(char, char)]) -> Transcript {
    let rounds = moves
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| RoundRecord::scored(game, i as u32 + 1, a, b).expect("symbols in game"))
        .collect::<Vec<_>>();
    Transcript {
        header: header(
            game,
            Mode::Repeated {
                rounds: rounds.len() as u32,
            },
            None,
        ),
        rounds,
        termination: Termination::Completed,
    }
}
