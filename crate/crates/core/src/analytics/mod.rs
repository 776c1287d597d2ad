//! Move distributions, uniformity ranges, joint-outcome tables, win
//! milestones and early/late splits over recorded games.
//!
//! Counting is exact; percentages are formatted only when rendered.

mod ci;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ci::{uniform_ci, CiMethod, Correction, Interval, UniformTestConfig};

use crate::game::{Game, Points};
use crate::transcript::{PerSeat, RoundRecord, Seat, Transcript};

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("nothing to analyse: {0}")]
    Empty(String),
    #[error("transcripts mix games '{0}' and '{1}'")]
    MixedGames(String, String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// One observation per player per game.
    #[default]
    Pooled,
    Player(Seat),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionStat {
    pub symbol: char,
    pub label: String,
    pub count: u64,
    /// `count / n` as a float, for tooling. Use [`ActionStat::exact`] for math.
    pub proportion: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub significant: bool,
}

impl ActionStat {
    pub fn exact(&self, n: u64) -> Ratio<u64> {
        Ratio::new(self.count, n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionStats {
    pub game: String,
    pub pooling: Pooling,
    /// Move observations.
    pub n: u64,
    /// Games (rounds) counted.
    pub games: u64,
    pub actions: Vec<ActionStat>,
    pub tie_count: u64,
    pub tie_rate: f64,
    /// Whether tables for this game show a tie column.
    pub report_ties: bool,
    pub scores: PerSeat<Points>,
    pub test: UniformTestConfig,
    pub interval: Interval,
    /// Aborted transcripts left out of the counts.
    #[serde(default)]
    pub excluded: u64,
}

impl DistributionStats {
    pub fn count(&self, symbol: char) -> Option<u64> {
        self.actions.iter().find(|a| a.symbol == symbol).map(|a| a.count)
    }

    pub fn tie_ratio(&self) -> Ratio<u64> {
        Ratio::new(self.tie_count, self.games)
    }

    /// Mean score per game over `per` games, e.g. points per 100 games.
    pub fn mean_score(&self, seat: Seat, per: u64) -> f64 {
        self.scores[seat].to_f64() * per as f64 / self.games as f64
    }
}

/// Checks the transcripts share a game and returns it with the completed ones.
fn homogeneous(transcripts: &[Transcript]) -> Result<(&Game, Vec<&Transcript>, u64), AnalyticsError> {
    let first = transcripts
        .first()
        .ok_or_else(|| AnalyticsError::Empty("no transcripts".into()))?;
    let game = first.game();
    for t in transcripts {
        if t.game() != game {
            return Err(AnalyticsError::MixedGames(game.name().into(), t.game().name().into()));
        }
    }
    let done: Vec<_> = transcripts.iter().filter(|t| t.is_completed()).collect();
    let excluded = (transcripts.len() - done.len()) as u64;
    Ok((game, done, excluded))
}

/// Distribution over an explicit set of rounds.
pub fn distribution_of<'a>(
    game: &Game,
    rounds: impl IntoIterator<Item = &'a RoundRecord>,
    pooling: Pooling,
    test: &UniformTestConfig,
) -> Result<DistributionStats, AnalyticsError> {
    let test = test.with_k(game.len() as u32);
    let mut counts = vec![0u64; game.len()];
    let mut games = 0u64;
    let mut ties = 0u64;
    let mut scores = PerSeat::new(Points::ZERO, Points::ZERO);
    for r in rounds {
        games += 1;
        let a = game.lookup(r.moves.first).map_err(|e| AnalyticsError::Invalid(e.to_string()))?;
        let b = game.lookup(r.moves.second).map_err(|e| AnalyticsError::Invalid(e.to_string()))?;
        match pooling {
            Pooling::Pooled => {
                counts[a.0] += 1;
                counts[b.0] += 1;
            }
            Pooling::Player(Seat::First) => counts[a.0] += 1,
            Pooling::Player(Seat::Second) => counts[b.0] += 1,
        }
        if game.is_tie(a, b).expect("ids from game") {
            ties += 1;
        }
        scores.first += r.payoffs.first;
        scores.second += r.payoffs.second;
    }
    if games == 0 {
        return Err(AnalyticsError::Empty("no completed games".into()));
    }
    let n: u64 = counts.iter().sum();
    let interval = uniform_ci(n, &test)?;
    let actions = game
        .action_ids()
        .map(|id| {
            let count = counts[id.0];
            let action = game.action(id);
            ActionStat {
                symbol: action.symbol,
                label: action.label.clone(),
                count,
                proportion: count as f64 / n as f64,
                ci_low: interval.low,
                ci_high: interval.high,
                significant: !interval.contains(count, n),
            }
        })
        .collect();
    Ok(DistributionStats {
        game: game.name().to_string(),
        pooling,
        n,
        games,
        actions,
        tie_count: ties,
        tie_rate: ties as f64 / games as f64,
        report_ties: game.report_ties(),
        scores,
        test,
        interval,
        excluded: 0,
    })
}

/// Counts every recorded move of the completed transcripts. Aborted
/// transcripts are skipped and reported in `excluded`.
pub fn distribution(
    transcripts: &[Transcript],
    pooling: Pooling,
    test: &UniformTestConfig,
) -> Result<DistributionStats, AnalyticsError> {
    let (game, done, excluded) = homogeneous(transcripts)?;
    let mut stats = distribution_of(game, done.iter().flat_map(|t| t.rounds.iter()), pooling, test)?;
    stats.excluded = excluded;
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeCell {
    /// Joint move, Player_1's symbol first, e.g. "CD".
    pub label: String,
    pub count: u64,
    pub proportion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeTable {
    pub game: String,
    pub games: u64,
    /// Row-major over the action alphabet.
    pub cells: Vec<OutcomeCell>,
    /// Summed from recorded payoffs.
    pub scores: PerSeat<Points>,
    #[serde(default)]
    pub excluded: u64,
}

impl OutcomeTable {
    pub fn count(&self, label: &str) -> Option<u64> {
        self.cells.iter().find(|c| c.label == label).map(|c| c.count)
    }
}

/// Joint-outcome distribution for two-action games such as the Prisoner's Dilemma.
pub fn pd_outcome_table(transcripts: &[Transcript]) -> Result<OutcomeTable, AnalyticsError> {
    let (game, done, excluded) = homogeneous(transcripts)?;
    if game.len() != 2 {
        return Err(AnalyticsError::Invalid(format!(
            "joint-outcome table needs a 2-action game, '{}' has {}",
            game.name(),
            game.len()
        )));
    }
    let mut counts = [0u64; 4];
    let mut scores = PerSeat::new(Points::ZERO, Points::ZERO);
    let mut games = 0;
    for r in done.iter().flat_map(|t| t.rounds.iter()) {
        let a = game.lookup(r.moves.first).map_err(|e| AnalyticsError::Invalid(e.to_string()))?;
        let b = game.lookup(r.moves.second).map_err(|e| AnalyticsError::Invalid(e.to_string()))?;
        counts[a.0 * 2 + b.0] += 1;
        scores.first += r.payoffs.first;
        scores.second += r.payoffs.second;
        games += 1;
    }
    if games == 0 {
        return Err(AnalyticsError::Empty("no completed games".into()));
    }
    let cells = game
        .action_ids()
        .flat_map(|a| game.action_ids().map(move |b| (a, b)))
        .map(|(a, b)| {
            let count = counts[a.0 * 2 + b.0];
            OutcomeCell {
                label: format!("{}{}", game.symbol(a), game.symbol(b)),
                count,
                proportion: count as f64 / games as f64,
            }
        })
        .collect();
    Ok(OutcomeTable {
        game: game.name().to_string(),
        games,
        cells,
        scores,
        excluded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MilestoneEntry {
    /// Game at which cumulative wins first reached the threshold.
    pub game: Option<u32>,
    /// Games since the previous threshold was reached.
    pub increment: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MilestoneRow {
    pub threshold: u32,
    pub players: PerSeat<MilestoneEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MilestoneTable {
    pub rounds: u32,
    pub wins: PerSeat<u32>,
    pub rows: Vec<MilestoneRow>,
}

/// A win is a round whose payoff strictly exceeds the opponent's.
pub fn milestones(transcript: &Transcript, thresholds: &[u32]) -> Result<MilestoneTable, AnalyticsError> {
    if thresholds.is_empty() {
        return Err(AnalyticsError::Invalid("threshold list is empty".into()));
    }
    if thresholds[0] == 0 || thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(AnalyticsError::Invalid("thresholds must be positive and strictly increasing".into()));
    }
    let mut wins = PerSeat::new(0u32, 0u32);
    let mut reached: PerSeat<Vec<Option<u32>>> = PerSeat::new(vec![None; thresholds.len()], vec![None; thresholds.len()]);
    for r in &transcript.rounds {
        if let Some(seat) = r.winner() {
            let w = wins.get_mut(seat);
            *w += 1;
            if let Some(i) = thresholds.iter().position(|t| t == w) {
                reached.get_mut(seat)[i] = Some(r.round);
            }
        }
    }
    let rows = thresholds
        .iter()
        .enumerate()
        .map(|(i, &threshold)| {
            let entry = |seat: Seat| {
                let game = reached[seat][i];
                let previous = if i == 0 { Some(0) } else { reached[seat][i - 1] };
                MilestoneEntry {
                    game,
                    increment: game.zip(previous).map(|(g, p)| g - p),
                }
            };
            MilestoneRow {
                threshold,
                players: PerSeat::new(entry(Seat::First), entry(Seat::Second)),
            }
        })
        .collect();
    Ok(MilestoneTable {
        rounds: transcript.rounds.len() as u32,
        wins,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaritySplit {
    pub boundary: u32,
    pub early: DistributionStats,
    pub late: DistributionStats,
    /// Recomputed from raw counts over all rounds.
    pub total: DistributionStats,
}

/// Rounds `1..=boundary` against `boundary+1..`, each with its own range.
pub fn stationarity_split(
    transcript: &Transcript,
    boundary: u32,
    pooling: Pooling,
    test: &UniformTestConfig,
) -> Result<StationaritySplit, AnalyticsError> {
    if !transcript.is_completed() {
        return Err(AnalyticsError::Invalid("transcript was aborted".into()));
    }
    let n = transcript.rounds.len() as u32;
    if boundary < 1 || boundary >= n {
        return Err(AnalyticsError::Invalid(format!(
            "boundary {boundary} is outside 1..{} for a {n}-round game",
            n.saturating_sub(1)
        )));
    }
    let game = transcript.game();
    let (early, late) = transcript.rounds.split_at(boundary as usize);
    Ok(StationaritySplit {
        boundary,
        early: distribution_of(game, early, pooling, test)?,
        late: distribution_of(game, late, pooling, test)?,
        total: distribution_of(game, &transcript.rounds, pooling, test)?,
    })
}

/// Points expected from uniform play when a win scores 1 and anything else 0.
pub fn expected_uniform_score(n_games: u64) -> Points {
    Points::new(n_games as i64, 3).expect("positive denominator")
}

/// `count / n` as a percentage rounded half-up to `decimals` places, computed exactly.
pub fn percent(count: u64, n: u64, decimals: u32) -> String {
    if n == 0 {
        return "n/a".into();
    }
    let scale = 10u128.pow(decimals);
    let num = count as u128 * 100 * scale;
    let den = n as u128;
    let rounded = (2 * num + den) / (2 * den);
    if decimals == 0 {
        format!("{rounded}%")
    } else {
        let whole = rounded / scale;
        let frac = rounded % scale;
        format!("{whole}.{frac:0width$}%", width = decimals as usize)
    }
}
