//! Symmetric two-player normal-form games.
//!
//! A [`Game`] is an ordered action alphabet plus a total payoff table over
//! (row action, column action) pairs. Row is always `Player_1`.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GameError {
    #[error("unknown action '{symbol}' for game '{game}'")]
    UnknownAction { symbol: String, game: String },
    #[error("unknown builtin game '{0}' (available: rps, pd)")]
    UnknownBuiltin(String),
    #[error("invalid game definition: {0}")]
    Invalid(String),
    #[error("invalid points value '{0}'")]
    BadPoints(String),
}

/// Exact, non-negative payoff amount.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Points(Ratio<i64>);

impl Points {
    pub const ZERO: Points = Points(Ratio::new_raw(0, 1));

    pub fn new(numer: i64, denom: i64) -> Result<Self, GameError> {
        if denom == 0 {
            return Err(GameError::BadPoints(format!("{numer}/{denom}")));
        }
        let r = Ratio::new(numer, denom);
        if r < Ratio::zero() {
            return Err(GameError::BadPoints(format!("{numer}/{denom}")));
        }
        Ok(Points(r))
    }

    pub fn whole(n: i64) -> Self {
        Points::new(n, 1).expect("whole points must be non-negative")
    }

    pub fn ratio(&self) -> Ratio<i64> {
        self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }
}

impl std::ops::Add for Points {
    type Output = Points;
    fn add(self, rhs: Points) -> Points {
        Points(self.0 + rhs.0)
    }
}

impl std::ops::AddAssign for Points {
    fn add_assign(&mut self, rhs: Points) {
        self.0 += rhs.0;
    }
}

impl std::iter::Sum for Points {
    fn sum<I: Iterator<Item = Points>>(iter: I) -> Points {
        iter.fold(Points::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for Points {
    /// Integers print bare ("3"), anything else as "n/d".
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl FromStr for Points {
    type Err = GameError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GameError::BadPoints(s.to_string());
        let s = s.trim();
        match s.split_once('/') {
            Some((n, d)) => {
                let n = n.trim().parse::<i64>().map_err(|_| bad())?;
                let d = d.trim().parse::<i64>().map_err(|_| bad())?;
                Points::new(n, d).map_err(|_| bad())
            }
            None => {
                let n = s.parse::<i64>().map_err(|_| bad())?;
                Points::new(n, 1).map_err(|_| bad())
            }
        }
    }
}

impl Serialize for Points {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.0.is_integer() {
            serializer.serialize_i64(*self.0.numer())
        } else {
            serializer.serialize_str(&self.to_string())
        }
    }
}

impl<'de> Deserialize<'de> for Points {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Int(n) => Points::new(n, 1).map_err(serde::de::Error::custom),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// One entry of a game's action alphabet.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub symbol: char,
    pub label: String,
}

/// Index of an action within its game's alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    /// A cell is a tie iff both players chose the same action.
    #[default]
    Identical,
    /// No cell counts as a tie.
    Never,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Game {
    name: String,
    actions: Vec<Action>,
    /// Row-major: `payoff[row][col] = (points to Player_1, points to Player_2)`.
    payoff: Vec<Vec<(Points, Points)>>,
    #[serde(default)]
    tie_rule: TieRule,
    /// Whether tie rates are meaningful for reports on this game.
    #[serde(default)]
    report_ties: bool,
}

impl Game {
    pub fn new(
        name: impl Into<String>,
        actions: Vec<Action>,
        payoff: Vec<Vec<(Points, Points)>>,
        tie_rule: TieRule,
        report_ties: bool,
    ) -> Result<Self, GameError> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(GameError::Invalid("game name is empty".into()));
        }
        if actions.is_empty() {
            return Err(GameError::Invalid(format!("game '{name}' has no actions")));
        }
        for (i, a) in actions.iter().enumerate() {
            if !a.symbol.is_ascii_uppercase() {
                return Err(GameError::Invalid(format!(
                    "action symbol '{}' must be a single uppercase letter",
                    a.symbol
                )));
            }
            if actions[..i].iter().any(|b| b.symbol == a.symbol) {
                return Err(GameError::Invalid(format!(
                    "duplicate action symbol '{}'",
                    a.symbol
                )));
            }
        }
        let k = actions.len();
        if payoff.len() != k || payoff.iter().any(|row| row.len() != k) {
            return Err(GameError::Invalid(format!(
                "payoff table for '{name}' must be {k}x{k}"
            )));
        }
        Ok(Game {
            name,
            actions,
            payoff,
            tie_rule,
            report_ties,
        })
    }

    /// Returns one of the builtin games: `"rps"` or `"pd"`.
    pub fn builtin(name: &str) -> Result<Game, GameError> {
        match name {
            "rps" => Ok(rock_paper_scissors()),
            "pd" => Ok(prisoners_dilemma()),
            other => Err(GameError::UnknownBuiltin(other.to_string())),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn action_ids(&self) -> impl Iterator<Item = ActionId> + '_ {
        (0..self.actions.len()).map(ActionId)
    }

    pub fn tie_rule(&self) -> TieRule {
        self.tie_rule
    }

    pub fn report_ties(&self) -> bool {
        self.report_ties
    }

    pub fn action(&self, id: ActionId) -> &Action {
        &self.actions[id.0]
    }

    pub fn symbol(&self, id: ActionId) -> char {
        self.actions[id.0].symbol
    }

    pub fn lookup(&self, symbol: char) -> Result<ActionId, GameError> {
        self.actions
            .iter()
            .position(|a| a.symbol == symbol)
            .map(ActionId)
            .ok_or_else(|| GameError::UnknownAction {
                symbol: symbol.to_string(),
                game: self.name.clone(),
            })
    }

    /// Looks up a symbol given as text; must be exactly one character.
    pub fn lookup_str(&self, symbol: &str) -> Result<ActionId, GameError> {
        let mut chars = symbol.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => self.lookup(c),
            _ => Err(GameError::UnknownAction {
                symbol: symbol.to_string(),
                game: self.name.clone(),
            }),
        }
    }

    fn check(&self, id: ActionId) -> Result<(), GameError> {
        if id.0 < self.actions.len() {
            Ok(())
        } else {
            Err(GameError::UnknownAction {
                symbol: format!("#{}", id.0),
                game: self.name.clone(),
            })
        }
    }

    pub fn evaluate(&self, row: ActionId, col: ActionId) -> Result<(Points, Points), GameError> {
        self.check(row)?;
        self.check(col)?;
        Ok(self.payoff[row.0][col.0])
    }

    /// Evaluates by symbol, rejecting symbols outside the alphabet.
    pub fn evaluate_symbols(&self, row: char, col: char) -> Result<(Points, Points), GameError> {
        let r = self.lookup(row)?;
        let c = self.lookup(col)?;
        self.evaluate(r, c)
    }

    pub fn is_tie(&self, row: ActionId, col: ActionId) -> Result<bool, GameError> {
        self.check(row)?;
        self.check(col)?;
        Ok(match self.tie_rule {
            TieRule::Identical => row == col,
            TieRule::Never => false,
        })
    }

    /// True if swapping the players transposes the payoff table.
    pub fn is_symmetric(&self) -> bool {
        let k = self.len();
        (0..k).all(|i| {
            (0..k).all(|j| {
                let (a, b) = self.payoff[i][j];
                let (c, d) = self.payoff[j][i];
                a == d && b == c
            })
        })
    }
}

fn act(symbol: char, label: &str) -> Action {
    Action {
        symbol,
        label: label.to_string(),
    }
}

fn cells(rows: &[&[(i64, i64)]]) -> Vec<Vec<(Points, Points)>> {
    rows.iter()
        .map(|r| {
            r.iter()
                .map(|&(a, b)| (Points::whole(a), Points::whole(b)))
                .collect()
        })
        .collect()
}

/// Rock-Paper-Scissors scored win=1, tie=0, loss=0.
pub fn rock_paper_scissors() -> Game {
    Game::new(
        "rps",
        vec![act('R', "Rock"), act('P', "Paper"), act('S', "Scissors")],
        cells(&[
            &[(0, 0), (0, 1), (1, 0)],
            &[(1, 0), (0, 0), (0, 1)],
            &[(0, 1), (1, 0), (0, 0)],
        ]),
        TieRule::Identical,
        true,
    )
    .expect("builtin rps is well-formed")
}

/// Prisoner's Dilemma with payoffs (3,3) / (0,10) / (10,0) / (1,1).
pub fn prisoners_dilemma() -> Game {
    Game::new(
        "pd",
        vec![act('C', "Cooperate"), act('D', "Defect")],
        cells(&[&[(3, 3), (0, 10)], &[(10, 0), (1, 1)]]),
        TieRule::Identical,
        false,
    )
    .expect("builtin pd is well-formed")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(g: &Game, a: char, b: char) -> (i64, i64) {
        let (x, y) = g.evaluate_symbols(a, b).unwrap();
        (*x.ratio().numer(), *y.ratio().numer())
    }

    #[test]
    fn rps_cells() {
        let g = rock_paper_scissors();
        assert_eq!(ev(&g, 'R', 'P'), (0, 1));
        assert_eq!(ev(&g, 'R', 'R'), (0, 0));
        assert_eq!(ev(&g, 'P', 'R'), (1, 0));
    }

    #[test]
    fn pd_cells() {
        let g = prisoners_dilemma();
        assert_eq!(ev(&g, 'D', 'C'), (10, 0));
        assert_eq!(ev(&g, 'C', 'C'), (3, 3));
        assert_eq!(ev(&g, 'D', 'D'), (1, 1));
    }

    #[test]
    fn unknown_symbol_names_game() {
        let g = rock_paper_scissors();
        let err = g.evaluate_symbols('Q', 'R').unwrap_err();
        assert_eq!(err.to_string(), "unknown action 'Q' for game 'rps'");
        assert!(g.is_tie(ActionId(7), ActionId(0)).is_err());
    }

    #[test]
    fn ties() {
        let g = rock_paper_scissors();
        let s = g.lookup('S').unwrap();
        let r = g.lookup('R').unwrap();
        assert!(g.is_tie(s, s).unwrap());
        assert!(!g.is_tie(r, s).unwrap());
        let pd = prisoners_dilemma();
        assert!(!pd.is_tie(pd.lookup('C').unwrap(), pd.lookup('D').unwrap()).unwrap());
    }

    #[test]
    fn rps_tie_and_win_structure() {
        let g = rock_paper_scissors();
        let mut ties = 0;
        for a in g.action_ids() {
            for b in g.action_ids() {
                let (x, y) = g.evaluate(a, b).unwrap();
                if g.is_tie(a, b).unwrap() {
                    ties += 1;
                    assert_eq!((x, y), (Points::ZERO, Points::ZERO));
                } else {
                    assert!(
                        (x, y) == (Points::whole(1), Points::ZERO)
                            || (x, y) == (Points::ZERO, Points::whole(1))
                    );
                }
            }
        }
        assert_eq!(ties, 3);
    }

    #[test]
    fn builtins_are_symmetric() {
        assert!(rock_paper_scissors().is_symmetric());
        assert!(prisoners_dilemma().is_symmetric());
    }

    #[test]
    fn unknown_builtin() {
        let err = Game::builtin("xyz").unwrap_err();
        assert!(err.to_string().contains("rps, pd"));
    }

    #[test]
    fn rejects_malformed_games() {
        let a = vec![act('A', "A"), act('A', "B")];
        assert!(Game::new("g", a, cells(&[&[(0, 0), (0, 0)], &[(0, 0), (0, 0)]]), TieRule::Identical, true).is_err());
        let a = vec![act('A', "A"), act('B', "B")];
        assert!(Game::new("g", a, cells(&[&[(0, 0), (0, 0)]]), TieRule::Identical, true).is_err());
        assert!(Game::new("g", vec![], vec![], TieRule::Identical, true).is_err());
        let a = vec![act('a', "lower")];
        assert!(Game::new("g", a, cells(&[&[(0, 0)]]), TieRule::Identical, true).is_err());
    }

    #[test]
    fn points_text_forms() {
        assert_eq!("3".parse::<Points>().unwrap(), Points::whole(3));
        assert_eq!("6/4".parse::<Points>().unwrap().to_string(), "3/2");
        assert!("-1".parse::<Points>().is_err());
        assert!("1/0".parse::<Points>().is_err());
        let json = serde_json::to_string(&vec![Points::whole(2), Points::new(1, 3).unwrap()]).unwrap();
        assert_eq!(json, r#"[2,"1/3"]"#);
        let back: Vec<Points> = serde_json::from_str(&json).unwrap();
        assert_eq!(back[1], Points::new(1, 3).unwrap());
    }
}
