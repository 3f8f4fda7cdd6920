//! Two-sided discrete-action games with seeded, exact dynamics.
//!
//! Every game is seen from the controlled agent's side: the agent picks `a`,
//! the (possibly joint) opponent picks `a_o`, and both rewards are reported.

pub mod coin;
pub mod matrix;
pub mod pursuit;
pub mod triangle;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use coin::CoinGame;
pub use matrix::{tabular_game, MatrixGame};
pub use pursuit::GridPursuit;
pub use triangle::TriangleGame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardStructure {
    ZeroSum,
    Cooperative,
    GeneralSum,
}

/// A finite action set, possibly the product of per-member sets of a joint opponent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSet {
    factors: Vec<usize>,
}

impl ActionSet {
    pub fn simple(n: usize) -> Self {
        ActionSet { factors: vec![n] }
    }

    pub fn product(factors: Vec<usize>) -> Self {
        ActionSet { factors }
    }

    pub fn len(&self) -> usize {
        self.factors.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    /// Mixed-radix decode with the first member as the least significant digit.
    pub fn decode(&self, mut id: usize) -> Vec<usize> {
        self.factors
            .iter()
            .map(|&n| {
                let d = id % n;
                id /= n;
                d
            })
            .collect()
    }

    pub fn encode(&self, parts: &[usize]) -> usize {
        parts
            .iter()
            .zip(&self.factors)
            .rev()
            .fold(0, |acc, (&p, &n)| acc * n + p)
    }

    pub fn contains(&self, id: usize) -> bool {
        id < self.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    pub name: String,
    pub state_dim: usize,
    pub agent_actions: ActionSet,
    pub opponent_actions: ActionSet,
    pub episode_len: usize,
    pub reward_structure: RewardStructure,
}

impl GameSpec {
    pub fn n_agent_actions(&self) -> usize {
        self.agent_actions.len()
    }

    pub fn n_opponent_actions(&self) -> usize {
        self.opponent_actions.len()
    }

    /// Checks a reward pair against the declared structure.
    pub fn rewards_consistent(&self, r: f64, r_o: f64) -> bool {
        match self.reward_structure {
            RewardStructure::ZeroSum => (r + r_o).abs() < 1e-12,
            RewardStructure::Cooperative => r == r_o,
            RewardStructure::GeneralSum => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameState {
    pub observation: Vec<f64>,
    pub t: usize,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_state: GameState,
    pub r: f64,
    pub r_o: f64,
    pub done: bool,
    /// Per-step auxiliary metric: touches in pursuit, joint score in the coin
    /// game, winning steps for the agent in the triangle game.
    pub aux: f64,
}

/// One experience tuple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub s: Vec<f64>,
    pub a: usize,
    pub a_o: usize,
    pub s_next: Vec<f64>,
    pub r: f64,
    pub r_o: f64,
}

pub trait Game: Send {
    fn spec(&self) -> &GameSpec;

    /// Deterministic for a given seed.
    fn reset(&mut self, seed: u64) -> GameState;

    fn step(&mut self, a: usize, a_o: usize) -> Result<StepResult>;

    fn state(&self) -> &GameState;

    /// The current observation from the opponent's side. Games with a
    /// symmetric perspective override this; the default is the shared one.
    fn opponent_observation(&self) -> Vec<f64> {
        self.state().observation.clone()
    }
}

pub(crate) fn check_step(spec: &GameSpec, state: &GameState, a: usize, a_o: usize) -> Result<()> {
    if state.done {
        return Err(Error::usage(format!("{}: step called after the episode ended", spec.name)));
    }
    if !spec.agent_actions.contains(a) || !spec.opponent_actions.contains(a_o) {
        return Err(Error::usage(format!(
            "{}: action ({a}, {a_o}) outside the action sets",
            spec.name
        )));
    }
    Ok(())
}

pub(crate) fn one_hot_into(out: &mut Vec<f64>, index: usize, n: usize) {
    out.extend((0..n).map(|i| if i == index { 1.0 } else { 0.0 }));
}

pub fn one_hot(index: usize, n: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(n);
    one_hot_into(&mut v, index, n);
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameName {
    Triangle,
    Coin,
    Pursuit,
    MatchingPennies,
}

impl std::str::FromStr for GameName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "triangle" => Ok(GameName::Triangle),
            "coin" => Ok(GameName::Coin),
            "pursuit" => Ok(GameName::Pursuit),
            "matching_pennies" => Ok(GameName::MatchingPennies),
            other => Err(Error::config(format!("unknown game {other:?}"))),
        }
    }
}

impl std::fmt::Display for GameName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GameName::Triangle => "triangle",
            GameName::Coin => "coin",
            GameName::Pursuit => "pursuit",
            GameName::MatchingPennies => "matching_pennies",
        })
    }
}

/// `game.*` config section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub name: GameName,
    pub seed: u64,
    pub episode_len: usize,
}

impl GameConfig {
    pub fn default_episode_len(name: GameName) -> usize {
        match name {
            GameName::Triangle => triangle::DEFAULT_EPISODE_LEN,
            GameName::Coin => coin::EPISODE_LEN,
            GameName::Pursuit => pursuit::EPISODE_LEN,
            GameName::MatchingPennies => 1,
        }
    }

    pub fn build(&self) -> Result<Box<dyn Game>> {
        if self.episode_len == 0 {
            return Err(Error::config("game.episode_len must be positive"));
        }
        Ok(match self.name {
            GameName::Triangle => Box::new(TriangleGame::new(triangle::TriangleConfig {
                episode_len: self.episode_len,
                ..Default::default()
            })),
            GameName::Coin => Box::new(CoinGame::with_episode_len(self.episode_len, true)),
            GameName::Pursuit => Box::new(GridPursuit::with_episode_len(self.episode_len)),
            GameName::MatchingPennies => Box::new(MatrixGame::matching_pennies(self.episode_len)),
        })
    }
}

/// Writes trajectories as CSV with columns `episode,t,s,a,a_o,r,r_o`.
/// The observation is flattened into one field with `;` between entries.
pub fn write_trajectory_csv<W: Write>(
    w: W,
    episodes: &[(usize, Vec<TransitionRecord>)],
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["episode", "t", "s", "a", "a_o", "r", "r_o"])?;
    for (episode, records) in episodes {
        for (t, rec) in records.iter().enumerate() {
            let s = rec
                .s
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(";");
            out.write_record([
                episode.to_string(),
                t.to_string(),
                s,
                rec.a.to_string(),
                rec.a_o.to_string(),
                rec.r.to_string(),
                rec.r_o.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}
