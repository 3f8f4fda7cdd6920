//! Coin Game on a 3x3 torus.
//!
//! Red (the agent) and blue (the opponent) move simultaneously. Stepping onto
//! the coin collects it for +1; collecting a coin of the other player's colour
//! also costs the other player 2. A collected coin respawns immediately with a
//! random colour on a random cell occupied by neither player. With a shared
//! reward both sides receive the sum of the individual rewards.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_step, one_hot_into, ActionSet, Game, GameSpec, GameState, RewardStructure, StepResult};
use crate::error::Result;

pub const GRID: usize = 3;
pub const CELLS: usize = GRID * GRID;
pub const N_ACTIONS: usize = 4;
pub const STATE_DIM: usize = 4 * CELLS;
pub const EPISODE_LEN: usize = 150;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Player {
    Red,
    Blue,
}

/// Cell reached from `cell` by action {0: up, 1: down, 2: left, 3: right}, wrapping around.
pub fn move_on_torus(cell: usize, action: usize) -> usize {
    let (x, y) = (cell % GRID, cell / GRID);
    let (x, y) = match action {
        0 => (x, (y + GRID - 1) % GRID),
        1 => (x, (y + 1) % GRID),
        2 => ((x + GRID - 1) % GRID, y),
        _ => ((x + 1) % GRID, y),
    };
    y * GRID + x
}

/// Shortest-path torus action towards `target`, or `None` when already there.
pub fn greedy_action(from: usize, target: usize) -> Option<usize> {
    if from == target {
        return None;
    }
    let (fx, fy) = ((from % GRID) as isize, (from / GRID) as isize);
    let (tx, ty) = ((target % GRID) as isize, (target / GRID) as isize);
    let dx = (tx - fx).rem_euclid(GRID as isize);
    let dy = (ty - fy).rem_euclid(GRID as isize);
    Some(if dx != 0 {
        if dx == 1 { 3 } else { 2 }
    } else if dy == 1 {
        1
    } else {
        0
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CoinTally {
    pub red_collected: u32,
    pub blue_collected: u32,
    /// Collections of the other player's colour.
    pub red_mismatched: u32,
    pub blue_mismatched: u32,
}

#[derive(Debug, Clone)]
pub struct CoinGame {
    spec: GameSpec,
    shared_reward: bool,
    red: usize,
    blue: usize,
    coin: usize,
    coin_color: Player,
    rng: ChaCha8Rng,
    state: GameState,
    tally: CoinTally,
    last_individual: (f64, f64),
}

impl CoinGame {
    pub fn new(shared_reward: bool) -> Self {
        Self::with_episode_len(EPISODE_LEN, shared_reward)
    }

    pub fn with_episode_len(episode_len: usize, shared_reward: bool) -> Self {
        let spec = GameSpec {
            name: "coin".into(),
            state_dim: STATE_DIM,
            agent_actions: ActionSet::simple(N_ACTIONS),
            opponent_actions: ActionSet::simple(N_ACTIONS),
            episode_len,
            reward_structure: if shared_reward {
                RewardStructure::Cooperative
            } else {
                RewardStructure::GeneralSum
            },
        };
        let mut game = CoinGame {
            spec,
            shared_reward,
            red: 0,
            blue: 1,
            coin: 2,
            coin_color: Player::Red,
            rng: ChaCha8Rng::seed_from_u64(0),
            state: GameState { observation: Vec::new(), t: 0, done: false },
            tally: CoinTally::default(),
            last_individual: (0.0, 0.0),
        };
        game.state.observation = game.observe(Player::Red);
        game
    }

    pub fn positions(&self) -> (usize, usize, usize, Player) {
        (self.red, self.blue, self.coin, self.coin_color)
    }

    pub fn set_positions(&mut self, red: usize, blue: usize, coin: usize, coin_color: Player) {
        self.red = red;
        self.blue = blue;
        self.coin = coin;
        self.coin_color = coin_color;
        self.state.observation = self.observe(Player::Red);
    }

    pub fn tally(&self) -> CoinTally {
        self.tally
    }

    /// Individual (red, blue) rewards of the last step, before any sharing.
    pub fn last_individual_rewards(&self) -> (f64, f64) {
        self.last_individual
    }

    /// Observation from one player's side: own position, other position,
    /// own-colour coin, other-colour coin (each a one-hot over the cells).
    pub fn observe(&self, me: Player) -> Vec<f64> {
        let (own, other) = match me {
            Player::Red => (self.red, self.blue),
            Player::Blue => (self.blue, self.red),
        };
        let mut obs = Vec::with_capacity(STATE_DIM);
        one_hot_into(&mut obs, own, CELLS);
        one_hot_into(&mut obs, other, CELLS);
        if self.coin_color == me {
            one_hot_into(&mut obs, self.coin, CELLS);
            obs.extend([0.0; CELLS]);
        } else {
            obs.extend([0.0; CELLS]);
            one_hot_into(&mut obs, self.coin, CELLS);
        }
        obs
    }

    fn place_coin(&mut self) {
        let free: Vec<usize> = (0..CELLS).filter(|&c| c != self.red && c != self.blue).collect();
        self.coin = free[self.rng.gen_range(0..free.len())];
        self.coin_color = if self.rng.gen_bool(0.5) { Player::Red } else { Player::Blue };
    }
}

impl Game for CoinGame {
    fn spec(&self) -> &GameSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> GameState {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.red = self.rng.gen_range(0..CELLS);
        self.blue = (self.red + self.rng.gen_range(1..CELLS)) % CELLS;
        self.place_coin();
        self.tally = CoinTally::default();
        self.last_individual = (0.0, 0.0);
        self.state = GameState { observation: self.observe(Player::Red), t: 0, done: false };
        self.state.clone()
    }

    fn step(&mut self, a: usize, a_o: usize) -> Result<StepResult> {
        check_step(&self.spec, &self.state, a, a_o)?;
        self.red = move_on_torus(self.red, a);
        self.blue = move_on_torus(self.blue, a_o);
        let (mut red_r, mut blue_r) = (0.0, 0.0);
        let red_hit = self.red == self.coin;
        let blue_hit = self.blue == self.coin;
        if red_hit {
            red_r += 1.0;
            self.tally.red_collected += 1;
            if self.coin_color == Player::Blue {
                blue_r -= 2.0;
                self.tally.red_mismatched += 1;
            }
        }
        if blue_hit {
            blue_r += 1.0;
            self.tally.blue_collected += 1;
            if self.coin_color == Player::Red {
                red_r -= 2.0;
                self.tally.blue_mismatched += 1;
            }
        }
        if red_hit || blue_hit {
            self.place_coin();
        }
        self.last_individual = (red_r, blue_r);
        let joint = red_r + blue_r;
        let (r, r_o) = if self.shared_reward { (joint, joint) } else { (red_r, blue_r) };
        let t = self.state.t + 1;
        let done = t >= self.spec.episode_len;
        self.state = GameState { observation: self.observe(Player::Red), t, done };
        Ok(StepResult { next_state: self.state.clone(), r, r_o, done, aux: joint })
    }

    fn state(&self) -> &GameState {
        &self.state
    }

    fn opponent_observation(&self) -> Vec<f64> {
        self.observe(Player::Blue)
    }
}
