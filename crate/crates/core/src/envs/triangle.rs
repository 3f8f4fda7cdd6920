//! Triangle Game: two particles in a square field with three landmarks at the
//! vertices of an equilateral triangle. The agent is player 2, the opponent
//! player 1. Each step both players move one of {stay, up, down, left, right}
//! and receive the payoff of their current touch states.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_step, one_hot_into, ActionSet, Game, GameSpec, GameState, RewardStructure, StepResult};
use crate::error::Result;

pub const DEFAULT_EPISODE_LEN: usize = 25;
pub const N_ACTIONS: usize = 5;
pub const STATE_DIM: usize = 12;

/// Reference values for the field geometry.
pub const SIDE_LENGTH: f64 = 0.6;
pub const TOUCH_RADIUS: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Touch {
    F,
    T1,
    T2,
    T3,
}

impl Touch {
    pub fn index(self) -> usize {
        self as usize
    }

    fn landmark(i: usize) -> Touch {
        [Touch::T1, Touch::T2, Touch::T3][i]
    }
}

/// (player 1, player 2) payoffs indexed by `[player 1 touch][player 2 touch]`.
pub const PAYOFF: [[(f64, f64); 4]; 4] = [
    [(0.0, 0.0), (-0.5, 0.5), (-0.5, 0.5), (-0.5, 0.5)],
    [(0.5, -0.5), (1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)],
    [(0.5, -0.5), (-1.0, 1.0), (1.0, -1.0), (1.0, -1.0)],
    [(0.5, -0.5), (1.0, -1.0), (-1.0, 1.0), (1.0, -1.0)],
];

pub fn payoff(player1: Touch, player2: Touch) -> (f64, f64) {
    PAYOFF[player1.index()][player2.index()]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleConfig {
    pub episode_len: usize,
    /// Field is `[-field_half, field_half]^2`.
    pub field_half: f64,
    pub step_size: f64,
}

impl Default for TriangleConfig {
    fn default() -> Self {
        TriangleConfig {
            episode_len: DEFAULT_EPISODE_LEN,
            field_half: 0.5,
            step_size: 0.05,
        }
    }
}

/// Landmark centres L1 (top), L2 (bottom left), L3 (bottom right), centred on the origin.
pub fn landmarks() -> [[f64; 2]; 3] {
    let r = SIDE_LENGTH / 3f64.sqrt();
    [
        [0.0, r],
        [-SIDE_LENGTH / 2.0, -r / 2.0],
        [SIDE_LENGTH / 2.0, -r / 2.0],
    ]
}

/// Strictly closer than the touch radius; ties go to the lowest landmark index.
pub fn triangle_touch(position: [f64; 2]) -> Touch {
    for (i, l) in landmarks().iter().enumerate() {
        let d = ((position[0] - l[0]).powi(2) + (position[1] - l[1]).powi(2)).sqrt();
        if d < TOUCH_RADIUS {
            return Touch::landmark(i);
        }
    }
    Touch::F
}

pub fn displacement(action: usize) -> [f64; 2] {
    match action {
        1 => [0.0, 1.0],
        2 => [0.0, -1.0],
        3 => [-1.0, 0.0],
        4 => [1.0, 0.0],
        _ => [0.0, 0.0],
    }
}

/// Indices of the observation layout.
pub mod layout {
    pub const AGENT_POS: usize = 0;
    pub const OPPONENT_POS: usize = 2;
    pub const AGENT_TOUCH: usize = 4;
    pub const OPPONENT_TOUCH: usize = 8;
}

#[derive(Debug, Clone)]
pub struct TriangleGame {
    cfg: TriangleConfig,
    spec: GameSpec,
    agent: [f64; 2],
    opponent: [f64; 2],
    state: GameState,
}

impl TriangleGame {
    pub fn new(cfg: TriangleConfig) -> Self {
        let spec = GameSpec {
            name: "triangle".into(),
            state_dim: STATE_DIM,
            agent_actions: ActionSet::simple(N_ACTIONS),
            opponent_actions: ActionSet::simple(N_ACTIONS),
            episode_len: cfg.episode_len,
            reward_structure: RewardStructure::ZeroSum,
        };
        let mut game = TriangleGame {
            cfg,
            spec,
            agent: [0.0; 2],
            opponent: [0.0; 2],
            state: GameState { observation: vec![0.0; STATE_DIM], t: 0, done: false },
        };
        game.state.observation = game.observe();
        game
    }

    pub fn positions(&self) -> ([f64; 2], [f64; 2]) {
        (self.agent, self.opponent)
    }

    /// Places both players explicitly; used by tests and scripted scenarios.
    pub fn set_positions(&mut self, agent: [f64; 2], opponent: [f64; 2]) {
        self.agent = self.clip(agent);
        self.opponent = self.clip(opponent);
        self.state.observation = self.observe();
    }

    fn clip(&self, p: [f64; 2]) -> [f64; 2] {
        let h = self.cfg.field_half;
        [p[0].clamp(-h, h), p[1].clamp(-h, h)]
    }

    fn observe(&self) -> Vec<f64> {
        let mut obs = Vec::with_capacity(STATE_DIM);
        obs.extend_from_slice(&self.agent);
        obs.extend_from_slice(&self.opponent);
        one_hot_into(&mut obs, triangle_touch(self.agent).index(), 4);
        one_hot_into(&mut obs, triangle_touch(self.opponent).index(), 4);
        obs
    }

    fn moved(&self, p: [f64; 2], action: usize) -> [f64; 2] {
        let d = displacement(action);
        self.clip([p[0] + self.cfg.step_size * d[0], p[1] + self.cfg.step_size * d[1]])
    }
}

impl Default for TriangleGame {
    fn default() -> Self {
        Self::new(TriangleConfig::default())
    }
}

impl Game for TriangleGame {
    fn spec(&self) -> &GameSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> GameState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = self.cfg.field_half;
        self.agent = [rng.gen_range(-h..=h), rng.gen_range(-h..=h)];
        self.opponent = [rng.gen_range(-h..=h), rng.gen_range(-h..=h)];
        self.state = GameState { observation: self.observe(), t: 0, done: false };
        self.state.clone()
    }

    fn step(&mut self, a: usize, a_o: usize) -> Result<StepResult> {
        check_step(&self.spec, &self.state, a, a_o)?;
        self.agent = self.moved(self.agent, a);
        self.opponent = self.moved(self.opponent, a_o);
        let (r_o, r) = payoff(triangle_touch(self.opponent), triangle_touch(self.agent));
        let t = self.state.t + 1;
        let done = t >= self.cfg.episode_len;
        self.state = GameState { observation: self.observe(), t, done };
        Ok(StepResult {
            next_state: self.state.clone(),
            r,
            r_o,
            done,
            aux: if r > 0.0 { 1.0 } else { 0.0 },
        })
    }

    fn state(&self) -> &GameState {
        &self.state
    }
}
