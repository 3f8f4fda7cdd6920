//! Grid Pursuit: a prey (the agent) and three predators acting as one joint
//! opponent on a 7x7 grid. Every predator within Manhattan distance 1 of the
//! prey after a move counts as a touch: -1 to the prey, +1 to the predators.

use rand::{seq::index::sample, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_step, ActionSet, Game, GameSpec, GameState, RewardStructure, StepResult};
use crate::error::Result;

pub const GRID: i32 = 7;
pub const PREDATORS: usize = 3;
pub const MOVES: usize = 5;
pub const STATE_DIM: usize = 2 * (PREDATORS + 1);
pub const EPISODE_LEN: usize = 200;

fn step_cell(p: (i32, i32), action: usize) -> (i32, i32) {
    let (dx, dy) = match action {
        1 => (0, 1),
        2 => (0, -1),
        3 => (-1, 0),
        4 => (1, 0),
        _ => (0, 0),
    };
    ((p.0 + dx).clamp(0, GRID - 1), (p.1 + dy).clamp(0, GRID - 1))
}

#[derive(Debug, Clone)]
pub struct GridPursuit {
    spec: GameSpec,
    prey: (i32, i32),
    predators: [(i32, i32); PREDATORS],
    state: GameState,
}

impl GridPursuit {
    pub fn new() -> Self {
        Self::with_episode_len(EPISODE_LEN)
    }

    pub fn with_episode_len(episode_len: usize) -> Self {
        let spec = GameSpec {
            name: "pursuit".into(),
            state_dim: STATE_DIM,
            agent_actions: ActionSet::simple(MOVES),
            opponent_actions: ActionSet::product(vec![MOVES; PREDATORS]),
            episode_len,
            reward_structure: RewardStructure::ZeroSum,
        };
        let mut game = GridPursuit {
            spec,
            prey: (3, 3),
            predators: [(0, 0), (6, 0), (0, 6)],
            state: GameState { observation: Vec::new(), t: 0, done: false },
        };
        game.state.observation = game.observe();
        game
    }

    pub fn set_positions(&mut self, prey: (i32, i32), predators: [(i32, i32); PREDATORS]) {
        self.prey = prey;
        self.predators = predators;
        self.state.observation = self.observe();
    }

    pub fn touches(&self) -> usize {
        self.predators
            .iter()
            .filter(|p| (p.0 - self.prey.0).abs() + (p.1 - self.prey.1).abs() <= 1)
            .count()
    }

    fn observe(&self) -> Vec<f64> {
        let scale = (GRID - 1) as f64;
        std::iter::once(self.prey)
            .chain(self.predators.iter().copied())
            .flat_map(|(x, y)| [x as f64 / scale, y as f64 / scale])
            .collect()
    }
}

impl Default for GridPursuit {
    fn default() -> Self {
        Self::new()
    }
}

impl Game for GridPursuit {
    fn spec(&self) -> &GameSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> GameState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cells = sample(&mut rng, (GRID * GRID) as usize, PREDATORS + 1);
        let to_xy = |c: usize| ((c as i32) % GRID, (c as i32) / GRID);
        self.prey = to_xy(cells.index(0));
        for i in 0..PREDATORS {
            self.predators[i] = to_xy(cells.index(i + 1));
        }
        self.state = GameState { observation: self.observe(), t: 0, done: false };
        self.state.clone()
    }

    fn step(&mut self, a: usize, a_o: usize) -> Result<StepResult> {
        check_step(&self.spec, &self.state, a, a_o)?;
        self.prey = step_cell(self.prey, a);
        for (p, m) in self.predators.iter_mut().zip(self.spec.opponent_actions.decode(a_o)) {
            *p = step_cell(*p, m);
        }
        let touches = self.touches() as f64;
        let t = self.state.t + 1;
        let done = t >= self.spec.episode_len;
        self.state = GameState { observation: self.observe(), t, done };
        Ok(StepResult { next_state: self.state.clone(), r: -touches, r_o: touches, done, aux: touches })
    }

    fn state(&self) -> &GameState {
        &self.state
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn joint_opponent_has_125_actions() {
        let game = GridPursuit::new();
        assert_eq!(game.spec().n_opponent_actions(), 125);
        assert_eq!(game.spec().episode_len, 200);
    }

    #[test]
    fn adjacent_predators_touch() {
        let mut game = GridPursuit::new();
        game.reset(0);
        game.set_positions((3, 3), [(3, 4), (2, 3), (6, 6)]);
        let res = game.step(0, 0).unwrap();
        assert_eq!(res.r, -2.0);
        assert_eq!(res.r_o, 2.0);
        assert_eq!(res.aux, 2.0);
    }

    #[test]
    fn reset_uses_distinct_cells() {
        let mut game = GridPursuit::new();
        for seed in 0..100 {
            game.reset(seed);
            let mut cells = vec![game.prey];
            cells.extend(game.predators);
            cells.sort();
            cells.dedup();
            assert_eq!(cells.len(), 4);
        }
    }

    proptest! {
        #[test]
        fn zero_sum_every_step(seed in any::<u64>(), acts in proptest::collection::vec((0usize..5, 0usize..125), 60)) {
            let mut game = GridPursuit::new();
            game.reset(seed);
            for (a, b) in acts {
                let res = game.step(a, b).unwrap();
                prop_assert_eq!(res.r + res.r_o, 0.0);
                prop_assert!(res.next_state.observation.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }
}
