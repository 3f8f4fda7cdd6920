//! Stateless repeated matrix games. Their dynamics are known in closed form,
//! which makes them the substrate for exact best-response checks.

use super::{check_step, ActionSet, Game, GameSpec, GameState, RewardStructure, StepResult};
use crate::error::{Error, Result};
use crate::oracle::TabularModel;

/// Payoffs indexed `[agent action][opponent action]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bimatrix {
    pub agent: Vec<Vec<f64>>,
    pub opponent: Vec<Vec<f64>>,
}

impl Bimatrix {
    pub fn zero_sum(agent: Vec<Vec<f64>>) -> Self {
        let opponent = agent.iter().map(|row| row.iter().map(|v| -v).collect()).collect();
        Bimatrix { agent, opponent }
    }

    pub fn matching_pennies() -> Self {
        Self::zero_sum(vec![vec![1.0, -1.0], vec![-1.0, 1.0]])
    }

    /// The triangle game payoff table over touch states, agent = player 2.
    pub fn triangle_touches() -> Self {
        use super::triangle::PAYOFF;
        let agent = (0..4).map(|a| (0..4).map(|o| PAYOFF[o][a].1).collect()).collect();
        let opponent = (0..4).map(|a| (0..4).map(|o| PAYOFF[o][a].0).collect()).collect();
        Bimatrix { agent, opponent }
    }

    fn shape(&self) -> Result<(usize, usize)> {
        let rows = self.agent.len();
        let cols = self.agent.first().map_or(0, Vec::len);
        let rect = |m: &Vec<Vec<f64>>| m.len() == rows && m.iter().all(|r| r.len() == cols);
        if rows == 0 || cols == 0 || !rect(&self.agent) || !rect(&self.opponent) {
            return Err(Error::config("payoff matrices must be non-empty and have equal shapes"));
        }
        if self.agent.iter().chain(&self.opponent).flatten().any(|v| !v.is_finite()) {
            return Err(Error::config("payoff entries must be finite"));
        }
        Ok((rows, cols))
    }

    pub fn reward_structure(&self) -> RewardStructure {
        let pairs = || {
            self.agent
                .iter()
                .flatten()
                .zip(self.opponent.iter().flatten())
        };
        if pairs().all(|(a, o)| a + o == 0.0) {
            RewardStructure::ZeroSum
        } else if pairs().all(|(a, o)| a == o) {
            RewardStructure::Cooperative
        } else {
            RewardStructure::GeneralSum
        }
    }
}

#[derive(Debug, Clone)]
pub struct MatrixGame {
    spec: GameSpec,
    payoff: Bimatrix,
    state: GameState,
}

/// Builds a repeated matrix game with a constant one-dimensional observation.
pub fn tabular_game(payoff: Bimatrix, horizon: usize) -> Result<MatrixGame> {
    let (rows, cols) = payoff.shape()?;
    if horizon == 0 {
        return Err(Error::config("horizon must be positive"));
    }
    let spec = GameSpec {
        name: "matrix".into(),
        state_dim: 1,
        agent_actions: ActionSet::simple(rows),
        opponent_actions: ActionSet::simple(cols),
        episode_len: horizon,
        reward_structure: payoff.reward_structure(),
    };
    Ok(MatrixGame {
        spec,
        payoff,
        state: GameState { observation: vec![1.0], t: 0, done: false },
    })
}

impl MatrixGame {
    pub fn matching_pennies(horizon: usize) -> Self {
        tabular_game(Bimatrix::matching_pennies(), horizon).expect("valid payoff")
    }

    pub fn payoff(&self) -> &Bimatrix {
        &self.payoff
    }

    /// (agent reward, opponent reward) for one joint action.
    pub fn rewards(&self, a: usize, a_o: usize) -> (f64, f64) {
        (self.payoff.agent[a][a_o], self.payoff.opponent[a][a_o])
    }

    /// Exact single-state model of this game.
    pub fn to_tabular(&self) -> TabularModel {
        let (na, no) = (self.spec.n_agent_actions(), self.spec.n_opponent_actions());
        TabularModel::from_fn(1, na, no, |_, _, _| vec![1.0], |_, a, o| self.rewards(a, o))
    }
}

impl Game for MatrixGame {
    fn spec(&self) -> &GameSpec {
        &self.spec
    }

    fn reset(&mut self, _seed: u64) -> GameState {
        self.state = GameState { observation: vec![1.0], t: 0, done: false };
        self.state.clone()
    }

    fn step(&mut self, a: usize, a_o: usize) -> Result<StepResult> {
        check_step(&self.spec, &self.state, a, a_o)?;
        let (r, r_o) = self.rewards(a, a_o);
        let t = self.state.t + 1;
        let done = t >= self.spec.episode_len;
        self.state = GameState { observation: vec![1.0], t, done };
        Ok(StepResult { next_state: self.state.clone(), r, r_o, done, aux: 0.0 })
    }

    fn state(&self) -> &GameState {
        &self.state
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matching_pennies_is_zero_sum_2x2() {
        let game = MatrixGame::matching_pennies(1);
        let spec = game.spec();
        assert_eq!(spec.reward_structure, RewardStructure::ZeroSum);
        assert_eq!((spec.n_agent_actions(), spec.n_opponent_actions()), (2, 2));
        assert_eq!(spec.episode_len, 1);
    }

    #[test]
    fn zero_payoff_gives_zero_rewards() {
        let mut game = tabular_game(Bimatrix::zero_sum(vec![vec![0.0; 3]; 3]), 4).unwrap();
        game.reset(0);
        for a in 0..3 {
            for o in 0..3 {
                game.reset(0);
                let res = game.step(a, o).unwrap();
                assert_eq!((res.r, res.r_o), (0.0, 0.0));
            }
        }
    }

    #[test]
    fn triangle_table_is_zero_sum_in_every_entry() {
        let payoff = Bimatrix::triangle_touches();
        let game = tabular_game(payoff.clone(), 1).unwrap();
        assert_eq!(game.spec().reward_structure, RewardStructure::ZeroSum);
        let mut checked = 0;
        for a in 0..4 {
            for o in 0..4 {
                assert_eq!(payoff.agent[a][o] + payoff.opponent[a][o], 0.0);
                checked += 1;
            }
        }
        assert_eq!(checked, 16);
        // Agent at T3 against player 1 at T1 wins.
        assert_eq!(payoff.agent[3][1], 1.0);
    }

    #[test]
    fn rejects_ragged_or_non_finite_payoffs() {
        assert!(tabular_game(Bimatrix::zero_sum(vec![vec![1.0, 2.0], vec![1.0]]), 1).is_err());
        assert!(tabular_game(Bimatrix::zero_sum(vec![vec![f64::NAN]]), 1).is_err());
    }

    #[test]
    fn cooperative_structure_detected() {
        let m = vec![vec![1.0, 0.0], vec![0.0, 2.0]];
        let game = tabular_game(Bimatrix { agent: m.clone(), opponent: m }, 3).unwrap();
        assert_eq!(game.spec().reward_structure, RewardStructure::Cooperative);
    }
}
