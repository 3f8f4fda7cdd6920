//! Coin Game self-play: two agents, each with its own policy, environment
//! model (trained online from its own side) and, optionally, opponent model.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};

use super::config::ExperimentConfig;
use super::derive_seed;
use super::pretrain::uniform_iop;
use crate::envs::coin::{greedy_action, CoinGame};
use crate::envs::{Game, GameName, TransitionRecord};
use crate::error::{Error, Result};
use crate::opmodel::{train_env_model, EnvModel, Mbom};
use crate::ppo::{conditioning, ppo_update, PpoLearner, RolloutBuffer};
use crate::SimRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfPlayConfig {
    pub iterations: usize,
    /// Transitions each environment model trains on, newest kept.
    pub replay: usize,
    pub env_epochs: usize,
    pub env_lr: f64,
    /// Opponent models on both sides; otherwise plain PPO.
    pub opponent_model: bool,
}

impl Default for SelfPlayConfig {
    fn default() -> Self {
        SelfPlayConfig { iterations: 200, replay: 3000, env_epochs: 1, env_lr: 0.001, opponent_model: true }
    }
}

struct Side {
    learner: PpoLearner,
    mbom: Option<Mbom>,
    env: EnvModel,
    replay: VecDeque<TransitionRecord>,
    buffer: RolloutBuffer,
    recent: Vec<(Vec<f64>, usize)>,
}

impl Side {
    fn new(cfg: &ExperimentConfig, sp: &SelfPlayConfig, sd: usize, n: usize, rng: &mut SimRng) -> Result<Self> {
        let cond = if sp.opponent_model { n } else { 0 };
        let learner = PpoLearner::build(sd, cond, n, &cfg.hidden, cfg.ppo, rng)?;
        let mbom = if sp.opponent_model {
            Some(Mbom::new(cfg.mbom_for_variant(), uniform_iop(sd, n, &cfg.hidden, rng)?, cfg.reward_structure())?)
        } else {
            None
        };
        let env = EnvModel::new(sd, n, n, &cfg.hidden, sp.env_lr, rng)?;
        Ok(Side { learner, mbom, env, replay: VecDeque::new(), buffer: RolloutBuffer::default(), recent: Vec::new() })
    }

    fn act(&self, s: &[f64], n: usize, rng: &mut SimRng) -> Result<(usize, Vec<f64>, f64, f64)> {
        let cond = match &self.mbom {
            Some(m) => conditioning(Some(&m.predictor()), s, n, rng)?,
            None => Vec::new(),
        };
        let (a, log_prob) = self.learner.policy.act(s, &cond, rng)?;
        Ok((a, cond, log_prob, self.learner.value.value(s)?))
    }

    fn learn(&mut self, sp: &SelfPlayConfig, batch_size: usize, rng: &mut SimRng) -> Result<()> {
        let mut buffer = std::mem::take(&mut self.buffer);
        self.learner.finish(&mut buffer)?;
        ppo_update(&mut self.learner, &buffer, rng)?;
        self.replay.extend(buffer.records.iter().cloned());
        while self.replay.len() > sp.replay {
            self.replay.pop_front();
        }
        if let Some(m) = self.mbom.as_mut() {
            let data: Vec<TransitionRecord> = self.replay.iter().cloned().collect();
            train_env_model(&mut self.env, &data, sp.env_epochs, batch_size, rng)?;
            let h = m.config().horizon.min(self.recent.len());
            let sim: Vec<Vec<f64>> = self.recent[self.recent.len() - h..].iter().map(|(s, _)| s.clone()).collect();
            m.epoch(&self.env, &self.learner.policy, &self.learner.value, &self.recent, &sim, None, rng)?;
        }
        self.recent.clear();
        Ok(())
    }
}

/// Joint score (sum of both individual rewards) of every training iteration,
/// one episode per iteration.
pub fn run_coin_selfplay(cfg: &ExperimentConfig, sp: &SelfPlayConfig, seed: u64) -> Result<Vec<f64>> {
    if cfg.game.name != GameName::Coin {
        return Err(Error::config("self-play runs on the coin game"));
    }
    cfg.validate()?;
    let mut rng = SimRng::seed_from_u64(derive_seed(seed, &["coin-selfplay"]));
    let mut game = CoinGame::with_episode_len(cfg.game.episode_len, true);
    let (sd, n) = (game.spec().state_dim, game.spec().n_agent_actions());
    let mut red = Side::new(cfg, sp, sd, n, &mut rng)?;
    let mut blue = Side::new(cfg, sp, sd, n, &mut rng)?;
    let mut joint = Vec::with_capacity(sp.iterations);
    for _ in 0..sp.iterations {
        game.reset(rng.gen());
        let mut score = 0.0;
        while !game.state().done {
            let s_r = game.state().observation.clone();
            let s_b = game.opponent_observation();
            let (a_r, c_r, lp_r, v_r) = red.act(&s_r, n, &mut rng)?;
            let (a_b, c_b, lp_b, v_b) = blue.act(&s_b, n, &mut rng)?;
            let res = game.step(a_r, a_b)?;
            score += res.aux;
            let s_b_next = game.opponent_observation();
            red.recent.push((s_r.clone(), a_b));
            blue.recent.push((s_b.clone(), a_r));
            let rec_r = TransitionRecord { s: s_r, a: a_r, a_o: a_b, s_next: res.next_state.observation, r: res.r, r_o: res.r_o };
            let rec_b = TransitionRecord { s: s_b, a: a_b, a_o: a_r, s_next: s_b_next, r: res.r_o, r_o: res.r };
            red.buffer.push(rec_r, c_r, lp_r, v_r, res.done);
            blue.buffer.push(rec_b, c_b, lp_b, v_b, res.done);
        }
        red.learn(sp, cfg.pretrain.batch_size, &mut rng)?;
        blue.learn(sp, cfg.pretrain.batch_size, &mut rng)?;
        joint.push(score);
    }
    Ok(joint)
}

/// Both players always walk the shortest way to the coin, whatever its
/// colour. Returns (joint score, coins collected) summed over `episodes`.
pub fn greedy_pair(episodes: usize, episode_len: usize, seed: u64) -> Result<(f64, u32)> {
    let mut rng = SimRng::seed_from_u64(derive_seed(seed, &["coin-greedy"]));
    let mut game = CoinGame::with_episode_len(episode_len, true);
    let (mut joint, mut coins) = (0.0, 0);
    for _ in 0..episodes {
        game.reset(rng.gen());
        while !game.state().done {
            let (red, blue, coin, _) = game.positions();
            let a = greedy_action(red, coin).unwrap_or(0);
            let a_o = greedy_action(blue, coin).unwrap_or(0);
            joint += game.step(a, a_o)?.aux;
        }
        let t = game.tally();
        coins += t.red_collected + t.blue_collected;
    }
    Ok((joint, coins))
}
