//! Rollout best-response search inside a model of the game.

use rand::Rng;

use super::EnvModel;
use crate::envs::{one_hot, RewardStructure};
use crate::error::{Error, Result};
use crate::oracle::{sample_index, TabularModel, TabularPolicy};
use crate::ppo::{ConditionedPolicy, OpponentPredictor, ValueNet};
use crate::SimRng;

/// One-step dynamics used for imagined rollouts.
pub trait RolloutModel {
    fn n_agent(&self) -> usize;
    fn n_opponent(&self) -> usize;
    /// (next state, agent reward, opponent reward).
    fn step(&self, s: &[f64], a: usize, a_o: usize) -> Result<(Vec<f64>, f64, f64)>;
}

impl RolloutModel for EnvModel {
    fn n_agent(&self) -> usize {
        EnvModel::n_agent(self)
    }

    fn n_opponent(&self) -> usize {
        EnvModel::n_opponent(self)
    }

    fn step(&self, s: &[f64], a: usize, a_o: usize) -> Result<(Vec<f64>, f64, f64)> {
        self.predict(s, a, a_o)
    }
}

/// Observation of tabular state `s`: `[1.0]` for a single-state game, else one-hot.
pub fn tabular_observation(n_states: usize, s: usize) -> Vec<f64> {
    if n_states == 1 {
        vec![1.0]
    } else {
        one_hot(s, n_states)
    }
}

fn tabular_state(obs: &[f64]) -> usize {
    (0..obs.len()).fold(0, |best, i| if obs[i] > obs[best] { i } else { best })
}

/// Exact dynamics; only deterministic transition tables can be rolled out.
impl RolloutModel for TabularModel {
    fn n_agent(&self) -> usize {
        TabularModel::n_agent(self)
    }

    fn n_opponent(&self) -> usize {
        TabularModel::n_opponent(self)
    }

    fn step(&self, s: &[f64], a: usize, a_o: usize) -> Result<(Vec<f64>, f64, f64)> {
        let st = tabular_state(s);
        let next = self
            .deterministic_successor(st, a, a_o)
            .ok_or_else(|| Error::usage("tabular rollouts need deterministic transitions"))?;
        Ok((tabular_observation(self.n_states(), next), self.reward(st, a, a_o), self.reward_o(st, a, a_o)))
    }
}

impl OpponentPredictor for TabularPolicy {
    fn predict(&self, s: &[f64]) -> Result<Vec<f64>> {
        Ok(self.row(tabular_state(s)).to_vec())
    }
}

/// Agent action distribution given the observation and a predicted opponent action.
pub trait ConditionedAgent {
    fn action_probs(&self, s: &[f64], predicted: usize) -> Result<Vec<f64>>;
}

impl ConditionedAgent for ConditionedPolicy {
    fn action_probs(&self, s: &[f64], predicted: usize) -> Result<Vec<f64>> {
        self.probs(s, &one_hot(predicted, self.cond_dim()))
    }
}

pub trait StateValue {
    fn state_value(&self, s: &[f64]) -> Result<f64>;
}

impl StateValue for ValueNet {
    fn state_value(&self, s: &[f64]) -> Result<f64> {
        self.value(s)
    }
}

/// Explicit conditioned agent: `rows[state][predicted][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularAgent {
    rows: Vec<Vec<Vec<f64>>>,
}

impl TabularAgent {
    pub fn new(rows: Vec<Vec<Vec<f64>>>) -> Self {
        TabularAgent { rows }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, n_states: usize, n_predicted: usize, n_actions: usize) -> Self {
        let rows = (0..n_states)
            .map(|_| (0..n_predicted).map(|_| crate::oracle::random_distribution(rng, n_actions)).collect())
            .collect();
        TabularAgent { rows }
    }

    /// The agent's action distribution averaged over `iop`'s predictions.
    pub fn marginal(&self, iop: &TabularPolicy) -> TabularPolicy {
        let rows = self
            .rows
            .iter()
            .enumerate()
            .map(|(s, by_pred)| {
                let mut out = vec![0.0; by_pred[0].len()];
                for (pred, probs) in by_pred.iter().enumerate() {
                    let w = iop.prob(s, pred);
                    out.iter_mut().zip(probs).for_each(|(o, p)| *o += w * p);
                }
                out
            })
            .collect();
        TabularPolicy::new(rows).expect("mixture of distributions")
    }
}

impl ConditionedAgent for TabularAgent {
    fn action_probs(&self, s: &[f64], predicted: usize) -> Result<Vec<f64>> {
        Ok(self.rows[tabular_state(s)][predicted].clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RolloutMode {
    /// Discounted sum of model opponent rewards.
    Plain,
    /// Plain plus the discounted opponent value of the final state.
    Bootstrapped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentSampling {
    /// Agent actions sampled inside each rollout.
    Sampled,
    /// Exact expectation over agent actions (branching; small games only).
    Expected,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImagineConfig {
    pub k: usize,
    pub n_seq: usize,
    pub gamma: f64,
    pub mode: RolloutMode,
    /// `V^o = sign * V`: -1 for zero-sum games, +1 for cooperative ones.
    pub opponent_value_sign: f64,
    pub agent: AgentSampling,
    /// Continuations are enumerated when `|A_o|^k` is at most this.
    pub exhaustive_limit: usize,
}

impl ImagineConfig {
    /// Bootstrapped when the reward structure determines the opponent's value, plain otherwise.
    pub fn for_game(k: usize, gamma: f64, structure: RewardStructure) -> Self {
        let (mode, sign) = match structure {
            RewardStructure::ZeroSum => (RolloutMode::Bootstrapped, -1.0),
            RewardStructure::Cooperative => (RolloutMode::Bootstrapped, 1.0),
            RewardStructure::GeneralSum => (RolloutMode::Plain, 0.0),
        };
        ImagineConfig {
            k,
            n_seq: 16,
            gamma,
            mode,
            opponent_value_sign: sign,
            agent: AgentSampling::Sampled,
            exhaustive_limit: 256,
        }
    }
}

/// Opponent continuations of length `k`: all of them in lexicographic order
/// when few enough, otherwise `n_seq` uniform draws.
pub fn continuations(n_opp: usize, k: usize, n_seq: usize, limit: usize, rng: &mut SimRng) -> Vec<Vec<usize>> {
    let count = (n_opp as f64).powi(k as i32);
    if count <= limit as f64 {
        let total = count as usize;
        (0..total)
            .map(|mut id| {
                let mut seq = vec![0; k];
                for slot in seq.iter_mut().rev() {
                    *slot = id % n_opp;
                    id /= n_opp;
                }
                seq
            })
            .collect()
    } else {
        (0..n_seq.max(1)).map(|_| (0..k).map(|_| rng.gen_range(0..n_opp)).collect()).collect()
    }
}

struct Ctx<'a> {
    model: &'a dyn RolloutModel,
    agent: &'a dyn ConditionedAgent,
    value: Option<&'a dyn StateValue>,
    iop_prev: &'a dyn OpponentPredictor,
    cfg: &'a ImagineConfig,
}

impl Ctx<'_> {
    fn terminal(&self, s: &[f64]) -> Result<f64> {
        match (self.cfg.mode, self.value) {
            (RolloutMode::Plain, _) => Ok(0.0),
            (RolloutMode::Bootstrapped, Some(v)) => Ok(self.cfg.opponent_value_sign * v.state_value(s)?),
            (RolloutMode::Bootstrapped, None) => Err(Error::config("bootstrapped rollouts need a value network")),
        }
    }

    fn agent_marginal(&self, s: &[f64]) -> Result<Vec<f64>> {
        let pred = self.iop_prev.predict(s)?;
        let mut out: Vec<f64> = vec![0.0; self.model.n_agent()];
        for (p, w) in pred.iter().enumerate() {
            if *w > 0.0 {
                let probs = self.agent.action_probs(s, p)?;
                out.iter_mut().zip(&probs).for_each(|(o, q)| *o += w * q);
            }
        }
        Ok(out)
    }

    /// Expected return of the remaining opponent actions `seq` from `s`.
    fn expected(&self, s: &[f64], seq: &[usize]) -> Result<f64> {
        let Some((&o, rest)) = seq.split_first() else {
            return self.terminal(s);
        };
        let marginal = self.agent_marginal(s)?;
        let mut total = 0.0;
        for (a, &p) in marginal.iter().enumerate() {
            if p > 0.0 {
                let (next, _, r_o) = self.model.step(s, a, o)?;
                total += p * (r_o + self.cfg.gamma * self.expected(&next, rest)?);
            }
        }
        Ok(total)
    }

    /// One sampled rollout of `seq` from `s`.
    fn sampled(&self, s: &[f64], seq: &[usize], first: &FirstStep, rng: &mut SimRng) -> Result<f64> {
        let mut state = s.to_vec();
        let mut total = 0.0;
        let mut discount = 1.0;
        for (j, &o) in seq.iter().enumerate() {
            let a = if j == 0 {
                let pred = sample_index(rng, &first.pred);
                sample_index(rng, first.agent_probs(self, s, pred)?)
            } else {
                let pred = sample_index(rng, &self.iop_prev.predict(&state)?);
                sample_index(rng, &self.agent.action_probs(&state, pred)?)
            };
            let (next, _, r_o) = self.model.step(&state, a, o)?;
            total += discount * r_o;
            discount *= self.cfg.gamma;
            state = next;
        }
        Ok(total + discount * self.terminal(&state)?)
    }
}

/// Predictions and agent distributions at the root state, shared by every rollout.
struct FirstStep {
    pred: Vec<f64>,
    agent: Vec<std::cell::OnceCell<Vec<f64>>>,
}

impl FirstStep {
    fn agent_probs(&self, ctx: &Ctx<'_>, s: &[f64], pred: usize) -> Result<&[f64]> {
        if let Some(p) = self.agent[pred].get() {
            return Ok(p);
        }
        let p = ctx.agent.action_probs(s, pred)?;
        Ok(self.agent[pred].get_or_init(|| p))
    }
}

/// Rollout value of every candidate first opponent action at `s`: the max
/// over continuations of the discounted opponent return, optionally
/// bootstrapped with the opponent's value of the final state.
pub fn rollout_scores(
    model: &dyn RolloutModel,
    agent: &dyn ConditionedAgent,
    value: Option<&dyn StateValue>,
    iop_prev: &dyn OpponentPredictor,
    s: &[f64],
    cfg: &ImagineConfig,
    rng: &mut SimRng,
) -> Result<Vec<f64>> {
    let ctx = Ctx { model, agent, value, iop_prev, cfg };
    let n_opp = model.n_opponent();
    let first = FirstStep {
        pred: iop_prev.predict(s)?,
        agent: (0..n_opp).map(|_| std::cell::OnceCell::new()).collect(),
    };
    let mut scores = Vec::with_capacity(n_opp);
    let mut seq = vec![0; cfg.k + 1];
    for c in 0..n_opp {
        let mut best = f64::NEG_INFINITY;
        for cont in continuations(n_opp, cfg.k, cfg.n_seq, cfg.exhaustive_limit, rng) {
            seq[0] = c;
            seq[1..].copy_from_slice(&cont);
            let v = match cfg.agent {
                AgentSampling::Expected => ctx.expected(s, &seq)?,
                AgentSampling::Sampled => ctx.sampled(s, &seq, &first, rng)?,
            };
            best = best.max(v);
        }
        scores.push(best);
    }
    Ok(scores)
}

/// The candidate first action with the highest rollout value; ties go to the lowest id.
pub fn imagine_best_response(
    model: &dyn RolloutModel,
    agent: &dyn ConditionedAgent,
    value: Option<&dyn StateValue>,
    iop_prev: &dyn OpponentPredictor,
    s: &[f64],
    cfg: &ImagineConfig,
    rng: &mut SimRng,
) -> Result<usize> {
    let scores = rollout_scores(model, agent, value, iop_prev, s, cfg, rng)?;
    Ok((0..scores.len()).fold(0, |best, i| if scores[i] > scores[best] { i } else { best }))
}
