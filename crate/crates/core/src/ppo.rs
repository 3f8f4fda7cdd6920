//! Proximal policy optimization with an opponent-conditioned policy.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::{one_hot, Game, TransitionRecord};
use crate::error::{Error, Result};
use crate::nn::{Adam, Mlp, NetSpec, OutputHead, ParamSet};
use crate::oracle::sample_index;
use crate::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lam: f64,
    pub clip: f64,
    /// Passes over each buffer.
    pub epochs: usize,
    pub minibatch: usize,
    pub learning_rate: f64,
    pub entropy_coef: f64,
    pub normalize_advantages: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            gamma: 0.99,
            lam: 0.99,
            clip: 0.115,
            epochs: 10,
            minibatch: 64,
            learning_rate: 0.001,
            entropy_coef: 0.01,
            normalize_advantages: true,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.lam) {
            return Err(Error::config("gamma and lam must lie in [0, 1]"));
        }
        if !(self.clip > 0.0) || self.minibatch == 0 || !(self.learning_rate >= 0.0) {
            return Err(Error::config("clip must be positive, minibatch non-zero, learning rate non-negative"));
        }
        Ok(())
    }
}

/// Softmax policy over agent actions whose input is the observation followed
/// by a conditioning vector (a one-hot predicted opponent action, or zeros).
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionedPolicy {
    net: Mlp<f64>,
    state_dim: usize,
}

impl ConditionedPolicy {
    pub fn new(state_dim: usize, cond_dim: usize, n_actions: usize, hidden: &[usize], rng: &mut SimRng) -> Result<Self> {
        let spec = NetSpec::mlp(state_dim + cond_dim, hidden, n_actions, OutputHead::Softmax)?;
        Ok(ConditionedPolicy { net: Mlp::init(spec, rng)?, state_dim })
    }

    pub fn from_net(net: Mlp<f64>, state_dim: usize) -> Result<Self> {
        if net.spec().output_head != OutputHead::Softmax || net.input_dim() < state_dim {
            return Err(Error::config("policy network needs a softmax head and room for the observation"));
        }
        Ok(ConditionedPolicy { net, state_dim })
    }

    pub fn net(&self) -> &Mlp<f64> {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp<f64> {
        &mut self.net
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn cond_dim(&self) -> usize {
        self.net.input_dim() - self.state_dim
    }

    pub fn n_actions(&self) -> usize {
        self.net.output_dim()
    }

    pub fn input(&self, s: &[f64], cond: &[f64]) -> Result<Vec<f64>> {
        if s.len() != self.state_dim || cond.len() != self.cond_dim() {
            return Err(Error::config(format!(
                "policy expects {} + {} inputs, got {} + {}",
                self.state_dim,
                self.cond_dim(),
                s.len(),
                cond.len()
            )));
        }
        let mut x = Vec::with_capacity(s.len() + cond.len());
        x.extend_from_slice(s);
        x.extend_from_slice(cond);
        Ok(x)
    }

    pub fn probs(&self, s: &[f64], cond: &[f64]) -> Result<Vec<f64>> {
        self.net.forward(&self.input(s, cond)?)
    }

    /// Samples an action; returns it with its log-probability.
    pub fn act(&self, s: &[f64], cond: &[f64], rng: &mut SimRng) -> Result<(usize, f64)> {
        let p = self.probs(s, cond)?;
        let a = sample_index(rng, &p);
        Ok((a, p[a].ln()))
    }
}

pub fn conditioned_act(
    policy: &ConditionedPolicy,
    s: &[f64],
    a_o_pred: &[f64],
    rng: &mut SimRng,
) -> Result<(usize, f64)> {
    policy.act(s, a_o_pred, rng)
}

/// State-value network with a scalar linear head.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueNet {
    net: Mlp<f64>,
}

impl ValueNet {
    pub fn new(state_dim: usize, hidden: &[usize], rng: &mut SimRng) -> Result<Self> {
        let spec = NetSpec::mlp(state_dim, hidden, 1, OutputHead::Linear)?;
        Ok(ValueNet { net: Mlp::init(spec, rng)? })
    }

    pub fn from_net(net: Mlp<f64>) -> Result<Self> {
        if net.output_dim() != 1 || net.spec().output_head != OutputHead::Linear {
            return Err(Error::config("value network needs one linear output"));
        }
        Ok(ValueNet { net })
    }

    pub fn net(&self) -> &Mlp<f64> {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp<f64> {
        &mut self.net
    }

    pub fn value(&self, s: &[f64]) -> Result<f64> {
        Ok(self.net.forward(s)?[0])
    }
}

/// Distribution over opponent actions for a given observation.
pub trait OpponentPredictor {
    fn predict(&self, s: &[f64]) -> Result<Vec<f64>>;
}

/// Conditioning input for one step: a one-hot opponent action sampled from
/// the predictor, or zeros when there is none.
pub fn conditioning(
    predictor: Option<&dyn OpponentPredictor>,
    s: &[f64],
    n_opponent: usize,
    rng: &mut SimRng,
) -> Result<Vec<f64>> {
    match predictor {
        None => Ok(vec![0.0; n_opponent]),
        Some(p) => {
            let dist = p.predict(s)?;
            Ok(one_hot(sample_index(rng, &dist), n_opponent))
        }
    }
}

/// Transitions plus the per-step quantities PPO needs.
#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    pub records: Vec<TransitionRecord>,
    pub conds: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    advantages: Vec<f64>,
    returns: Vec<f64>,
    ready: bool,
}

impl RolloutBuffer {
    pub fn push(&mut self, record: TransitionRecord, cond: Vec<f64>, log_prob: f64, value: f64, done: bool) {
        self.records.push(record);
        self.conds.push(cond);
        self.log_probs.push(log_prob);
        self.values.push(value);
        self.dones.push(done);
        self.ready = false;
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn is_ready(&self) -> bool {
        self.ready
    }

    pub fn advantages(&self) -> &[f64] {
        &self.advantages
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    /// Computes advantages and returns, episode by episode. `bootstrap` is the
    /// value of the state after the last step when that step did not end an
    /// episode.
    pub fn finish(&mut self, bootstrap: f64, gamma: f64, lam: f64) {
        self.finish_with(bootstrap, gamma, lam, |r| r.r);
    }

    /// As [`RolloutBuffer::finish`], with the reward taken from each record by `reward`.
    pub fn finish_with(&mut self, bootstrap: f64, gamma: f64, lam: f64, reward: impl Fn(&TransitionRecord) -> f64) {
        let n = self.len();
        self.advantages = vec![0.0; n];
        self.returns = vec![0.0; n];
        let mut start = 0;
        for end in 0..n {
            let last = end + 1 == n;
            if self.dones[end] || last {
                let rewards: Vec<f64> = self.records[start..=end].iter().map(&reward).collect();
                let tail = if self.dones[end] { 0.0 } else { bootstrap };
                let (adv, ret) = compute_gae(&rewards, &self.values[start..=end], tail, gamma, lam);
                self.advantages[start..=end].copy_from_slice(&adv);
                self.returns[start..=end].copy_from_slice(&ret);
                start = end + 1;
            }
        }
        self.ready = true;
    }

    pub fn total_reward(&self) -> f64 {
        self.records.iter().map(|r| r.r).sum()
    }
}

/// Recursive generalized advantage estimation over one episode segment.
pub fn compute_gae(rewards: &[f64], values: &[f64], bootstrap: f64, gamma: f64, lam: f64) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(rewards.len(), values.len(), "rewards and values differ in length");
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let next_v = if t + 1 < n { values[t + 1] } else { bootstrap };
        let delta = rewards[t] + gamma * next_v - values[t];
        running = delta + gamma * lam * running;
        adv[t] = running;
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, ret)
}

pub fn clipped_surrogate(ratio: f64, advantage: f64, clip: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip, 1.0 + clip);
    (ratio * advantage).min(clipped * advantage)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PpoStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub mean_return: f64,
}

/// Policy and value networks with their optimizers.
#[derive(Debug, Clone)]
pub struct PpoLearner {
    pub policy: ConditionedPolicy,
    pub value: ValueNet,
    pub cfg: PpoConfig,
    policy_opt: Adam<f64>,
    value_opt: Adam<f64>,
}

impl PpoLearner {
    pub fn new(policy: ConditionedPolicy, value: ValueNet, cfg: PpoConfig) -> Result<Self> {
        cfg.validate()?;
        if value.net().input_dim() != policy.state_dim() {
            return Err(Error::config("policy and value disagree on the observation size"));
        }
        let policy_opt = Adam::new(policy.net().spec(), cfg.learning_rate);
        let value_opt = Adam::new(value.net().spec(), cfg.learning_rate);
        Ok(PpoLearner { policy, value, cfg, policy_opt, value_opt })
    }

    pub fn build(
        state_dim: usize,
        cond_dim: usize,
        n_actions: usize,
        hidden: &[usize],
        cfg: PpoConfig,
        rng: &mut SimRng,
    ) -> Result<Self> {
        let policy = ConditionedPolicy::new(state_dim, cond_dim, n_actions, hidden, rng)?;
        let value = ValueNet::new(state_dim, hidden, rng)?;
        Self::new(policy, value, cfg)
    }

    /// Value used to bootstrap a buffer whose last step did not end the episode.
    pub fn bootstrap_value(&self, buffer: &RolloutBuffer) -> Result<f64> {
        match (buffer.records.last(), buffer.dones.last()) {
            (Some(rec), Some(false)) => self.value.value(&rec.s_next),
            _ => Ok(0.0),
        }
    }

    pub fn finish(&self, buffer: &mut RolloutBuffer) -> Result<()> {
        let b = self.bootstrap_value(buffer)?;
        buffer.finish(b, self.cfg.gamma, self.cfg.lam);
        Ok(())
    }

    /// Replaces the optimizers, e.g. after loading parameters.
    pub fn reset_optimizers(&mut self) {
        self.policy_opt = Adam::new(self.policy.net().spec(), self.cfg.learning_rate);
        self.value_opt = Adam::new(self.value.net().spec(), self.cfg.learning_rate);
    }
}

pub fn ppo_update(learner: &mut PpoLearner, buffer: &RolloutBuffer, rng: &mut SimRng) -> Result<PpoStats> {
    if !buffer.is_ready() {
        return Err(Error::usage("advantages must be computed before the update"));
    }
    let n = buffer.len();
    if n == 0 {
        return Ok(PpoStats::default());
    }
    let cfg = learner.cfg;
    let mut adv = buffer.advantages().to_vec();
    if cfg.normalize_advantages && n > 1 {
        let mean = adv.iter().sum::<f64>() / n as f64;
        let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        for a in adv.iter_mut() {
            *a = if sd > 1e-8 { (*a - mean) / sd } else { 0.0 };
        }
    }
    let inputs: Vec<Vec<f64>> = buffer
        .records
        .iter()
        .zip(&buffer.conds)
        .map(|(r, c)| learner.policy.input(&r.s, c))
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..n).collect();
    let mut stats = PpoStats { mean_return: buffer.returns().iter().sum::<f64>() / n as f64, ..Default::default() };
    let mut batches = 0usize;
    let mut policy_grads = ParamSet::zeros(learner.policy.net().spec());
    let mut value_grads = ParamSet::zeros(learner.value.net().spec());
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.minibatch) {
            policy_grads.fill_zero();
            value_grads.fill_zero();
            let scale = 1.0 / chunk.len() as f64;
            let (mut pl, mut vl, mut ent) = (0.0, 0.0, 0.0);
            for &i in chunk {
                let rec = &buffer.records[i];
                let trace = learner.policy.net().forward_traced(&inputs[i])?;
                let p = trace.output();
                let ratio = (p[rec.a].ln() - buffer.log_probs[i]).exp();
                let a = adv[i];
                let clipped = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip);
                let surrogate = (ratio * a).min(clipped * a);
                let entropy: f64 = -p.iter().filter(|q| **q > 0.0).map(|q| q * q.ln()).sum::<f64>();
                pl -= surrogate;
                ent += entropy;
                // Gradient of -(surrogate + c * entropy) with respect to the logits.
                let active = ratio * a <= clipped * a;
                let logit_grad: Vec<f64> = p
                    .iter()
                    .enumerate()
                    .map(|(j, &pj)| {
                        let indicator = if j == rec.a { 1.0 } else { 0.0 };
                        let d_surr = if active { ratio * a * (indicator - pj) } else { 0.0 };
                        let d_ent = if pj > 0.0 { -pj * (pj.ln() + entropy) } else { 0.0 };
                        -(d_surr + cfg.entropy_coef * d_ent)
                    })
                    .collect();
                learner
                    .policy
                    .net()
                    .accumulate_backward_logits(&trace, &logit_grad, scale, &mut policy_grads)?;

                let vtrace = learner.value.net().forward_traced(&rec.s)?;
                let err = vtrace.output()[0] - buffer.returns()[i];
                vl += 0.5 * err * err;
                learner.value.net().accumulate_backward(&vtrace, &[err], scale, &mut value_grads)?;
            }
            if !(pl.is_finite() && vl.is_finite()) {
                return Err(Error::training("non-finite PPO loss"));
            }
            learner.policy_opt.step(learner.policy.net_mut().params_mut(), &policy_grads)?;
            learner.value_opt.step(learner.value.net_mut().params_mut(), &value_grads)?;
            stats.policy_loss += pl * scale;
            stats.value_loss += vl * scale;
            stats.entropy += ent * scale;
            batches += 1;
        }
    }
    if batches > 0 {
        stats.policy_loss /= batches as f64;
        stats.value_loss /= batches as f64;
        stats.entropy /= batches as f64;
    }
    Ok(stats)
}

/// One step as seen by the other side of the interaction.
#[derive(Debug, Clone, Copy)]
pub struct CounterpartStep<'a> {
    pub obs: &'a [f64],
    pub action: usize,
    pub agent_action: usize,
    pub reward: f64,
    pub next_obs: &'a [f64],
    pub done: bool,
}

/// Whatever produces the opponent's actions during a rollout.
pub trait Counterpart {
    fn act(&mut self, obs: &[f64], rng: &mut SimRng) -> Result<usize>;

    fn observe(&mut self, _step: &CounterpartStep<'_>) -> Result<()> {
        Ok(())
    }
}

/// Plays `n_steps` steps (resetting finished episodes with seeds drawn from
/// `rng`) and returns the finished buffer.
pub fn collect_rollout(
    learner: &PpoLearner,
    game: &mut dyn Game,
    opponent: &mut dyn Counterpart,
    n_steps: usize,
    predictor: Option<&dyn OpponentPredictor>,
    rng: &mut SimRng,
) -> Result<RolloutBuffer> {
    let mut buffer = RolloutBuffer::default();
    let n_opp = game.spec().n_opponent_actions();
    for _ in 0..n_steps {
        if game.state().done {
            game.reset(rng.gen());
        }
        let s = game.state().observation.clone();
        let s_opp = game.opponent_observation();
        let cond = match predictor {
            Some(_) => conditioning(predictor, &s, n_opp, rng)?,
            None => vec![0.0; learner.policy.cond_dim()],
        };
        let (a, log_prob) = learner.policy.act(&s, &cond, rng)?;
        let value = learner.value.value(&s)?;
        let a_o = opponent.act(&s_opp, rng)?;
        let res = game.step(a, a_o)?;
        let s_opp_next = game.opponent_observation();
        opponent.observe(&CounterpartStep {
            obs: &s_opp,
            action: a_o,
            agent_action: a,
            reward: res.r_o,
            next_obs: &s_opp_next,
            done: res.done,
        })?;
        let record = TransitionRecord { s, a, a_o, s_next: res.next_state.observation, r: res.r, r_o: res.r_o };
        buffer.push(record, cond, log_prob, value, res.done);
    }
    learner.finish(&mut buffer)?;
    Ok(buffer)
}

/// Counterpart that always plays the same action.
#[derive(Debug, Clone, Copy)]
pub struct ConstantCounterpart(pub usize);

impl Counterpart for ConstantCounterpart {
    fn act(&mut self, _obs: &[f64], _rng: &mut SimRng) -> Result<usize> {
        Ok(self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::matrix::{tabular_game, Bimatrix};
    use crate::envs::triangle::TriangleGame;
    use proptest::{prop_assert, proptest};
    use rand::SeedableRng;

    fn rng(seed: u64) -> SimRng {
        SimRng::seed_from_u64(seed)
    }

    fn zero_policy(n_actions: usize) -> ConditionedPolicy {
        let spec = NetSpec::mlp(2, &[4], n_actions, OutputHead::Softmax).unwrap();
        ConditionedPolicy::from_net(Mlp::zeros(spec).unwrap(), 1).unwrap()
    }

    #[test]
    fn uniform_policy_samples_uniformly() {
        let policy = zero_policy(4);
        let mut r = rng(0);
        let mut counts = [0usize; 4];
        for _ in 0..10_000 {
            let (a, lp) = conditioned_act(&policy, &[0.3], &[1.0], &mut r).unwrap();
            assert!((lp - 0.25f64.ln()).abs() < 1e-12);
            counts[a] += 1;
        }
        for c in counts {
            assert!((c as f64 / 10_000.0 - 0.25).abs() < 0.02);
        }
    }

    #[test]
    fn saturated_logit_dominates() {
        let mut policy = zero_policy(3);
        let last = policy.net_mut().params_mut().layers_mut().last_mut().unwrap();
        last.biases[2] = 20.0;
        let mut r = rng(1);
        let hits = (0..10_000)
            .filter(|_| conditioned_act(&policy, &[0.0], &[0.0], &mut r).unwrap().0 == 2)
            .count();
        assert!(hits as f64 / 10_000.0 > 0.999);
    }

    #[test]
    fn acting_is_deterministic_per_seed() {
        let policy = ConditionedPolicy::new(3, 2, 5, &[8], &mut rng(2)).unwrap();
        let draw = |seed| conditioned_act(&policy, &[0.1, 0.2, 0.3], &[0.0, 1.0], &mut rng(seed)).unwrap();
        assert_eq!(draw(7), draw(7));
    }

    /// Direct double-loop evaluation of sum_l (gamma lam)^l delta_{t+l}.
    fn gae_direct(r: &[f64], v: &[f64], bootstrap: f64, gamma: f64, lam: f64) -> Vec<f64> {
        let n = r.len();
        let v_at = |t: usize| if t < n { v[t] } else { bootstrap };
        (0..n)
            .map(|t| {
                (t..n)
                    .map(|l| (gamma * lam).powi((l - t) as i32) * (r[l] + gamma * v_at(l + 1) - v[l]))
                    .sum()
            })
            .collect()
    }

    #[test]
    fn gae_special_cases() {
        let r = [1.0, -0.5, 2.0];
        let v = [0.2, 0.4, -0.1];
        let (adv, ret) = compute_gae(&r, &v, 0.7, 0.9, 0.0);
        for t in 0..3 {
            let next = if t < 2 { v[t + 1] } else { 0.7 };
            assert_eq!(adv[t], r[t] + 0.9 * next - v[t]);
            assert_eq!(ret[t], adv[t] + v[t]);
        }
        let (adv, _) = compute_gae(&r, &v, 0.7, 0.0, 0.95);
        for t in 0..3 {
            assert_eq!(adv[t], r[t] - v[t]);
        }
        let (adv, _) = compute_gae(&[1.0, 0.0, 1.0], &[0.5; 3], 0.0, 0.99, 0.95);
        let direct = gae_direct(&[1.0, 0.0, 1.0], &[0.5; 3], 0.0, 0.99, 0.95);
        for (a, b) in adv.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gae_matches_direct_summation() {
        let mut r = rng(3);
        for _ in 0..1000 {
            let n = r.gen_range(1..30);
            let rewards: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
            let values: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
            let (b, g, l) = (r.gen_range(-1.0..1.0), r.gen_range(0.0..=1.0), r.gen_range(0.0..=1.0));
            let (adv, _) = compute_gae(&rewards, &values, b, g, l);
            for (a, d) in adv.iter().zip(gae_direct(&rewards, &values, b, g, l)) {
                assert!((a - d).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn clipping_uses_the_clipped_ratio() {
        assert!((clipped_surrogate(2.0, 1.0, 0.115) - 1.115).abs() < 1e-15);
        assert_eq!(clipped_surrogate(2.0, -1.0, 0.115), -2.0);
    }

    proptest! {
        #[test]
        fn surrogate_is_a_lower_bound(ratio in 0.0f64..5.0, adv in -10.0f64..10.0, clip in 0.01f64..0.5) {
            prop_assert!(clipped_surrogate(ratio, adv, clip) <= ratio * adv + 1e-12);
        }
    }

    fn bandit() -> Box<dyn Game> {
        let payoff = Bimatrix { agent: vec![vec![1.0], vec![-1.0]], opponent: vec![vec![0.0], vec![0.0]] };
        Box::new(tabular_game(payoff, 1).unwrap())
    }

    fn bandit_learner(seed: u64, cfg: PpoConfig) -> PpoLearner {
        PpoLearner::build(1, 0, 2, &[16], cfg, &mut rng(seed)).unwrap()
    }

    #[test]
    fn zero_advantages_leave_policy_unchanged() {
        let cfg = PpoConfig { entropy_coef: 0.0, normalize_advantages: false, ..Default::default() };
        let mut learner = bandit_learner(4, cfg);
        let mut game = bandit();
        let mut r = rng(5);
        let mut buffer = collect_rollout(&learner, game.as_mut(), &mut ConstantCounterpart(0), 32, None, &mut r).unwrap();
        // Zero rewards and zero values give zero advantages everywhere.
        buffer.values.iter_mut().for_each(|v| *v = 0.0);
        buffer.finish_with(0.0, 0.99, 0.95, |_| 0.0);
        assert!(buffer.advantages().iter().all(|a| *a == 0.0));
        let before = learner.policy.net().params().to_flat();
        ppo_update(&mut learner, &buffer, &mut r).unwrap();
        assert_eq!(learner.policy.net().params().to_flat(), before);
    }

    #[test]
    fn bandit_converges_to_dominant_action() {
        for seed in 0..5 {
            let mut learner = bandit_learner(seed, PpoConfig::default());
            let mut game = bandit();
            let mut r = rng(100 + seed);
            for _ in 0..50 {
                let buf = collect_rollout(&learner, game.as_mut(), &mut ConstantCounterpart(0), 16, None, &mut r).unwrap();
                ppo_update(&mut learner, &buf, &mut r).unwrap();
            }
            assert!(learner.policy.probs(&[1.0], &[]).unwrap()[0] > 0.9, "seed {seed}");
        }
    }

    #[test]
    fn update_requires_finished_buffer() {
        let mut learner = bandit_learner(0, PpoConfig::default());
        let mut buffer = RolloutBuffer::default();
        let rec = TransitionRecord { s: vec![1.0], a: 0, a_o: 0, s_next: vec![1.0], r: 1.0, r_o: 0.0 };
        buffer.push(rec, vec![], 0.5f64.ln(), 0.0, true);
        assert!(matches!(ppo_update(&mut learner, &buffer, &mut rng(0)), Err(Error::Usage(_))));
    }

    #[test]
    fn rollouts_are_reproducible_and_zero_sum() {
        let learner = PpoLearner::build(12, 5, 5, &[8], PpoConfig::default(), &mut rng(6)).unwrap();
        let run = |seed| {
            let mut game = TriangleGame::default();
            game.reset(seed);
            collect_rollout(&learner, &mut game, &mut ConstantCounterpart(2), 40, None, &mut rng(seed)).unwrap()
        };
        let (a, b) = (run(9), run(9));
        assert_eq!(a.records, b.records);
        assert_eq!(a.len(), 40);
        assert!(a.records.iter().all(|r| r.r + r.r_o == 0.0));
        // The 25-step episode boundary falls inside the buffer.
        assert!(a.dones[24] && !a.dones[39]);
        let empty = collect_rollout(&learner, &mut TriangleGame::default(), &mut ConstantCounterpart(0), 0, None, &mut rng(0)).unwrap();
        assert!(empty.is_empty());
    }
}
