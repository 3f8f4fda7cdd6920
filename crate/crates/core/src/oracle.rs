//! Exact reference computations over small finite games.
//!
//! Nothing here samples: best responses are found by exhaustive enumeration,
//! values by value iteration, posteriors by exact sequential Bayes updates.
//! These are the ground truth for the property tests of the learned components.

use rand::Rng;

use crate::error::{Error, Result};

/// Largest number of opponent sequences [`brute_force_best_response`] enumerates.
pub const MAX_ENUMERATION: usize = 1 << 22;

/// Explicit transition and reward tables over finite state and action sets.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularModel {
    n_states: usize,
    n_agent: usize,
    n_opponent: usize,
    /// `[s][a][o][s']`
    transitions: Vec<f64>,
    /// `[s][a][o]`
    reward: Vec<f64>,
    reward_o: Vec<f64>,
}

impl TabularModel {
    pub fn from_fn(
        n_states: usize,
        n_agent: usize,
        n_opponent: usize,
        mut transition: impl FnMut(usize, usize, usize) -> Vec<f64>,
        mut rewards: impl FnMut(usize, usize, usize) -> (f64, f64),
    ) -> Self {
        let mut transitions = Vec::with_capacity(n_states * n_agent * n_opponent * n_states);
        let mut reward = Vec::with_capacity(n_states * n_agent * n_opponent);
        let mut reward_o = Vec::with_capacity(n_states * n_agent * n_opponent);
        for s in 0..n_states {
            for a in 0..n_agent {
                for o in 0..n_opponent {
                    let row = transition(s, a, o);
                    assert_eq!(row.len(), n_states, "transition row length");
                    transitions.extend(row);
                    let (r, r_o) = rewards(s, a, o);
                    reward.push(r);
                    reward_o.push(r_o);
                }
            }
        }
        TabularModel { n_states, n_agent, n_opponent, transitions, reward, reward_o }
    }

    /// Uniform rewards in `[-1, 1]` and random stochastic transition rows.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, n_states: usize, n_agent: usize, n_opponent: usize) -> Self {
        Self::from_fn(
            n_states,
            n_agent,
            n_opponent,
            |_, _, _| random_distribution(rng, n_states),
            |_, _, _| (0.0, 0.0),
        )
        .with_random_rewards(rng)
    }

    /// Like [`TabularModel::random`] but every transition row is one-hot.
    pub fn random_deterministic<R: Rng + ?Sized>(
        rng: &mut R,
        n_states: usize,
        n_agent: usize,
        n_opponent: usize,
    ) -> Self {
        Self::from_fn(
            n_states,
            n_agent,
            n_opponent,
            |_, _, _| {
                let mut row = vec![0.0; n_states];
                row[rng.gen_range(0..n_states)] = 1.0;
                row
            },
            |_, _, _| (0.0, 0.0),
        )
        .with_random_rewards(rng)
    }

    fn with_random_rewards<R: Rng + ?Sized>(mut self, rng: &mut R) -> Self {
        for (r, r_o) in self.reward.iter_mut().zip(self.reward_o.iter_mut()) {
            *r = rng.gen_range(-1.0..=1.0);
            *r_o = rng.gen_range(-1.0..=1.0);
        }
        self
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_agent(&self) -> usize {
        self.n_agent
    }

    pub fn n_opponent(&self) -> usize {
        self.n_opponent
    }

    #[inline]
    fn idx(&self, s: usize, a: usize, o: usize) -> usize {
        (s * self.n_agent + a) * self.n_opponent + o
    }

    pub fn transition(&self, s: usize, a: usize, o: usize) -> &[f64] {
        let i = self.idx(s, a, o) * self.n_states;
        &self.transitions[i..i + self.n_states]
    }

    pub fn reward(&self, s: usize, a: usize, o: usize) -> f64 {
        self.reward[self.idx(s, a, o)]
    }

    pub fn reward_o(&self, s: usize, a: usize, o: usize) -> f64 {
        self.reward_o[self.idx(s, a, o)]
    }

    /// The single successor of a deterministic transition, if it is one.
    pub fn deterministic_successor(&self, s: usize, a: usize, o: usize) -> Option<usize> {
        let row = self.transition(s, a, o);
        let hot: Vec<usize> = (0..row.len()).filter(|&i| row[i] != 0.0).collect();
        (hot.len() == 1 && row[hot[0]] == 1.0).then(|| hot[0])
    }

    pub fn validate(&self) -> Result<()> {
        for s in 0..self.n_states {
            for a in 0..self.n_agent {
                for o in 0..self.n_opponent {
                    if !is_distribution(self.transition(s, a, o)) {
                        return Err(Error::config(format!("P(.|{s},{a},{o}) is not a distribution")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Explicit per-state action distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    rows: Vec<Vec<f64>>,
}

impl TabularPolicy {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() || rows.iter().any(|r| !is_distribution(r) || r.len() != rows[0].len()) {
            return Err(Error::config("policy rows must be probability vectors of equal length"));
        }
        Ok(TabularPolicy { rows })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        TabularPolicy { rows: vec![vec![1.0 / n_actions as f64; n_actions]; n_states] }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, n_states: usize, n_actions: usize) -> Self {
        TabularPolicy { rows: (0..n_states).map(|_| random_distribution(rng, n_actions)).collect() }
    }

    pub fn deterministic(actions: &[usize], n_actions: usize) -> Self {
        let rows = actions
            .iter()
            .map(|&a| (0..n_actions).map(|i| if i == a { 1.0 } else { 0.0 }).collect())
            .collect();
        TabularPolicy { rows }
    }

    pub fn n_states(&self) -> usize {
        self.rows.len()
    }

    pub fn n_actions(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.rows[s]
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.rows[s][a]
    }
}

fn is_distribution(p: &[f64]) -> bool {
    !p.is_empty() && p.iter().all(|v| *v >= 0.0 && v.is_finite()) && (p.iter().sum::<f64>() - 1.0).abs() < 1e-9
}

/// Normalized uniform draws: a random point strictly inside the simplex.
pub fn random_distribution<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

fn check_shapes(model: &TabularModel, agent: &TabularPolicy) -> Result<()> {
    if agent.n_states() != model.n_states || agent.n_actions() != model.n_agent {
        return Err(Error::config("agent policy does not match the model"));
    }
    Ok(())
}

/// Exact expected discounted opponent return of the open-loop opponent action
/// sequence `seq` from state `s`, propagating the state distribution forward.
pub fn expected_sequence_return(
    model: &TabularModel,
    agent: &TabularPolicy,
    s: usize,
    seq: &[usize],
    gamma: f64,
) -> f64 {
    let mut dist = vec![0.0; model.n_states];
    dist[s] = 1.0;
    let mut total = 0.0;
    let mut discount = 1.0;
    for &o in seq {
        let (r, next) = propagate(model, agent, &dist, o);
        total += discount * r;
        discount *= gamma;
        dist = next;
    }
    total
}

/// One step of distribution propagation: expected opponent reward and next distribution.
fn propagate(model: &TabularModel, agent: &TabularPolicy, dist: &[f64], o: usize) -> (f64, Vec<f64>) {
    let mut r = 0.0;
    let mut next = vec![0.0; model.n_states];
    for (s, &ds) in dist.iter().enumerate() {
        if ds == 0.0 {
            continue;
        }
        for a in 0..model.n_agent {
            let w = ds * agent.prob(s, a);
            r += w * model.reward_o(s, a, o);
            for (n, p) in next.iter_mut().zip(model.transition(s, a, o)) {
                *n += w * p;
            }
        }
    }
    (r, next)
}

/// Same quantity as [`expected_sequence_return`], computed by recursion over
/// successor states instead of distribution propagation.
pub fn recursive_sequence_return(
    model: &TabularModel,
    agent: &TabularPolicy,
    s: usize,
    seq: &[usize],
    gamma: f64,
) -> f64 {
    let Some((&o, rest)) = seq.split_first() else {
        return 0.0;
    };
    (0..model.n_agent)
        .map(|a| {
            let p = agent.prob(s, a);
            if p == 0.0 {
                return 0.0;
            }
            let future: f64 = model
                .transition(s, a, o)
                .iter()
                .enumerate()
                .filter(|(_, q)| **q > 0.0)
                .map(|(s2, q)| q * recursive_sequence_return(model, agent, s2, rest, gamma))
                .sum();
            p * (model.reward_o(s, a, o) + gamma * future)
        })
        .sum()
}

/// Exhaustive best response of the opponent over all action sequences of
/// length `k + 1`. Returns the best first action (lowest id on ties) and its
/// value, the maximum expected discounted opponent return.
pub fn brute_force_best_response(
    model: &TabularModel,
    agent: &TabularPolicy,
    s: usize,
    k: usize,
    gamma: f64,
) -> Result<(usize, f64)> {
    check_shapes(model, agent)?;
    if s >= model.n_states {
        return Err(Error::usage("start state out of range"));
    }
    let count = (model.n_opponent as f64).powi(k as i32 + 1);
    if count > MAX_ENUMERATION as f64 {
        return Err(Error::usage(format!(
            "{count} opponent sequences exceed the enumeration limit {MAX_ENUMERATION}"
        )));
    }
    let mut start = vec![0.0; model.n_states];
    start[s] = 1.0;
    let mut best = (0, f64::NEG_INFINITY);
    for first in 0..model.n_opponent {
        let v = best_continuation(model, agent, &start, first, k, gamma);
        if v > best.1 {
            best = (first, v);
        }
    }
    Ok(best)
}

/// Max over all continuations of length `remaining` after playing `o` from `dist`.
/// Every sequence is visited; prefixes share their propagated distributions.
fn best_continuation(
    model: &TabularModel,
    agent: &TabularPolicy,
    dist: &[f64],
    o: usize,
    remaining: usize,
    gamma: f64,
) -> f64 {
    let (r, next) = propagate(model, agent, dist, o);
    if remaining == 0 {
        return r;
    }
    let tail = (0..model.n_opponent)
        .map(|o2| best_continuation(model, agent, &next, o2, remaining - 1, gamma))
        .fold(f64::NEG_INFINITY, f64::max);
    r + gamma * tail
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Agent,
    Opponent,
}

/// State values for one side under fixed agent and opponent policies, by
/// value iteration until the sup-norm change drops below `tol`.
pub fn exact_value(
    model: &TabularModel,
    agent: &TabularPolicy,
    opponent: &TabularPolicy,
    gamma: f64,
    tol: f64,
) -> Result<Vec<f64>> {
    exact_value_for(model, agent, opponent, gamma, tol, Side::Agent)
}

pub fn exact_value_for(
    model: &TabularModel,
    agent: &TabularPolicy,
    opponent: &TabularPolicy,
    gamma: f64,
    tol: f64,
    side: Side,
) -> Result<Vec<f64>> {
    check_shapes(model, agent)?;
    if opponent.n_states() != model.n_states || opponent.n_actions() != model.n_opponent {
        return Err(Error::config("opponent policy does not match the model"));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::config("value iteration needs 0 <= gamma < 1"));
    }
    let mut v = vec![0.0; model.n_states];
    loop {
        let next = bellman_backup(model, agent, opponent, gamma, side, &v);
        let delta = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if delta < tol {
            return Ok(v);
        }
    }
}

pub fn bellman_backup(
    model: &TabularModel,
    agent: &TabularPolicy,
    opponent: &TabularPolicy,
    gamma: f64,
    side: Side,
    v: &[f64],
) -> Vec<f64> {
    (0..model.n_states)
        .map(|s| {
            let mut total = 0.0;
            for a in 0..model.n_agent {
                for o in 0..model.n_opponent {
                    let w = agent.prob(s, a) * opponent.prob(s, o);
                    if w == 0.0 {
                        continue;
                    }
                    let r = match side {
                        Side::Agent => model.reward(s, a, o),
                        Side::Opponent => model.reward_o(s, a, o),
                    };
                    let future: f64 = model.transition(s, a, o).iter().zip(v).map(|(p, x)| p * x).sum();
                    total += w * (r + gamma * future);
                }
            }
            total
        })
        .collect()
}

/// Sup-norm Bellman residual of `v`.
pub fn bellman_residual(
    model: &TabularModel,
    agent: &TabularPolicy,
    opponent: &TabularPolicy,
    gamma: f64,
    side: Side,
    v: &[f64],
) -> f64 {
    bellman_backup(model, agent, opponent, gamma, side, v)
        .iter()
        .zip(v)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Sequential exact Bayes updates over the candidate policies, without any
/// likelihood floor. Entry `t` is the posterior after observation `t`.
pub fn exact_posterior(
    candidates: &[TabularPolicy],
    observations: &[(usize, usize)],
    prior: &[f64],
) -> Result<Vec<Vec<f64>>> {
    if candidates.len() != prior.len() || !is_distribution(prior) {
        return Err(Error::config("prior must be a probability vector over the candidates"));
    }
    let mut belief = prior.to_vec();
    let mut history = Vec::with_capacity(observations.len());
    for (t, &(s, o)) in observations.iter().enumerate() {
        let unnorm: Vec<f64> = candidates.iter().zip(&belief).map(|(c, b)| c.prob(s, o) * b).collect();
        let total: f64 = unnorm.iter().sum();
        if total <= 0.0 {
            return Err(Error::usage(format!(
                "degenerate posterior: observation {t} has zero likelihood under every candidate"
            )));
        }
        belief = unnorm.into_iter().map(|u| u / total).collect();
        history.push(belief.clone());
    }
    Ok(history)
}

/// Inputs of the mixing-error inequality check.
#[derive(Debug, Clone)]
pub struct Lemma1Instance {
    pub model: TabularModel,
    pub agent: TabularPolicy,
    /// Imagined opponent policies, levels 0..M-1.
    pub iops: Vec<TabularPolicy>,
    pub true_opponent: TabularPolicy,
    pub alpha: Vec<f64>,
    pub gamma: f64,
}

#[derive(Debug, Clone)]
pub struct Lemma1Report {
    /// `epsilon[m][s] = |V_m(s) - V(s)|`
    pub epsilon: Vec<Vec<f64>>,
    /// `delta[m][s] = |V_m(s) - V_{m-1}(s)|`, `delta[0] = epsilon[0]`
    pub delta: Vec<Vec<f64>>,
    /// `sum_m alpha_m epsilon_m(s)` per state.
    pub lhs: Vec<f64>,
    /// `sum_m delta_m(s) sum_{i >= m} alpha_i` per state.
    pub rhs: Vec<f64>,
    pub violations: usize,
}

pub const LEMMA1_TOL: f64 = 1e-9;

pub fn check_lemma1(inst: &Lemma1Instance) -> Result<Lemma1Report> {
    let m = inst.iops.len();
    if m < 2 || inst.alpha.len() != m {
        return Err(Error::config("need at least two IOPs and one weight per IOP"));
    }
    let tol = 1e-12;
    let v_true = exact_value(&inst.model, &inst.agent, &inst.true_opponent, inst.gamma, tol)?;
    let v_hat = inst
        .iops
        .iter()
        .map(|iop| exact_value(&inst.model, &inst.agent, iop, inst.gamma, tol))
        .collect::<Result<Vec<_>>>()?;
    let n = inst.model.n_states;
    let epsilon: Vec<Vec<f64>> = v_hat
        .iter()
        .map(|vm| (0..n).map(|s| (vm[s] - v_true[s]).abs()).collect())
        .collect();
    let delta: Vec<Vec<f64>> = (0..m)
        .map(|l| {
            if l == 0 {
                epsilon[0].clone()
            } else {
                (0..n).map(|s| (v_hat[l][s] - v_hat[l - 1][s]).abs()).collect()
            }
        })
        .collect();
    let lhs: Vec<f64> = (0..n)
        .map(|s| (0..m).map(|l| inst.alpha[l] * epsilon[l][s]).sum())
        .collect();
    let rhs: Vec<f64> = (0..n)
        .map(|s| {
            (0..m)
                .map(|l| delta[l][s] * inst.alpha[l..].iter().sum::<f64>())
                .sum()
        })
        .collect();
    let violations = lhs.iter().zip(&rhs).filter(|(l, r)| **l > **r + LEMMA1_TOL).count();
    Ok(Lemma1Report { epsilon, delta, lhs, rhs, violations })
}

/// Random instance: 2-5 states, 2-4 actions per side, `m` IOPs, and weights
/// equal to the mean exact posterior over opponent actions sampled from the
/// true opponent.
pub fn random_lemma1_instance<R: Rng + ?Sized>(rng: &mut R, m: usize) -> Lemma1Instance {
    let n_states = rng.gen_range(2..=5);
    let n_agent = rng.gen_range(2..=4);
    let n_opp = rng.gen_range(2..=4);
    let model = TabularModel::random(rng, n_states, n_agent, n_opp);
    let agent = TabularPolicy::random(rng, n_states, n_agent);
    let iops: Vec<TabularPolicy> = (0..m).map(|_| TabularPolicy::random(rng, n_states, n_opp)).collect();
    let true_opponent = TabularPolicy::random(rng, n_states, n_opp);
    let observations: Vec<(usize, usize)> = (0..20)
        .map(|_| {
            let s = rng.gen_range(0..n_states);
            (s, sample_index(rng, true_opponent.row(s)))
        })
        .collect();
    let prior = vec![1.0 / m as f64; m];
    let history = exact_posterior(&iops, &observations, &prior).expect("interior policies");
    let mut alpha = vec![0.0; m];
    for post in &history {
        for (a, p) in alpha.iter_mut().zip(post) {
            *a += p / history.len() as f64;
        }
    }
    Lemma1Instance { model, agent, iops, true_opponent, alpha, gamma: rng.gen_range(0.5..0.95) }
}

pub fn sample_index<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Distance {
    L1,
    SquaredL2,
}

impl Distance {
    pub fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Distance::L1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            Distance::SquaredL2 => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum(),
        }
    }
}

/// Expected distance between the `alpha`-mixture of `candidates` and a true
/// policy drawn as `candidates[m]` with probability `p[m]`.
pub fn expected_mixture_loss(candidates: &[Vec<f64>], alpha: &[f64], p: &[f64], distance: Distance) -> f64 {
    let n = candidates[0].len();
    let mix: Vec<f64> = (0..n)
        .map(|j| candidates.iter().zip(alpha).map(|(c, a)| a * c[j]).sum())
        .collect();
    candidates.iter().zip(p).map(|(c, pm)| pm * distance.eval(&mix, c)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single_state_game(rewards_o: Vec<Vec<f64>>) -> TabularModel {
        let (na, no) = (rewards_o.len(), rewards_o[0].len());
        TabularModel::from_fn(1, na, no, |_, _, _| vec![1.0], |_, a, o| (-rewards_o[a][o], rewards_o[a][o]))
    }

    #[test]
    fn k0_is_argmax_of_expected_immediate_reward() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let model = TabularModel::random(&mut rng, 3, 3, 4);
            let agent = TabularPolicy::random(&mut rng, 3, 3);
            let s = rng.gen_range(0..3);
            let expected: Vec<f64> = (0..4)
                .map(|o| (0..3).map(|a| agent.prob(s, a) * model.reward_o(s, a, o)).sum())
                .collect();
            let (best, value) = brute_force_best_response(&model, &agent, s, 0, 0.9).unwrap();
            let argmax = (0..4).fold(0, |b, o| if expected[o] > expected[b] { o } else { b });
            assert_eq!(best, argmax);
            assert!((value - expected[argmax]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_rewards_tie_break_to_action_zero() {
        let model = single_state_game(vec![vec![0.0; 3]; 2]);
        let agent = TabularPolicy::uniform(1, 2);
        assert_eq!(brute_force_best_response(&model, &agent, 0, 2, 0.9).unwrap(), (0, 0.0));
    }

    #[test]
    fn two_oracle_implementations_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let model = TabularModel::random(&mut rng, 2, 2, 2);
            let agent = TabularPolicy::random(&mut rng, 2, 2);
            let s = rng.gen_range(0..2);
            let (best, value) = brute_force_best_response(&model, &agent, s, 2, 0.9).unwrap();
            let mut by_recursion = f64::NEG_INFINITY;
            let mut arg = 0;
            for first in 0..2 {
                for b in 0..2 {
                    for c in 0..2 {
                        let v = recursive_sequence_return(&model, &agent, s, &[first, b, c], 0.9);
                        if v > by_recursion {
                            by_recursion = v;
                            arg = first;
                        }
                    }
                }
            }
            assert!((value - by_recursion).abs() < 1e-12);
            assert_eq!(best, arg);
            let direct = expected_sequence_return(&model, &agent, s, &[0, 1, 0], 0.9);
            let rec = recursive_sequence_return(&model, &agent, s, &[0, 1, 0], 0.9);
            assert!((direct - rec).abs() < 1e-12);
        }
    }

    #[test]
    fn enumeration_limit_is_a_usage_error() {
        let model = single_state_game(vec![vec![0.0; 4]; 2]);
        let agent = TabularPolicy::uniform(1, 2);
        assert!(matches!(brute_force_best_response(&model, &agent, 0, 11, 0.9), Err(Error::Usage(_))));
    }

    #[test]
    fn long_horizon_matches_greedy_value() {
        // Single state: the best open-loop sequence repeats the greedy action,
        // whose infinite-horizon value is computed by value iteration.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let gamma: f64 = 0.9;
        let model = TabularModel::random(&mut rng, 1, 2, 2);
        let agent = TabularPolicy::random(&mut rng, 1, 2);
        let (best, value) = brute_force_best_response(&model, &agent, 0, 20, gamma).unwrap();
        let greedy = TabularPolicy::deterministic(&[best], 2);
        let v = exact_value_for(&model, &agent, &greedy, gamma, 1e-12, Side::Opponent).unwrap();
        assert!((value - v[0]).abs() <= gamma.powi(21) / (1.0 - gamma));
    }

    #[test]
    fn value_iteration_special_cases() {
        let zero = TabularModel::from_fn(3, 2, 2, |_, _, _| vec![1.0 / 3.0; 3], |_, _, _| (0.0, 0.0));
        let pa = TabularPolicy::uniform(3, 2);
        assert_eq!(exact_value(&zero, &pa, &pa, 0.9, 1e-10).unwrap(), vec![0.0; 3]);
        let one = TabularModel::from_fn(1, 2, 2, |_, _, _| vec![1.0], |_, _, _| (1.0, 0.0));
        let p1 = TabularPolicy::uniform(1, 2);
        let v = exact_value(&one, &p1, &p1, 0.5, 1e-10).unwrap();
        assert!((v[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn value_iteration_reaches_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let model = TabularModel::random(&mut rng, 4, 3, 3);
        model.validate().unwrap();
        let pa = TabularPolicy::random(&mut rng, 4, 3);
        let po = TabularPolicy::random(&mut rng, 4, 3);
        let v = exact_value(&model, &pa, &po, 0.9, 1e-10).unwrap();
        assert!(bellman_residual(&model, &pa, &po, 0.9, Side::Agent, &v) < 1e-10);
    }

    #[test]
    fn lemma1_degenerate_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut inst = random_lemma1_instance(&mut rng, 3);
        let same = inst.iops[0].clone();
        inst.iops = vec![same.clone(), same.clone(), same];
        let report = check_lemma1(&inst).unwrap();
        for s in 0..report.lhs.len() {
            assert!((report.lhs[s] - report.epsilon[0][s]).abs() < 1e-9);
            assert!((report.rhs[s] - report.epsilon[0][s]).abs() < 1e-9);
        }
        let mut inst = random_lemma1_instance(&mut rng, 2);
        inst.alpha = vec![1.0, 0.0];
        let report = check_lemma1(&inst).unwrap();
        assert_eq!(report.lhs, report.rhs);
        assert_eq!(report.violations, 0);
    }

    #[test]
    fn exact_posterior_cases() {
        let a = TabularPolicy::new(vec![vec![0.8, 0.2]]).unwrap();
        let b = TabularPolicy::new(vec![vec![0.2, 0.8]]).unwrap();
        let post = exact_posterior(&[a.clone(), b], &[(0, 0)], &[0.5, 0.5]).unwrap();
        assert!((post[0][0] - 0.8).abs() < 1e-12 && (post[0][1] - 0.2).abs() < 1e-12);
        let post = exact_posterior(&[a.clone(), a], &[(0, 0), (0, 1), (0, 1)], &[0.3, 0.7]).unwrap();
        assert!(post.iter().all(|p| (p[0] - 0.3).abs() < 1e-15));
    }

    #[test]
    fn zero_likelihood_is_reported() {
        let a = TabularPolicy::deterministic(&[0], 2);
        let b = TabularPolicy::deterministic(&[0], 2);
        assert!(exact_posterior(&[a, b], &[(0, 1)], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn posterior_concentrates_on_true_candidate() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let candidates: Vec<TabularPolicy> = (0..3).map(|_| TabularPolicy::random(&mut rng, 3, 4)).collect();
        let obs: Vec<(usize, usize)> = (0..200)
            .map(|_| {
                let s = rng.gen_range(0..3);
                (s, sample_index(&mut rng, candidates[1].row(s)))
            })
            .collect();
        let post = exact_posterior(&candidates, &obs, &[1.0 / 3.0; 3]).unwrap();
        assert!(post.last().unwrap()[1] > 0.99);
    }

    #[test]
    fn l1_mixture_loss_is_not_minimized_at_the_true_weights() {
        // Two point masses with p = (0.7, 0.3): the L1 loss is 1.4 - 0.8 * alpha_0,
        // minimized at alpha = (1, 0) rather than alpha = p.
        let candidates = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let p = [0.7, 0.3];
        let at_p = expected_mixture_loss(&candidates, &p, &p, Distance::L1);
        let at_corner = expected_mixture_loss(&candidates, &[1.0, 0.0], &p, Distance::L1);
        assert!((at_p - (1.4 - 0.8 * 0.7)).abs() < 1e-12);
        assert!(at_corner < at_p);
        // Squared L2 is minimized at alpha = p.
        let sq_p = expected_mixture_loss(&candidates, &p, &p, Distance::SquaredL2);
        let sq_corner = expected_mixture_loss(&candidates, &[1.0, 0.0], &p, Distance::SquaredL2);
        assert!(sq_p < sq_corner);
    }
}
