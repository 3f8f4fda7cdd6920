//! Opponent zoo and the three test-time opponent behaviours: fixed policies,
//! naive learners (online PPO) and reasoning learners (PPO conditioned on a
//! learned model of the agent).

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::envs::{one_hot, triangle, Game, TransitionRecord};
use crate::error::{Error, Result};
use crate::nn::{checkpoint, Mlp};
use crate::opmodel::{finetune_level0, Iop};
use crate::oracle::sample_index;
use crate::ppo::{
    collect_rollout, ppo_update, ConditionedPolicy, Counterpart, CounterpartStep, PpoConfig, PpoLearner, RolloutBuffer,
    ValueNet,
};
use crate::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Train,
    Validation,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpponentType {
    Fixed,
    Naive,
    Reasoning,
}

impl OpponentType {
    pub fn name(self) -> &'static str {
        match self {
            OpponentType::Fixed => "fixed",
            OpponentType::Naive => "naive",
            OpponentType::Reasoning => "reasoning",
        }
    }
}

impl std::str::FromStr for OpponentType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(OpponentType::Fixed),
            "naive" => Ok(OpponentType::Naive),
            "reasoning" => Ok(OpponentType::Reasoning),
            other => Err(Error::config(format!("unknown opponent type `{other}`"))),
        }
    }
}

/// Reward shaping used to diversify zoo runs. The shaped terms are read from
/// the triangle game's observation layout; on other games only `Plain` applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Plain,
    /// Bonus for touching landmark `i` (0-based).
    Favor(u8),
    /// Bonus for touching either of two landmarks.
    Commute(u8, u8),
    /// Bonus for counter-clockwise progress around the triangle centre.
    Rotate,
}

pub const SHAPING_BONUS: f64 = 0.5;

impl Variant {
    pub fn tag(self) -> String {
        match self {
            Variant::Plain => "plain".into(),
            Variant::Favor(i) => format!("favor-t{}", i + 1),
            Variant::Commute(i, j) => format!("commute-t{}-t{}", i + 1, j + 1),
            Variant::Rotate => "rotate".into(),
        }
    }

    /// The default rotation over triangle diversity variants.
    pub fn triangle_cycle() -> Vec<Variant> {
        vec![
            Variant::Favor(0),
            Variant::Favor(1),
            Variant::Favor(2),
            Variant::Rotate,
            Variant::Commute(0, 1),
        ]
    }

    /// Shaping bonus for the opponent moving from `s` to `s_next`.
    pub fn bonus(self, s: &[f64], s_next: &[f64]) -> f64 {
        use triangle::layout::{OPPONENT_POS, OPPONENT_TOUCH};
        let touching = |l: u8| s_next.get(OPPONENT_TOUCH + 1 + l as usize).copied() == Some(1.0);
        match self {
            Variant::Plain => 0.0,
            Variant::Favor(i) => {
                if touching(i) {
                    SHAPING_BONUS
                } else {
                    0.0
                }
            }
            Variant::Commute(i, j) => {
                if touching(i) || touching(j) {
                    SHAPING_BONUS
                } else {
                    0.0
                }
            }
            Variant::Rotate => {
                if s.len() < OPPONENT_POS + 2 || s_next.len() < OPPONENT_POS + 2 {
                    return 0.0;
                }
                let angle = |v: &[f64]| v[OPPONENT_POS + 1].atan2(v[OPPONENT_POS]);
                let mut d = angle(s_next) - angle(s);
                if d > std::f64::consts::PI {
                    d -= 2.0 * std::f64::consts::PI;
                } else if d < -std::f64::consts::PI {
                    d += 2.0 * std::f64::consts::PI;
                }
                (3.0 * d).clamp(-SHAPING_BONUS, SHAPING_BONUS)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub run: usize,
    pub iteration: usize,
    pub variant: String,
}

/// A frozen opponent: its policy and value networks, plus the agent model
/// for reasoning learners.
#[derive(Debug, Clone)]
pub struct OpponentSnapshot {
    pub id: String,
    pub role: Role,
    pub provenance: Provenance,
    pub policy: ConditionedPolicy,
    pub value: ValueNet,
    pub agent_model: Option<Iop>,
}

impl OpponentSnapshot {
    pub fn is_reasoning(&self) -> bool {
        self.agent_model.is_some()
    }
}

/// Parameters of an online opponent learner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub ppo: PpoConfig,
    /// Agent-model finetune steps per update (reasoning learners).
    pub model_steps: usize,
    pub model_lr: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig { ppo: PpoConfig::default(), model_steps: 10, model_lr: 0.001 }
    }
}

/// Samples an action from a frozen snapshot without changing it.
pub fn fixed_act(snapshot: &OpponentSnapshot, s: &[f64], rng: &mut SimRng) -> Result<usize> {
    let cond = match &snapshot.agent_model {
        None => vec![0.0; snapshot.policy.cond_dim()],
        Some(model) => one_hot(sample_index(rng, &model.probs(s)?), snapshot.policy.cond_dim()),
    };
    Ok(snapshot.policy.act(s, &cond, rng)?.0)
}

#[derive(Debug, Clone)]
pub struct FixedOpponent {
    pub snapshot: OpponentSnapshot,
}

impl Counterpart for FixedOpponent {
    fn act(&mut self, obs: &[f64], rng: &mut SimRng) -> Result<usize> {
        fixed_act(&self.snapshot, obs, rng)
    }
}

/// PPO learner acting as the opponent, optionally with a shaped reward.
#[derive(Debug, Clone)]
pub struct NaiveLearner {
    pub learner: PpoLearner,
    pub shaping: Variant,
    buffer: RolloutBuffer,
    pending: Option<(Vec<f64>, f64, f64)>,
    updates: u64,
}

impl NaiveLearner {
    pub fn new(learner: PpoLearner, shaping: Variant) -> Self {
        NaiveLearner { learner, shaping, buffer: RolloutBuffer::default(), pending: None, updates: 0 }
    }

    pub fn from_snapshot(snapshot: &OpponentSnapshot, cfg: PpoConfig) -> Result<Self> {
        let learner = PpoLearner::new(snapshot.policy.clone(), snapshot.value.clone(), cfg)?;
        Ok(Self::new(learner, Variant::Plain))
    }

    /// Number of completed updates.
    pub fn version(&self) -> u64 {
        self.updates
    }

    pub fn trajectory(&self) -> &RolloutBuffer {
        &self.buffer
    }

    fn act_with(&mut self, obs: &[f64], cond: Vec<f64>, rng: &mut SimRng) -> Result<usize> {
        let (a, log_prob) = self.learner.policy.act(obs, &cond, rng)?;
        let value = self.learner.value.value(obs)?;
        self.pending = Some((cond, log_prob, value));
        Ok(a)
    }

    fn record(&mut self, step: &CounterpartStep<'_>) -> Result<()> {
        let (cond, log_prob, value) = self
            .pending
            .take()
            .ok_or_else(|| Error::usage("observe called without a preceding act"))?;
        let reward = step.reward + self.shaping.bonus(step.obs, step.next_obs);
        let record = TransitionRecord {
            s: step.obs.to_vec(),
            a: step.action,
            a_o: step.agent_action,
            s_next: step.next_obs.to_vec(),
            r: reward,
            r_o: 0.0,
        };
        self.buffer.push(record, cond, log_prob, value, step.done);
        Ok(())
    }
}

/// One PPO update on the learner's own trajectory, which is then cleared.
pub fn naive_learner_step(learner: &mut NaiveLearner, rng: &mut SimRng) -> Result<()> {
    if learner.buffer.is_empty() {
        return Ok(());
    }
    let mut buffer = std::mem::take(&mut learner.buffer);
    learner.learner.finish(&mut buffer)?;
    ppo_update(&mut learner.learner, &buffer, rng)?;
    learner.updates += 1;
    Ok(())
}

impl Counterpart for NaiveLearner {
    fn act(&mut self, obs: &[f64], rng: &mut SimRng) -> Result<usize> {
        let cond = vec![0.0; self.learner.policy.cond_dim()];
        self.act_with(obs, cond, rng)
    }

    fn observe(&mut self, step: &CounterpartStep<'_>) -> Result<()> {
        self.record(step)
    }
}

/// Opponent that models the agent's action and conditions its policy on the prediction.
#[derive(Debug, Clone)]
pub struct ReasoningLearner {
    pub inner: NaiveLearner,
    pub agent_model: Iop,
    pub cfg: LearnerConfig,
    observed: Vec<(Vec<f64>, usize)>,
}

impl ReasoningLearner {
    pub fn new(inner: NaiveLearner, agent_model: Iop, cfg: LearnerConfig) -> Result<Self> {
        if inner.learner.policy.cond_dim() != agent_model.net().output_dim() {
            return Err(Error::config("reasoning policy must condition on one agent action"));
        }
        Ok(ReasoningLearner { inner, agent_model, cfg, observed: Vec::new() })
    }

    pub fn from_snapshot(snapshot: &OpponentSnapshot, cfg: LearnerConfig) -> Result<Self> {
        let model = snapshot
            .agent_model
            .clone()
            .ok_or_else(|| Error::usage(format!("snapshot {} has no agent model", snapshot.id)))?;
        Self::new(NaiveLearner::from_snapshot(snapshot, cfg.ppo)?, model, cfg)
    }

    pub fn observed(&self) -> &[(Vec<f64>, usize)] {
        &self.observed
    }
}

/// Samples the predicted agent action, then acts conditioned on it.
pub fn reasoning_learner_act(state: &mut ReasoningLearner, s: &[f64], rng: &mut SimRng) -> Result<usize> {
    let predicted = sample_index(rng, &state.agent_model.probs(s)?);
    let cond = one_hot(predicted, state.agent_model.net().output_dim());
    state.inner.act_with(s, cond, rng)
}

/// Finetunes the agent model on `observed` pairs, then runs one PPO update.
pub fn reasoning_learner_update(
    state: &mut ReasoningLearner,
    observed: &[(Vec<f64>, usize)],
    steps: usize,
    lr: f64,
    rng: &mut SimRng,
) -> Result<()> {
    if !observed.is_empty() {
        finetune_level0(&mut state.agent_model, observed, steps, lr)?;
    }
    naive_learner_step(&mut state.inner, rng)
}

impl Counterpart for ReasoningLearner {
    fn act(&mut self, obs: &[f64], rng: &mut SimRng) -> Result<usize> {
        reasoning_learner_act(self, obs, rng)
    }

    fn observe(&mut self, step: &CounterpartStep<'_>) -> Result<()> {
        self.observed.push((step.obs.to_vec(), step.agent_action));
        self.inner.record(step)
    }
}

/// A test-phase opponent of any type.
#[derive(Debug, Clone)]
pub enum TestOpponent {
    Fixed(FixedOpponent),
    Naive(NaiveLearner),
    Reasoning(ReasoningLearner),
}

impl TestOpponent {
    pub fn from_snapshot(kind: OpponentType, snapshot: &OpponentSnapshot, cfg: LearnerConfig) -> Result<Self> {
        Ok(match kind {
            OpponentType::Fixed => TestOpponent::Fixed(FixedOpponent { snapshot: snapshot.clone() }),
            OpponentType::Naive => TestOpponent::Naive(NaiveLearner::from_snapshot(snapshot, cfg.ppo)?),
            OpponentType::Reasoning => TestOpponent::Reasoning(ReasoningLearner::from_snapshot(snapshot, cfg)?),
        })
    }

    /// Learning step at the end of an episode; a no-op for fixed opponents.
    pub fn end_episode(&mut self, rng: &mut SimRng) -> Result<()> {
        match self {
            TestOpponent::Fixed(_) => Ok(()),
            TestOpponent::Naive(l) => naive_learner_step(l, rng),
            TestOpponent::Reasoning(l) => {
                let observed = std::mem::take(&mut l.observed);
                let (steps, lr) = (l.cfg.model_steps, l.cfg.model_lr);
                reasoning_learner_update(l, &observed, steps, lr, rng)
            }
        }
    }

    /// Parameter versions of the acting networks, for freeze checks.
    pub fn param_versions(&self) -> (u64, u64) {
        match self {
            TestOpponent::Fixed(f) => (f.snapshot.policy.net().version(), 0),
            TestOpponent::Naive(l) => (l.learner.policy.net().version(), 0),
            TestOpponent::Reasoning(l) => (l.inner.learner.policy.net().version(), l.agent_model.version()),
        }
    }
}

impl Counterpart for TestOpponent {
    fn act(&mut self, obs: &[f64], rng: &mut SimRng) -> Result<usize> {
        match self {
            TestOpponent::Fixed(o) => o.act(obs, rng),
            TestOpponent::Naive(o) => o.act(obs, rng),
            TestOpponent::Reasoning(o) => o.act(obs, rng),
        }
    }

    fn observe(&mut self, step: &CounterpartStep<'_>) -> Result<()> {
        match self {
            TestOpponent::Fixed(o) => o.observe(step),
            TestOpponent::Naive(o) => o.observe(step),
            TestOpponent::Reasoning(o) => o.observe(step),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZooConfig {
    pub n_runs: usize,
    pub snapshots_per_run: usize,
    /// Snapshot this many training iterations apart.
    pub snapshot_interval: usize,
    pub steps_per_iteration: usize,
    pub variants: Vec<Variant>,
    /// Number of train / validation / test snapshots per run; sums to `snapshots_per_run`.
    pub split: [usize; 3],
    pub reasoning: bool,
    pub hidden: Vec<usize>,
    pub learner: LearnerConfig,
    pub max_retries: usize,
}

impl Default for ZooConfig {
    fn default() -> Self {
        ZooConfig {
            n_runs: 10,
            snapshots_per_run: 26,
            snapshot_interval: 4,
            steps_per_iteration: 100,
            variants: Variant::triangle_cycle(),
            split: [20, 3, 3],
            reasoning: false,
            hidden: vec![64, 32],
            learner: LearnerConfig::default(),
            max_retries: 3,
        }
    }
}

impl ZooConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_runs == 0 || self.snapshots_per_run == 0 || self.snapshot_interval == 0 {
            return Err(Error::config("zoo needs at least one run, snapshot and iteration"));
        }
        if self.split.iter().sum::<usize>() != self.snapshots_per_run {
            return Err(Error::config("train/validation/test split must sum to snapshots_per_run"));
        }
        if self.variants.is_empty() {
            return Err(Error::config("zoo needs at least one variant"));
        }
        Ok(())
    }
}

/// A collection of opponent snapshots with disjoint roles.
#[derive(Debug, Clone, Default)]
pub struct Zoo {
    pub snapshots: Vec<OpponentSnapshot>,
}

impl Zoo {
    pub fn by_role(&self, role: Role) -> Vec<&OpponentSnapshot> {
        self.snapshots.iter().filter(|s| s.role == role).collect()
    }

    pub fn get(&self, id: &str) -> Option<&OpponentSnapshot> {
        self.snapshots.iter().find(|s| s.id == id)
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn extend(&mut self, other: Zoo) -> Result<()> {
        for s in other.snapshots {
            if self.get(&s.id).is_some() {
                return Err(Error::config(format!("duplicate snapshot id {}", s.id)));
            }
            self.snapshots.push(s);
        }
        Ok(())
    }
}

fn run_once(game: &mut dyn Game, cfg: &ZooConfig, run: usize, seed: u64) -> Result<Vec<OpponentSnapshot>> {
    let mut rng = SimRng::seed_from_u64(seed);
    let spec = game.spec().clone();
    let variant = cfg.variants[run % cfg.variants.len()];
    let (sd, na, no) = (spec.state_dim, spec.n_agent_actions(), spec.n_opponent_actions());
    let mut agent = PpoLearner::build(sd, 0, na, &cfg.hidden, cfg.learner.ppo, &mut rng)?;
    let cond = if cfg.reasoning { na } else { 0 };
    let opp_learner = PpoLearner::build(sd, cond, no, &cfg.hidden, cfg.learner.ppo, &mut rng)?;
    let naive = NaiveLearner::new(opp_learner, variant);
    let mut opponent = if cfg.reasoning {
        let model = Iop::new(sd, na, &cfg.hidden, &mut rng)?;
        TestOpponent::Reasoning(ReasoningLearner::new(naive, model, cfg.learner)?)
    } else {
        TestOpponent::Naive(naive)
    };
    let mut roles: Vec<Role> = [Role::Train, Role::Validation, Role::Test]
        .iter()
        .zip(cfg.split)
        .flat_map(|(r, n)| std::iter::repeat_n(*r, n))
        .collect();
    roles.shuffle(&mut rng);
    let kind = if cfg.reasoning { "reasoning" } else { "policy" };
    let mut out = Vec::with_capacity(cfg.snapshots_per_run);
    game.reset(rng.gen());
    for (i, role) in roles.into_iter().enumerate() {
        for _ in 0..cfg.snapshot_interval {
            let buf = collect_rollout(&agent, game, &mut opponent, cfg.steps_per_iteration, None, &mut rng)?;
            ppo_update(&mut agent, &buf, &mut rng)?;
            opponent.end_episode(&mut rng)?;
        }
        let iteration = (i + 1) * cfg.snapshot_interval;
        let (policy, value, agent_model) = match &opponent {
            TestOpponent::Naive(l) => (l.learner.policy.clone(), l.learner.value.clone(), None),
            TestOpponent::Reasoning(l) => {
                (l.inner.learner.policy.clone(), l.inner.learner.value.clone(), Some(l.agent_model.clone()))
            }
            TestOpponent::Fixed(_) => unreachable!("zoo runs train learners"),
        };
        if !policy.net().params().is_finite() || !value.net().params().is_finite() {
            return Err(Error::training("zoo run diverged"));
        }
        out.push(OpponentSnapshot {
            id: format!("{kind}-r{run}-i{iteration}"),
            role,
            provenance: Provenance { run, iteration, variant: variant.tag() },
            policy,
            value,
            agent_model,
        });
    }
    Ok(out)
}

/// Trains `n_runs` independent opponents against co-learning PPO agents and
/// snapshots each at evenly spaced iterations. A diverged run is retried
/// with a fresh seed up to `max_retries` times.
pub fn build_zoo(game: &mut dyn Game, cfg: &ZooConfig, seed: u64) -> Result<Zoo> {
    cfg.validate()?;
    let mut zoo = Zoo::default();
    let mut seeds = SimRng::seed_from_u64(seed);
    for run in 0..cfg.n_runs {
        let mut attempt = 0;
        loop {
            let run_seed = seeds.gen();
            match run_once(game, cfg, run, run_seed) {
                Ok(snaps) => {
                    zoo.snapshots.extend(snaps);
                    break;
                }
                Err(Error::Training(msg)) if attempt < cfg.max_retries => {
                    log::warn!("zoo run {run} diverged ({msg}); retrying");
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(zoo)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub role: Role,
    pub run: usize,
    pub iteration: usize,
    pub variant: String,
    pub state_dim: usize,
    pub policy: String,
    pub value: String,
    pub agent_model: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZooManifest {
    pub config_hash: String,
    pub snapshots: Vec<ManifestEntry>,
}

pub const ZOO_MANIFEST: &str = "zoo.json";

/// Writes every snapshot's networks plus a JSON index into `dir`.
pub fn save_zoo(zoo: &Zoo, dir: &Path, config_hash: &str) -> Result<ZooManifest> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(zoo.len());
    for s in &zoo.snapshots {
        let policy = format!("{}.policy.ckpt", s.id);
        let value = format!("{}.value.ckpt", s.id);
        checkpoint::save(s.policy.net(), &dir.join(&policy))?;
        checkpoint::save(s.value.net(), &dir.join(&value))?;
        let agent_model = match &s.agent_model {
            Some(m) => {
                let name = format!("{}.agent_model.ckpt", s.id);
                checkpoint::save(m.net(), &dir.join(&name))?;
                Some(name)
            }
            None => None,
        };
        entries.push(ManifestEntry {
            id: s.id.clone(),
            role: s.role,
            run: s.provenance.run,
            iteration: s.provenance.iteration,
            variant: s.provenance.variant.clone(),
            state_dim: s.policy.state_dim(),
            policy,
            value,
            agent_model,
        });
    }
    let manifest = ZooManifest { config_hash: config_hash.to_string(), snapshots: entries };
    std::fs::write(dir.join(ZOO_MANIFEST), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn load_zoo(dir: &Path) -> Result<(Zoo, ZooManifest)> {
    let manifest: ZooManifest = serde_json::from_str(&std::fs::read_to_string(dir.join(ZOO_MANIFEST))?)?;
    let mut zoo = Zoo::default();
    for e in &manifest.snapshots {
        let policy = ConditionedPolicy::from_net(checkpoint::load::<f64>(&dir.join(&e.policy))?, e.state_dim)?;
        let value = ValueNet::from_net(checkpoint::load::<f64>(&dir.join(&e.value))?)?;
        let agent_model = match &e.agent_model {
            Some(p) => Some(Iop::from_net(checkpoint::load::<f64>(&dir.join(p))?, 0)?),
            None => None,
        };
        zoo.snapshots.push(OpponentSnapshot {
            id: e.id.clone(),
            role: e.role,
            provenance: Provenance { run: e.run, iteration: e.iteration, variant: e.variant.clone() },
            policy,
            value,
            agent_model,
        });
    }
    Ok((zoo, manifest))
}

/// A snapshot with an all-zero policy (uniform actions), mainly for tests.
pub fn uniform_snapshot(state_dim: usize, n_actions: usize, hidden: &[usize]) -> Result<OpponentSnapshot> {
    use crate::nn::{NetSpec, OutputHead};
    let policy = ConditionedPolicy::from_net(
        Mlp::zeros(NetSpec::mlp(state_dim, hidden, n_actions, OutputHead::Softmax)?)?,
        state_dim,
    )?;
    let value = ValueNet::from_net(Mlp::zeros(NetSpec::mlp(state_dim, hidden, 1, OutputHead::Linear)?)?)?;
    Ok(OpponentSnapshot {
        id: "uniform".into(),
        role: Role::Test,
        provenance: Provenance { run: 0, iteration: 0, variant: Variant::Plain.tag() },
        policy,
        value,
        agent_model: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::matrix::{tabular_game, Bimatrix};
    use crate::envs::triangle::TriangleGame;
    use crate::ppo::ConstantCounterpart;
    use std::collections::HashSet;

    fn rng(seed: u64) -> SimRng {
        SimRng::seed_from_u64(seed)
    }

    fn small_zoo_cfg(snapshots: usize, split: [usize; 3], reasoning: bool) -> ZooConfig {
        ZooConfig {
            n_runs: 1,
            snapshots_per_run: snapshots,
            snapshot_interval: 1,
            steps_per_iteration: 25,
            variants: vec![Variant::Favor(0), Variant::Favor(1), Variant::Rotate],
            split,
            reasoning,
            hidden: vec![16],
            ..Default::default()
        }
    }

    #[test]
    fn one_run_three_snapshots() {
        let mut game = TriangleGame::default();
        let zoo = build_zoo(&mut game, &small_zoo_cfg(3, [1, 1, 1], false), 0).unwrap();
        assert_eq!(zoo.len(), 3);
        let iters: HashSet<usize> = zoo.snapshots.iter().map(|s| s.provenance.iteration).collect();
        assert_eq!(iters.len(), 3);
        let roles: HashSet<Role> = zoo.snapshots.iter().map(|s| s.role).collect();
        assert_eq!(roles.len(), 3);
    }

    #[test]
    fn variants_cover_every_tag_and_roles_are_disjoint() {
        let mut game = TriangleGame::default();
        let cfg = ZooConfig { n_runs: 3, ..small_zoo_cfg(4, [2, 1, 1], false) };
        let zoo = build_zoo(&mut game, &cfg, 1).unwrap();
        let tags: HashSet<&str> = zoo.snapshots.iter().map(|s| s.provenance.variant.as_str()).collect();
        assert_eq!(tags, HashSet::from(["favor-t1", "favor-t2", "rotate"]));
        let ids: HashSet<&str> = zoo.snapshots.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids.len(), zoo.len());
        assert_eq!(zoo.by_role(Role::Train).len(), 6);
        assert_eq!(zoo.by_role(Role::Validation).len(), 3);
        assert_eq!(zoo.by_role(Role::Test).len(), 3);
    }

    #[test]
    fn default_split_sizes() {
        let cfg = ZooConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.split.map(|n| n * cfg.n_runs), [200, 30, 30]);
        assert!(ZooConfig { split: [20, 3, 2], ..Default::default() }.validate().is_err());
    }

    #[test]
    fn zoo_round_trips_through_disk() {
        let mut game = TriangleGame::default();
        let zoo = build_zoo(&mut game, &small_zoo_cfg(2, [1, 0, 1], true), 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_zoo(&zoo, dir.path(), "abc").unwrap();
        let (back, manifest) = load_zoo(dir.path()).unwrap();
        assert_eq!(manifest.config_hash, "abc");
        for (a, b) in zoo.snapshots.iter().zip(&back.snapshots) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.policy.net().params().to_flat(), b.policy.net().params().to_flat());
            assert_eq!(
                a.agent_model.as_ref().unwrap().net().params().to_flat(),
                b.agent_model.as_ref().unwrap().net().params().to_flat()
            );
        }
    }

    #[test]
    fn fixed_opponent_is_frozen_and_seeded() {
        let snap = uniform_snapshot(12, 5, &[8]).unwrap();
        let s = vec![0.1; 12];
        assert_eq!(fixed_act(&snap, &s, &mut rng(3)).unwrap(), fixed_act(&snap, &s, &mut rng(3)).unwrap());
        let mut counts = [0usize; 5];
        let mut r = rng(4);
        for _ in 0..10_000 {
            counts[fixed_act(&snap, &s, &mut r).unwrap()] += 1;
        }
        assert!(counts.iter().all(|c| (*c as f64 / 10_000.0 - 0.2).abs() < 0.02));

        let mut opp = TestOpponent::from_snapshot(OpponentType::Fixed, &snap, LearnerConfig::default()).unwrap();
        let before = opp.param_versions();
        let learner = PpoLearner::build(12, 0, 5, &[8], PpoConfig::default(), &mut r).unwrap();
        let mut game = TriangleGame::default();
        for _ in 0..100 {
            game.reset(r.gen());
            collect_rollout(&learner, &mut game, &mut opp, 25, None, &mut r).unwrap();
            opp.end_episode(&mut r).unwrap();
        }
        assert_eq!(opp.param_versions(), before);
    }

    /// One-step game where the opponent earns 1 for action 1 and 0 otherwise.
    fn opponent_bandit() -> crate::envs::matrix::MatrixGame {
        let payoff = Bimatrix { agent: vec![vec![0.0, 0.0, 0.0]], opponent: vec![vec![0.0, 1.0, 0.0]] };
        tabular_game(payoff, 1).unwrap()
    }

    #[test]
    fn naive_learner_improves_on_a_bandit() {
        let mut r = rng(5);
        let agent = PpoLearner::build(1, 0, 1, &[8], PpoConfig::default(), &mut r).unwrap();
        let opp = PpoLearner::build(1, 0, 3, &[16], PpoConfig::default(), &mut r).unwrap();
        let mut naive = NaiveLearner::new(opp, Variant::Plain);
        let start = naive.learner.policy.probs(&[1.0], &[]).unwrap()[1];
        let mut game = opponent_bandit();
        for i in 0..20 {
            collect_rollout(&agent, &mut game, &mut naive, 16, None, &mut r).unwrap();
            naive_learner_step(&mut naive, &mut r).unwrap();
            assert_eq!(naive.version(), i + 1);
        }
        assert!(naive.learner.policy.probs(&[1.0], &[]).unwrap()[1] > start);
    }

    #[test]
    fn naive_zero_advantage_leaves_policy() {
        let mut r = rng(6);
        let cfg = PpoConfig { entropy_coef: 0.0, ..Default::default() };
        let agent = PpoLearner::build(1, 0, 1, &[8], cfg, &mut r).unwrap();
        let opp = PpoLearner::build(1, 0, 3, &[8], cfg, &mut r).unwrap();
        let mut naive = NaiveLearner::new(opp, Variant::Plain);
        // All-zero payoffs and a zero value head give zero advantages.
        naive.learner.value.net_mut().params_mut().fill_zero();
        let mut game = tabular_game(Bimatrix::zero_sum(vec![vec![0.0; 3]]), 1).unwrap();
        collect_rollout(&agent, &mut game, &mut naive, 8, None, &mut r).unwrap();
        let before = naive.learner.policy.net().params().to_flat();
        naive_learner_step(&mut naive, &mut r).unwrap();
        assert_eq!(naive.learner.policy.net().params().to_flat(), before);
    }

    fn reasoning(seed: u64) -> ReasoningLearner {
        let mut r = rng(seed);
        let learner = PpoLearner::build(2, 3, 4, &[16], PpoConfig::default(), &mut r).unwrap();
        let model = Iop::new(2, 3, &[16], &mut r).unwrap();
        ReasoningLearner::new(NaiveLearner::new(learner, Variant::Plain), model, LearnerConfig::default()).unwrap()
    }

    #[test]
    fn reasoning_learner_acts_validly_and_deterministically() {
        let mut a = reasoning(7);
        let mut b = reasoning(7);
        for i in 0..20 {
            let s = [i as f64 / 20.0, 0.5];
            let x = reasoning_learner_act(&mut a, &s, &mut rng(i)).unwrap();
            let y = reasoning_learner_act(&mut b, &s, &mut rng(i)).unwrap();
            assert_eq!(x, y);
            assert!(x < 4);
        }
    }

    #[test]
    fn saturated_agent_model_conditions_on_action_zero() {
        let mut l = reasoning(8);
        let spec = l.agent_model.net().spec().clone();
        let mut net = Mlp::zeros(spec).unwrap();
        net.params_mut().layers_mut().last_mut().unwrap().biases = vec![500.0, 0.0, 0.0];
        l.agent_model = Iop::from_net(net, 0).unwrap();
        let mut r = rng(9);
        for _ in 0..20 {
            reasoning_learner_act(&mut l, &[0.3, 0.3], &mut r).unwrap();
            assert_eq!(l.inner.pending.as_ref().unwrap().0, vec![1.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn reasoning_update_fits_the_agent_model() {
        let mut l = reasoning(10);
        let s = vec![0.2, -0.4];
        let observed = vec![(s.clone(), 2); 8];
        let before = l.agent_model.probs(&s).unwrap()[2];
        reasoning_learner_update(&mut l, &observed, 3, 0.005, &mut rng(0)).unwrap();
        assert!(l.agent_model.probs(&s).unwrap()[2] > before);
        let frozen = l.agent_model.net().params().to_flat();
        reasoning_learner_update(&mut l, &observed, 0, 0.005, &mut rng(0)).unwrap();
        assert_eq!(l.agent_model.net().params().to_flat(), frozen);
        // Empty observations leave the model untouched.
        reasoning_learner_update(&mut l, &[], 3, 0.005, &mut rng(0)).unwrap();
        assert_eq!(l.agent_model.net().params().to_flat(), frozen);
    }

    #[test]
    fn reasoning_learner_learns_a_constant_agent() {
        // Agent always plays 1; the learner observes it for 50 episodes.
        let mut r = rng(11);
        let cfg = LearnerConfig::default();
        let learner = PpoLearner::build(12, 5, 5, &[64, 32], cfg.ppo, &mut r).unwrap();
        let model = Iop::new(12, 5, &[64, 32], &mut r).unwrap();
        let mut opp = TestOpponent::Reasoning(ReasoningLearner::new(NaiveLearner::new(learner, Variant::Plain), model, cfg).unwrap());
        let mut game = TriangleGame::default();
        let mut agent = ConstantAgent(1);
        for _ in 0..50 {
            game.reset(r.gen());
            play_episode(&mut game, &mut agent, &mut opp, &mut r);
            opp.end_episode(&mut r).unwrap();
        }
        let TestOpponent::Reasoning(l) = &opp else { unreachable!() };
        let p = l.agent_model.probs(&game.state().observation).unwrap()[1];
        assert!(p > 0.9, "{p}");
    }

    struct ConstantAgent(usize);

    fn play_episode(game: &mut TriangleGame, agent: &mut ConstantAgent, opp: &mut TestOpponent, r: &mut SimRng) {
        while !game.state().done {
            let s = game.opponent_observation();
            let a_o = opp.act(&s, r).unwrap();
            let res = game.step(agent.0, a_o).unwrap();
            let next = game.opponent_observation();
            let step = CounterpartStep { obs: &s, action: a_o, agent_action: agent.0, reward: res.r_o, next_obs: &next, done: res.done };
            opp.observe(&step).unwrap();
        }
    }

    #[test]
    fn shaping_bonuses() {
        use triangle::layout::{OPPONENT_POS, OPPONENT_TOUCH};
        let mut s = vec![0.0; 12];
        let mut next = vec![0.0; 12];
        next[OPPONENT_TOUCH + 2] = 1.0;
        assert_eq!(Variant::Favor(1).bonus(&s, &next), SHAPING_BONUS);
        assert_eq!(Variant::Favor(0).bonus(&s, &next), 0.0);
        assert_eq!(Variant::Commute(0, 1).bonus(&s, &next), SHAPING_BONUS);
        s[OPPONENT_POS] = 0.3;
        next[OPPONENT_POS] = 0.3;
        next[OPPONENT_POS + 1] = 0.05;
        assert!(Variant::Rotate.bonus(&s, &next) > 0.0);
        assert!(Variant::Rotate.bonus(&next, &s) < 0.0);
        assert_eq!(Variant::Plain.bonus(&s, &next), 0.0);
        let _ = ConstantCounterpart(0);
    }
}
