//! Flat `key = value` experiment configuration with dotted sections.
//!
//! Lines starting with `#` are comments. Unknown keys are rejected. The
//! canonical rendering (every key, sorted) is what the config hash covers.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::envs::{GameConfig, GameName, RewardStructure};
use crate::error::{Error, Result};
use crate::opmodel::{MbomConfig, Mixing, Targets};
use crate::opponents::{LearnerConfig, Variant, ZooConfig};
use crate::ppo::PpoConfig;

/// Agent variants: the full method, its ablations and the plain PPO baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentVariant {
    Mbom,
    /// Level-0 IOP only.
    MbomWoIops,
    /// Levels above 0 finetuned on random actions.
    MbomBm,
    /// Uniform mixing weights.
    MbomUnif,
    /// All weight on the level in `variant.level`.
    MbomPhiM,
    PpoOnly,
}

impl AgentVariant {
    pub const ALL: [AgentVariant; 6] = [
        AgentVariant::Mbom,
        AgentVariant::MbomWoIops,
        AgentVariant::MbomBm,
        AgentVariant::MbomUnif,
        AgentVariant::MbomPhiM,
        AgentVariant::PpoOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AgentVariant::Mbom => "mbom",
            AgentVariant::MbomWoIops => "mbom_wo_iops",
            AgentVariant::MbomBm => "mbom_bm",
            AgentVariant::MbomUnif => "mbom_unif",
            AgentVariant::MbomPhiM => "mbom_phi_m",
            AgentVariant::PpoOnly => "ppo_only",
        }
    }

    pub fn uses_opponent_model(self) -> bool {
        self != AgentVariant::PpoOnly
    }
}

impl fmt::Display for AgentVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AgentVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::config(format!("unknown variant `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainConfig {
    /// Training opponents faced during pretraining.
    pub nu: usize,
    pub iterations: usize,
    pub steps_per_iteration: usize,
    /// Level-0 IOP epochs over each fresh batch while the agent trains.
    pub iop_epochs: usize,
    pub final_iop_epochs: usize,
    pub iop_lr: f64,
    /// Training opponents keep learning (naive learners) instead of playing fixed.
    pub opponents_learn: bool,
    /// Condition on a per-opponent copy of the level-0 IOP that keeps
    /// finetuning on that opponent's actions, as in the test phase.
    pub adapt_level0: bool,
    pub env_epochs: usize,
    pub env_lr: f64,
    pub batch_size: usize,
    /// Fraction of the experience buffer held out for the model error.
    pub holdout: f64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            nu: 20,
            iterations: 6000,
            steps_per_iteration: 100,
            iop_epochs: 1,
            final_iop_epochs: 10,
            iop_lr: 0.001,
            opponents_learn: false,
            adapt_level0: true,
            env_epochs: 10,
            env_lr: 0.001,
            batch_size: 64,
            holdout: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub episodes: usize,
    /// Cap on test opponents per type.
    pub opponents: usize,
    pub workers: usize,
}

impl Default for TestConfig {
    fn default() -> Self {
        TestConfig { episodes: 100, opponents: 30, workers: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub game: GameConfig,
    pub hidden: Vec<usize>,
    pub ppo: PpoConfig,
    pub mbom: MbomConfig,
    pub zoo: ZooConfig,
    /// Reasoning-learner runs (three test snapshots each).
    pub reasoning_runs: usize,
    pub reasoning_interval: usize,
    pub zoo_seed: u64,
    pub opponent: LearnerConfig,
    pub pretrain: PretrainConfig,
    pub test: TestConfig,
    pub variant: AgentVariant,
    /// Level used by `mbom_phi_m`.
    pub phi_level: usize,
    pub seeds: Vec<u64>,
}

impl ExperimentConfig {
    /// Defaults for one game.
    pub fn for_game(name: GameName) -> Self {
        let ppo = match name {
            GameName::Coin => PpoConfig { gamma: 0.0, lam: 0.0, ..Default::default() },
            _ => PpoConfig::default(),
        };
        let (m, k) = match name {
            GameName::Triangle | GameName::MatchingPennies => (3, 2),
            GameName::Pursuit | GameName::Coin => (2, 1),
        };
        let mbom = MbomConfig { m, k, gamma: ppo.gamma, ..Default::default() };
        let variants = match name {
            GameName::Triangle => Variant::triangle_cycle(),
            _ => vec![Variant::Plain],
        };
        ExperimentConfig {
            game: GameConfig { name, seed: 0, episode_len: GameConfig::default_episode_len(name) },
            hidden: vec![64, 32],
            ppo,
            mbom,
            zoo: ZooConfig {
                variants,
                snapshot_interval: 20,
                learner: LearnerConfig { ppo, ..Default::default() },
                ..Default::default()
            },
            reasoning_runs: 10,
            reasoning_interval: 150,
            zoo_seed: 7,
            opponent: LearnerConfig { ppo, ..Default::default() },
            pretrain: PretrainConfig::default(),
            test: TestConfig::default(),
            variant: AgentVariant::Mbom,
            phi_level: 0,
            seeds: vec![0, 1, 2, 3, 4],
        }
    }

    pub fn reward_structure(&self) -> RewardStructure {
        match self.game.name {
            GameName::Triangle | GameName::MatchingPennies => RewardStructure::ZeroSum,
            GameName::Coin => RewardStructure::Cooperative,
            GameName::Pursuit => RewardStructure::GeneralSum,
        }
    }

    /// The opponent-model configuration implied by the variant.
    pub fn mbom_for_variant(&self) -> MbomConfig {
        let mut cfg = self.mbom;
        cfg.gamma = self.ppo.gamma;
        match self.variant {
            AgentVariant::Mbom | AgentVariant::PpoOnly => {}
            AgentVariant::MbomWoIops => cfg.m = 1,
            AgentVariant::MbomBm => cfg.targets = Targets::Random,
            AgentVariant::MbomUnif => cfg.mixing = Mixing::Uniform,
            AgentVariant::MbomPhiM => cfg.mixing = Mixing::Single(self.phi_level),
        }
        cfg
    }

    pub fn with_variant(&self, variant: AgentVariant) -> Self {
        ExperimentConfig { variant, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        self.ppo.validate()?;
        self.mbom_for_variant().validate()?;
        self.zoo.validate()?;
        if self.variant == AgentVariant::MbomPhiM && self.phi_level >= self.mbom.m {
            return Err(Error::config(format!("variant.level must be below mbom.m = {}", self.mbom.m)));
        }
        if self.hidden.is_empty() {
            return Err(Error::config("agent.hidden needs at least one layer"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds must not be empty"));
        }
        if !(0.0..1.0).contains(&self.pretrain.holdout) {
            return Err(Error::config("pretrain.holdout must lie in [0, 1)"));
        }
        if self.pretrain.nu == 0 || self.pretrain.batch_size == 0 || self.test.episodes == 0 {
            return Err(Error::config("pretrain.nu, pretrain.batch_size and test.episodes must be positive"));
        }
        Ok(())
    }

    /// Every key with its current value, sorted by key.
    pub fn entries(&self) -> BTreeMap<&'static str, String> {
        let list = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let zoo_variants = self.zoo.variants.iter().map(|v| v.tag()).collect::<Vec<_>>().join(",");
        let seeds = self.seeds.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut m = BTreeMap::new();
        m.insert("game.name", self.game.name.to_string());
        m.insert("game.episode_len", self.game.episode_len.to_string());
        m.insert("agent.hidden", list(&self.hidden));
        m.insert("ppo.gamma", self.ppo.gamma.to_string());
        m.insert("ppo.lam", self.ppo.lam.to_string());
        m.insert("ppo.clip", self.ppo.clip.to_string());
        m.insert("ppo.epochs", self.ppo.epochs.to_string());
        m.insert("ppo.minibatch", self.ppo.minibatch.to_string());
        m.insert("ppo.learning_rate", self.ppo.learning_rate.to_string());
        m.insert("ppo.entropy_coef", self.ppo.entropy_coef.to_string());
        m.insert("ppo.normalize_advantages", self.ppo.normalize_advantages.to_string());
        m.insert("mbom.m", self.mbom.m.to_string());
        m.insert("mbom.k", self.mbom.k.to_string());
        m.insert("mbom.n_seq", self.mbom.n_seq.to_string());
        m.insert("mbom.lambda", self.mbom.lambda.to_string());
        m.insert("mbom.horizon", self.mbom.horizon.to_string());
        m.insert("mbom.temperature", self.mbom.temperature.to_string());
        m.insert("mbom.iop_lr", self.mbom.iop_lr.to_string());
        m.insert("mbom.iop_steps", self.mbom.iop_steps.to_string());
        m.insert("mbom.level0_lr", self.mbom.level0_lr.to_string());
        m.insert("mbom.level0_steps", self.mbom.level0_steps.to_string());
        m.insert("zoo.runs", self.zoo.n_runs.to_string());
        m.insert("zoo.snapshots_per_run", self.zoo.snapshots_per_run.to_string());
        m.insert("zoo.snapshot_interval", self.zoo.snapshot_interval.to_string());
        m.insert("zoo.steps_per_iteration", self.zoo.steps_per_iteration.to_string());
        m.insert("zoo.split", list(&self.zoo.split));
        m.insert("zoo.variants", zoo_variants);
        m.insert("zoo.reasoning_runs", self.reasoning_runs.to_string());
        m.insert("zoo.reasoning_interval", self.reasoning_interval.to_string());
        m.insert("zoo.seed", self.zoo_seed.to_string());
        m.insert("opponent.model_steps", self.opponent.model_steps.to_string());
        m.insert("opponent.model_lr", self.opponent.model_lr.to_string());
        m.insert("pretrain.nu", self.pretrain.nu.to_string());
        m.insert("pretrain.iterations", self.pretrain.iterations.to_string());
        m.insert("pretrain.steps_per_iteration", self.pretrain.steps_per_iteration.to_string());
        m.insert("pretrain.iop_epochs", self.pretrain.iop_epochs.to_string());
        m.insert("pretrain.final_iop_epochs", self.pretrain.final_iop_epochs.to_string());
        m.insert("pretrain.iop_lr", self.pretrain.iop_lr.to_string());
        m.insert("pretrain.opponents_learn", self.pretrain.opponents_learn.to_string());
        m.insert("pretrain.adapt_level0", self.pretrain.adapt_level0.to_string());
        m.insert("pretrain.env_epochs", self.pretrain.env_epochs.to_string());
        m.insert("pretrain.env_lr", self.pretrain.env_lr.to_string());
        m.insert("pretrain.batch_size", self.pretrain.batch_size.to_string());
        m.insert("pretrain.holdout", self.pretrain.holdout.to_string());
        m.insert("test.episodes", self.test.episodes.to_string());
        m.insert("test.opponents", self.test.opponents.to_string());
        m.insert("test.workers", self.test.workers.to_string());
        m.insert("variant.name", self.variant.to_string());
        m.insert("variant.level", self.phi_level.to_string());
        m.insert("seeds", seeds);
        m
    }

    /// Applies one key. The zoo learner shares the PPO section.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::config(format!("{key}: cannot parse `{v}`")))
        }
        fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
            v.split(',').filter(|p| !p.trim().is_empty()).map(|p| num(key, p.trim())).collect()
        }
        match key {
            "game.name" => {
                self.game.name = value.parse()?;
            }
            "game.episode_len" => self.game.episode_len = num(key, value)?,
            "agent.hidden" => self.hidden = list(key, value)?,
            "ppo.gamma" => self.ppo.gamma = num(key, value)?,
            "ppo.lam" => self.ppo.lam = num(key, value)?,
            "ppo.clip" => self.ppo.clip = num(key, value)?,
            "ppo.epochs" => self.ppo.epochs = num(key, value)?,
            "ppo.minibatch" => self.ppo.minibatch = num(key, value)?,
            "ppo.learning_rate" => self.ppo.learning_rate = num(key, value)?,
            "ppo.entropy_coef" => self.ppo.entropy_coef = num(key, value)?,
            "ppo.normalize_advantages" => self.ppo.normalize_advantages = num(key, value)?,
            "mbom.m" => self.mbom.m = num(key, value)?,
            "mbom.k" => self.mbom.k = num(key, value)?,
            "mbom.n_seq" => self.mbom.n_seq = num(key, value)?,
            "mbom.lambda" => self.mbom.lambda = num(key, value)?,
            "mbom.horizon" => self.mbom.horizon = num(key, value)?,
            "mbom.temperature" => self.mbom.temperature = num(key, value)?,
            "mbom.iop_lr" => self.mbom.iop_lr = num(key, value)?,
            "mbom.iop_steps" => self.mbom.iop_steps = num(key, value)?,
            "mbom.level0_lr" => self.mbom.level0_lr = num(key, value)?,
            "mbom.level0_steps" => self.mbom.level0_steps = num(key, value)?,
            "zoo.runs" => self.zoo.n_runs = num(key, value)?,
            "zoo.snapshots_per_run" => self.zoo.snapshots_per_run = num(key, value)?,
            "zoo.snapshot_interval" => self.zoo.snapshot_interval = num(key, value)?,
            "zoo.steps_per_iteration" => self.zoo.steps_per_iteration = num(key, value)?,
            "zoo.split" => {
                let v: Vec<usize> = list(key, value)?;
                self.zoo.split = v
                    .try_into()
                    .map_err(|_| Error::config("zoo.split needs three counts: train,validation,test"))?;
            }
            "zoo.variants" => {
                self.zoo.variants = value
                    .split(',')
                    .filter(|p| !p.trim().is_empty())
                    .map(|p| parse_zoo_variant(p.trim()))
                    .collect::<Result<_>>()?;
            }
            "zoo.reasoning_runs" => self.reasoning_runs = num(key, value)?,
            "zoo.reasoning_interval" => self.reasoning_interval = num(key, value)?,
            "zoo.seed" => self.zoo_seed = num(key, value)?,
            "opponent.model_steps" => self.opponent.model_steps = num(key, value)?,
            "opponent.model_lr" => self.opponent.model_lr = num(key, value)?,
            "pretrain.nu" => self.pretrain.nu = num(key, value)?,
            "pretrain.iterations" => self.pretrain.iterations = num(key, value)?,
            "pretrain.steps_per_iteration" => self.pretrain.steps_per_iteration = num(key, value)?,
            "pretrain.iop_epochs" => self.pretrain.iop_epochs = num(key, value)?,
            "pretrain.final_iop_epochs" => self.pretrain.final_iop_epochs = num(key, value)?,
            "pretrain.iop_lr" => self.pretrain.iop_lr = num(key, value)?,
            "pretrain.opponents_learn" => self.pretrain.opponents_learn = num(key, value)?,
            "pretrain.adapt_level0" => self.pretrain.adapt_level0 = num(key, value)?,
            "pretrain.env_epochs" => self.pretrain.env_epochs = num(key, value)?,
            "pretrain.env_lr" => self.pretrain.env_lr = num(key, value)?,
            "pretrain.batch_size" => self.pretrain.batch_size = num(key, value)?,
            "pretrain.holdout" => self.pretrain.holdout = num(key, value)?,
            "test.episodes" => self.test.episodes = num(key, value)?,
            "test.opponents" => self.test.opponents = num(key, value)?,
            "test.workers" => self.test.workers = num(key, value)?,
            "variant.name" => self.variant = value.parse()?,
            "variant.level" => self.phi_level = num(key, value)?,
            "seeds" => self.seeds = list(key, value)?,
            other => return Err(Error::config(format!("unknown config key `{other}`"))),
        }
        self.zoo.learner.ppo = self.ppo;
        self.opponent.ppo = self.ppo;
        self.zoo.hidden = self.hidden.clone();
        Ok(())
    }

    /// Parses a config file body. `game.name` is applied first so that the
    /// per-game defaults sit under every other key.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected key = value", n + 1)))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let name = pairs
            .iter()
            .rev()
            .find(|(k, _)| k == "game.name")
            .map(|(_, v)| v.parse())
            .transpose()?
            .unwrap_or(GameName::Triangle);
        let mut cfg = ExperimentConfig::for_game(name);
        for (k, v) in &pairs {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Canonical text: one `key = value` line per key, sorted.
    pub fn canonical(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Hex SHA-256 of the canonical text.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    /// Hash of the keys that shape the opponent zoo.
    pub fn zoo_hash(&self) -> String {
        let text: String = self
            .entries()
            .into_iter()
            .filter(|(k, _)| {
                k.starts_with("zoo.") || k.starts_with("game.") || k.starts_with("ppo.") || *k == "agent.hidden"
            })
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect();
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// Hash of everything pretraining depends on, for a given seed.
    pub fn pretrain_hash(&self, seed: u64) -> String {
        let text: String = self
            .entries()
            .into_iter()
            .filter(|(k, _)| !k.starts_with("test.") && !k.starts_with("variant.") && *k != "seeds")
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect();
        let ppo_only = self.variant == AgentVariant::PpoOnly;
        hex::encode(Sha256::digest(format!("{text}seed = {seed}\nconditioned = {}\n", !ppo_only).as_bytes()))
    }
}

fn parse_zoo_variant(tag: &str) -> Result<Variant> {
    let landmark = |t: &str| -> Result<u8> {
        match t {
            "t1" => Ok(0),
            "t2" => Ok(1),
            "t3" => Ok(2),
            _ => Err(Error::config(format!("unknown landmark `{t}`"))),
        }
    };
    let parts: Vec<&str> = tag.split('-').collect();
    match parts.as_slice() {
        ["plain"] => Ok(Variant::Plain),
        ["rotate"] => Ok(Variant::Rotate),
        ["favor", l] => Ok(Variant::Favor(landmark(l)?)),
        ["commute", a, b] => Ok(Variant::Commute(landmark(a)?, landmark(b)?)),
        _ => Err(Error::config(format!("unknown zoo variant `{tag}`"))),
    }
}

/// Key documentation: value provenance is either a hyperparameter of the
/// reference method or a choice made for this implementation.
pub const KEY_DOCS: &[(&str, &str)] = &[
    ("game.name", "triangle | coin | pursuit | matching_pennies"),
    ("game.episode_len", "steps per episode; artifact decision (triangle 25, coin 150, pursuit 200)"),
    ("agent.hidden", "policy, value, model and IOP hidden sizes; reference MLP[64,32]"),
    ("ppo.gamma", "discount; reference 0.99 (coin 0)"),
    ("ppo.lam", "GAE parameter; reference 0.99 (coin 0)"),
    ("ppo.clip", "clip parameter; reference 0.115"),
    ("ppo.epochs", "updates per batch; reference 10"),
    ("ppo.minibatch", "artifact decision 64"),
    ("ppo.learning_rate", "Adam learning rate; reference 0.001"),
    ("ppo.entropy_coef", "artifact decision 0.01"),
    ("ppo.normalize_advantages", "artifact decision true"),
    ("mbom.m", "IOP levels; reference 3 (pursuit, coin 2)"),
    ("mbom.k", "rollout horizon; reference 2 (pursuit, coin 1)"),
    ("mbom.n_seq", "sampled continuations when enumeration is too large; artifact decision 16"),
    ("mbom.lambda", "decay of the evidence sum; reference 0.9"),
    ("mbom.horizon", "window of the evidence sum; reference 10"),
    ("mbom.temperature", "softer-softmax temperature; reference 1"),
    ("mbom.iop_lr", "IOP finetune learning rate; reference 0.005"),
    ("mbom.iop_steps", "IOP finetune steps; reference 3"),
    ("mbom.level0_lr", "opponent model learning rate; reference 0.001"),
    ("mbom.level0_steps", "opponent model updates; reference 10"),
    ("zoo.runs", "independent opponent training runs; reference 10"),
    ("zoo.snapshots_per_run", "reference 26 (20 train, 3 validation, 3 test)"),
    ("zoo.snapshot_interval", "iterations between snapshots; artifact decision"),
    ("zoo.steps_per_iteration", "environment steps per zoo iteration; artifact decision"),
    ("zoo.split", "train,validation,test per run; reference 20,3,3"),
    ("zoo.variants", "reward shapings cycled over runs: plain, favor-tN, commute-tN-tM, rotate"),
    ("zoo.reasoning_runs", "reasoning-learner runs, three test snapshots each; reference 30 learners"),
    ("zoo.reasoning_interval", "iterations between reasoning snapshots; artifact decision"),
    ("zoo.seed", "seed of the zoo, shared by all agent seeds; artifact decision"),
    ("opponent.model_steps", "reasoning learner agent-model updates per episode; artifact decision"),
    ("opponent.model_lr", "reasoning learner agent-model learning rate; artifact decision"),
    ("pretrain.nu", "training opponents faced in pretraining; artifact decision 20"),
    ("pretrain.iterations", "agent PPO iterations in pretraining; artifact decision"),
    ("pretrain.steps_per_iteration", "environment steps per pretraining iteration; artifact decision"),
    ("pretrain.iop_epochs", "level-0 IOP epochs per fresh batch; artifact decision"),
    ("pretrain.final_iop_epochs", "level-0 IOP epochs over the whole buffer; artifact decision"),
    ("pretrain.iop_lr", "level-0 IOP learning rate; reference 0.001"),
    ("pretrain.opponents_learn", "training opponents keep learning during pretraining; artifact decision false"),
    ("pretrain.adapt_level0", "condition on per-opponent level-0 copies finetuned like the test phase; artifact decision true"),
    ("pretrain.env_epochs", "environment model epochs; artifact decision"),
    ("pretrain.env_lr", "environment model learning rate; artifact decision"),
    ("pretrain.batch_size", "model and IOP batch size; reference 64"),
    ("pretrain.holdout", "held-out fraction for the model error; artifact decision 0.1"),
    ("test.episodes", "test-phase episodes per opponent; reference 100"),
    ("test.opponents", "test opponents per type; reference 30"),
    ("test.workers", "parallel worker slots"),
    ("variant.name", "mbom | mbom_wo_iops | mbom_bm | mbom_unif | mbom_phi_m | ppo_only"),
    ("variant.level", "level used by mbom_phi_m"),
    ("seeds", "agent seeds; reference five runs"),
];

/// A documented config file with every key at its default for `name`.
pub fn documented_defaults(name: GameName) -> String {
    let cfg = ExperimentConfig::for_game(name);
    let entries = cfg.entries();
    let mut out = String::new();
    for (key, doc) in KEY_DOCS {
        out.push_str(&format!("# {doc}\n{key} = {}\n", entries[key]));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_defaults_round_trip() {
        for name in [GameName::Triangle, GameName::Coin, GameName::Pursuit] {
            let text = documented_defaults(name);
            let cfg = ExperimentConfig::parse(&text).unwrap();
            assert_eq!(cfg, ExperimentConfig::for_game(name));
            assert_eq!(cfg.hash(), ExperimentConfig::for_game(name).hash());
        }
        let keys: Vec<&str> = KEY_DOCS.iter().map(|(k, _)| *k).collect();
        let entries = ExperimentConfig::for_game(GameName::Triangle).entries();
        assert_eq!(keys.len(), entries.len());
        assert!(entries.keys().all(|k| keys.contains(k)));
    }

    #[test]
    fn reference_defaults() {
        let t = ExperimentConfig::for_game(GameName::Triangle);
        assert_eq!((t.mbom.m, t.mbom.k, t.mbom.horizon), (3, 2, 10));
        assert_eq!((t.ppo.clip, t.ppo.epochs, t.ppo.learning_rate), (0.115, 10, 0.001));
        let c = ExperimentConfig::for_game(GameName::Coin);
        assert_eq!((c.mbom.m, c.mbom.k, c.ppo.gamma, c.ppo.lam), (2, 1, 0.0, 0.0));
        assert_eq!(c.reward_structure(), RewardStructure::Cooperative);
    }

    #[test]
    fn variant_constraints() {
        let mut cfg = ExperimentConfig::for_game(GameName::Triangle);
        cfg.set("variant.name", "mbom_phi_m").unwrap();
        cfg.set("variant.level", "3").unwrap();
        assert!(cfg.validate().is_err());
        cfg.set("variant.level", "2").unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.mbom_for_variant().mixing, Mixing::Single(2));
        assert_eq!(cfg.with_variant(AgentVariant::MbomWoIops).mbom_for_variant().m, 1);
        assert_eq!(cfg.with_variant(AgentVariant::MbomBm).mbom_for_variant().targets, Targets::Random);
    }

    #[test]
    fn parse_errors() {
        assert!(ExperimentConfig::parse("nonsense").is_err());
        assert!(ExperimentConfig::parse("ppo.gama = 0.9").is_err());
        assert!(ExperimentConfig::parse("ppo.gamma = fast").is_err());
        assert!(ExperimentConfig::parse("zoo.split = 1,2").is_err());
        let cfg = ExperimentConfig::parse("# comment\n\nzoo.variants = favor-t1, commute-t2-t3\n").unwrap();
        assert_eq!(cfg.zoo.variants, vec![Variant::Favor(0), Variant::Commute(1, 2)]);
    }

    #[test]
    fn hash_tracks_every_key() {
        let base = ExperimentConfig::for_game(GameName::Triangle);
        let mut changed = base.clone();
        changed.set("mbom.lambda", "0.8").unwrap();
        assert_ne!(base.hash(), changed.hash());
        assert_eq!(base.zoo_hash(), changed.zoo_hash());
        assert_ne!(base.pretrain_hash(0), changed.pretrain_hash(0));
        assert_ne!(base.pretrain_hash(0), base.pretrain_hash(1));
        assert_eq!(base.pretrain_hash(0), base.with_variant(AgentVariant::MbomBm).pretrain_hash(0));
        assert_ne!(base.pretrain_hash(0), base.with_variant(AgentVariant::PpoOnly).pretrain_hash(0));
    }
}
