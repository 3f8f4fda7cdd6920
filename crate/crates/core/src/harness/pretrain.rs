//! Pretraining against training-role opponents and the checkpoint bundle.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::derive_seed;
use crate::envs::TransitionRecord;
use crate::error::{Error, Result};
use crate::nn::checkpoint;
use crate::opmodel::{finetune_level0, train_env_model, train_level0, EnvModel, Iop};
use crate::opponents::{NaiveLearner, OpponentType, Role, TestOpponent, Zoo};
use crate::ppo::{collect_rollout, ppo_update, ConditionedPolicy, OpponentPredictor, PpoLearner, ValueNet};
use crate::SimRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    pub transitions: usize,
    pub env_train_error: f64,
    pub env_holdout_error: f64,
    pub iop0_loss: f64,
    /// Mean agent return per episode over the last tenth of pretraining.
    pub final_mean_return: f64,
}

/// Everything the test phase needs from pretraining.
#[derive(Debug, Clone)]
pub struct AgentBundle {
    pub policy: ConditionedPolicy,
    pub value: ValueNet,
    pub env_model: EnvModel,
    pub iop0: Iop,
    pub config_hash: String,
    pub zoo_manifest: Vec<String>,
    pub report: PretrainReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BundleManifest {
    config_hash: String,
    state_dim: usize,
    n_agent: usize,
    env_lr: f64,
    zoo: Vec<String>,
    report: PretrainReport,
}

pub const BUNDLE_FILES: [&str; 5] = ["policy.ckpt", "value.ckpt", "env_model.ckpt", "iop0.ckpt", "manifest.json"];

impl AgentBundle {
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        checkpoint::save(self.policy.net(), &dir.join(BUNDLE_FILES[0]))?;
        checkpoint::save(self.value.net(), &dir.join(BUNDLE_FILES[1]))?;
        checkpoint::save(self.env_model.net(), &dir.join(BUNDLE_FILES[2]))?;
        checkpoint::save(self.iop0.net(), &dir.join(BUNDLE_FILES[3]))?;
        let manifest = BundleManifest {
            config_hash: self.config_hash.clone(),
            state_dim: self.policy.state_dim(),
            n_agent: self.env_model.n_agent(),
            env_lr: self.env_model.learning_rate(),
            zoo: self.zoo_manifest.clone(),
            report: self.report.clone(),
        };
        std::fs::write(dir.join(BUNDLE_FILES[4]), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: BundleManifest = serde_json::from_str(&std::fs::read_to_string(dir.join(BUNDLE_FILES[4]))?)?;
        let policy = ConditionedPolicy::from_net(checkpoint::load(&dir.join(BUNDLE_FILES[0]))?, manifest.state_dim)?;
        let value = ValueNet::from_net(checkpoint::load(&dir.join(BUNDLE_FILES[1]))?)?;
        let env_model = EnvModel::from_net(
            checkpoint::load(&dir.join(BUNDLE_FILES[2]))?,
            manifest.state_dim,
            manifest.n_agent,
            manifest.env_lr,
        )?;
        let iop0 = Iop::from_net(checkpoint::load(&dir.join(BUNDLE_FILES[3]))?, 0)?;
        Ok(AgentBundle {
            policy,
            value,
            env_model,
            iop0,
            config_hash: manifest.config_hash,
            zoo_manifest: manifest.zoo,
            report: manifest.report,
        })
    }
}

/// A level-0 IOP whose output layer is zero, so it starts out uniform.
pub fn uniform_iop(state_dim: usize, n_actions: usize, hidden: &[usize], rng: &mut SimRng) -> Result<Iop> {
    let iop = Iop::new(state_dim, n_actions, hidden, rng)?;
    let mut net = iop.net().clone();
    if let Some(last) = net.params_mut().layers_mut().last_mut() {
        last.weights.iter_mut().for_each(|w| *w = 0.0);
        last.biases.iter_mut().for_each(|b| *b = 0.0);
    }
    Iop::from_net(net, 0)
}

/// Trains the agent against `pretrain.nu` training opponents (fixed, or still
/// learning with `pretrain.opponents_learn`), logging all experience; then
/// fits the environment model and the level-0 IOP on it. Variants other than `ppo_only` condition the policy on
/// the concurrently trained level-0 IOP.
pub fn run_pretraining(cfg: &ExperimentConfig, zoo: &Zoo, seed: u64) -> Result<AgentBundle> {
    cfg.validate()?;
    let mut rng = SimRng::seed_from_u64(derive_seed(seed, &["pretrain"]));
    let mut game = cfg.game.build()?;
    let spec = game.spec().clone();
    let (sd, na, no) = (spec.state_dim, spec.n_agent_actions(), spec.n_opponent_actions());

    let mut train: Vec<_> = zoo.by_role(Role::Train);
    if train.is_empty() {
        return Err(Error::config("the zoo has no training opponents"));
    }
    train.shuffle(&mut rng);
    train.truncate(cfg.pretrain.nu);
    let mut opponents = train
        .iter()
        .map(|s| match cfg.pretrain.opponents_learn {
            true => Ok(TestOpponent::Naive(NaiveLearner::from_snapshot(s, cfg.opponent.ppo)?)),
            false => TestOpponent::from_snapshot(OpponentType::Fixed, s, cfg.opponent),
        })
        .collect::<Result<Vec<_>>>()?;

    let conditioned = cfg.variant.uses_opponent_model();
    let cond_dim = if conditioned { no } else { 0 };
    let mut agent = PpoLearner::build(sd, cond_dim, na, &cfg.hidden, cfg.ppo, &mut rng)?;
    let mut iop0 = uniform_iop(sd, no, &cfg.hidden, &mut rng)?;
    // Per-opponent level-0 copies, seeded from the shared IOP on first contact.
    let mut adapted: Vec<Option<Iop>> = vec![None; opponents.len()];
    let mut experience: Vec<TransitionRecord> = Vec::new();
    let mut returns = Vec::new();
    let mut window = Vec::new();
    let p = &cfg.pretrain;
    for it in 0..p.iterations {
        let slot = it % opponents.len();
        let opp = &mut opponents[slot];
        game.reset(rng.gen());
        let local = adapted[slot].get_or_insert_with(|| iop0.clone());
        let predictor: Option<&dyn OpponentPredictor> = match (conditioned, p.adapt_level0) {
            (false, _) => None,
            (true, true) => Some(&*local),
            (true, false) => Some(&iop0),
        };
        let buf = collect_rollout(&agent, game.as_mut(), opp, p.steps_per_iteration, predictor, &mut rng)?;
        if conditioned && p.adapt_level0 {
            let pairs: Vec<(Vec<f64>, usize)> = buf.records.iter().map(|r| (r.s.clone(), r.a_o)).collect();
            finetune_level0(local, &pairs, cfg.mbom.level0_steps, cfg.mbom.level0_lr)?;
        }
        ppo_update(&mut agent, &buf, &mut rng)?;
        opp.end_episode(&mut rng)?;
        if !agent.policy.net().params().is_finite() || !agent.value.net().params().is_finite() {
            return Err(Error::training(format!("agent diverged at pretraining iteration {it}")));
        }
        if conditioned && p.iop_epochs > 0 {
            train_level0(&mut iop0, &buf.records, p.iop_epochs, p.batch_size, p.iop_lr, &mut rng)?;
        }
        if log::log_enabled!(log::Level::Debug) {
            window.push(buf.total_reward() / buf.dones.iter().filter(|d| **d).count().max(1) as f64);
            if window.len() == 100 {
                log::debug!("iteration {}: mean return {:.3}", it + 1, window.iter().sum::<f64>() / 100.0);
                window.clear();
            }
        }
        if it * 10 >= p.iterations * 9 {
            let episodes = buf.dones.iter().filter(|d| **d).count().max(1);
            returns.push(buf.total_reward() / episodes as f64);
        }
        experience.extend(buf.records);
    }
    if experience.is_empty() {
        return Err(Error::config("pretraining produced no experience"));
    }

    experience.shuffle(&mut rng);
    let n_hold = ((experience.len() as f64) * p.holdout).round() as usize;
    let (holdout, train_set) = experience.split_at(n_hold.min(experience.len() - 1));
    let mut env_model = EnvModel::new(sd, na, no, &cfg.hidden, p.env_lr, &mut rng)?;
    train_env_model(&mut env_model, train_set, p.env_epochs, p.batch_size, &mut rng)?;
    let env_train_error = env_model.eval_error(train_set)?;
    let env_holdout_error = env_model.eval_error(holdout)?;
    let iop0_loss = train_level0(&mut iop0, &experience, p.final_iop_epochs.max(1), p.batch_size, p.iop_lr, &mut rng)?;
    let final_mean_return = returns.iter().sum::<f64>() / returns.len().max(1) as f64;
    log::info!(
        "pretraining seed {seed}: {} transitions, model error {env_train_error:.4} train / {env_holdout_error:.4} held out, return {final_mean_return:.3}",
        experience.len()
    );
    Ok(AgentBundle {
        policy: agent.policy,
        value: agent.value,
        env_model,
        iop0,
        config_hash: cfg.pretrain_hash(seed),
        zoo_manifest: train.iter().map(|s| s.id.clone()).collect(),
        report: PretrainReport {
            transitions: experience.len(),
            env_train_error,
            env_holdout_error,
            iop0_loss,
            final_mean_return,
        },
    })
}
