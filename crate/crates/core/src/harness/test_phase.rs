//! The test phase: the pretrained agent adapts online to one test opponent.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::config::{AgentVariant, ExperimentConfig};
use super::derive_seed;
use super::pretrain::AgentBundle;
use crate::error::{Error, Result};
use crate::opmodel::{DiagnosticsRow, Mbom};
use crate::opponents::{OpponentSnapshot, OpponentType, Role, TestOpponent, Zoo};
use crate::ppo::{conditioning, ppo_update, Counterpart, CounterpartStep, PpoLearner, RolloutBuffer};
use crate::envs::TransitionRecord;
use crate::SimRng;

pub const METRICS_HEADER: &str = "seed,opponent_id,opponent_type,variant,episode,agent_return,opponent_return,aux_metric";

/// One test-phase episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub seed: u64,
    pub opponent_id: String,
    pub opponent_type: OpponentType,
    pub variant: AgentVariant,
    pub episode: usize,
    pub agent_return: f64,
    pub opponent_return: f64,
    /// Summed per-step auxiliary metric of the game.
    pub aux_metric: f64,
}

pub fn write_metrics_csv<W: Write>(rows: &[MetricsRow], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(METRICS_HEADER.split(','))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics_csv<R: Read>(reader: R) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != METRICS_HEADER {
        return Err(Error::Format(format!("unexpected metrics header `{}`", header.join(","))));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Everything a test run produced.
#[derive(Debug, Clone)]
pub struct TestRun {
    pub rows: Vec<MetricsRow>,
    pub diagnostics: Vec<DiagnosticsRow>,
    /// Opponent-model epochs executed.
    pub opmodel_calls: usize,
    /// Environment-model parameter versions before and after.
    pub env_versions: (u64, u64),
}

fn check_opponent(kind: OpponentType, snapshot: &OpponentSnapshot) -> Result<()> {
    if snapshot.role != Role::Test {
        return Err(Error::usage(format!("opponent {} is not a test opponent", snapshot.id)));
    }
    if (kind == OpponentType::Reasoning) != snapshot.is_reasoning() {
        return Err(Error::usage(format!("opponent {} cannot act as a {} opponent", snapshot.id, kind.name())));
    }
    Ok(())
}

/// Looks up `opponent_id` in the zoo and runs the test phase against it.
pub fn run_test_phase(
    cfg: &ExperimentConfig,
    bundle: &AgentBundle,
    zoo: &Zoo,
    kind: OpponentType,
    opponent_id: &str,
    seed: u64,
) -> Result<TestRun> {
    let snapshot = zoo
        .get(opponent_id)
        .ok_or_else(|| Error::usage(format!("opponent {opponent_id} is not in the zoo")))?;
    run_test_phase_against(cfg, bundle, kind, snapshot, seed)
}

/// `test.episodes` episodes against one opponent. After every episode the
/// opponent learns (unless fixed), the agent takes one PPO update on the
/// episode, and the opponent model runs one epoch on the episode's real
/// opponent actions. The environment model stays frozen.
pub fn run_test_phase_against(
    cfg: &ExperimentConfig,
    bundle: &AgentBundle,
    kind: OpponentType,
    snapshot: &OpponentSnapshot,
    seed: u64,
) -> Result<TestRun> {
    cfg.validate()?;
    check_opponent(kind, snapshot)?;
    // Separate streams shared across variants: every variant sees the same
    // episode starts and the same opponent sampling stream.
    let stream = |name: &str| SimRng::seed_from_u64(derive_seed(seed, &["test", name, kind.name(), &snapshot.id]));
    let (mut resets, mut opp_rng, mut rng) = (stream("reset"), stream("opponent"), stream("agent"));
    let mut game = cfg.game.build()?;
    let n_opp = game.spec().n_opponent_actions();
    let mut opponent = TestOpponent::from_snapshot(kind, snapshot, cfg.opponent)?;
    let mut agent = PpoLearner::new(bundle.policy.clone(), bundle.value.clone(), cfg.ppo)?;
    let env = &bundle.env_model;
    let env_start = env.version();
    let mut mbom = if cfg.variant.uses_opponent_model() {
        if agent.policy.cond_dim() != n_opp {
            return Err(Error::config("bundle policy is not conditioned on the opponent action"));
        }
        Some(Mbom::new(cfg.mbom_for_variant(), bundle.iop0.clone(), cfg.reward_structure())?)
    } else {
        None
    };
    let mut rows = Vec::with_capacity(cfg.test.episodes);
    let mut diagnostics = Vec::new();
    let mut calls = 0;
    for episode in 0..cfg.test.episodes {
        game.reset(resets.gen());
        let mut buffer = RolloutBuffer::default();
        let mut recent = Vec::new();
        let (mut ret, mut ret_o, mut aux) = (0.0, 0.0, 0.0);
        while !game.state().done {
            let s = game.state().observation.clone();
            let s_opp = game.opponent_observation();
            let cond = match &mbom {
                Some(m) => conditioning(Some(&m.predictor()), &s, n_opp, &mut rng)?,
                None => vec![0.0; agent.policy.cond_dim()],
            };
            let (a, log_prob) = agent.policy.act(&s, &cond, &mut rng)?;
            let value = agent.value.value(&s)?;
            let a_o = opponent.act(&s_opp, &mut opp_rng)?;
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
            ret += res.r;
            ret_o += res.r_o;
            aux += res.aux;
            recent.push((s.clone(), a_o));
            let record = TransitionRecord { s, a, a_o, s_next: res.next_state.observation, r: res.r, r_o: res.r_o };
            buffer.push(record, cond, log_prob, value, res.done);
        }
        opponent.end_episode(&mut opp_rng)?;
        agent.finish(&mut buffer)?;
        ppo_update(&mut agent, &buffer, &mut rng)?;
        if let Some(m) = mbom.as_mut() {
            let h = m.config().horizon.min(recent.len());
            let sim_states: Vec<Vec<f64>> = recent[recent.len() - h..].iter().map(|(s, _)| s.clone()).collect();
            let row = m.epoch(
                env,
                &agent.policy,
                &agent.value,
                &recent,
                &sim_states,
                Some((env, &buffer.records)),
                &mut rng,
            )?;
            diagnostics.push(row);
            calls += 1;
        }
        rows.push(MetricsRow {
            seed,
            opponent_id: snapshot.id.clone(),
            opponent_type: kind,
            variant: cfg.variant,
            episode,
            agent_return: ret,
            opponent_return: ret_o,
            aux_metric: aux,
        });
    }
    Ok(TestRun { rows, diagnostics, opmodel_calls: calls, env_versions: (env_start, env.version()) })
}
