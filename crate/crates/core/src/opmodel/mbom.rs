//! One adaptation epoch: level-0 finetune, recursive imagination, Bayesian mixing.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::imagine::{imagine_best_response, ImagineConfig, RolloutModel, StateValue};
use super::mixer::Mixer;
use super::{bayes_posterior, finetune_iop, finetune_level0, Iop, IopStack, MixedIop};
use crate::envs::{RewardStructure, TransitionRecord};
use crate::error::{Error, Result};
use crate::ppo::ConditionedPolicy;
use crate::SimRng;

/// Finetune targets for levels above 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Targets {
    BestResponse,
    /// Uniformly random opponent actions.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mixing {
    Bayes,
    Uniform,
    /// All weight on one level.
    Single(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MbomConfig {
    pub m: usize,
    pub k: usize,
    pub n_seq: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub horizon: usize,
    pub temperature: f64,
    pub iop_lr: f64,
    pub iop_steps: usize,
    pub level0_lr: f64,
    pub level0_steps: usize,
    pub targets: Targets,
    pub mixing: Mixing,
}

impl Default for MbomConfig {
    fn default() -> Self {
        MbomConfig {
            m: 3,
            k: 2,
            n_seq: 16,
            gamma: 0.99,
            lambda: 0.9,
            horizon: 10,
            temperature: 1.0,
            iop_lr: 0.005,
            iop_steps: 3,
            level0_lr: 0.001,
            level0_steps: 10,
            targets: Targets::BestResponse,
            mixing: Mixing::Bayes,
        }
    }
}

impl MbomConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n_seq == 0 || self.horizon == 0 {
            return Err(Error::config("M, n_seq and H must be positive"));
        }
        if let Mixing::Single(level) = self.mixing {
            if level >= self.m {
                return Err(Error::config(format!("single-level mixing needs a level below M = {}", self.m)));
            }
        }
        Ok(())
    }
}

/// Per-epoch diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub epoch: usize,
    pub alpha: Vec<f64>,
    pub psi: Vec<f64>,
    pub level0_finetune_loss: f64,
    pub env_model_eval_error: f64,
}

pub fn write_diagnostics_csv<W: Write>(rows: &[DiagnosticsRow], writer: W) -> Result<()> {
    let m = rows.first().map_or(0, |r| r.alpha.len());
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["epoch".to_string()];
    header.extend((0..m).map(|i| format!("alpha_{i}")));
    header.extend((0..m).map(|i| format!("psi_{i}")));
    header.push("level0_finetune_loss".into());
    header.push("env_model_eval_error".into());
    w.write_record(&header)?;
    for row in rows {
        let mut rec = vec![row.epoch.to_string()];
        rec.extend(row.alpha.iter().chain(&row.psi).map(|v| v.to_string()));
        rec.push(row.level0_finetune_loss.to_string());
        rec.push(row.env_model_eval_error.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_diagnostics_csv`].
pub fn read_diagnostics_csv<R: std::io::Read>(reader: R) -> Result<Vec<DiagnosticsRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    let cols = header.len();
    if cols < 3 || (cols - 3) % 2 != 0 || &header[0] != "epoch" {
        return Err(Error::Format("not a diagnostics file".into()));
    }
    let m = (cols - 3) / 2;
    let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Format(format!("bad number `{s}`: {e}")));
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let epoch = rec[0].parse().map_err(|e| Error::Format(format!("bad epoch: {e}")))?;
        let values: Vec<f64> = rec.iter().skip(1).map(num).collect::<Result<_>>()?;
        rows.push(DiagnosticsRow {
            epoch,
            alpha: values[..m].to_vec(),
            psi: values[m..2 * m].to_vec(),
            level0_finetune_loss: values[2 * m],
            env_model_eval_error: values[2 * m + 1],
        });
    }
    Ok(rows)
}

/// The adapting opponent model of one agent.
#[derive(Debug, Clone)]
pub struct Mbom {
    cfg: MbomConfig,
    imagine: ImagineConfig,
    stack: IopStack,
    mixer: Mixer<f64>,
    alpha: Vec<f64>,
    epochs: usize,
}

impl Mbom {
    pub fn new(cfg: MbomConfig, level0: Iop, structure: RewardStructure) -> Result<Self> {
        cfg.validate()?;
        let mut imagine = ImagineConfig::for_game(cfg.k, cfg.gamma, structure);
        imagine.n_seq = cfg.n_seq;
        let mixer = Mixer::new(cfg.m, cfg.lambda, cfg.horizon, cfg.temperature)?;
        let mut mbom = Mbom { cfg, imagine, stack: IopStack::new(level0, cfg.m)?, mixer, alpha: Vec::new(), epochs: 0 };
        mbom.alpha = mbom.effective_alpha();
        Ok(mbom)
    }

    pub fn config(&self) -> &MbomConfig {
        &self.cfg
    }

    pub fn imagine_config(&self) -> &ImagineConfig {
        &self.imagine
    }

    pub fn stack(&self) -> &IopStack {
        &self.stack
    }

    pub fn mixer(&self) -> &Mixer<f64> {
        &self.mixer
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn epochs(&self) -> usize {
        self.epochs
    }

    fn effective_alpha(&self) -> Vec<f64> {
        let m = self.cfg.m;
        match self.cfg.mixing {
            Mixing::Bayes => self.mixer.alpha().to_vec(),
            Mixing::Uniform => vec![1.0 / m as f64; m],
            Mixing::Single(level) => (0..m).map(|i| if i == level { 1.0 } else { 0.0 }).collect(),
        }
    }

    /// The mixed IOP under the current weights.
    pub fn predictor(&self) -> MixedIop<'_> {
        MixedIop { stack: &self.stack, alpha: &self.alpha }
    }

    /// One adaptation epoch. `recent_real` holds the window's real
    /// (observation, opponent action) pairs, `sim_states` the states to
    /// imagine best responses from, and `eval` the real transitions the
    /// environment model's error is measured on.
    #[allow(clippy::too_many_arguments)]
    pub fn epoch(
        &mut self,
        model: &dyn RolloutModel,
        policy: &ConditionedPolicy,
        value: &dyn StateValue,
        recent_real: &[(Vec<f64>, usize)],
        sim_states: &[Vec<f64>],
        eval: Option<(&super::EnvModel, &[TransitionRecord])>,
        rng: &mut SimRng,
    ) -> Result<DiagnosticsRow> {
        let loss = finetune_level0(self.stack.level0_mut(), recent_real, self.cfg.level0_steps, self.cfg.level0_lr)?;
        for m in 1..self.cfg.m {
            let prev = self.stack.level(m - 1);
            let pairs = sim_states
                .iter()
                .map(|s| {
                    let target = match self.cfg.targets {
                        Targets::BestResponse => {
                            imagine_best_response(model, policy, Some(value), prev, s, &self.imagine, rng)?
                        }
                        Targets::Random => rng.gen_range(0..model.n_opponent()),
                    };
                    Ok((s.clone(), target))
                })
                .collect::<Result<Vec<_>>>()?;
            let next = finetune_iop(prev, &pairs, self.cfg.iop_steps, self.cfg.iop_lr)?;
            self.stack.set_level(next)?;
        }
        if self.cfg.m > 1 {
            for (s, a_o) in recent_real {
                let post = bayes_posterior(&self.stack, s, *a_o, self.mixer.prior())?;
                self.mixer.update(&post)?;
            }
        }
        self.alpha = self.effective_alpha();
        let env_err = match eval {
            Some((env, records)) => env.eval_error(records)?,
            None => f64::NAN,
        };
        let row = DiagnosticsRow {
            epoch: self.epochs,
            alpha: self.alpha.clone(),
            psi: self.mixer.psi().to_vec(),
            level0_finetune_loss: loss.unwrap_or(f64::NAN),
            env_model_eval_error: env_err,
        };
        self.epochs += 1;
        Ok(row)
    }
}

/// Free-function form of [`Mbom::epoch`].
#[allow(clippy::too_many_arguments)]
pub fn mbom_epoch(
    mbom: &mut Mbom,
    model: &dyn RolloutModel,
    policy: &ConditionedPolicy,
    value: &dyn StateValue,
    recent_real: &[(Vec<f64>, usize)],
    sim_states: &[Vec<f64>],
    rng: &mut SimRng,
) -> Result<DiagnosticsRow> {
    mbom.epoch(model, policy, value, recent_real, sim_states, None, rng)
}
