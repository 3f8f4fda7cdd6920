//! Opponent modeling: the learned environment model, imagined opponent
//! policies (IOPs) at increasing reasoning levels, and their Bayesian mixture.

pub mod imagine;
pub mod mbom;
pub mod mixer;

use rand::seq::SliceRandom;

use crate::envs::TransitionRecord;
use crate::error::{Error, Result};
use crate::nn::{Adam, Mlp, NetSpec, OutputHead, ParamSet};
use crate::ppo::OpponentPredictor;
use crate::SimRng;

pub use imagine::{imagine_best_response, rollout_scores, AgentSampling, ImagineConfig, RolloutMode, RolloutModel};
pub use mbom::{mbom_epoch, read_diagnostics_csv, write_diagnostics_csv, DiagnosticsRow, Mbom, MbomConfig, Mixing, Targets};
pub use mixer::{posterior_from_likelihoods, softer_softmax, Mixer, LIKELIHOOD_FLOOR};

/// Learned dynamics: (s, a, a_o) to (s', r, r_o). The network predicts the
/// state change, so `s' = s + output[..state_dim]`.
#[derive(Debug, Clone)]
pub struct EnvModel {
    net: Mlp<f64>,
    state_dim: usize,
    n_agent: usize,
    n_opponent: usize,
    opt: Adam<f64>,
}

impl EnvModel {
    pub fn new(
        state_dim: usize,
        n_agent: usize,
        n_opponent: usize,
        hidden: &[usize],
        learning_rate: f64,
        rng: &mut SimRng,
    ) -> Result<Self> {
        let spec = NetSpec::mlp(state_dim + n_agent + n_opponent, hidden, state_dim + 2, OutputHead::Linear)?;
        let opt = Adam::new(&spec, learning_rate);
        Ok(EnvModel { net: Mlp::init(spec, rng)?, state_dim, n_agent, n_opponent, opt })
    }

    pub fn from_net(net: Mlp<f64>, state_dim: usize, n_agent: usize, learning_rate: f64) -> Result<Self> {
        let n_in = net.input_dim();
        if net.output_dim() != state_dim + 2 || n_in <= state_dim + n_agent {
            return Err(Error::config("environment model shape does not fit the game"));
        }
        let opt = Adam::new(net.spec(), learning_rate);
        Ok(EnvModel { state_dim, n_agent, n_opponent: n_in - state_dim - n_agent, opt, net })
    }

    pub fn net(&self) -> &Mlp<f64> {
        &self.net
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn learning_rate(&self) -> f64 {
        self.opt.learning_rate
    }

    pub fn n_agent(&self) -> usize {
        self.n_agent
    }

    pub fn n_opponent(&self) -> usize {
        self.n_opponent
    }

    /// Parameter version; constant while the model is frozen.
    pub fn version(&self) -> u64 {
        self.net.version()
    }

    fn input(&self, s: &[f64], a: usize, a_o: usize) -> Result<Vec<f64>> {
        if s.len() != self.state_dim || a >= self.n_agent || a_o >= self.n_opponent {
            return Err(Error::config("environment model query does not fit the game"));
        }
        let mut x = Vec::with_capacity(self.net.input_dim());
        x.extend_from_slice(s);
        x.extend((0..self.n_agent).map(|i| if i == a { 1.0 } else { 0.0 }));
        x.extend((0..self.n_opponent).map(|i| if i == a_o { 1.0 } else { 0.0 }));
        Ok(x)
    }

    fn target(&self, rec: &TransitionRecord) -> Vec<f64> {
        let mut y: Vec<f64> = rec.s_next.iter().zip(&rec.s).map(|(n, c)| n - c).collect();
        y.push(rec.r);
        y.push(rec.r_o);
        y
    }

    /// Predicted (next state, agent reward, opponent reward).
    pub fn predict(&self, s: &[f64], a: usize, a_o: usize) -> Result<(Vec<f64>, f64, f64)> {
        let out = self.net.forward(&self.input(s, a, a_o)?)?;
        let next = s.iter().zip(&out[..self.state_dim]).map(|(c, d)| c + d).collect();
        Ok((next, out[self.state_dim], out[self.state_dim + 1]))
    }

    /// Per-record loss `0.5 * |prediction - target|^2`.
    pub fn loss(&self, rec: &TransitionRecord) -> Result<f64> {
        let out = self.net.forward(&self.input(&rec.s, rec.a, rec.a_o)?)?;
        Ok(0.5 * out.iter().zip(self.target(rec)).map(|(o, t)| (o - t) * (o - t)).sum::<f64>())
    }

    /// Mean loss over `records`.
    pub fn eval_error(&self, records: &[TransitionRecord]) -> Result<f64> {
        if records.is_empty() {
            return Ok(0.0);
        }
        let total: f64 = records.iter().map(|r| self.loss(r)).sum::<Result<f64>>()?;
        Ok(total / records.len() as f64)
    }
}

fn check_buffer(records: &[TransitionRecord]) -> Result<()> {
    if records.is_empty() {
        return Err(Error::usage("training buffer is empty"));
    }
    Ok(())
}

/// Minibatch regression of the environment model; returns the mean loss of
/// the final epoch.
pub fn train_env_model(
    model: &mut EnvModel,
    buffer: &[TransitionRecord],
    epochs: usize,
    batch_size: usize,
    rng: &mut SimRng,
) -> Result<f64> {
    check_buffer(buffer)?;
    let inputs: Vec<Vec<f64>> = buffer.iter().map(|r| model.input(&r.s, r.a, r.a_o)).collect::<Result<_>>()?;
    let targets: Vec<Vec<f64>> = buffer.iter().map(|r| model.target(r)).collect();
    let mut order: Vec<usize> = (0..buffer.len()).collect();
    let mut grads = ParamSet::zeros(model.net.spec());
    let mut last = 0.0;
    for _ in 0..epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for chunk in order.chunks(batch_size.max(1)) {
            grads.fill_zero();
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                let trace = model.net.forward_traced(&inputs[i])?;
                let diff: Vec<f64> = trace.output().iter().zip(&targets[i]).map(|(o, t)| o - t).collect();
                total += 0.5 * diff.iter().map(|d| d * d).sum::<f64>();
                model.net.accumulate_backward(&trace, &diff, scale, &mut grads)?;
            }
            model.opt.step(model.net.params_mut(), &grads)?;
        }
        last = total / buffer.len() as f64;
        if !last.is_finite() {
            return Err(Error::training("environment model loss diverged"));
        }
    }
    Ok(last)
}

/// Imagined opponent policy at one reasoning level.
#[derive(Debug, Clone, PartialEq)]
pub struct Iop {
    net: Mlp<f64>,
    level: usize,
}

impl Iop {
    pub fn new(state_dim: usize, n_actions: usize, hidden: &[usize], rng: &mut SimRng) -> Result<Self> {
        let spec = NetSpec::mlp(state_dim, hidden, n_actions, OutputHead::Softmax)?;
        Ok(Iop { net: Mlp::init(spec, rng)?, level: 0 })
    }

    pub fn from_net(net: Mlp<f64>, level: usize) -> Result<Self> {
        if net.spec().output_head != OutputHead::Softmax {
            return Err(Error::config("an IOP needs a softmax head"));
        }
        Ok(Iop { net, level })
    }

    pub fn net(&self) -> &Mlp<f64> {
        &self.net
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn version(&self) -> u64 {
        self.net.version()
    }

    pub fn probs(&self, s: &[f64]) -> Result<Vec<f64>> {
        self.net.forward(s)
    }
}

impl OpponentPredictor for Iop {
    fn predict(&self, s: &[f64]) -> Result<Vec<f64>> {
        self.probs(s)
    }
}

/// Mean cross-entropy of `pairs` under `net` and its gradient over `idx`.
fn cross_entropy_grad(
    net: &Mlp<f64>,
    pairs: &[(&[f64], usize)],
    idx: &[usize],
    grads: &mut ParamSet<f64>,
) -> Result<f64> {
    grads.fill_zero();
    let scale = 1.0 / idx.len() as f64;
    let mut loss = 0.0;
    for &i in idx {
        let (s, target) = pairs[i];
        let trace = net.forward_traced(s)?;
        let p = trace.output();
        loss -= p[target].max(1e-300).ln();
        let g: Vec<f64> = p.iter().enumerate().map(|(j, q)| q - if j == target { 1.0 } else { 0.0 }).collect();
        net.accumulate_backward_logits(&trace, &g, scale, grads)?;
    }
    Ok(loss * scale)
}

fn check_targets(net: &Mlp<f64>, pairs: &[(&[f64], usize)]) -> Result<()> {
    if pairs.iter().any(|(_, a)| *a >= net.output_dim()) {
        return Err(Error::config("target action outside the IOP's action set"));
    }
    Ok(())
}

/// Maximum-likelihood fit of a level-0 IOP to the logged opponent actions.
/// Returns the mean cross-entropy of the final epoch.
pub fn train_level0(
    iop: &mut Iop,
    buffer: &[TransitionRecord],
    epochs: usize,
    batch_size: usize,
    learning_rate: f64,
    rng: &mut SimRng,
) -> Result<f64> {
    if iop.level != 0 {
        return Err(Error::usage("train_level0 applies to the level-0 IOP only"));
    }
    check_buffer(buffer)?;
    let pairs: Vec<(&[f64], usize)> = buffer.iter().map(|r| (r.s.as_slice(), r.a_o)).collect();
    check_targets(&iop.net, &pairs)?;
    let mut opt = Adam::new(iop.net.spec(), learning_rate);
    let mut grads = ParamSet::zeros(iop.net.spec());
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut last = 0.0;
    for _ in 0..epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for chunk in order.chunks(batch_size.max(1)) {
            total += cross_entropy_grad(&iop.net, &pairs, chunk, &mut grads)? * chunk.len() as f64;
            opt.step(iop.net.params_mut(), &grads)?;
        }
        last = total / pairs.len() as f64;
    }
    Ok(last)
}

/// `steps` full-batch cross-entropy steps with a fresh optimizer.
fn finetune_in_place(net: &mut Mlp<f64>, pairs: &[(&[f64], usize)], steps: usize, lr: f64) -> Result<f64> {
    check_targets(net, pairs)?;
    let idx: Vec<usize> = (0..pairs.len()).collect();
    let mut opt = Adam::new(net.spec(), lr);
    let mut grads = ParamSet::zeros(net.spec());
    let mut loss = 0.0;
    for _ in 0..steps {
        loss = cross_entropy_grad(net, pairs, &idx, &mut grads)?;
        opt.step(net.params_mut(), &grads)?;
    }
    Ok(loss)
}

fn as_pairs(pairs: &[(Vec<f64>, usize)]) -> Vec<(&[f64], usize)> {
    pairs.iter().map(|(s, a)| (s.as_slice(), *a)).collect()
}

/// Next-level IOP: a clone of `source` finetuned on imagined best responses.
pub fn finetune_iop(source: &Iop, pairs: &[(Vec<f64>, usize)], steps: usize, lr: f64) -> Result<Iop> {
    let mut next = Iop { net: source.net.clone(), level: source.level + 1 };
    if pairs.is_empty() {
        log::warn!("no best-response targets for level {}; keeping an unmodified copy", next.level);
        return Ok(next);
    }
    finetune_in_place(&mut next.net, &as_pairs(pairs), steps, lr)?;
    Ok(next)
}

/// Finetunes the level-0 IOP in place on real opponent actions. Returns the
/// cross-entropy before the last step, or `None` when `recent` is empty.
pub fn finetune_level0(iop: &mut Iop, recent: &[(Vec<f64>, usize)], steps: usize, lr: f64) -> Result<Option<f64>> {
    if iop.level != 0 {
        return Err(Error::usage("finetune_level0 applies to the level-0 IOP only"));
    }
    if recent.is_empty() {
        log::warn!("no real opponent actions to finetune the level-0 IOP");
        return Ok(None);
    }
    finetune_in_place(&mut iop.net, &as_pairs(recent), steps, lr).map(Some)
}

/// IOPs for levels `0..M`.
#[derive(Debug, Clone, PartialEq)]
pub struct IopStack {
    levels: Vec<Iop>,
}

impl IopStack {
    /// Starts every level as a copy of `level0`.
    pub fn new(level0: Iop, m: usize) -> Result<Self> {
        if m == 0 || level0.level != 0 {
            return Err(Error::config("a stack needs M >= 1 and a level-0 base"));
        }
        let levels = (0..m).map(|l| Iop { net: level0.net.clone(), level: l }).collect();
        Ok(IopStack { levels })
    }

    pub fn m(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, m: usize) -> &Iop {
        &self.levels[m]
    }

    pub fn levels(&self) -> &[Iop] {
        &self.levels
    }

    pub fn level0_mut(&mut self) -> &mut Iop {
        &mut self.levels[0]
    }

    /// Replaces level `m >= 1`.
    pub fn set_level(&mut self, iop: Iop) -> Result<()> {
        let m = iop.level;
        if m == 0 || m >= self.levels.len() || !iop.net.params().same_shape(self.levels[0].net.params()) {
            return Err(Error::usage("replacement IOP has the wrong level or topology"));
        }
        self.levels[m] = iop;
        Ok(())
    }

    /// Each level's probability of `a_o` at `s`.
    pub fn likelihoods(&self, s: &[f64], a_o: usize) -> Result<Vec<f64>> {
        self.levels.iter().map(|l| Ok(l.probs(s)?[a_o])).collect()
    }
}

/// Bayes update of the level posterior from one observed opponent action,
/// with likelihoods floored at [`LIKELIHOOD_FLOOR`].
pub fn bayes_posterior(stack: &IopStack, s: &[f64], a_o: usize, prior: &[f64]) -> Result<Vec<f64>> {
    bayes_posterior_with_floor(stack, s, a_o, prior, LIKELIHOOD_FLOOR)
}

pub fn bayes_posterior_with_floor(
    stack: &IopStack,
    s: &[f64],
    a_o: usize,
    prior: &[f64],
    floor: f64,
) -> Result<Vec<f64>> {
    if !crate::scalar::is_probability_vector(prior, 1e-9) {
        return Err(Error::config("prior must be a probability vector"));
    }
    posterior_from_likelihoods(&stack.likelihoods(s, a_o)?, prior, floor)
}

/// `sum_m alpha_m * iop_m(.|s)`.
pub fn mixed_iop(stack: &IopStack, alpha: &[f64], s: &[f64]) -> Result<Vec<f64>> {
    if alpha.len() != stack.m() || !crate::scalar::is_probability_vector(alpha, 1e-9) {
        return Err(Error::config("alpha must be a probability vector with one entry per level"));
    }
    if stack.m() == 1 {
        return stack.levels[0].probs(s);
    }
    let mut out: Vec<f64> = Vec::new();
    for (iop, &w) in stack.levels.iter().zip(alpha) {
        let p = iop.probs(s)?;
        if out.is_empty() {
            out = vec![0.0; p.len()];
        }
        if w != 0.0 {
            out.iter_mut().zip(&p).for_each(|(o, q)| *o += w * q);
        }
    }
    Ok(out)
}

/// A stack and fixed weights, usable as the agent's opponent predictor.
#[derive(Debug, Clone, Copy)]
pub struct MixedIop<'a> {
    pub stack: &'a IopStack,
    pub alpha: &'a [f64],
}

impl OpponentPredictor for MixedIop<'_> {
    fn predict(&self, s: &[f64]) -> Result<Vec<f64>> {
        mixed_iop(self.stack, self.alpha, s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::matrix::tabular_game;
    use crate::envs::matrix::Bimatrix;
    use crate::envs::Game;
    use crate::scalar::is_probability_vector;
    use rand::{Rng, SeedableRng};

    fn rng(seed: u64) -> SimRng {
        SimRng::seed_from_u64(seed)
    }

    fn record(s: Vec<f64>, a: usize, a_o: usize, s_next: Vec<f64>, r: f64, r_o: f64) -> TransitionRecord {
        TransitionRecord { s, a, a_o, s_next, r, r_o }
    }

    #[test]
    fn env_model_fits_a_single_transition() {
        let mut r = rng(0);
        let mut model = EnvModel::new(3, 2, 2, &[64, 32], 0.001, &mut r).unwrap();
        let rec = record(vec![0.1, -0.2, 0.3], 1, 0, vec![0.2, -0.1, 0.0], 0.5, -0.5);
        let buffer = vec![rec.clone(); 8];
        train_env_model(&mut model, &buffer, 200, 64, &mut r).unwrap();
        assert!(model.loss(&rec).unwrap() < 1e-3);
    }

    #[test]
    fn env_model_learns_a_tabular_game() {
        let payoff = Bimatrix::zero_sum(vec![vec![0.5, -1.0, 0.2], vec![-0.3, 1.0, 0.0]]);
        let mut game = tabular_game(payoff.clone(), 1).unwrap();
        let mut buffer = Vec::new();
        for a in 0..2 {
            for o in 0..3 {
                game.reset(0);
                let res = game.step(a, o).unwrap();
                buffer.push(record(vec![1.0], a, o, res.next_state.observation, res.r, res.r_o));
            }
        }
        let mut r = rng(1);
        let mut model = EnvModel::new(1, 2, 3, &[64, 32], 0.001, &mut r).unwrap();
        train_env_model(&mut model, &buffer, 1000, 64, &mut r).unwrap();
        for rec in &buffer {
            let (s, rr, ro) = model.predict(&rec.s, rec.a, rec.a_o).unwrap();
            let err = (s[0] - 1.0).abs().max((rr - rec.r).abs()).max((ro - rec.r_o).abs());
            assert!(err < 0.05, "error {err}");
        }
    }

    #[test]
    fn env_model_zero_rewards() {
        let mut r = rng(2);
        let buffer: Vec<TransitionRecord> = (0..64)
            .map(|i| {
                let x = i as f64 / 64.0;
                record(vec![x, 1.0 - x], i % 2, i % 3, vec![x, x], 0.0, 0.0)
            })
            .collect();
        let mut model = EnvModel::new(2, 2, 3, &[64, 32], 0.001, &mut r).unwrap();
        train_env_model(&mut model, &buffer, 1000, 64, &mut r).unwrap();
        for rec in &buffer {
            let (_, rr, ro) = model.predict(&rec.s, rec.a, rec.a_o).unwrap();
            assert!(rr.abs() < 0.01 && ro.abs() < 0.01, "{rr} {ro}");
        }
    }

    #[test]
    fn empty_buffers_are_usage_errors() {
        let mut r = rng(3);
        let mut model = EnvModel::new(2, 2, 2, &[8], 0.001, &mut r).unwrap();
        assert!(matches!(train_env_model(&mut model, &[], 1, 64, &mut r), Err(Error::Usage(_))));
        let mut iop = Iop::new(2, 2, &[8], &mut r).unwrap();
        assert!(matches!(train_level0(&mut iop, &[], 1, 64, 0.001, &mut r), Err(Error::Usage(_))));
    }

    fn states(r: &mut SimRng, n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| vec![r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)]).collect()
    }

    #[test]
    fn level0_fits_a_constant_opponent() {
        let mut r = rng(4);
        let buffer: Vec<_> = states(&mut r, 128).into_iter().map(|s| record(s.clone(), 0, 2, s, 0.0, 0.0)).collect();
        let mut iop = Iop::new(2, 4, &[64, 32], &mut r).unwrap();
        train_level0(&mut iop, &buffer, 50, 64, 0.001, &mut r).unwrap();
        for rec in &buffer {
            assert!(iop.probs(&rec.s).unwrap()[2] > 0.95);
        }
    }

    #[test]
    fn level0_fits_a_uniform_opponent() {
        let mut r = rng(5);
        let buffer: Vec<_> = states(&mut r, 2000)
            .into_iter()
            .map(|s| {
                let o = r.gen_range(0..4);
                record(s.clone(), 0, o, s, 0.0, 0.0)
            })
            .collect();
        let mut iop = Iop::new(2, 4, &[64, 32], &mut r).unwrap();
        train_level0(&mut iop, &buffer, 10, 64, 0.001, &mut r).unwrap();
        for p in iop.probs(&[0.2, -0.4]).unwrap() {
            assert!((p - 0.25).abs() < 0.05, "{p}");
        }
    }

    #[test]
    fn level0_matches_empirical_frequencies() {
        let mut r = rng(6);
        let s = vec![0.5, 0.5];
        let buffer: Vec<_> = [0, 0, 1].iter().map(|&o| record(s.clone(), 0, o, s.clone(), 0.0, 0.0)).collect();
        let mut iop = Iop::new(2, 2, &[64, 32], &mut r).unwrap();
        train_level0(&mut iop, &buffer, 300, 64, 0.001, &mut r).unwrap();
        let p = iop.probs(&s).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 0.02, "{p:?}");
    }

    #[test]
    fn finetune_iop_moves_toward_targets_without_touching_source() {
        let mut r = rng(7);
        let source = Iop::new(2, 5, &[64, 32], &mut r).unwrap();
        let snapshot = source.clone();
        let pairs: Vec<(Vec<f64>, usize)> = states(&mut r, 10).into_iter().map(|s| (s, 3)).collect();
        let next = finetune_iop(&source, &pairs, 3, 0.005).unwrap();
        assert_eq!(source, snapshot);
        assert_eq!(next.level(), 1);
        for (s, _) in &pairs {
            assert!(next.probs(s).unwrap()[3] > source.probs(s).unwrap()[3]);
        }
        let same = finetune_iop(&source, &pairs, 0, 0.005).unwrap();
        assert_eq!(same.net().params().to_flat(), source.net().params().to_flat());
        let lvl2 = finetune_iop(&next, &pairs, 1, 0.005).unwrap();
        assert_eq!(lvl2.level(), 2);
        let kept = finetune_iop(&source, &[], 3, 0.005).unwrap();
        assert_eq!(kept.net().params().to_flat(), source.net().params().to_flat());
    }

    #[test]
    fn finetune_level0_in_place() {
        let mut r = rng(8);
        let mut iop = Iop::new(2, 3, &[16], &mut r).unwrap();
        let pairs: Vec<(Vec<f64>, usize)> = states(&mut r, 6).into_iter().map(|s| (s, 1)).collect();
        let before: Vec<f64> = pairs.iter().map(|(s, _)| iop.probs(s).unwrap()[1]).collect();
        let v0 = iop.version();
        finetune_level0(&mut iop, &pairs, 3, 0.005).unwrap();
        assert!(iop.version() > v0);
        for ((s, _), b) in pairs.iter().zip(before) {
            assert!(iop.probs(s).unwrap()[1] > b);
        }
        assert_eq!(finetune_level0(&mut iop, &[], 3, 0.005).unwrap(), None);
        let frozen = iop.net().params().to_flat();
        finetune_level0(&mut iop, &pairs, 2, 0.0).unwrap();
        finetune_level0(&mut iop, &pairs, 2, 0.0).unwrap();
        assert_eq!(iop.net().params().to_flat(), frozen);
    }

    #[test]
    fn mixture_cases() {
        let mut r = rng(9);
        let level0 = Iop::new(2, 2, &[8], &mut r).unwrap();
        let s = [0.3, -0.1];
        let single = IopStack::new(level0.clone(), 1).unwrap();
        assert_eq!(mixed_iop(&single, &[1.0], &s).unwrap(), level0.probs(&s).unwrap());
        // Two saturated IOPs: (1, 0) and (0, 1).
        let mut a = Mlp::zeros(level0.net().spec().clone()).unwrap();
        a.params_mut().layers_mut().last_mut().unwrap().biases = vec![800.0, 0.0];
        let mut stack = IopStack::new(Iop::from_net(a, 0).unwrap(), 2).unwrap();
        let mut b = Mlp::zeros(level0.net().spec().clone()).unwrap();
        b.params_mut().layers_mut().last_mut().unwrap().biases = vec![0.0, 800.0];
        stack.set_level(Iop::from_net(b, 1).unwrap()).unwrap();
        let mix = mixed_iop(&stack, &[0.3, 0.7], &s).unwrap();
        assert!((mix[0] - 0.3).abs() < 1e-12 && (mix[1] - 0.7).abs() < 1e-12);
        assert_eq!(mixed_iop(&stack, &[1.0, 0.0], &s).unwrap(), stack.level(0).probs(&s).unwrap());
        assert!(is_probability_vector(&mix, 1e-9));
    }

    #[test]
    fn identical_levels_leave_the_prior() {
        let mut r = rng(10);
        let stack = IopStack::new(Iop::new(2, 3, &[8], &mut r).unwrap(), 3).unwrap();
        let prior = [0.2, 0.5, 0.3];
        let post = bayes_posterior(&stack, &[0.1, 0.1], 2, &prior).unwrap();
        for (a, b) in post.iter().zip(prior) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
