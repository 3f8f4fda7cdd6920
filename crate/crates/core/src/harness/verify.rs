//! The oracle suite: each check compares a runtime component against an
//! independent exact computation.

use std::time::Instant;

use rand::{Rng, SeedableRng};

use crate::error::Result;
use crate::nn::{Mlp, NetSpec, OutputHead};
use crate::opmodel::{
    bayes_posterior_with_floor, imagine_best_response, posterior_from_likelihoods, AgentSampling, ImagineConfig, Iop,
    IopStack, Mixer, RolloutMode, LIKELIHOOD_FLOOR,
};
use crate::opmodel::imagine::{tabular_observation, TabularAgent};
use crate::oracle::{
    brute_force_best_response, check_lemma1, exact_posterior, random_distribution, random_lemma1_instance, sample_index,
    TabularModel, TabularPolicy,
};
use crate::SimRng;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

fn outcome(name: &'static str, start: Instant, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, passed, detail, seconds: start.elapsed().as_secs_f64() }
}

/// Network shapes used by the triangle, coin and pursuit experiments, plus a small deep one.
pub fn experiment_net_specs() -> Vec<NetSpec> {
    let h = [64, 32];
    let mk = |i, o, head| NetSpec::mlp(i, &h, o, head).expect("valid spec");
    vec![
        // triangle: policy, value, environment model, IOP
        mk(12 + 5, 5, OutputHead::Softmax),
        mk(12, 1, OutputHead::Linear),
        mk(12 + 5 + 5, 14, OutputHead::Linear),
        mk(12, 5, OutputHead::Softmax),
        // coin
        mk(36 + 4, 4, OutputHead::Softmax),
        mk(36 + 4 + 4, 38, OutputHead::Linear),
        // pursuit IOP over the joint opponent action
        mk(8, 125, OutputHead::Softmax),
        NetSpec::mlp(3, &[4, 4, 4], 2, OutputHead::Softmax).expect("valid spec"),
    ]
}

fn loss(net: &Mlp<f64>, x: &[f64], c: &[f64], target: Option<usize>) -> f64 {
    let out = net.forward(x).expect("shape");
    match target {
        Some(t) => -out[t].ln(),
        None => out.iter().zip(c).map(|(o, c)| o * c).sum(),
    }
}

/// Largest relative error `|g - n| / (|g| + |n|)` (vector norms) between the
/// backpropagated and the central-difference gradient over `cases` random
/// (parameters, input, loss) draws of `spec`. Softmax heads alternate between
/// a linear functional of the probabilities and cross-entropy through the
/// logits path.
pub fn gradient_relative_error(spec: &NetSpec, cases: usize, rng: &mut SimRng) -> Result<f64> {
    let h = 1e-6;
    let mut worst = 0.0f64;
    for case in 0..cases {
        let mut net = Mlp::<f64>::init(spec.clone(), rng)?;
        let x: Vec<f64> = (0..spec.input_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (0..spec.output_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let softmax = spec.output_head == OutputHead::Softmax;
        let target = (softmax && case % 2 == 1).then(|| rng.gen_range(0..spec.output_dim()));
        let trace = net.forward_traced(&x)?;
        let analytic = match target {
            Some(t) => {
                let mut g: Vec<f64> = trace.output().to_vec();
                g[t] -= 1.0;
                let mut grads = crate::nn::ParamSet::zeros(spec);
                net.accumulate_backward_logits(&trace, &g, 1.0, &mut grads)?;
                grads
            }
            None => net.backward(&trace, &c)?,
        }
        .to_flat();
        let n = net.params().len();
        let mut numeric = Vec::with_capacity(n);
        for i in 0..n {
            let orig = *net.params().iter().nth(i).expect("index in range");
            let nudge = |net: &mut Mlp<f64>, v: f64| *net.params_mut().iter_mut().nth(i).expect("index in range") = v;
            nudge(&mut net, orig + h);
            let up = loss(&net, &x, &c, target);
            nudge(&mut net, orig - h);
            let down = loss(&net, &x, &c, target);
            nudge(&mut net, orig);
            numeric.push((up - down) / (2.0 * h));
        }
        let diff = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
        let scale = analytic.iter().map(|a| a * a).sum::<f64>().sqrt() + numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
        if scale > 0.0 {
            worst = worst.max(diff / scale);
        }
    }
    Ok(worst)
}

pub fn check_gradients(cases: usize, seed: u64) -> Result<CheckOutcome> {
    let start = Instant::now();
    let mut rng = SimRng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for spec in experiment_net_specs() {
        worst = worst.max(gradient_relative_error(&spec, cases, &mut rng)?);
    }
    let specs = experiment_net_specs().len();
    Ok(outcome(
        "gradients vs central differences",
        start,
        worst < 1e-4,
        format!("{specs} topologies x {cases} cases, worst relative error {worst:.2e}"),
    ))
}

/// Exact imagination settings: every continuation, the agent's action
/// distribution propagated exactly, no value bootstrap.
pub fn exact_imagine_config(k: usize, gamma: f64) -> ImagineConfig {
    ImagineConfig {
        k,
        n_seq: 1,
        gamma,
        mode: RolloutMode::Plain,
        opponent_value_sign: -1.0,
        agent: AgentSampling::Expected,
        exhaustive_limit: usize::MAX,
    }
}

pub fn check_rollout_oracle(games: usize, seed: u64) -> Result<CheckOutcome> {
    let start = Instant::now();
    let mut rng = SimRng::seed_from_u64(seed);
    let (mut agree, mut total) = (0, 0);
    for k in 0..=2 {
        for _ in 0..games {
            let n = rng.gen_range(1..=3);
            let na = rng.gen_range(2..=4);
            let no = rng.gen_range(2..=4);
            let model = TabularModel::random_deterministic(&mut rng, n, na, no);
            let agent = TabularAgent::random(&mut rng, n, no, na);
            let iop = TabularPolicy::random(&mut rng, n, no);
            let s = rng.gen_range(0..n);
            let cfg = exact_imagine_config(k, 0.9);
            let ours = imagine_best_response(&model, &agent, None, &iop, &tabular_observation(n, s), &cfg, &mut rng)?;
            let (expected, _) = brute_force_best_response(&model, &agent.marginal(&iop), s, k, 0.9)?;
            total += 1;
            agree += usize::from(ours == expected);
        }
    }
    Ok(outcome(
        "imagined best response vs brute force",
        start,
        agree == total,
        format!("{agree}/{total} actions agree (k = 0, 1, 2)"),
    ))
}

/// Random IOP networks, their tabular restriction to a few fixed
/// observations, and the largest gap between the runtime Bayes update with
/// the floor disabled and the exact sequential posterior.
pub fn posterior_gap(updates: usize, rng: &mut SimRng) -> Result<f64> {
    let (sd, na, m, n_obs) = (3, 3, 3, 5);
    let states: Vec<Vec<f64>> = (0..n_obs).map(|_| (0..sd).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let iops: Vec<Iop> = (0..m).map(|l| Iop::from_net(Iop::new(sd, na, &[8], rng)?.net().clone(), l)).collect::<Result<_>>()?;
    let tables: Vec<TabularPolicy> = iops
        .iter()
        .map(|iop| TabularPolicy::new(states.iter().map(|s| iop.probs(s)).collect::<Result<_>>()?))
        .collect::<Result<_>>()?;
    let mut stack = IopStack::new(Iop::from_net(iops[0].net().clone(), 0)?, m)?;
    for iop in &iops[1..] {
        stack.set_level(iop.clone())?;
    }
    let truth = TabularPolicy::random(rng, n_obs, na);
    let obs: Vec<(usize, usize)> = (0..updates)
        .map(|_| {
            let s = rng.gen_range(0..n_obs);
            (s, sample_index(rng, truth.row(s)))
        })
        .collect();
    let prior = random_distribution(rng, m);
    let exact = exact_posterior(&tables, &obs, &prior)?;
    let mut belief = prior;
    let mut worst = 0.0f64;
    for ((s, a), want) in obs.iter().zip(&exact) {
        belief = bayes_posterior_with_floor(&stack, &states[*s], *a, &belief, 0.0)?;
        for (b, w) in belief.iter().zip(want) {
            worst = worst.max((b - w).abs());
        }
    }
    Ok(worst)
}

/// Largest gap between the mixer's evidence sum and a direct evaluation of
/// `sum over the last H posteriors of lambda^age * p` (newest age 1).
pub fn psi_gap(histories: usize, rng: &mut SimRng) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..histories {
        let m = rng.gen_range(2..=4);
        let horizon = rng.gen_range(1..=12);
        let lambda = rng.gen_range(0.05..1.0);
        let len: usize = rng.gen_range(1..=30);
        let posts: Vec<Vec<f64>> = (0..len).map(|_| random_distribution(rng, m)).collect();
        let mut mixer = Mixer::new(m, lambda, horizon, 1.0)?;
        for p in &posts {
            mixer.update(p)?;
        }
        let window = &posts[len.saturating_sub(horizon)..];
        for i in 0..m {
            let mut hand = 0.0;
            for (j, p) in window.iter().enumerate() {
                let age = (window.len() - j) as i32;
                hand += lambda.powi(age) * p[i];
            }
            worst = worst.max((hand - mixer.psi()[i]).abs());
        }
    }
    Ok(worst)
}

pub fn check_posteriors(updates: usize, seed: u64) -> Result<CheckOutcome> {
    let start = Instant::now();
    let mut rng = SimRng::seed_from_u64(seed);
    let post = posterior_gap(updates, &mut rng)?;
    let psi = psi_gap(200, &mut rng)?;
    Ok(outcome(
        "Bayes posterior and evidence sum exactness",
        start,
        post <= 1e-12 && psi <= 1e-12,
        format!("{updates} updates: posterior gap {post:.1e}; evidence sum gap {psi:.1e}"),
    ))
}

/// Mean total-variation distance between two tabular policies over states.
fn mean_tv(a: &TabularPolicy, b: &TabularPolicy) -> f64 {
    (0..a.n_states())
        .map(|s| 0.5 * a.row(s).iter().zip(b.row(s)).map(|(x, y)| (x - y).abs()).sum::<f64>())
        .sum::<f64>()
        / a.n_states() as f64
}

/// Random triples of tabular IOPs with pairwise mean TV distance at least `min_tv`.
pub fn distinguishable_iops(rng: &mut SimRng, n_states: usize, n_actions: usize, min_tv: f64) -> Vec<TabularPolicy> {
    loop {
        let iops: Vec<TabularPolicy> = (0..3).map(|_| TabularPolicy::random(rng, n_states, n_actions)).collect();
        let ok = (0..3).all(|i| (i + 1..3).all(|j| mean_tv(&iops[i], &iops[j]) >= min_tv));
        if ok {
            return iops;
        }
    }
}

/// Instances (out of `instances`) where the floored runtime posterior puts more
/// than 0.99 on the true level after `steps` observations.
pub fn convergence_count(instances: usize, steps: usize, rng: &mut SimRng) -> Result<usize> {
    let mut hits = 0;
    for _ in 0..instances {
        let iops = distinguishable_iops(rng, 4, 3, 0.2);
        let truth = rng.gen_range(0..3);
        let mut belief = vec![1.0 / 3.0; 3];
        for _ in 0..steps {
            let s = rng.gen_range(0..4);
            let a = sample_index(rng, iops[truth].row(s));
            let l: Vec<f64> = iops.iter().map(|p| p.prob(s, a)).collect();
            belief = posterior_from_likelihoods(&l, &belief, LIKELIHOOD_FLOOR)?;
        }
        hits += usize::from(belief[truth] > 0.99);
    }
    Ok(hits)
}

pub fn check_convergence(instances: usize, seed: u64) -> Result<CheckOutcome> {
    let start = Instant::now();
    let mut rng = SimRng::seed_from_u64(seed);
    let hits = convergence_count(instances, 200, &mut rng)?;
    let need = (instances * 19).div_ceil(20);
    Ok(outcome(
        "posterior concentrates on the true level",
        start,
        hits >= need,
        format!("{hits}/{instances} instances above 0.99 after 200 observations (need {need})"),
    ))
}

pub fn check_mixing_bound(instances: usize, seed: u64) -> Result<CheckOutcome> {
    let start = Instant::now();
    let mut rng = SimRng::seed_from_u64(seed);
    let (mut violations, mut states, mut slack) = (0, 0, f64::INFINITY);
    for i in 0..instances {
        let m = 2 + i % 3;
        let report = check_lemma1(&random_lemma1_instance(&mut rng, m))?;
        violations += report.violations;
        states += report.lhs.len();
        for (l, r) in report.lhs.iter().zip(&report.rhs) {
            slack = slack.min(r - l);
        }
    }
    Ok(outcome(
        "mixing error bound",
        start,
        violations == 0,
        format!("{violations} violations over {instances} instances / {states} states, min slack {slack:.2e}"),
    ))
}

/// Every check at acceptance size.
pub fn run_oracle_suite(seed: u64) -> Result<Vec<CheckOutcome>> {
    Ok(vec![
        check_gradients(100, seed)?,
        check_rollout_oracle(50, seed)?,
        check_posteriors(1000, seed)?,
        check_convergence(20, seed)?,
        check_mixing_bound(100, seed)?,
    ])
}

pub fn format_outcomes(outcomes: &[CheckOutcome]) -> String {
    let mut out = String::new();
    for o in outcomes {
        out.push_str(&format!(
            "{} {:<44} {:>7.2}s  {}\n",
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.seconds,
            o.detail
        ));
    }
    out
}
