//! Acceptance run: one pass/fail line per criterion, nonzero exit on any failure.
//!
//! Set `MBOM_ACCEPTANCE_CACHE=DIR` to reuse the zoo and pretrained bundles
//! between runs (both are keyed by config hash).

use std::path::PathBuf;
use std::time::Instant;

use mbom::envs::GameName;
use mbom::harness::aggregate::{paired_difference, seed_means};
use mbom::harness::coin::{greedy_pair, run_coin_selfplay, SelfPlayConfig};
use mbom::harness::experiment::{build_experiment_zoo, load_or_build_zoo, run_experiment};
use mbom::harness::verify::{
    check_convergence, check_gradients, check_mixing_bound, check_posteriors, check_rollout_oracle, CheckOutcome,
};
use mbom::harness::{write_metrics_csv, AgentVariant, ExperimentConfig, MetricsRow, METRICS_HEADER};
use mbom::opponents::OpponentType;

struct Line {
    n: usize,
    passed: bool,
    detail: String,
}

fn oracle(n: usize, budget_s: f64, check: mbom::Result<CheckOutcome>) -> Line {
    match check {
        Ok(o) => {
            let budget = if budget_s.is_finite() { format!(", budget {budget_s}s") } else { String::new() };
            Line { n, passed: o.passed && o.seconds < budget_s, detail: format!("{} ({:.1}s{budget})", o.detail, o.seconds) }
        }
        Err(e) => Line { n, passed: false, detail: format!("error: {e}") },
    }
}

fn cache() -> Option<PathBuf> {
    std::env::var_os("MBOM_ACCEPTANCE_CACHE").map(PathBuf::from)
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Mean over seeds of the per-seed mean return.
fn overall(rows: &[MetricsRow], v: AgentVariant, t: OpponentType) -> f64 {
    let m = &seed_means(rows)[&(v, t)];
    m.values().sum::<f64>() / m.len() as f64
}

fn triangle() -> mbom::Result<(Line, Line)> {
    use AgentVariant::*;
    use OpponentType::*;
    let start = Instant::now();
    let mut cfg = ExperimentConfig::for_game(GameName::Triangle);
    cfg.test.workers = workers();
    let zoo = match cache() {
        Some(dir) => load_or_build_zoo(&cfg, &dir.join("zoo"))?,
        None => build_experiment_zoo(&cfg)?,
    };
    let cells = [
        (Mbom, Fixed),
        (Mbom, Naive),
        (Mbom, Reasoning),
        (PpoOnly, Fixed),
        (PpoOnly, Naive),
        (PpoOnly, Reasoning),
        (MbomBm, Reasoning),
        (MbomWoIops, Reasoning),
        (MbomWoIops, Fixed),
    ];
    let bundles = cache().map(|d| d.join("bundles"));
    let out = run_experiment(&cfg, &zoo, &cells, bundles.as_deref())?;
    let rows = &out.rows;
    let secs = start.elapsed().as_secs_f64();
    let in_time = secs < 4.0 * 3600.0;

    let mut ok6 = in_time;
    let mut parts = Vec::new();
    for t in [Fixed, Naive, Reasoning] {
        let (a, b) = (overall(rows, Mbom, t), overall(rows, PpoOnly, t));
        ok6 &= a >= b;
        parts.push(format!("{}: mbom {a:.3} vs ppo_only {b:.3}", t.name()));
    }
    let (gap, half) = paired_difference(rows, Mbom, PpoOnly, Reasoning)?;
    ok6 &= gap - half > 0.0;
    parts.push(format!("reasoning gap {gap:.3} +- {half:.3}"));
    let six = Line { n: 6, passed: ok6, detail: format!("{} ({secs:.0}s)", parts.join("; ")) };

    let (m, bm, wo) = (overall(rows, Mbom, Reasoning), overall(rows, MbomBm, Reasoning), overall(rows, MbomWoIops, Reasoning));
    let (fd, fh) = paired_difference(rows, Mbom, MbomWoIops, Fixed)?;
    let seven = Line {
        n: 7,
        passed: m >= bm && bm >= wo && fd.abs() <= fh,
        detail: format!(
            "reasoning: mbom {m:.3}, mbom_bm {bm:.3}, mbom_wo_iops {wo:.3}; fixed: mbom - mbom_wo_iops {fd:.3} +- {fh:.3}"
        ),
    };
    Ok((six, seven))
}

fn coin() -> mbom::Result<Line> {
    let cfg = ExperimentConfig::for_game(GameName::Coin);
    let sp = SelfPlayConfig::default();
    let mut tails = Vec::new();
    for &seed in &cfg.seeds {
        let joint = run_coin_selfplay(&cfg, &sp, seed)?;
        let tail = &joint[joint.len() - 20..];
        tails.push(tail.iter().sum::<f64>() / tail.len() as f64);
    }
    let mean = tails.iter().sum::<f64>() / tails.len() as f64;
    let (joint, coins) = greedy_pair(20, cfg.game.episode_len, 0)?;
    let per_coin = joint / coins as f64;
    Ok(Line {
        n: 8,
        passed: mean > 0.0 && per_coin.abs() < 0.1,
        detail: format!(
            "self-play joint score over the last 20 of {} iterations {mean:.3} (seeds {tails:.2?}); greedy pair {joint} over {coins} coins",
            sp.iterations
        ),
    })
}

const SMALL: &str = "\
game.name = triangle
agent.hidden = 16,8
zoo.runs = 2
zoo.snapshots_per_run = 4
zoo.snapshot_interval = 4
zoo.split = 2,1,1
zoo.reasoning_runs = 1
zoo.reasoning_interval = 2
pretrain.nu = 2
pretrain.iterations = 10
test.episodes = 3
test.opponents = 2
seeds = 0,1
";

fn small_pipeline() -> mbom::Result<Vec<u8>> {
    let cfg = ExperimentConfig::parse(SMALL)?;
    let zoo = build_experiment_zoo(&cfg)?;
    let cells = [(AgentVariant::Mbom, OpponentType::Naive), (AgentVariant::PpoOnly, OpponentType::Reasoning)];
    let out = run_experiment(&cfg, &zoo, &cells, None)?;
    let mut bytes = Vec::new();
    write_metrics_csv(&out.rows, &mut bytes)?;
    Ok(bytes)
}

fn determinism() -> mbom::Result<Line> {
    let a = small_pipeline()?;
    let b = small_pipeline()?;
    let text = String::from_utf8_lossy(&a);
    let header = text.lines().next().unwrap_or_default();
    let rows = text.lines().count().saturating_sub(1);
    Ok(Line {
        n: 9,
        passed: a == b && header == METRICS_HEADER && rows > 0,
        detail: format!("{} bytes, {rows} rows, identical: {}, header exact: {}", a.len(), a == b, header == METRICS_HEADER),
    })
}

fn report(line: &Line) {
    println!("criterion {}: {} {}", line.n, if line.passed { "PASS" } else { "FAIL" }, line.detail);
}

fn failed(n: usize, e: mbom::Error) -> Line {
    Line { n, passed: false, detail: format!("error: {e}") }
}

fn main() {
    let mut lines = Vec::new();
    let mut run = |line: Line| {
        report(&line);
        lines.push(line.passed);
    };
    run(oracle(1, 60.0, check_gradients(100, 1)));
    run(oracle(2, 60.0, check_rollout_oracle(50, 2)));
    run(oracle(3, f64::INFINITY, check_posteriors(1000, 3)));
    run(oracle(4, 60.0, check_convergence(20, 4)));
    run(oracle(5, 120.0, check_mixing_bound(100, 5)));
    match triangle() {
        Ok((six, seven)) => {
            run(six);
            run(seven);
        }
        Err(e) => {
            let msg = e.to_string();
            run(failed(6, e));
            run(Line { n: 7, passed: false, detail: format!("error: {msg}") });
        }
    }
    run(coin().unwrap_or_else(|e| failed(8, e)));
    run(determinism().unwrap_or_else(|e| failed(9, e)));
    let passed = lines.iter().filter(|p| **p).count();
    println!("{passed}/{} criteria passed", lines.len());
    if passed != lines.len() {
        std::process::exit(1);
    }
}
