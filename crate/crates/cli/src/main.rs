use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use mbom::envs::GameName;
use mbom::harness::aggregate::{format_summary, write_summary_csv};
use mbom::harness::coin::{run_coin_selfplay, SelfPlayConfig};
use mbom::harness::config::documented_defaults;
use mbom::harness::experiment::{load_or_build_zoo, pretrain_all, run_experiment, RunManifest, RUN_MANIFEST};
use mbom::harness::plot::{emit_plot, PlotData, PlotKind};
use mbom::harness::verify::format_outcomes;
use mbom::harness::{
    aggregate, read_metrics_csv, run_oracle_suite, run_test_phase, write_metrics_csv, AgentVariant, ExperimentConfig,
};
use mbom::opmodel::{read_diagnostics_csv, write_diagnostics_csv};
use mbom::opponents::{OpponentType, Role};

#[derive(Parser)]
#[command(name = "mbom", about = "Opponent-zoo building, pretraining, test runs, aggregation, plots and oracle checks")]
struct Cli {
    /// key = value config file; per-game defaults fill the rest
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Game whose defaults are used when no config file is given
    #[arg(long, global = true, default_value = "triangle")]
    game: String,
    /// Override a config key, e.g. --set test.episodes=20 (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Run a single seed instead of the configured list
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    variant: Option<AgentVariant>,
    #[arg(long, global = true, default_value = "runs")]
    out: PathBuf,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build (or reuse) the opponent zoo under OUT/zoo
    Zoo,
    /// Pretrain agent bundles under OUT/bundles
    Pretrain,
    /// Test phase against test opponents; writes OUT/<variant>-<type>/metrics.csv
    Test {
        #[arg(long, default_value = "fixed")]
        opponent_type: OpponentType,
        /// A single opponent id; all test opponents of the type otherwise
        #[arg(long)]
        opponent: Option<String>,
    },
    /// Mean and 95% CI over seed means of one or more metrics files
    Aggregate { inputs: Vec<PathBuf> },
    /// SVG figure from a metrics or diagnostics file
    Plot {
        #[arg(long)]
        kind: PlotKind,
        #[arg(long)]
        input: PathBuf,
        /// Output file; OUT/<kind>.svg by default
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// The oracle suite; fails when any check fails
    Verify,
    /// Coin Game self-play, joint score per iteration
    Selfplay {
        #[arg(long, default_value_t = 200)]
        iterations: usize,
    },
    /// Print every config key with its default and source
    Config,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path).with_context(|| format!("reading {}", path.display()))?,
        None => ExperimentConfig::for_game(cli.game.parse()?),
    };
    for kv in &cli.sets {
        let (k, v) = kv.split_once('=').with_context(|| format!("--set {kv}: expected KEY=VALUE"))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = cli.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(v) = cli.variant {
        cfg.variant = v;
    }
    if let Some(w) = cli.workers {
        cfg.test.workers = w;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

/// Config hash recorded next to `input`, if any.
fn sidecar_hash(input: &Path) -> Option<String> {
    let dir = input.parent()?;
    dir.join(RUN_MANIFEST).exists().then(|| RunManifest::load(dir).ok().map(|m| m.config_hash)).flatten()
}

fn test(cli: &Cli, cfg: &ExperimentConfig, kind: OpponentType, opponent: Option<&str>) -> Result<()> {
    let zoo = load_or_build_zoo(cfg, &cli.out.join("zoo"))?;
    let cache = cli.out.join("bundles");
    let dir = cli.out.join(format!("{}-{}", cfg.variant, kind.name()));
    let (rows, diagnostics) = match opponent {
        Some(id) => {
            let bundles = pretrain_all(cfg, &zoo, &[cfg.variant], Some(&cache))?;
            let mut rows = Vec::new();
            let mut diags = Vec::new();
            for &seed in &cfg.seeds {
                let run = run_test_phase(cfg, &bundles[&cfg.pretrain_hash(seed)], &zoo, kind, id, seed)?;
                rows.extend(run.rows);
                if !run.diagnostics.is_empty() {
                    diags.push((seed, id.to_string(), run.diagnostics));
                }
            }
            (rows, diags)
        }
        None => {
            let out = run_experiment(cfg, &zoo, &[(cfg.variant, kind)], Some(&cache))?;
            let diags = out.diagnostics.into_iter().map(|d| (d.seed, d.opponent_id, d.rows)).collect();
            (out.rows, diags)
        }
    };
    let mut files = vec!["metrics.csv".to_string()];
    write_metrics_csv(&rows, create(&dir.join("metrics.csv"))?)?;
    for (seed, id, diag) in &diagnostics {
        let name = format!("diagnostics/seed{seed}-{id}.csv");
        write_diagnostics_csv(diag, create(&dir.join(&name))?)?;
        files.push(name);
    }
    RunManifest::new(cfg, &format!("test --opponent-type {}", kind.name()), files).save(&dir)?;
    let summary = aggregate(&rows).or_else(|_| {
        // one seed: report the plain mean
        let mean = rows.iter().map(|r| r.agent_return).sum::<f64>() / rows.len().max(1) as f64;
        println!("mean agent return {mean:.4} over {} episodes", rows.len());
        Ok::<_, anyhow::Error>(Vec::new())
    })?;
    if !summary.is_empty() {
        print!("{}", format_summary(&summary));
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Config => {
            print!("{}", documented_defaults(cli.game.parse::<GameName>()?));
        }
        Command::Verify => {
            let outcomes = run_oracle_suite(cli.seed.unwrap_or(0))?;
            print!("{}", format_outcomes(&outcomes));
            if outcomes.iter().any(|o| !o.passed) {
                bail!("oracle suite failed");
            }
        }
        Command::Zoo => {
            let cfg = load_config(cli)?;
            let zoo = load_or_build_zoo(&cfg, &cli.out.join("zoo"))?;
            for role in [Role::Train, Role::Validation, Role::Test] {
                println!("{role:?}: {} snapshots", zoo.by_role(role).len());
            }
        }
        Command::Pretrain => {
            let cfg = load_config(cli)?;
            let zoo = load_or_build_zoo(&cfg, &cli.out.join("zoo"))?;
            let bundles = pretrain_all(&cfg, &zoo, &[cfg.variant], Some(&cli.out.join("bundles")))?;
            for (hash, b) in &bundles {
                let r = &b.report;
                println!(
                    "bundle-{}: {} transitions, env error train {:.5} holdout {:.5}, final return {:.3}",
                    &hash[..16],
                    r.transitions,
                    r.env_train_error,
                    r.env_holdout_error,
                    r.final_mean_return
                );
            }
        }
        Command::Test { opponent_type, opponent } => {
            let cfg = load_config(cli)?;
            test(cli, &cfg, *opponent_type, opponent.as_deref())?;
        }
        Command::Aggregate { inputs } => {
            if inputs.is_empty() {
                bail!("aggregate needs at least one metrics file");
            }
            let mut rows = Vec::new();
            for p in inputs {
                rows.extend(read_metrics_csv(File::open(p).with_context(|| format!("opening {}", p.display()))?)?);
            }
            let summary = aggregate(&rows)?;
            print!("{}", format_summary(&summary));
            write_summary_csv(&summary, create(&cli.out.join("summary.csv"))?)?;
        }
        Command::Plot { kind, input, output } => {
            let hash = match sidecar_hash(input) {
                Some(h) => h,
                None => load_config(cli)?.hash(),
            };
            let path = output.clone().unwrap_or_else(|| cli.out.join(format!("{kind:?}.svg").to_lowercase()));
            let file = File::open(input).with_context(|| format!("opening {}", input.display()))?;
            match kind {
                PlotKind::AlphaTrajectory => {
                    let rows = read_diagnostics_csv(file)?;
                    emit_plot(PlotData::Diagnostics(&rows), *kind, &path, &hash)?;
                }
                _ => {
                    let rows = read_metrics_csv(file)?;
                    emit_plot(PlotData::Metrics(&rows), *kind, &path, &hash)?;
                }
            }
            println!("wrote {}", path.display());
        }
        Command::Selfplay { iterations } => {
            let mut cfg = load_config(cli)?;
            if cli.config.is_none() && cfg.game.name != GameName::Coin {
                cfg = ExperimentConfig::for_game(GameName::Coin);
            }
            let sp = SelfPlayConfig { iterations: *iterations, ..Default::default() };
            for &seed in &cfg.seeds {
                let joint = run_coin_selfplay(&cfg, &sp, seed)?;
                let tail = &joint[joint.len().saturating_sub(20)..];
                println!("seed {seed}: mean joint score over the last {} iterations {:.3}", tail.len(), tail.iter().sum::<f64>() / tail.len() as f64);
            }
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
