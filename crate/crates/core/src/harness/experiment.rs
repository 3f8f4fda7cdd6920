//! Full pipelines: zoo, per-seed pretraining and the grid of test runs.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use super::config::{AgentVariant, ExperimentConfig};
use super::pretrain::{run_pretraining, AgentBundle};
use super::test_phase::{run_test_phase_against, MetricsRow, TestRun};
use crate::error::{Error, Result};
use crate::opmodel::DiagnosticsRow;
use crate::opponents::{build_zoo, load_zoo, save_zoo, OpponentSnapshot, OpponentType, Role, Zoo, ZooConfig};

/// Parameters of the reasoning-learner part of the zoo.
pub fn reasoning_zoo_config(cfg: &ExperimentConfig) -> ZooConfig {
    ZooConfig {
        n_runs: cfg.reasoning_runs,
        snapshots_per_run: 3,
        snapshot_interval: cfg.reasoning_interval,
        split: [0, 0, 3],
        reasoning: true,
        learner: cfg.opponent,
        ..cfg.zoo.clone()
    }
}

/// Policy runs plus reasoning-learner runs, seeded by `zoo.seed`.
pub fn build_experiment_zoo(cfg: &ExperimentConfig) -> Result<Zoo> {
    let mut game = cfg.game.build()?;
    let mut zoo = build_zoo(game.as_mut(), &cfg.zoo, cfg.zoo_seed)?;
    if cfg.reasoning_runs > 0 {
        let reasoning = build_zoo(game.as_mut(), &reasoning_zoo_config(cfg), cfg.zoo_seed.wrapping_add(1))?;
        zoo.extend(reasoning)?;
    }
    Ok(zoo)
}

/// Loads the zoo cached under `dir` when its hash matches, otherwise builds and stores it.
pub fn load_or_build_zoo(cfg: &ExperimentConfig, dir: &Path) -> Result<Zoo> {
    let hash = cfg.zoo_hash();
    if dir.join(crate::opponents::ZOO_MANIFEST).exists() {
        let (zoo, manifest) = load_zoo(dir)?;
        if manifest.config_hash == hash {
            return Ok(zoo);
        }
        log::info!("zoo in {} was built from another config; rebuilding", dir.display());
    }
    let zoo = build_experiment_zoo(cfg)?;
    save_zoo(&zoo, dir, &hash)?;
    Ok(zoo)
}

/// Test opponents usable as `kind`, at most `cap`, in zoo order.
pub fn test_opponents(zoo: &Zoo, kind: OpponentType, cap: usize) -> Vec<&OpponentSnapshot> {
    zoo.by_role(Role::Test)
        .into_iter()
        .filter(|s| s.is_reasoning() == (kind == OpponentType::Reasoning))
        .take(cap)
        .collect()
}

/// Diagnostics of one MBOM test run.
#[derive(Debug, Clone)]
pub struct RunDiagnostics {
    pub seed: u64,
    pub variant: AgentVariant,
    pub opponent_id: String,
    pub rows: Vec<DiagnosticsRow>,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub rows: Vec<MetricsRow>,
    pub diagnostics: Vec<RunDiagnostics>,
    pub bundles: BTreeMap<String, AgentBundle>,
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))
}

/// Pretraining bundles for every seed and every distinct pretraining config
/// the variants need, keyed by pretraining hash. Bundles found under
/// `cache` are reused and new ones are stored there.
pub fn pretrain_all(
    cfg: &ExperimentConfig,
    zoo: &Zoo,
    variants: &[AgentVariant],
    cache: Option<&Path>,
) -> Result<BTreeMap<String, AgentBundle>> {
    let mut jobs: BTreeMap<String, (ExperimentConfig, u64)> = BTreeMap::new();
    for &v in variants {
        let c = cfg.with_variant(v);
        for &seed in &cfg.seeds {
            jobs.entry(c.pretrain_hash(seed)).or_insert_with(|| (c.clone(), seed));
        }
    }
    let jobs: Vec<_> = jobs.into_iter().collect();
    let built = pool(cfg.test.workers)?.install(|| {
        jobs.par_iter()
            .map(|(hash, (c, seed))| {
                let dir = cache.map(|d| d.join(format!("bundle-{}", &hash[..16])));
                if let Some(dir) = &dir {
                    if dir.join("manifest.json").exists() {
                        let b = AgentBundle::load(dir)?;
                        if &b.config_hash == hash {
                            return Ok((hash.clone(), b));
                        }
                    }
                }
                let b = run_pretraining(c, zoo, *seed)?;
                if let Some(dir) = &dir {
                    b.save(dir)?;
                }
                Ok((hash.clone(), b))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(built.into_iter().collect())
}

/// Runs every (seed, variant, opponent type, test opponent) combination of
/// `cells`. Rows come back grouped by seed, then cell, then opponent.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    zoo: &Zoo,
    cells: &[(AgentVariant, OpponentType)],
    cache: Option<&Path>,
) -> Result<ExperimentOutput> {
    let variants: Vec<AgentVariant> = cells.iter().map(|c| c.0).collect();
    let bundles = pretrain_all(cfg, zoo, &variants, cache)?;
    let mut tasks = Vec::new();
    for &seed in &cfg.seeds {
        for &(variant, kind) in cells {
            let opponents = test_opponents(zoo, kind, cfg.test.opponents);
            if opponents.is_empty() {
                return Err(Error::config(format!("the zoo has no {} test opponents", kind.name())));
            }
            for snap in opponents {
                tasks.push((seed, variant, kind, snap));
            }
        }
    }
    let runs: Vec<(u64, AgentVariant, String, TestRun)> = pool(cfg.test.workers)?.install(|| {
        tasks
            .par_iter()
            .map(|(seed, variant, kind, snap)| {
                let c = cfg.with_variant(*variant);
                let bundle = &bundles[&c.pretrain_hash(*seed)];
                let run = run_test_phase_against(&c, bundle, *kind, snap, *seed)?;
                Ok((*seed, *variant, snap.id.clone(), run))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut out = ExperimentOutput { bundles, ..Default::default() };
    for (seed, variant, opponent_id, run) in runs {
        out.rows.extend(run.rows);
        if !run.diagnostics.is_empty() {
            out.diagnostics.push(RunDiagnostics { seed, variant, opponent_id, rows: run.diagnostics });
        }
    }
    Ok(out)
}

/// Sidecar next to every metrics file, tying it to the exact config.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub config: String,
    pub command: String,
    pub files: Vec<String>,
}

pub const RUN_MANIFEST: &str = "run.json";

impl RunManifest {
    pub fn new(cfg: &ExperimentConfig, command: &str, files: Vec<String>) -> Self {
        RunManifest { config_hash: cfg.hash(), config: cfg.canonical(), command: command.into(), files }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(RUN_MANIFEST), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(dir.join(RUN_MANIFEST))?)?)
    }
}
