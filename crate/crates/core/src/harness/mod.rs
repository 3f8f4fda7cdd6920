//! Experiment harness: configuration, pretraining, test runs, aggregation,
//! plots and the oracle suite.

use sha2::{Digest, Sha256};

pub mod aggregate;
pub mod coin;
pub mod config;
pub mod experiment;
pub mod plot;
pub mod pretrain;
pub mod test_phase;
pub mod verify;

pub use aggregate::{aggregate, paired_difference, seed_means, t_interval, SummaryRow};
pub use config::{AgentVariant, ExperimentConfig, PretrainConfig, TestConfig};
pub use experiment::{build_experiment_zoo, load_or_build_zoo, run_experiment, ExperimentOutput};
pub use pretrain::{run_pretraining, AgentBundle, PretrainReport};
pub use test_phase::{read_metrics_csv, run_test_phase, write_metrics_csv, MetricsRow, TestRun, METRICS_HEADER};
pub use verify::{run_oracle_suite, CheckOutcome};

/// Independent child seed for a labelled stream: the first 8 bytes of
/// sha256 over the seed and the labels.
pub fn derive_seed(seed: u64, labels: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for l in labels {
        h.update([0u8]);
        h.update(l.as_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}
