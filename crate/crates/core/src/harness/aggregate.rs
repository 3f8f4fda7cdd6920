//! Seed-level summaries with Student-t confidence intervals.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::config::AgentVariant;
use super::test_phase::MetricsRow;
use crate::error::{Error, Result};
use crate::opponents::OpponentType;

/// Mean and half-width of the two-sided `level` t-interval of `values`.
/// A single value gives a zero-width interval.
pub fn t_interval(values: &[f64], level: f64) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::usage("t-interval of an empty sample"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return Ok((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return Ok((mean, 0.0));
    }
    let t = StudentsT::new(0.0, 1.0, n - 1.0)
        .map_err(|e| Error::config(e.to_string()))?
        .inverse_cdf(0.5 + level / 2.0);
    Ok((mean, t * (var / n).sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub variant: AgentVariant,
    pub opponent_type: OpponentType,
    pub seeds: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Mean agent return per seed for every (variant, opponent type).
pub fn seed_means(rows: &[MetricsRow]) -> BTreeMap<(AgentVariant, OpponentType), BTreeMap<u64, f64>> {
    let mut sums: BTreeMap<(AgentVariant, OpponentType), BTreeMap<u64, (f64, usize)>> = BTreeMap::new();
    for r in rows {
        let e = sums.entry((r.variant, r.opponent_type)).or_default().entry(r.seed).or_insert((0.0, 0));
        e.0 += r.agent_return;
        e.1 += 1;
    }
    sums.into_iter()
        .map(|(k, per_seed)| (k, per_seed.into_iter().map(|(s, (t, n))| (s, t / n as f64)).collect()))
        .collect()
}

/// Mean and 95% interval over seed means, per variant and opponent type.
pub fn aggregate(rows: &[MetricsRow]) -> Result<Vec<SummaryRow>> {
    let mut out = Vec::new();
    for ((variant, opponent_type), per_seed) in seed_means(rows) {
        if per_seed.len() < 2 {
            return Err(Error::usage(format!("{variant} vs {}: aggregation needs at least two seeds", opponent_type.name())));
        }
        let values: Vec<f64> = per_seed.values().copied().collect();
        let (mean, half) = t_interval(&values, 0.95)?;
        out.push(SummaryRow { variant, opponent_type, seeds: values.len(), mean, ci_low: mean - half, ci_high: mean + half });
    }
    Ok(out)
}

/// Seed-paired difference `a - b` against one opponent type: mean and 95%
/// half-width over the seeds both variants ran.
pub fn paired_difference(
    rows: &[MetricsRow],
    a: AgentVariant,
    b: AgentVariant,
    opponent_type: OpponentType,
) -> Result<(f64, f64)> {
    let means = seed_means(rows);
    let (ma, mb) = match (means.get(&(a, opponent_type)), means.get(&(b, opponent_type))) {
        (Some(x), Some(y)) => (x, y),
        _ => return Err(Error::usage(format!("no rows for {a} or {b} against {}", opponent_type.name()))),
    };
    let diffs: Vec<f64> = ma.iter().filter_map(|(s, va)| mb.get(s).map(|vb| va - vb)).collect();
    if diffs.len() < 2 {
        return Err(Error::usage("paired difference needs at least two shared seeds"));
    }
    t_interval(&diffs, 0.95)
}

pub fn write_summary_csv<W: Write>(summary: &[SummaryRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in summary {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Plain-text table of the summary.
pub fn format_summary(summary: &[SummaryRow]) -> String {
    let mut out = format!("{:<14} {:<10} {:>5} {:>10} {:>22}\n", "variant", "opponent", "seeds", "mean", "95% CI");
    for r in summary {
        out.push_str(&format!(
            "{:<14} {:<10} {:>5} {:>10.4} [{:>9.4}, {:>9.4}]\n",
            r.variant.name(),
            r.opponent_type.name(),
            r.seeds,
            r.mean,
            r.ci_low,
            r.ci_high
        ));
    }
    out
}
