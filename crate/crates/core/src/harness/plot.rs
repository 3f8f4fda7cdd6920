//! Self-contained SVG figures. Output depends only on the input data.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::AgentVariant;
use super::test_phase::MetricsRow;
use crate::error::{Error, Result};
use crate::opmodel::DiagnosticsRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    PerOpponentBars,
    LearningCurve,
    AlphaTrajectory,
}

impl std::str::FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_opponent_bars" => Ok(PlotKind::PerOpponentBars),
            "learning_curve" => Ok(PlotKind::LearningCurve),
            "alpha_trajectory" => Ok(PlotKind::AlphaTrajectory),
            other => Err(Error::config(format!("unknown plot kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum PlotData<'a> {
    Metrics(&'a [MetricsRow]),
    Diagnostics(&'a [DiagnosticsRow]),
}

const W: f64 = 720.0;
const H: f64 = 420.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 6] = ["#4c72b0", "#55a868", "#c44e52", "#8172b2", "#ccb974", "#64b5cd"];

/// Red at `t = 0`, green at `t = 1`.
pub fn time_colour(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let r = (220.0 * (1.0 - t) + 30.0 * t).round() as u8;
    let g = (40.0 * (1.0 - t) + 170.0 * t).round() as u8;
    format!("#{r:02x}{g:02x}28")
}

fn header(out: &mut String, title: &str, config_hash: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(out, "<metadata>config_hash={config_hash}</metadata>");
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">{title}</text>"#, W / 2.0);
}

fn axes(out: &mut String, y_min: f64, y_max: f64, x_label: &str, y_label: &str) {
    let _ = writeln!(
        out,
        r#"<path d="M{MARGIN},{MARGIN} V{} H{}" fill="none" stroke="black"/>"#,
        H - MARGIN,
        W - MARGIN
    );
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{x_label}</text>"#, W / 2.0, H - 12.0);
    let _ = writeln!(out, r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle" font-family="sans-serif" font-size="12">{y_label}</text>"#, H / 2.0, H / 2.0);
    for (v, y) in [(y_min, H - MARGIN), (y_max, MARGIN)] {
        let _ = writeln!(out, r#"<text x="{}" y="{y}" text-anchor="end" font-family="sans-serif" font-size="10">{v:.3}</text>"#, MARGIN - 4.0);
    }
}

fn y_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    lo = lo.min(0.0);
    hi = hi.max(0.0);
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    (lo, hi)
}

fn legend(out: &mut String, names: &[String]) {
    for (i, name) in names.iter().enumerate() {
        let x = MARGIN + 10.0 + 120.0 * i as f64;
        let _ = writeln!(out, r#"<rect x="{x}" y="32" width="10" height="10" fill="{}"/>"#, PALETTE[i % PALETTE.len()]);
        let _ = writeln!(out, r#"<text x="{}" y="41" font-family="sans-serif" font-size="11">{name}</text>"#, x + 14.0);
    }
}

fn variants_in(rows: &[MetricsRow]) -> Vec<AgentVariant> {
    let mut v: Vec<AgentVariant> = rows.iter().map(|r| r.variant).collect();
    v.sort();
    v.dedup();
    v
}

fn per_opponent_bars(rows: &[MetricsRow], config_hash: &str) -> String {
    let mut opponents: Vec<&str> = Vec::new();
    for r in rows {
        if !opponents.contains(&r.opponent_id.as_str()) {
            opponents.push(&r.opponent_id);
        }
    }
    let variants = variants_in(rows);
    let mut sums: BTreeMap<(&str, AgentVariant), (f64, usize)> = BTreeMap::new();
    for r in rows {
        let e = sums.entry((r.opponent_id.as_str(), r.variant)).or_insert((0.0, 0));
        e.0 += r.agent_return;
        e.1 += 1;
    }
    let means: BTreeMap<_, f64> = sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect();
    let (lo, hi) = y_range(means.values().copied());
    let y = |v: f64| H - MARGIN - (v - lo) / (hi - lo) * (H - 2.0 * MARGIN);
    let mut out = String::new();
    header(&mut out, "Mean agent return per test opponent", config_hash);
    axes(&mut out, lo, hi, "opponent index", "agent return");
    legend(&mut out, &variants.iter().map(|v| v.name().to_string()).collect::<Vec<_>>());
    let group_w = (W - 2.0 * MARGIN) / opponents.len() as f64;
    let bar_w = group_w * 0.8 / variants.len() as f64;
    for (i, opp) in opponents.iter().enumerate() {
        let _ = writeln!(out, r#"<g class="group" data-opponent="{opp}">"#);
        for (j, v) in variants.iter().enumerate() {
            if let Some(m) = means.get(&(*opp, *v)) {
                let x = MARGIN + group_w * i as f64 + group_w * 0.1 + bar_w * j as f64;
                let (top, bottom) = (y(m.max(0.0)), y(m.min(0.0)));
                let _ = writeln!(
                    out,
                    r#"<rect class="mark" x="{x:.2}" y="{top:.2}" width="{bar_w:.2}" height="{:.2}" fill="{}"/>"#,
                    (bottom - top).max(0.5),
                    PALETTE[j % PALETTE.len()]
                );
            }
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="9">{i}</text>"#,
            MARGIN + group_w * (i as f64 + 0.5),
            H - MARGIN + 12.0
        );
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    out
}

fn learning_curve(rows: &[MetricsRow], config_hash: &str) -> String {
    let variants = variants_in(rows);
    let mut sums: BTreeMap<(AgentVariant, usize), (f64, usize)> = BTreeMap::new();
    for r in rows {
        let e = sums.entry((r.variant, r.episode)).or_insert((0.0, 0));
        e.0 += r.agent_return;
        e.1 += 1;
    }
    let means: BTreeMap<_, f64> = sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect();
    let max_ep = means.keys().map(|(_, e)| *e).max().unwrap_or(0).max(1) as f64;
    let (lo, hi) = y_range(means.values().copied());
    let x = |e: usize| MARGIN + e as f64 / max_ep * (W - 2.0 * MARGIN);
    let y = |v: f64| H - MARGIN - (v - lo) / (hi - lo) * (H - 2.0 * MARGIN);
    let mut out = String::new();
    header(&mut out, "Mean agent return per test episode", config_hash);
    axes(&mut out, lo, hi, "episode", "agent return");
    legend(&mut out, &variants.iter().map(|v| v.name().to_string()).collect::<Vec<_>>());
    for (j, v) in variants.iter().enumerate() {
        let pts: Vec<(f64, f64)> = means.iter().filter(|((vv, _), _)| vv == v).map(|((_, e), m)| (x(*e), y(*m))).collect();
        let colour = PALETTE[j % PALETTE.len()];
        if pts.len() == 1 {
            let _ = writeln!(out, r#"<circle class="mark" cx="{:.2}" cy="{:.2}" r="3" fill="{colour}"/>"#, pts[0].0, pts[0].1);
        } else {
            let d: Vec<String> = pts.iter().map(|(a, b)| format!("{a:.2},{b:.2}")).collect();
            let _ = writeln!(out, r#"<polyline class="mark" points="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#, d.join(" "));
        }
    }
    out.push_str("</svg>\n");
    out
}

fn alpha_trajectory(rows: &[DiagnosticsRow], config_hash: &str) -> String {
    let m = rows[0].alpha.len();
    let n = rows.len();
    let t = |i: usize| if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
    let mut out = String::new();
    header(&mut out, "Mixing weights during adaptation (red early, green late)", config_hash);
    if m == 3 {
        // Barycentric projection onto an equilateral triangle.
        let corners = [(W / 2.0, MARGIN), (W / 2.0 - 190.0, H - MARGIN), (W / 2.0 + 190.0, H - MARGIN)];
        let _ = writeln!(
            out,
            r#"<path d="M{:.2},{:.2} L{:.2},{:.2} L{:.2},{:.2} Z" fill="none" stroke="black"/>"#,
            corners[0].0, corners[0].1, corners[1].0, corners[1].1, corners[2].0, corners[2].1
        );
        for (k, (cx, cy)) in corners.iter().enumerate() {
            let dy = if k == 0 { -8.0 } else { 16.0 };
            let _ = writeln!(out, r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="12">level {k}</text>"#, cy + dy);
        }
        for (i, r) in rows.iter().enumerate() {
            let px: f64 = (0..3).map(|k| r.alpha[k] * corners[k].0).sum();
            let py: f64 = (0..3).map(|k| r.alpha[k] * corners[k].1).sum();
            let _ = writeln!(out, r#"<circle class="mark" cx="{px:.2}" cy="{py:.2}" r="3" fill="{}"/>"#, time_colour(t(i)));
        }
    } else {
        axes(&mut out, 0.0, 1.0, "epoch", "alpha");
        let max_ep = (n.max(2) - 1) as f64;
        for (i, r) in rows.iter().enumerate() {
            let x = MARGIN + i as f64 / max_ep * (W - 2.0 * MARGIN);
            for (k, a) in r.alpha.iter().enumerate() {
                let y = H - MARGIN - a * (H - 2.0 * MARGIN);
                let colour = time_colour(t(i));
                if k % 2 == 0 {
                    let _ = writeln!(out, r#"<circle class="mark" data-level="{k}" cx="{x:.2}" cy="{y:.2}" r="3" fill="{colour}"/>"#);
                } else {
                    let _ = writeln!(out, r#"<rect class="mark" data-level="{k}" x="{:.2}" y="{:.2}" width="6" height="6" fill="{colour}"/>"#, x - 3.0, y - 3.0);
                }
            }
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Renders the figure as SVG text.
pub fn render_plot(data: PlotData<'_>, kind: PlotKind, config_hash: &str) -> Result<String> {
    match (kind, data) {
        (PlotKind::PerOpponentBars, PlotData::Metrics(rows)) if !rows.is_empty() => Ok(per_opponent_bars(rows, config_hash)),
        (PlotKind::LearningCurve, PlotData::Metrics(rows)) if !rows.is_empty() => Ok(learning_curve(rows, config_hash)),
        (PlotKind::AlphaTrajectory, PlotData::Diagnostics(rows)) if !rows.is_empty() => {
            if rows.iter().any(|r| r.alpha.len() != rows[0].alpha.len() || r.alpha.is_empty()) {
                return Err(Error::usage("diagnostics rows disagree on the number of levels"));
            }
            Ok(alpha_trajectory(rows, config_hash))
        }
        (PlotKind::AlphaTrajectory, PlotData::Metrics(_))
        | (PlotKind::PerOpponentBars | PlotKind::LearningCurve, PlotData::Diagnostics(_)) => {
            Err(Error::usage("plot kind does not match the data"))
        }
        _ => Err(Error::usage("nothing to plot")),
    }
}

pub fn emit_plot(data: PlotData<'_>, kind: PlotKind, path: &Path, config_hash: &str) -> Result<()> {
    let svg = render_plot(data, kind, config_hash)?;
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, svg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opponents::OpponentType;

    fn rows(opponents: usize) -> Vec<MetricsRow> {
        let mut out = Vec::new();
        for o in 0..opponents {
            for v in [AgentVariant::Mbom, AgentVariant::PpoOnly] {
                out.push(MetricsRow {
                    seed: 0,
                    opponent_id: format!("opp{o}"),
                    opponent_type: OpponentType::Fixed,
                    variant: v,
                    episode: 0,
                    agent_return: o as f64 - 10.0,
                    opponent_return: 0.0,
                    aux_metric: 0.0,
                });
            }
        }
        out
    }

    fn diag(n: usize, m: usize) -> Vec<DiagnosticsRow> {
        (0..n)
            .map(|i| DiagnosticsRow {
                epoch: i,
                alpha: vec![1.0 / m as f64; m],
                psi: vec![0.0; m],
                level0_finetune_loss: 0.0,
                env_model_eval_error: 0.0,
            })
            .collect()
    }

    #[test]
    fn single_point_has_one_mark() {
        let one = &rows(1)[..1];
        for kind in [PlotKind::PerOpponentBars, PlotKind::LearningCurve] {
            let svg = render_plot(PlotData::Metrics(one), kind, "h").unwrap();
            assert_eq!(svg.matches("class=\"mark\"").count(), 1);
            assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        }
        let svg = render_plot(PlotData::Diagnostics(&diag(1, 3)), PlotKind::AlphaTrajectory, "h").unwrap();
        assert_eq!(svg.matches("class=\"mark\"").count(), 1);
    }

    #[test]
    fn thirty_opponents_thirty_groups() {
        let svg = render_plot(PlotData::Metrics(&rows(30)), PlotKind::PerOpponentBars, "h").unwrap();
        assert_eq!(svg.matches("class=\"group\"").count(), 30);
    }

    #[test]
    fn deterministic_bytes_and_hash_embedded() {
        let a = render_plot(PlotData::Metrics(&rows(5)), PlotKind::LearningCurve, "abc").unwrap();
        let b = render_plot(PlotData::Metrics(&rows(5)), PlotKind::LearningCurve, "abc").unwrap();
        assert_eq!(a, b);
        assert!(a.contains("config_hash=abc"));
    }

    #[test]
    fn alpha_colours_run_red_to_green() {
        assert_eq!(time_colour(0.0), "#dc2828");
        assert_eq!(time_colour(1.0), "#1eaa28");
        let svg = render_plot(PlotData::Diagnostics(&diag(4, 2)), PlotKind::AlphaTrajectory, "h").unwrap();
        assert!(svg.find("#dc2828").unwrap() < svg.find("#1eaa28").unwrap());
    }

    #[test]
    fn empty_or_mismatched_data_is_usage_error() {
        assert!(matches!(render_plot(PlotData::Metrics(&[]), PlotKind::LearningCurve, "h"), Err(Error::Usage(_))));
        assert!(matches!(render_plot(PlotData::Diagnostics(&[]), PlotKind::AlphaTrajectory, "h"), Err(Error::Usage(_))));
        assert!(render_plot(PlotData::Metrics(&rows(2)), PlotKind::AlphaTrajectory, "h").is_err());
    }
}
