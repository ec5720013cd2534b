//! Deterministic metric export: one row per (trial, node) plus a summary
//! with bound-versus-empirical comparisons. Re-exporting the same metrics
//! produces byte-identical files.

use crate::bounds;
use crate::config::ScenarioConfig;
use crate::scenario::{ScenarioReport, TrialMetrics};
use crate::stats::McEstimate;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("no trials to export")]
    Empty,
    #[error("write failed: {0}")]
    Io(#[from] std::io::Error),
}

pub fn rows_text(trials: &[TrialMetrics]) -> Result<String, ExportError> {
    if trials.is_empty() {
        return Err(ExportError::Empty);
    }
    let mut out = String::new();
    out.push_str(
        "trial\tnode\theight\tdecision\treason\tticks_to_decision\tbytes_down\tbytes_up\tinterest_bytes_up\thash_ops\tsymbols_stored\tcoverage\tconnectivity\n",
    );
    for t in trials {
        for (row, (node, height, decision, reason, tick)) in t.verdicts.iter().enumerate() {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                t.trial,
                node,
                height,
                decision,
                reason,
                tick,
                t.bytes_down.get(row).copied().unwrap_or(0),
                t.bytes_up.get(row).copied().unwrap_or(0),
                t.interest_bytes_up.get(row).copied().unwrap_or(0),
                t.hash_ops.get(row).copied().unwrap_or(0),
                t.symbols_stored.get(row).copied().unwrap_or(0),
                t.coverage as u8,
                t.connectivity as u8,
            )
            .unwrap();
        }
    }
    Ok(out)
}

pub fn summary_text(cfg: &ScenarioConfig, report: &ScenarioReport) -> Result<String, ExportError> {
    if report.trials.is_empty() {
        return Err(ExportError::Empty);
    }
    let n = report.trials.len() as u64;
    let accept = McEstimate::new(
        report.trials.iter().filter(|t| t.unanimous_accept).count() as u64,
        n,
    );
    let reject = McEstimate::new(
        report.trials.iter().filter(|t| t.unanimous_reject).count() as u64,
        n,
    );
    let coverage = McEstimate::new(report.trials.iter().filter(|t| t.coverage).count() as u64, n);
    let connectivity = McEstimate::new(
        report.trials.iter().filter(|t| t.connectivity).count() as u64,
        n,
    );

    let mut out = String::new();
    writeln!(out, "scenario: strategy={} trials={}", report.strategy_label, n).unwrap();
    writeln!(
        out,
        "config: L={} k={} c={} N_h={} alpha={:.3} p={:.4} delta={} lambda={}",
        cfg.l,
        cfg.k,
        cfg.effective_c(),
        cfg.n_h,
        cfg.alpha,
        cfg.effective_p(),
        cfg.delta,
        cfg.lambda
    )
    .unwrap();
    let fmt_est = |e: &McEstimate| {
        let (lo, hi) = e.wilson();
        format!("{:.4} [{:.4}, {:.4}]", e.rate(), lo, hi)
    };
    writeln!(out, "unanimous_accept: {}", fmt_est(&accept)).unwrap();
    writeln!(out, "unanimous_reject: {}", fmt_est(&reject)).unwrap();
    writeln!(out, "coverage_rate: {}", fmt_est(&coverage)).unwrap();
    writeln!(out, "connectivity_rate: {}", fmt_est(&connectivity)).unwrap();

    writeln!(out, "-- bounds at this config --").unwrap();
    writeln!(
        out,
        "required_N_h (k(ln k + lambda)): {}",
        bounds::coverage_required_nodes(cfg.k, cfg.lambda)
    )
    .unwrap();
    writeln!(
        out,
        "required_N_h (k(ln L + lambda)): {}",
        bounds::coverage_required_nodes_ln_l(cfg.k, cfg.l, cfg.lambda)
    )
    .unwrap();
    writeln!(
        out,
        "required_N_h (tree, (L/c)(ln L + lambda)): {}",
        bounds::tree_coverage_required_nodes(cfg.l, cfg.effective_c(), cfg.lambda)
    )
    .unwrap();
    writeln!(
        out,
        "accept_bound (valid+available): {:.6}",
        bounds::theorem_case_accept_bound(cfg.l, cfg.k, cfg.n_h, cfg.lambda)
    )
    .unwrap();
    match bounds::connectivity_required_p(cfg.n_h, cfg.l, cfg.k, cfg.lambda) {
        Ok(p) => writeln!(out, "prescribed_p: {p:.6}").unwrap(),
        Err(e) => writeln!(out, "prescribed_p: n/a ({e})").unwrap(),
    }

    let mean = |xs: &dyn Fn(&TrialMetrics) -> f64| {
        report.trials.iter().map(xs).sum::<f64>() / n as f64
    };
    let avg_down = mean(&|t: &TrialMetrics| {
        if t.bytes_down.is_empty() {
            0.0
        } else {
            t.bytes_down.iter().sum::<u64>() as f64 / t.bytes_down.len() as f64
        }
    });
    writeln!(out, "mean_bytes_down_per_node: {avg_down:.1}").unwrap();
    writeln!(
        out,
        "mean_ticks_to_unanimity: {:.1}",
        mean(&|t: &TrialMetrics| t.ticks_to_unanimity as f64)
    )
    .unwrap();
    Ok(out)
}

pub fn write_files(
    dir: &Path,
    cfg: &ScenarioConfig,
    report: &ScenarioReport,
) -> Result<(), ExportError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("rows.tsv"), rows_text(&report.trials)?)?;
    std::fs::write(dir.join("summary.txt"), summary_text(cfg, report)?)?;
    Ok(())
}
