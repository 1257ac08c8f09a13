//! CSV writers. Every float is written as `{:.16e}` so files round-trip
//! exactly and reruns are byte-identical.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use ucsg_core::diagnostics::SuiteResult;
use ucsg_core::sg::Dims;
use ucsg_core::ucsg::RunReport;

/// Bumped whenever a column is added, removed or reinterpreted.
pub const STEPS_SCHEMA: u32 = 1;
pub const PHASES_SCHEMA: u32 = 1;
pub const REGRET_SCHEMA: u32 = 1;
pub const SUMMARY_SCHEMA: u32 = 1;
pub const DIAGNOSTICS_SCHEMA: u32 = 1;

pub fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_f(x: Option<f64>) -> String {
    x.map(fmt_f).unwrap_or_default()
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

pub fn write_steps(path: &Path, report: &RunReport) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "state", "a1", "a2", "reward", "phase"])?;
    let tr = &report.trajectory;
    for i in 0..tr.len() {
        w.write_record([
            (i + 1).to_string(),
            tr.states[i].to_string(),
            tr.actions_p1[i].to_string(),
            tr.actions_p2[i].to_string(),
            fmt_f(tr.rewards[i]),
            tr.phases[i].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_phases(path: &Path, report: &RunReport) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "k",
        "t_k",
        "length",
        "start_state",
        "gamma",
        "evi_rho",
        "evi_lo",
        "evi_hi",
        "evi_iterations",
        "optimistic_rho",
        "true_worst",
        "true_model_in_region",
        "rho_lower",
        "pessimistic_rho",
        "u",
    ])?;
    for p in &report.phases {
        let off = p.offline.as_ref();
        w.write_record([
            p.k.to_string(),
            p.t_k.to_string(),
            p.length.to_string(),
            p.start_state.to_string(),
            fmt_f(p.gamma),
            fmt_f(p.evi_rho),
            fmt_f(p.evi_interval.0),
            fmt_f(p.evi_interval.1),
            p.evi_iterations.to_string(),
            fmt_f(p.optimistic_rho),
            fmt_f(p.true_worst()),
            p.true_model_in_region.to_string(),
            opt_f(off.map(|o| o.rho_lower)),
            opt_f(off.map(|o| o.pessimistic_rho)),
            opt_f(off.map(|o| o.u)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `t, cumulative reward, t·ρ* − Σ r`.
pub fn write_regret(path: &Path, report: &RunReport) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "cumulative_reward", "regret"])?;
    let mut total = 0.0;
    for (i, r) in report.trajectory.rewards.iter().enumerate() {
        total += r;
        let t = (i + 1) as f64;
        w.write_record([(i + 1).to_string(), fmt_f(total), fmt_f(t * report.rho_star - total)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn summary_header(epsilons: &[f64]) -> Vec<String> {
    let mut h: Vec<String> = [
        "seed",
        "mode",
        "horizon",
        "rho_star",
        "rho_star_lo",
        "rho_star_hi",
        "total_reward",
        "regret",
        "regret_per_step",
        "phases",
        "phase_bound",
        "best_phase",
        "best_u",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend(epsilons.iter().map(|e| format!("l_eps_{e}")));
    h
}

pub fn summary_row(report: &RunReport, dims: Dims) -> Vec<String> {
    let best = report.best_policy.as_ref();
    let mut row = vec![
        report.seed.to_string(),
        report.mode.to_string(),
        report.horizon.to_string(),
        fmt_f(report.rho_star),
        fmt_f(report.rho_star_interval.0),
        fmt_f(report.rho_star_interval.1),
        fmt_f(report.total_reward),
        fmt_f(report.regret),
        fmt_f(report.regret / report.horizon as f64),
        report.phases.len().to_string(),
        fmt_f(report.phase_count_bound(dims)),
        best.map(|b| b.phase.to_string()).unwrap_or_default(),
        opt_f(best.map(|b| b.u)),
    ];
    row.extend(report.l_eps.iter().map(|(_, n)| n.to_string()));
    row
}

pub fn write_table(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Mean, sample standard deviation, min and max of regret and `L_ε` across seeds.
pub fn write_aggregate(path: &Path, reports: &[RunReport], epsilons: &[f64]) -> Result<()> {
    let mut header = vec!["statistic".to_string(), "regret".into(), "regret_per_step".into()];
    header.extend(epsilons.iter().map(|e| format!("l_eps_{e}")));
    let mut columns: Vec<Vec<f64>> = vec![
        reports.iter().map(|r| r.regret).collect(),
        reports.iter().map(|r| r.regret / r.horizon as f64).collect(),
    ];
    for i in 0..epsilons.len() {
        columns.push(reports.iter().map(|r| r.l_eps[i].1 as f64).collect());
    }
    type Stat = (&'static str, fn(&[f64]) -> f64);
    let stats: [Stat; 4] = [("mean", mean), ("std", std_dev), ("min", min), ("max", max)];
    let rows: Vec<Vec<String>> = stats
        .iter()
        .map(|(name, f)| {
            let mut row = vec![name.to_string()];
            row.extend(columns.iter().map(|c| fmt_f(f(c))));
            row
        })
        .collect();
    write_table(path, &header, &rows)
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn std_dev(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

fn min(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub fn write_diagnostics(path: &Path, results: &[SuiteResult]) -> Result<()> {
    let header: Vec<String> = [
        "suite",
        "cases",
        "in_hypothesis",
        "failures",
        "informational_violations",
        "worst_ratio",
        "status",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| {
            vec![
                r.name.clone(),
                r.cases.to_string(),
                r.in_hypothesis.to_string(),
                r.failures.to_string(),
                r.informational_violations.to_string(),
                fmt_f(r.worst_ratio),
                if r.passed() { "pass" } else { "fail" }.to_string(),
            ]
        })
        .collect();
    write_table(path, &header, &rows)
}

#[derive(Serialize)]
pub struct Manifest {
    pub tool_version: String,
    pub model_format: String,
    pub model_format_version: u32,
    pub schemas: Schemas,
    pub seeds: Vec<u64>,
    pub files: Vec<String>,
}

#[derive(Serialize)]
pub struct Schemas {
    pub steps: u32,
    pub phases: u32,
    pub regret: u32,
    pub summary: u32,
    pub diagnostics: u32,
}

impl Schemas {
    pub fn current() -> Self {
        Self {
            steps: STEPS_SCHEMA,
            phases: PHASES_SCHEMA,
            regret: REGRET_SCHEMA,
            summary: SUMMARY_SCHEMA,
            diagnostics: DIAGNOSTICS_SCHEMA,
        }
    }
}
