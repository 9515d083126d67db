// SPDX-License-Identifier: Apache-2.0

//! Per-batch result rows.

use std::io::Write;
use std::time::Duration;

use mrta_core::encoder::Theory;
use mrta_core::planner::{BatchResult, StreamRun};
use mrta_core::session::SolverConfig;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub instance: String,
    pub batch: usize,
    pub backend: String,
    pub logic: String,
    pub mode: String,
    pub batch_size: usize,
    pub verdict: String,
    pub wall_ms: f64,
    pub k: usize,
    pub schedule_entry: usize,
    pub free_points: usize,
    pub used_points: usize,
    pub d_min: usize,
    /// Running total of `wall_ms` over the batches of one run.
    pub cumulative_ms: f64,
}

pub fn logic_label(theory: Theory) -> &'static str {
    match theory {
        Theory::Bv => "bv",
        Theory::Lia => "lia",
    }
}

/// Wall time of a batch, with timed-out queries charged the full timeout.
fn charged(result: &BatchResult, timeout: Option<Duration>) -> Duration {
    result
        .queries
        .iter()
        .map(|q| match (q.timed_out, timeout) {
            (true, Some(t)) => t,
            _ => q.wall,
        })
        .sum()
}

fn ms(d: Duration) -> f64 {
    (d.as_secs_f64() * 1e6).round() / 1e3
}

pub fn records(instance: &str, cfg: &SolverConfig, batch_size: Option<usize>, run: &StreamRun) -> Vec<RunRecord> {
    let mut total = 0.0;
    run.batches
        .iter()
        .map(|r| {
            let wall = ms(charged(r, cfg.timeout));
            total += wall;
            RunRecord {
                instance: instance.to_string(),
                batch: r.batch,
                backend: cfg.backend.name(),
                logic: logic_label(cfg.theory).into(),
                mode: cfg.mode.to_string(),
                batch_size: batch_size.unwrap_or(r.cumulative_tasks - prior_tasks(run, r.batch)),
                verdict: r.verdict.to_string(),
                wall_ms: wall,
                k: r.k,
                schedule_entry: r.schedule_entry,
                free_points: r.free_points,
                used_points: r.used_points,
                d_min: r.d_min,
                cumulative_ms: (total * 1e3).round() / 1e3,
            }
        })
        .collect()
}

fn prior_tasks(run: &StreamRun, batch: usize) -> usize {
    if batch == 0 {
        0
    } else {
        run.batches[batch - 1].cumulative_tasks
    }
}

/// Row for a run that failed before producing any batch result.
pub fn failure(instance: &str, cfg: &SolverConfig, batch_size: Option<usize>) -> RunRecord {
    RunRecord {
        instance: instance.to_string(),
        batch: 0,
        backend: cfg.backend.name(),
        logic: logic_label(cfg.theory).into(),
        mode: cfg.mode.to_string(),
        batch_size: batch_size.unwrap_or(0),
        verdict: "error".into(),
        wall_ms: 0.0,
        k: 0,
        schedule_entry: 0,
        free_points: 0,
        used_points: 0,
        d_min: 0,
        cumulative_ms: 0.0,
    }
}

pub fn write_csv<W: Write>(out: W, rows: &[RunRecord]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record([
            "instance",
            "batch",
            "backend",
            "logic",
            "mode",
            "batch_size",
            "verdict",
            "wall_ms",
            "k",
            "schedule_entry",
            "free_points",
            "used_points",
            "d_min",
            "cumulative_ms",
        ])?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
