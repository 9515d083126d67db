// SPDX-License-Identifier: Apache-2.0

//! Batch benchmarking over a directory of instance documents.

use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::thread;

use anyhow::{Context, Result};
use log::{error, info, warn};
use mrta_core::model::load_instance;
use mrta_core::planner::{run_stream, PlannerOptions};
use mrta_core::session::SolverConfig;

use crate::record::{failure, records, RunRecord};

pub struct Job {
    pub path: PathBuf,
    pub config: SolverConfig,
    pub batch: Option<usize>,
}

/// Instance documents in `dir`, sorted by file name. The generator
/// manifest is skipped.
pub fn instance_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        let is_doc = path.extension().is_some_and(|e| e == "json") && path.file_name().is_some_and(|n| n != "manifest.json");
        if is_doc {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn instance_name(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn run_job(job: &Job, options: &PlannerOptions) -> Vec<RunRecord> {
    let name = instance_name(&job.path);
    let attempt = || -> Result<Vec<RunRecord>> {
        let text = std::fs::read_to_string(&job.path)?;
        let (instance, mut stream) = load_instance(&text)?;
        if let Some(b) = job.batch {
            stream = stream.rebatch(b)?;
        }
        let run = run_stream(&instance, &stream, &job.config, options)?;
        Ok(records(&name, &job.config, job.batch, &run))
    };
    match attempt() {
        Ok(rows) => rows,
        Err(e) => {
            error!("{name} ({} {:?} {}): {e:#}", job.config.backend, job.config.theory, job.config.mode);
            vec![failure(&name, &job.config, job.batch)]
        }
    }
}

/// Run all jobs on `workers` threads. Rows come back sorted by instance,
/// batch and configuration.
pub fn run(jobs: Vec<Job>, options: PlannerOptions, workers: usize) -> Vec<RunRecord> {
    let total = jobs.len();
    let (job_tx, job_rx) = mpsc::channel::<Job>();
    let job_rx = Arc::new(Mutex::new(job_rx));
    let (row_tx, row_rx) = mpsc::channel::<Vec<RunRecord>>();
    for job in jobs {
        job_tx.send(job).expect("receiver alive");
    }
    drop(job_tx);
    let options = Arc::new(options);
    let handles: Vec<_> = (0..workers.max(1))
        .map(|_| {
            let job_rx = Arc::clone(&job_rx);
            let row_tx = row_tx.clone();
            let options = Arc::clone(&options);
            thread::spawn(move || loop {
                let next = job_rx.lock().unwrap().recv();
                let Ok(job) = next else { break };
                if row_tx.send(run_job(&job, &options)).is_err() {
                    break;
                }
            })
        })
        .collect();
    drop(row_tx);
    let mut rows = Vec::new();
    for (done, batch) in row_rx.iter().enumerate() {
        info!("bench: {}/{total} runs finished", done + 1);
        rows.extend(batch);
    }
    for h in handles {
        if h.join().is_err() {
            warn!("bench worker panicked");
        }
    }
    rows.sort_by(|a, b| {
        (&a.instance, a.batch, &a.backend, &a.logic, &a.mode, a.batch_size).cmp(&(
            &b.instance,
            b.batch,
            &b.backend,
            &b.logic,
            &b.mode,
            b.batch_size,
        ))
    });
    rows
}
