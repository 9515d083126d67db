// SPDX-License-Identifier: Apache-2.0

//! `mrta`: solve, stream, validate, cross-check, generate and benchmark
//! multi-robot pickup and delivery instances.

mod bench;
mod record;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mrta_core::benchgen::{gen_static, gen_stream, GenParams, GraphSource, Manifest, ManifestEntry};
use mrta_core::encoder::Theory;
use mrta_core::model::{instance_to_document, load_instance, parse_plan, plan_to_document, Instance, Plan, TaskStream};
use mrta_core::oracle::{differential, feasible, resume_state, OracleBudget};
use mrta_core::planner::{run_stream, PlannerOptions, StreamRun};
use mrta_core::semantics::validate;
use mrta_core::session::{Backend, Mode, SolverConfig, Verdict};

use record::{records, write_csv};

const EXIT_ERROR: u8 = 3;

#[derive(Parser)]
#[command(name = "mrta", version, about = "SMT-based multi-robot pickup and delivery planner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a single-batch instance.
    Solve(SolveArgs),
    /// Solve a task stream batch by batch.
    Stream(StreamArgs),
    /// Check a plan against an instance.
    Validate(ValidateArgs),
    /// Brute-force feasibility, optionally compared with the solver.
    Oracle(OracleArgs),
    /// Generate benchmark instances.
    Gen(GenArgs),
    /// Run every instance in a directory under several configurations.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Logic {
    Bv,
    Lia,
}

impl From<Logic> for Theory {
    fn from(l: Logic) -> Theory {
        match l {
            Logic::Bv => Theory::Bv,
            Logic::Lia => Theory::Lia,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    #[value(alias = "incremental")]
    Inc,
    #[value(alias = "nonincremental")]
    Noninc,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Inc => Mode::Incremental,
            ModeArg::Noninc => Mode::NonIncremental,
        }
    }
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// z3, bitwuzla, cvc5, or cmd:<command line>.
    #[arg(long, default_value = "z3")]
    backend: String,
    #[arg(long, value_enum, default_value = "bv")]
    logic: Logic,
    #[arg(long, value_enum, default_value = "inc")]
    mode: ModeArg,
    /// Per-query timeout in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    /// Comma-separated action-point schedule ending at D_max.
    #[arg(long, value_delimiter = ',')]
    schedule: Option<Vec<usize>>,
    /// Action points per agent (defaults to D_max).
    #[arg(long)]
    points: Option<usize>,
    /// Write the SMT-LIB2 conversation with the solver to this file.
    #[arg(long)]
    debug_transcript: Option<PathBuf>,
}

impl SolverArgs {
    fn config(&self) -> Result<SolverConfig> {
        let backend: Backend = self.backend.parse().map_err(anyhow::Error::msg)?;
        let mut cfg = SolverConfig::new(backend, self.logic.into(), self.mode.into());
        cfg.timeout = seconds(self.timeout)?;
        cfg.transcript = self.debug_transcript.is_some();
        cfg.validate()?;
        Ok(cfg)
    }

    fn options(&self) -> PlannerOptions {
        PlannerOptions {
            points: self.points,
            schedule: self.schedule.clone(),
        }
    }

    fn dump_transcript(&self, run: &StreamRun) -> Result<()> {
        if let (Some(path), Some(text)) = (&self.debug_transcript, &run.transcript) {
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }
}

fn seconds(s: Option<f64>) -> Result<Option<Duration>> {
    match s {
        Some(x) if !(x > 0.0 && x.is_finite()) => bail!("timeout must be a positive number of seconds"),
        Some(x) => Ok(Some(Duration::from_secs_f64(x))),
        None => Ok(None),
    }
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    /// Directory for the plan document and the result record.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StreamArgs {
    instance: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    /// Regroup the tasks into batches of this size.
    #[arg(long)]
    batch: Option<usize>,
    /// Directory for per-batch plan documents and the result records.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    instance: PathBuf,
    plan: PathBuf,
    /// Plan the new one must update.
    #[arg(long)]
    prev: Option<PathBuf>,
    /// Update time; only tasks arrived by then are required.
    #[arg(long)]
    t: Option<u64>,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct OracleArgs {
    instance: PathBuf,
    /// Also run the solver and report disagreements.
    #[arg(long)]
    compare: bool,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    batch: Option<usize>,
    /// Directory for witness plans.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Static,
    Stream,
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphArg {
    Hospital,
    Random,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum, default_value = "static")]
    kind: Kind,
    #[arg(long, default_value_t = 5)]
    agents: usize,
    #[arg(long, default_value_t = 10)]
    tasks: usize,
    #[arg(long, value_enum, default_value = "hospital")]
    graph: GraphArg,
    /// Location count for random graphs.
    #[arg(long, default_value_t = 20)]
    locations: usize,
    #[arg(long, default_value_t = 20)]
    max_weight: u64,
    #[arg(long, default_value_t = 3)]
    capacity: u64,
    #[arg(long, default_value_t = 1)]
    rho: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Instances to emit, with consecutive seeds.
    #[arg(long, default_value_t = 1)]
    count: u64,
    #[arg(long, default_value_t = 300)]
    deadline_lo: u64,
    #[arg(long, default_value_t = 500)]
    deadline_hi: u64,
    #[arg(long, default_value_t = 8)]
    gap: u64,
    #[arg(long, default_value_t = 1)]
    batch: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    dir: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "z3")]
    backend: Vec<String>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "bv")]
    logic: Vec<Logic>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "inc")]
    mode: Vec<ModeArg>,
    /// Batch sizes to regroup streams into; documents are used as-is when absent.
    #[arg(long, value_delimiter = ',')]
    batch: Vec<usize>,
    /// Per-query timeout in seconds.
    #[arg(long, default_value_t = 3600.0)]
    timeout: f64,
    #[arg(long, value_delimiter = ',')]
    schedule: Option<Vec<usize>>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// CSV file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_instance(path: &Path) -> Result<(Instance, TaskStream)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    load_instance(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_plan(path: &Path) -> Result<Plan> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_plan(&text).with_context(|| format!("parsing {}", path.display()))
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "instance".into(), |s| s.to_string_lossy().into_owned())
}

fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::Sat => 0,
        Verdict::Unsat => 1,
        Verdict::Unknown => 2,
    }
}

fn emit_records(rows: &[record::RunRecord], out: Option<&Path>) -> Result<()> {
    if let Some(dir) = out {
        write_csv(fs::File::create(dir.join("records.csv"))?, rows)?;
    }
    write_csv(io::stdout().lock(), rows)
}

fn solve(args: SolveArgs) -> Result<u8> {
    let (instance, stream) = read_instance(&args.instance)?;
    if stream.len() > 1 {
        bail!("{} has {} batches; use `stream`", args.instance.display(), stream.len());
    }
    instance.check_horizon(&stream)?;
    let cfg = args.solver.config()?;
    let run = run_stream(&instance, &stream, &cfg, &args.solver.options())?;
    args.solver.dump_transcript(&run)?;
    let result = &run.batches[0];
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        if let Some(plan) = &result.plan {
            fs::write(dir.join("plan.json"), plan_to_document(plan))?;
        }
    } else if result.plan.is_some() {
        log::info!("plan not written; pass --out to keep it");
    }
    emit_records(&records(&stem(&args.instance), &cfg, None, &run), args.out.as_deref())?;
    Ok(verdict_code(result.verdict))
}

fn stream(args: StreamArgs) -> Result<u8> {
    let (instance, mut stream) = read_instance(&args.instance)?;
    if let Some(b) = args.batch {
        stream = stream.rebatch(b)?;
    }
    let cfg = args.solver.config()?;
    let run = run_stream(&instance, &stream, &cfg, &args.solver.options())?;
    args.solver.dump_transcript(&run)?;
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        for r in &run.batches {
            if let Some(plan) = &r.plan {
                fs::write(dir.join(format!("plan-{:03}.json", r.batch)), plan_to_document(plan))?;
            }
        }
    }
    emit_records(&records(&stem(&args.instance), &cfg, args.batch, &run), args.out.as_deref())?;
    let last = run.batches.last().map_or(Verdict::Sat, |r| r.verdict);
    Ok(verdict_code(last))
}

fn validate_cmd(args: ValidateArgs) -> Result<u8> {
    let (instance, stream) = read_instance(&args.instance)?;
    let plan = read_plan(&args.plan)?;
    let prev = match &args.prev {
        Some(p) => read_plan(p)?,
        None => Plan::empty(instance.n_agents()),
    };
    let t = args.t.unwrap_or(0);
    let tasks: Vec<_> = stream
        .all_tasks()
        .into_iter()
        .filter(|task| args.t.is_none() || task.arrival <= t)
        .collect();
    let report = validate(&plan, &instance, &tasks, &prev, t);
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("{report}");
    }
    Ok(if report.ok { 0 } else { 1 })
}

fn oracle_cmd(args: OracleArgs) -> Result<u8> {
    let (instance, mut stream) = read_instance(&args.instance)?;
    if let Some(b) = args.batch {
        stream = stream.rebatch(b)?;
    }
    let budget = OracleBudget::default();
    if args.compare {
        let cfg = args.solver.config()?;
        let family = [(stem(&args.instance), instance, stream)];
        let report = differential(&family, &cfg, &args.solver.options(), &budget)?;
        println!("{}", serde_json::to_string_pretty(&report)?);
        return Ok(if report.agreed() { 0 } else { 1 });
    }
    let mut prev: Option<Plan> = None;
    for (j, batch) in stream.batches().iter().enumerate() {
        let from = match &prev {
            Some(p) => Some(resume_state(p, batch.arrival, &instance)?),
            None => None,
        };
        let (ok, witness) = feasible(&instance, &stream.cumulative(j), from.as_ref(), &budget)?;
        println!("batch {j} at t={}: {}", batch.arrival, if ok { "feasible" } else { "infeasible" });
        let Some(plan) = witness else { return Ok(1) };
        if let Some(dir) = &args.out {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(format!("witness-{j:03}.json")), plan_to_document(&plan))?;
        }
        prev = Some(plan);
    }
    Ok(0)
}

fn gen(args: GenArgs) -> Result<u8> {
    fs::create_dir_all(&args.out)?;
    let mut manifest = Manifest::default();
    for seed in args.seed..args.seed + args.count {
        let params = GenParams {
            n_agents: args.agents,
            n_tasks: args.tasks,
            n_locations: args.locations,
            graph: match args.graph {
                GraphArg::Hospital => GraphSource::Hospital,
                GraphArg::Random => GraphSource::Random,
            },
            max_weight: args.max_weight,
            capacity: args.capacity,
            rho: args.rho,
            seed,
            deadline_lo: args.deadline_lo,
            deadline_hi: args.deadline_hi,
            arrival_gap: args.gap,
            batch_size: args.batch,
        };
        params.validate().map_err(anyhow::Error::msg)?;
        let (kind, (instance, stream)) = match args.kind {
            Kind::Static => ("static", gen_static(&params)),
            Kind::Stream => ("stream", gen_stream(&params)),
        };
        let file = format!("{kind}-a{}-t{}-c{}-b{}-s{seed}.json", args.agents, args.tasks, args.capacity, args.batch);
        fs::write(args.out.join(&file), instance_to_document(&instance, &stream))?;
        manifest.entries.push(ManifestEntry {
            file,
            kind: kind.into(),
            params,
        });
    }
    fs::write(args.out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    println!("wrote {} instances to {}", manifest.entries.len(), args.out.display());
    Ok(0)
}

fn bench_cmd(args: BenchArgs) -> Result<u8> {
    let files = bench::instance_files(&args.dir)?;
    if files.is_empty() {
        bail!("no instance documents in {}", args.dir.display());
    }
    let timeout = seconds(Some(args.timeout))?;
    let batches: Vec<Option<usize>> = if args.batch.is_empty() {
        vec![None]
    } else {
        args.batch.iter().map(|&b| Some(b)).collect()
    };
    let mut jobs = Vec::new();
    for name in &args.backend {
        let backend: Backend = name.parse().map_err(anyhow::Error::msg)?;
        for &logic in &args.logic {
            let theory: Theory = logic.into();
            if !backend.supports(theory) {
                log::warn!("skipping {backend} with {}", theory.logic_name());
                continue;
            }
            for &mode in &args.mode {
                let mut config = SolverConfig::new(backend.clone(), theory, mode.into());
                config.timeout = timeout;
                for path in &files {
                    for &batch in &batches {
                        jobs.push(bench::Job {
                            path: path.clone(),
                            config: config.clone(),
                            batch,
                        });
                    }
                }
            }
        }
    }
    let workers = args
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let options = PlannerOptions {
        points: None,
        schedule: args.schedule,
    };
    let rows = bench::run(jobs, options, workers);
    match &args.out {
        Some(path) => write_csv(fs::File::create(path)?, &rows)?,
        None => write_csv(io::stdout().lock(), &rows)?,
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Stream(a) => stream(a),
        Command::Validate(a) => validate_cmd(a),
        Command::Oracle(a) => oracle_cmd(a),
        Command::Gen(a) => gen(a),
        Command::Bench(a) => bench_cmd(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let _ = writeln!(io::stderr(), "error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
