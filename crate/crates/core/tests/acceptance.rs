// SPDX-License-Identifier: Apache-2.0

//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use mrta_core::benchgen::{gen_static, gen_stream, GenParams, GraphSource};
use mrta_core::encoder::{d_max, d_min, Theory};
use mrta_core::model::{Action, Batch, Instance, InstanceConfig, Plan, Task, TaskStream};
use mrta_core::oracle::{compare_run, differential, feasible, OracleBudget};
use mrta_core::planner::{run_stream, PlannerOptions, StreamRun};
use mrta_core::semantics::{prefix_durations, validate};
use mrta_core::session::{Backend, Mode, SolverConfig, Verdict};

const T_MAX: u64 = 200;
const PERF_LIMIT: Duration = Duration::from_secs(60);

/// Problems found while inspecting sat results.
#[derive(Default)]
struct Findings {
    sat_batches: usize,
    invalid: Vec<String>,
    invariants: Vec<String>,
    durations: Vec<String>,
}

impl Findings {
    fn merge(&mut self, other: Findings) {
        self.sat_batches += other.sat_batches;
        self.invalid.extend(other.invalid);
        self.invariants.extend(other.invariants);
        self.durations.extend(other.durations);
    }
}

fn inspect(name: &str, instance: &Instance, stream: &TaskStream, run: &StreamRun) -> Findings {
    let mut f = Findings::default();
    let n_agents = instance.n_agents();
    let mut prev = Plan::empty(n_agents);
    for r in &run.batches {
        if r.verdict != Verdict::Sat {
            continue;
        }
        f.sat_batches += 1;
        let tag = format!("{name} batch {}", r.batch);
        let (Some(plan), Some(model)) = (&r.plan, &r.model) else {
            f.invalid.push(format!("{tag}: sat without plan or model"));
            continue;
        };
        let report = validate(plan, instance, &stream.cumulative(r.batch), &prev, r.arrival);
        if !report.ok {
            f.invalid.push(format!("{tag}: {report}"));
        }

        let bound = run.schedule.points()[r.k];
        let mut seen = BTreeSet::new();
        for (n, row) in model.points.iter().enumerate() {
            let mut last = None;
            for (d, p) in row.iter().enumerate().skip(1) {
                if p.id == n as i64 {
                    continue;
                }
                if d >= bound {
                    f.invariants.push(format!("{tag}: agent {n} point {d} active beyond K[k]={bound}"));
                }
                if last.is_some_and(|t| p.time <= t) {
                    f.invariants.push(format!("{tag}: agent {n} time not increasing at point {d}"));
                }
                last = Some(p.time);
                if !seen.insert(p.id) {
                    f.invariants.push(format!("{tag}: action id {} used twice", p.id));
                }
            }
        }

        for (n, seq) in plan.sequences.iter().enumerate() {
            let start = instance.agents[n].start;
            let durs = match prefix_durations(seq, &instance.graph, start, instance.rho()) {
                Ok(d) => d,
                Err(e) => {
                    f.durations.push(format!("{tag}: agent {n}: {e}"));
                    continue;
                }
            };
            let row = &model.points[n];
            let mut services = 0;
            for (pos, action) in seq.iter().enumerate() {
                let id = match *action {
                    Action::Pick(mu) => n_agents + 2 * mu,
                    Action::Drop(mu) => n_agents + 2 * mu + 1,
                    _ => continue,
                };
                services += 1;
                match row.iter().find(|p| p.id == id as i64) {
                    Some(p) if p.time == durs[pos + 1] as i64 => {}
                    Some(p) => f.durations.push(format!(
                        "{tag}: agent {n} id {id}: duration {} vs model time {}",
                        durs[pos + 1],
                        p.time
                    )),
                    None => f.durations.push(format!("{tag}: agent {n} id {id} missing from model")),
                }
            }
            let active = row.iter().skip(1).filter(|p| p.id != n as i64).count();
            if active != services {
                f.durations.push(format!("{tag}: agent {n} has {active} active points but {services} services"));
            }
        }
        prev = plan.clone();
    }
    f
}

fn configs() -> Vec<SolverConfig> {
    let mut out = Vec::new();
    for backend in [Backend::Z3, Backend::Bitwuzla, Backend::Cvc5] {
        if !backend.is_available() {
            continue;
        }
        for theory in [Theory::Bv, Theory::Lia] {
            if !backend.supports(theory) {
                continue;
            }
            for mode in [Mode::Incremental, Mode::NonIncremental] {
                out.push(SolverConfig::new(backend.clone(), theory, mode));
            }
        }
    }
    out
}

fn label(cfg: &SolverConfig) -> String {
    format!("{}/{:?}/{}", cfg.backend.name(), cfg.theory, cfg.mode)
}

struct Case {
    name: String,
    instance: Instance,
    stream: TaskStream,
    multi: bool,
}

fn small_world(n: usize, m: usize, l: usize, c: u64, seed: u64) -> (Instance, Vec<Task>) {
    let p = GenParams {
        n_agents: n,
        n_tasks: m,
        n_locations: l,
        graph: GraphSource::Random,
        max_weight: 6,
        capacity: c,
        seed,
        ..GenParams::default()
    };
    let (inst, s) = gen_static(&p);
    let instance = Instance::new(
        inst.graph,
        inst.agents,
        InstanceConfig {
            t_max: T_MAX,
            ..inst.config
        },
    )
    .unwrap();
    (instance, s.all_tasks())
}

fn with_deadline(tasks: &[Task], deadline: u64) -> Vec<Task> {
    tasks.iter().map(|t| Task { deadline, ..*t }).collect()
}

/// Smallest common deadline the oracle accepts.
fn critical_deadline(instance: &Instance, tasks: &[Task]) -> u64 {
    let ok = |d| feasible(instance, &with_deadline(tasks, d), None, &OracleBudget::default()).unwrap().0;
    let (mut lo, mut hi) = (1, T_MAX - 10);
    assert!(ok(hi), "no feasible deadline below the horizon");
    while lo < hi {
        let mid = (lo + hi) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

fn family() -> Vec<Case> {
    let mut out = Vec::new();
    for n in [1, 2] {
        for m in [1, 2, 3] {
            for l in [3, 4] {
                for c in [1, 2] {
                    for seed in [0, 1] {
                        let (instance, tasks) = small_world(n, m, l, c, seed);
                        let crit = critical_deadline(&instance, &tasks);
                        for d in [crit - 1, crit, crit + 4] {
                            out.push(Case {
                                name: format!("static-n{n}-m{m}-l{l}-c{c}-s{seed}-d{d}"),
                                instance: instance.clone(),
                                stream: TaskStream::single(with_deadline(&tasks, d)).unwrap(),
                                multi: false,
                            });
                        }
                        if m == 1 {
                            continue;
                        }
                        let sizes: &[usize] = match (m, seed) {
                            (2, _) => &[1, 1],
                            (_, 0) => &[1, 2],
                            _ => &[1, 1, 1],
                        };
                        let first = critical_deadline(&instance, &tasks[..1]) + 2;
                        for slack in [8, 40] {
                            let mut batches = Vec::new();
                            let mut next = 0;
                            for (j, &size) in sizes.iter().enumerate() {
                                let arrival = 3 * j as u64;
                                let deadline = if j == 0 { first } else { arrival + slack };
                                let batch_tasks = tasks[next..next + size]
                                    .iter()
                                    .map(|t| Task {
                                        arrival,
                                        deadline,
                                        ..*t
                                    })
                                    .collect();
                                next += size;
                                batches.push(Batch {
                                    arrival,
                                    tasks: batch_tasks,
                                });
                            }
                            out.push(Case {
                                name: format!("stream-n{n}-m{m}-l{l}-c{c}-s{seed}-slack{slack}"),
                                instance: instance.clone(),
                                stream: TaskStream::new(batches).unwrap(),
                                multi: true,
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

struct Line {
    ok: bool,
    text: String,
}

fn line(ok: bool, id: usize, title: &str, detail: String) -> Line {
    Line {
        ok,
        text: format!("{} {id} {title}: {detail}", if ok { "PASS" } else { "FAIL" }),
    }
}

fn first_few(items: &[String]) -> String {
    items.iter().take(3).cloned().collect::<Vec<_>>().join("; ")
}

fn median(mut xs: Vec<Duration>) -> Duration {
    xs.sort();
    xs[xs.len() / 2]
}

fn main() -> ExitCode {
    if !Backend::Z3.is_available() {
        println!("SKIP acceptance: z3 not found on PATH");
        return ExitCode::SUCCESS;
    }
    let started = Instant::now();
    let configs = configs();
    let options = PlannerOptions::default();
    let budget = OracleBudget::default();
    let mut lines = Vec::new();
    let mut findings = Findings::default();

    // 1. Oracle agreement.
    let cases = family();
    let jobs: Vec<(&Case, &SolverConfig)> = cases.iter().flat_map(|c| configs.iter().map(move |cfg| (c, cfg))).collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(case, cfg)| {
            let run = run_stream(&case.instance, &case.stream, cfg, &options).map_err(|e| format!("{} {}: {e}", case.name, label(cfg)))?;
            let report = compare_run(&case.name, &case.instance, &case.stream, &run, &budget).map_err(|e| format!("{}: {e}", case.name))?;
            let found = inspect(&format!("{} {}", case.name, label(cfg)), &case.instance, &case.stream, &run);
            Ok::<_, String>((case, cfg, run.verdicts(), report, found))
        })
        .collect();
    let mut errors = Vec::new();
    let mut compared = 0;
    let mut disagreements = Vec::new();
    let (mut sat, mut unsat) = (0, 0);
    let mut unsat_static = Vec::new();
    for r in results {
        match r {
            Ok((case, cfg, verdicts, report, found)) => {
                compared += report.compared;
                disagreements.extend(report.disagreements.iter().map(|d| format!("{} {} batch {}: solver {} oracle {}", d.instance, label(cfg), d.batch, d.solver, d.oracle)));
                sat += verdicts.iter().filter(|v| **v == Verdict::Sat).count();
                unsat += verdicts.iter().filter(|v| **v == Verdict::Unsat).count();
                if !case.multi && verdicts == [Verdict::Unsat] && cfg.backend == Backend::Z3 && cfg.theory == Theory::Bv && cfg.mode == Mode::Incremental {
                    unsat_static.push(case);
                }
                findings.merge(found);
            }
            Err(e) => errors.push(e),
        }
    }
    // The library driver must agree with the per-run comparison.
    let sample: Vec<_> = cases.iter().filter(|c| c.multi).take(8).map(|c| (c.name.clone(), c.instance.clone(), c.stream.clone())).collect();
    let driver = differential(&sample, &configs[0], &options, &budget);
    if let Err(e) = &driver {
        errors.push(format!("differential: {e}"));
    } else if let Ok(rep) = &driver {
        if !rep.agreed() {
            errors.push(format!("differential disagreed on {} batches", rep.disagreements.len()));
        }
    }
    let n_multi = cases.iter().filter(|c| c.multi).count();
    let ok = cases.len() >= 200 && n_multi > 0 && errors.is_empty() && disagreements.is_empty() && sat > 0 && unsat > 0;
    lines.push(line(
        ok,
        1,
        "oracle agreement",
        format!(
            "{} instances ({} multi-batch) x {} configs, {} batches compared, sat {sat} / unsat {unsat}, {} disagreements, {} errors {}{}",
            cases.len(),
            n_multi,
            configs.len(),
            compared,
            disagreements.len(),
            errors.len(),
            first_few(&disagreements),
            first_few(&errors),
        ),
    ));

    // 4. D_max saturation.
    let picked: Vec<&Case> = unsat_static.iter().copied().take(20).collect();
    let saturation: Vec<_> = picked
        .par_iter()
        .flat_map(|case| {
            configs
                .iter()
                .filter(|c| c.mode == Mode::Incremental)
                .map(|cfg| {
                    let top = d_max(case.stream.m_max());
                    let opts = PlannerOptions {
                        points: Some(top + 2),
                        schedule: Some(vec![top]),
                    };
                    match run_stream(&case.instance, &case.stream, cfg, &opts) {
                        Ok(run) if run.layout.points != top + 2 => Err(format!("{}: layout has {} points", case.name, run.layout.points)),
                        Ok(run) if run.verdicts() == [Verdict::Unsat] => Ok(()),
                        Ok(run) => Err(format!("{} {}: {:?}", case.name, label(cfg), run.verdicts())),
                        Err(e) => Err(format!("{}: {e}", case.name)),
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let bad: Vec<String> = saturation.iter().filter_map(|r| r.clone().err()).collect();
    lines.push(line(
        picked.len() == 20 && bad.is_empty(),
        4,
        "D_max saturation",
        format!("{} unsat instances re-encoded with D_max+2 points, {} runs, {} became sat or failed {}", picked.len(), saturation.len(), bad.len(), first_few(&bad)),
    ));

    // 5. Incremental vs non-incremental.
    let mut mode_errors = Vec::new();
    let mut mode_batches = 0;
    for backend in [Backend::Z3, Backend::Bitwuzla, Backend::Cvc5] {
        if !backend.is_available() || !backend.supports(Theory::Bv) {
            continue;
        }
        let specs: Vec<(u64, usize)> = (0..5).flat_map(|s| [(s, 1), (s, 10)]).collect();
        let out: Vec<_> = specs
            .par_iter()
            .map(|&(seed, b)| {
                let p = GenParams {
                    n_tasks: 20,
                    n_agents: 5,
                    capacity: 2,
                    batch_size: b,
                    seed,
                    ..GenParams::default()
                };
                let (instance, stream) = gen_stream(&p);
                let mut verdicts = Vec::new();
                let mut found = Findings::default();
                for mode in [Mode::Incremental, Mode::NonIncremental] {
                    let cfg = SolverConfig::new(backend.clone(), Theory::Bv, mode);
                    let name = format!("stream seed {seed} b={b} {}", label(&cfg));
                    let run = run_stream(&instance, &stream, &cfg, &options).map_err(|e| format!("{name}: {e}"))?;
                    found.merge(inspect(&name, &instance, &stream, &run));
                    verdicts.push(run.verdicts());
                }
                Ok::<_, String>((seed, b, verdicts, found))
            })
            .collect();
        for r in out {
            match r {
                Ok((seed, b, v, found)) => {
                    mode_batches += v[0].len();
                    if v[0] != v[1] {
                        mode_errors.push(format!("{} seed {seed} b={b}: {:?} vs {:?}", backend.name(), v[0], v[1]));
                    }
                    findings.merge(found);
                }
                Err(e) => mode_errors.push(e),
            }
        }
    }
    lines.push(line(
        mode_errors.is_empty() && mode_batches > 0,
        5,
        "incremental/non-incremental verdict equality",
        format!("10 streams (20 tasks, 5 agents, b in {{1,10}}) per BV backend, {mode_batches} batches, {} mismatches {}", mode_errors.len(), first_few(&mode_errors)),
    ));

    // 6. Desk-scale performance.
    let mut walls = Vec::new();
    let mut perf_errors = Vec::new();
    for seed in 0..5 {
        let p = GenParams {
            n_tasks: 10,
            n_agents: 5,
            capacity: 3,
            seed,
            ..GenParams::default()
        };
        let (instance, stream) = gen_static(&p);
        let cfg = SolverConfig::new(Backend::Z3, Theory::Bv, Mode::Incremental);
        let t = Instant::now();
        match run_stream(&instance, &stream, &cfg, &options) {
            Ok(run) => {
                walls.push(t.elapsed());
                if run.verdicts() == [Verdict::Unknown] {
                    perf_errors.push(format!("seed {seed}: unknown"));
                }
                findings.merge(inspect(&format!("perf seed {seed}"), &instance, &stream, &run));
            }
            Err(e) => perf_errors.push(format!("seed {seed}: {e}")),
        }
    }
    let med = if walls.is_empty() { Duration::MAX } else { median(walls.clone()) };
    lines.push(line(
        perf_errors.is_empty() && med <= PERF_LIMIT,
        6,
        "desk-scale performance",
        format!("10 tasks / 5 agents / c=3, z3 BV, median {:.2}s over 5 seeds (limit 60s) {walls:.2?} {}", med.as_secs_f64(), first_few(&perf_errors)),
    ));

    // 7. Schedule index follows d_min.
    let p = GenParams {
        n_tasks: 12,
        n_agents: 3,
        capacity: 2,
        batch_size: 1,
        ..GenParams::default()
    };
    let (instance, stream) = gen_stream(&p);
    let cfg = SolverConfig::new(Backend::Z3, Theory::Bv, Mode::Incremental);
    let peak = match run_stream(&instance, &stream, &cfg, &options) {
        Ok(run) => {
            findings.merge(inspect("peak stream", &instance, &stream, &run));
            let entries = run.schedule.points();
            let expected: Vec<usize> = (1..=stream.len())
                .map(|m| entries.iter().position(|&e| e >= d_min(m, instance.n_agents())).unwrap())
                .collect();
            let actual: Vec<usize> = run.batches.iter().map(|b| b.k).collect();
            let all_sat = run.verdicts().iter().all(|v| *v == Verdict::Sat) && run.batches.len() == stream.len();
            let rises = expected.windows(2).filter(|w| w[1] > w[0]).count();
            (all_sat && actual == expected && rises > 0, format!("k per batch {actual:?}, expected {expected:?}, {rises} increases"))
        }
        Err(e) => (false, e.to_string()),
    };
    lines.push(line(peak.0, 7, "action-point peak structure", peak.1));

    // 9. Determinism.
    let det_cases: Vec<(String, Instance, TaskStream)> = {
        let mut v: Vec<_> = cases.iter().filter(|c| c.multi).take(3).map(|c| (c.name.clone(), c.instance.clone(), c.stream.clone())).collect();
        let p = GenParams {
            n_tasks: 6,
            n_agents: 2,
            capacity: 2,
            batch_size: 2,
            seed: 9,
            ..GenParams::default()
        };
        let (i, s) = gen_stream(&p);
        v.push(("generated".into(), i, s));
        v
    };
    let mut det_errors = Vec::new();
    let mut det_runs = 0;
    for (name, instance, stream) in &det_cases {
        for cfg in &configs {
            let mut cfg = cfg.clone();
            cfg.transcript = true;
            let a = run_stream(instance, stream, &cfg, &options);
            let b = run_stream(instance, stream, &cfg, &options);
            det_runs += 1;
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    if a.transcript.as_deref().is_none_or(str::is_empty) {
                        det_errors.push(format!("{name} {}: empty transcript", label(&cfg)));
                    } else if a.transcript != b.transcript {
                        det_errors.push(format!("{name} {}: transcripts differ", label(&cfg)));
                    }
                    if a.verdicts() != b.verdicts() {
                        det_errors.push(format!("{name} {}: verdicts differ", label(&cfg)));
                    }
                    findings.merge(inspect(name, instance, stream, &a));
                }
                (Err(e), _) | (_, Err(e)) => det_errors.push(format!("{name}: {e}")),
            }
        }
    }
    lines.push(line(
        det_errors.is_empty(),
        9,
        "determinism",
        format!("{det_runs} repeated runs with transcripts, {} differences {}", det_errors.len(), first_few(&det_errors)),
    ));

    // 2, 3 and 8 over every sat result gathered above.
    lines.push(line(
        findings.invalid.is_empty() && findings.sat_batches > 0,
        2,
        "soundness",
        format!("{} sat batches validated, {} violations {}", findings.sat_batches, findings.invalid.len(), first_few(&findings.invalid)),
    ));
    lines.push(line(
        findings.invariants.is_empty() && findings.sat_batches > 0,
        3,
        "model invariants",
        format!("{} sat models, {} violations {}", findings.sat_batches, findings.invariants.len(), first_few(&findings.invariants)),
    ));
    lines.push(line(
        findings.durations.is_empty() && findings.sat_batches > 0,
        8,
        "plan duration consistency",
        format!("{} sat models, {} mismatches {}", findings.sat_batches, findings.durations.len(), first_few(&findings.durations)),
    ));

    lines.sort_by_key(|l| l.text[5..].split_whitespace().next().unwrap().parse::<usize>().unwrap());
    for l in &lines {
        println!("{}", l.text);
    }
    println!("acceptance finished in {:.1}s", started.elapsed().as_secs_f64());
    if lines.iter().all(|l| l.ok) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
