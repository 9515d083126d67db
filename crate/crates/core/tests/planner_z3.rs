// SPDX-License-Identifier: Apache-2.0

use mrta_core::encoder::Theory;
use mrta_core::model::{Action, AgentSpec, Batch, Instance, InstanceConfig, LocationGraph, Plan, Task, TaskStream};
use mrta_core::planner::{run_stream, solve_static, PlannerOptions};
use mrta_core::semantics::validate;
use mrta_core::session::{Backend, Mode, PointValue, SolverConfig, TaskValue, Verdict};
use Action::*;

fn configs() -> Vec<SolverConfig> {
    if !Backend::Z3.is_available() {
        eprintln!("z3 not found; skipping");
        return Vec::new();
    }
    let mut out = Vec::new();
    for theory in [Theory::Bv, Theory::Lia] {
        for mode in [Mode::Incremental, Mode::NonIncremental] {
            out.push(SolverConfig::new(Backend::Z3, theory, mode));
        }
    }
    out
}

fn t1() -> Instance {
    let graph = LocationGraph::new(vec![vec![0, 2, 4], vec![2, 0, 3], vec![4, 3, 0]]).unwrap();
    Instance::new(
        graph,
        vec![AgentSpec { id: 0, start: 0 }],
        InstanceConfig {
            capacity: 1,
            service_time: 1,
            t_max: 100,
        },
    )
    .unwrap()
}

fn task(id: usize, start: usize, end: usize, arrival: u64, deadline: u64) -> Task {
    Task {
        id,
        start,
        end,
        arrival,
        deadline,
    }
}

#[test]
fn t1_has_the_unique_schedule() {
    for cfg in configs() {
        let r = solve_static(&t1(), vec![task(0, 1, 2, 0, 7)], &cfg, &PlannerOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Sat, "{cfg:?}");
        assert_eq!(r.k, 0);
        let model = r.model.unwrap();
        let pts: Vec<(i64, i64, i64)> = model.points[0].iter().map(|p: &PointValue| (p.id, p.time, p.load)).collect();
        assert_eq!(pts, vec![(0, 0, 0), (1, 3, 1), (2, 7, 0)]);
        assert_eq!(model.tasks[0], TaskValue { start: 3, end: 7, agent: 0 });
        assert_eq!(r.plan.unwrap().sequences[0], vec![Move(1), Pick(0), Move(2), Drop(0)]);
    }
}

#[test]
fn t1_with_tight_deadline_is_unsat() {
    for cfg in configs() {
        let r = solve_static(&t1(), vec![task(0, 1, 2, 0, 6)], &cfg, &PlannerOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Unsat, "{cfg:?}");
        assert!(r.plan.is_none());
    }
}

#[test]
fn empty_task_set_gives_empty_plan() {
    for cfg in configs() {
        let r = solve_static(&t1(), vec![], &cfg, &PlannerOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Sat);
        assert!(r.plan.unwrap().is_empty());
    }
}

#[test]
fn capacity_one_cannot_interleave() {
    let graph = LocationGraph::new(vec![vec![0, 1, 10], vec![1, 0, 10], vec![10, 10, 0]]).unwrap();
    for capacity in [1, 2] {
        let inst = Instance::new(
            graph.clone(),
            vec![AgentSpec { id: 0, start: 0 }],
            InstanceConfig {
                capacity,
                service_time: 1,
                t_max: 30,
            },
        )
        .unwrap();
        for cfg in configs() {
            let tasks = vec![task(0, 1, 2, 0, 15), task(1, 1, 2, 0, 15)];
            let r = solve_static(&inst, tasks, &cfg, &PlannerOptions::default()).unwrap();
            let want = if capacity == 2 { Verdict::Sat } else { Verdict::Unsat };
            assert_eq!(r.verdict, want, "c={capacity} {cfg:?}");
        }
    }
}

#[test]
fn second_batch_keeps_the_delivery_in_progress() {
    let stream = TaskStream::new(vec![
        Batch {
            arrival: 0,
            tasks: vec![task(0, 1, 2, 0, 7)],
        },
        Batch {
            arrival: 5,
            tasks: vec![task(1, 2, 1, 5, 40)],
        },
    ])
    .unwrap();
    for cfg in configs() {
        let run = run_stream(&t1(), &stream, &cfg, &PlannerOptions::default()).unwrap();
        assert_eq!(run.verdicts(), vec![Verdict::Sat, Verdict::Sat], "{cfg:?}");
        let p0 = run.batches[0].plan.clone().unwrap();
        let p1 = run.batches[1].plan.clone().unwrap();
        assert_eq!(p1.sequences[0][..4], [Move(1), Pick(0), Move(2), Drop(0)]);
        let inst = t1();
        assert!(validate(&p0, &inst, &stream.cumulative(0), &Plan::empty(1), 0).ok);
        let report = validate(&p1, &inst, &stream.cumulative(1), &p0, 5);
        assert!(report.ok, "{report}");
    }
}
