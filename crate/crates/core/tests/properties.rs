// SPDX-License-Identifier: Apache-2.0

use mrta_core::benchgen::{gen_static, GenParams, GraphSource};
use mrta_core::model::{Action, Instance, InstanceConfig, Plan, Task};
use mrta_core::oracle::{feasible, resume_state, OracleBudget};
use mrta_core::semantics::{is_consistent, load, prefix_durations, validate};
use proptest::prelude::*;

fn graph() -> mrta_core::model::LocationGraph {
    mrta_core::benchgen::gen_graph_with(4, 11, 6)
}

/// Sequences whose picks and drops always follow a move.
fn sequence() -> impl Strategy<Value = Vec<Action>> {
    let step = prop_oneof![
        (0usize..4).prop_map(|l| vec![Action::Move(l)]),
        (0usize..4, 0usize..3).prop_map(|(l, m)| vec![Action::Move(l), Action::Pick(m)]),
        (0usize..4, 0usize..3).prop_map(|(l, m)| vec![Action::Move(l), Action::Drop(m)]),
        (1u64..10).prop_map(|w| vec![Action::Wait(w)]),
    ];
    prop::collection::vec(step, 0..8).prop_map(|v| v.concat())
}

proptest! {
    #[test]
    fn durations_and_loads_step_correctly(seq in sequence(), start in 0usize..4, rho in 1u64..4) {
        let g = graph();
        let durs = prefix_durations(&seq, &g, start, rho).unwrap();
        prop_assert_eq!(durs.len(), seq.len() + 1);
        for (i, a) in seq.iter().enumerate() {
            prop_assert!(durs[i + 1] >= durs[i]);
            if !a.is_move() {
                prop_assert!(durs[i + 1] > durs[i]);
            }
            let step = match a {
                Action::Pick(_) => 1,
                Action::Drop(_) => -1,
                _ => 0,
            };
            prop_assert_eq!(load(&seq, i + 1), load(&seq, i) + step);
        }
    }

    #[test]
    fn checks_are_pure(seq in sequence()) {
        let g = graph();
        let tasks: Vec<Task> = (0..3).map(|id| Task { id, start: 1, end: 2, arrival: 0, deadline: 50 }).collect();
        prop_assert_eq!(is_consistent(0, &seq, 2, &g, &tasks), is_consistent(0, &seq, 2, &g, &tasks));
    }

    #[test]
    fn oracle_witnesses_validate(
        n in 1usize..3,
        m in 1usize..4,
        l in 3usize..5,
        c in 1u64..3,
        seed in 0u64..1000,
        deadline in 6u64..60,
        later in prop::option::of((1u64..12, 6u64..40)),
    ) {
        let (inst, s) = gen_static(&GenParams {
            n_agents: n,
            n_tasks: m,
            n_locations: l,
            graph: GraphSource::Random,
            max_weight: 6,
            capacity: c,
            seed,
            ..GenParams::default()
        });
        let instance = Instance::new(inst.graph, inst.agents, InstanceConfig { t_max: 200, ..inst.config }).unwrap();
        let tasks: Vec<Task> = s.all_tasks().into_iter().map(|t| Task { deadline, ..t }).collect();
        let budget = OracleBudget::default();
        let split = if later.is_some() && m > 1 { 1 } else { m };
        let first = &tasks[..split];
        let empty = Plan::empty(n);
        let (ok, witness) = feasible(&instance, first, None, &budget).unwrap();
        prop_assert_eq!(ok, witness.is_some());
        let Some(p0) = witness else { return Ok(()) };
        let report = validate(&p0, &instance, first, &empty, 0);
        prop_assert!(report.ok, "{}", report);
        if let (Some((t, slack)), true) = (later, split < m) {
            let rest: Vec<Task> = tasks[split..].iter().map(|x| Task { arrival: t, deadline: t + slack, ..*x }).collect();
            let all: Vec<Task> = first.iter().copied().chain(rest).collect();
            let from = resume_state(&p0, t, &instance).unwrap();
            let (ok, witness) = feasible(&instance, &all, Some(&from), &budget).unwrap();
            prop_assert_eq!(ok, witness.is_some());
            if let Some(p1) = witness {
                let report = validate(&p1, &instance, &all, &p0, t);
                prop_assert!(report.ok, "{}", report);
            }
        }
    }
}
