// SPDX-License-Identifier: Apache-2.0

//! The batch loop: encode once, then for every arriving batch pin the past,
//! add the new tasks, re-chain times from the batch arrival and search the
//! action-point schedule for a satisfying model.

use std::time::Duration;

use log::{debug, info};
use serde::Serialize;
use thiserror::Error;

use crate::encoder::{
    assumption_schedule, build_base, build_tasks, build_update, declarations, fix_point, AssumptionSchedule,
    BitWidths, EncodeError, EncodingScope, LiteralLayout, ScopeGroup,
};
use crate::model::{Action, Instance, ModelError, Plan, Task, TaskStream};
use crate::session::{ModelImage, Session, SessionError, SolverConfig, Verdict};
use crate::{LocationId, Time};

pub use crate::encoder::{d_max, d_min};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("malformed model: {0}")]
    MalformedModel(String),
}

/// Knobs beyond the solver configuration.
#[derive(Debug, Clone, Default)]
pub struct PlannerOptions {
    /// Action points per agent; defaults to `D_max`.
    pub points: Option<usize>,
    /// User action-point list; must end at `D_max`.
    pub schedule: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct QueryRecord {
    pub k: usize,
    pub entry: usize,
    pub verdict: Verdict,
    pub wall: Duration,
    pub timed_out: bool,
}

#[derive(Debug, Clone)]
pub struct BatchResult {
    pub batch: usize,
    pub arrival: Time,
    pub verdict: Verdict,
    pub plan: Option<Plan>,
    pub model: Option<ModelImage>,
    /// Schedule index of the last query (the satisfying one when sat).
    pub k: usize,
    pub schedule_entry: usize,
    /// Points that are neither pinned to the past nor forced home.
    pub free_points: usize,
    /// Non-initial points the model assigns to tasks.
    pub used_points: usize,
    pub d_min: usize,
    pub cumulative_tasks: usize,
    pub queries: Vec<QueryRecord>,
}

impl BatchResult {
    pub fn wall(&self) -> Duration {
        self.queries.iter().map(|q| q.wall).sum()
    }
}

#[derive(Debug, Clone)]
pub struct StreamRun {
    pub layout: LiteralLayout,
    pub schedule: AssumptionSchedule,
    pub batches: Vec<BatchResult>,
    pub transcript: Option<String>,
}

impl StreamRun {
    pub fn verdicts(&self) -> Vec<Verdict> {
        self.batches.iter().map(|b| b.verdict).collect()
    }
}

/// Mutable state carried across batches.
#[derive(Debug, Clone)]
pub struct PlannerState {
    pub cumulative: Vec<Task>,
    pub j: usize,
    pub k: usize,
    pub delta: Vec<usize>,
    pub prev_model: Option<ModelImage>,
    pub prev_plan: Plan,
}

/// Pin the executed and in-progress part of the previous model. Returns
/// the equalities for points not pinned before and the new per-agent
/// first free index.
pub fn save_past_state(
    prev: &ModelImage,
    t_j: Time,
    layout: &LiteralLayout,
    already_fixed: &[usize],
) -> (EncodingScope, Vec<usize>) {
    let mut scope = EncodingScope::new(ScopeGroup::SavedState);
    let mut delta = Vec::with_capacity(layout.n_agents);
    for (n, row) in prev.points.iter().enumerate() {
        let mut d = 0;
        let stop = loop {
            if d >= already_fixed[n] {
                let p = row[d];
                scope
                    .formulas
                    .extend(fix_point(n, d, p.id as u64, p.time as Time, p.load as u64));
            }
            let reached = row[d].time >= t_j as i64;
            let home_next = d + 1 < layout.points && row[d + 1].id == n as i64;
            if reached || home_next {
                break d + 1;
            }
            d += 1;
            if d == layout.points {
                break layout.points;
            }
        };
        delta.push(stop);
    }
    (scope, delta)
}

/// Turn a model into per-agent action sequences, inserting waits where
/// consecutive point times leave slack beyond travel and service.
pub fn get_plan(model: &ModelImage, layout: &LiteralLayout, instance: &Instance, tasks: &[Task]) -> Result<Plan, PlanError> {
    let n_agents = layout.n_agents as i64;
    let rho = instance.rho() as i64;
    let task_of = |mu: usize| {
        tasks
            .iter()
            .find(|t| t.id == mu)
            .ok_or_else(|| PlanError::MalformedModel(format!("model references unknown task {mu}")))
    };
    let mut sequences = Vec::with_capacity(layout.n_agents);
    for (n, row) in model.points.iter().enumerate() {
        let mut seq = Vec::new();
        let mut here: LocationId = instance.agents[n].start;
        let mut d = 1;
        while d < row.len() && row[d].id != n as i64 {
            let id = row[d].id;
            if id < n_agents {
                return Err(PlanError::MalformedModel(format!(
                    "agent {n} point {d} holds home id {id} of another agent"
                )));
            }
            let mu = ((id - n_agents) / 2) as usize;
            let task = task_of(mu)?;
            let is_pick = (id - n_agents) % 2 == 0;
            let target = if is_pick { task.start } else { task.end };
            let travel = instance.graph.weight(here, target) as i64;
            let gap = row[d].time - row[d - 1].time;
            if gap < travel + rho {
                return Err(PlanError::MalformedModel(format!(
                    "agent {n} point {d}: gap {gap} shorter than travel {travel} plus service {rho}"
                )));
            }
            if gap > travel + rho {
                seq.push(Action::Wait((gap - travel - rho) as Time));
            }
            seq.push(Action::Move(target));
            seq.push(if is_pick { Action::Pick(mu) } else { Action::Drop(mu) });
            here = target;
            d += 1;
        }
        if let Some(bad) = (d..row.len()).find(|&e| row[e].id != n as i64) {
            return Err(PlanError::MalformedModel(format!(
                "agent {n} leaves home again at point {bad}"
            )));
        }
        sequences.push(seq);
    }
    Ok(Plan { sequences })
}

fn free_points(layout: &LiteralLayout, schedule: &AssumptionSchedule, k: usize, delta: &[usize]) -> usize {
    let limit = if k + 1 >= schedule.len() {
        layout.points
    } else {
        schedule.get(k).unwrap_or(layout.points).min(layout.points)
    };
    delta.iter().map(|&s| limit.saturating_sub(s)).sum()
}

fn used_points(model: &ModelImage) -> usize {
    model
        .points
        .iter()
        .enumerate()
        .map(|(n, row)| row.iter().skip(1).filter(|p| p.id != n as i64).count())
        .sum()
}

/// Drive the whole stream. Stops after the first batch that is not sat.
pub fn run_stream(
    instance: &Instance,
    stream: &TaskStream,
    config: &SolverConfig,
    options: &PlannerOptions,
) -> Result<StreamRun, PlanError> {
    instance.check_tasks(stream)?;
    if let Some(w) = instance.horizon_warning(stream) {
        log::warn!("{w}");
    }
    let n_agents = instance.n_agents();
    let m_max = stream.m_max();
    let first = stream.batches().first().map_or(0, |b| b.tasks.len());
    let schedule = assumption_schedule(m_max, n_agents, first, options.schedule.as_deref())?;
    let points = options.points.unwrap_or(d_max(m_max));
    let layout = LiteralLayout::new(n_agents, m_max, points, &schedule);
    let widths = BitWidths::for_instance(instance, m_max);

    let mut session = Session::open(config.clone())?;
    session.declare(&declarations(&layout, config.theory, &widths))?;
    let base = build_base(instance, &layout, &schedule, config.theory)?;
    session.assert_scope(&base, &widths)?;

    let mut state = PlannerState {
        cumulative: Vec::new(),
        j: 0,
        k: 0,
        delta: vec![1; n_agents],
        prev_model: None,
        prev_plan: Plan::empty(n_agents),
    };
    let mut batches = Vec::new();
    for batch in stream.batches() {
        let j = state.j;
        let t_j = batch.arrival;
        if j > 0 {
            session.pop()?;
            let prev = state.prev_model.as_ref().expect("sat model from previous batch");
            let (saved, delta) = save_past_state(prev, t_j, &layout, &state.delta);
            session.assert_scope(&saved, &widths)?;
            state.delta = delta;
        }
        let encoded = state.cumulative.len();
        let tasks = build_tasks(&layout, &batch.tasks, encoded, instance.rho())?;
        session.assert_scope(&tasks, &widths)?;
        state.cumulative.extend(batch.tasks.iter().copied());
        let m = state.cumulative.len();
        session.push()?;
        let update = build_update(instance, &layout, &state.delta, t_j, m)?;
        session.assert_scope(&update, &widths)?;

        let need = d_min(m, n_agents);
        let mut queries = Vec::new();
        let mut found = None;
        while state.k < schedule.len() {
            let entry = schedule.points()[state.k];
            if entry < need {
                state.k += 1;
                continue;
            }
            let outcome = session.check(Some(schedule.gamma(state.k)))?;
            debug!("batch {j} k={} entry={entry}: {}", state.k, outcome.verdict);
            queries.push(QueryRecord {
                k: state.k,
                entry,
                verdict: outcome.verdict,
                wall: outcome.wall,
                timed_out: outcome.timed_out,
            });
            if outcome.verdict == Verdict::Sat {
                let model = session.get_model(&layout)?;
                let plan = get_plan(&model, &layout, instance, &state.cumulative)?;
                found = Some((model, plan));
                break;
            }
            state.k += 1;
        }
        let k = state.k.min(schedule.len().saturating_sub(1));
        let verdict = match (&found, queries.iter().any(|q| q.verdict == Verdict::Unknown)) {
            (Some(_), _) => Verdict::Sat,
            (None, true) => Verdict::Unknown,
            (None, false) => Verdict::Unsat,
        };
        let mut result = BatchResult {
            batch: j,
            arrival: t_j,
            verdict,
            plan: None,
            model: None,
            k,
            schedule_entry: schedule.points().get(k).copied().unwrap_or(0),
            free_points: free_points(&layout, &schedule, k, &state.delta),
            used_points: 0,
            d_min: need,
            cumulative_tasks: m,
            queries,
        };
        info!("batch {j} at t={t_j}: {verdict} (k={k}, M={m})");
        match found {
            Some((model, plan)) => {
                result.used_points = used_points(&model);
                result.plan = Some(plan.clone());
                result.model = Some(model.clone());
                state.prev_model = Some(model);
                state.prev_plan = plan;
                batches.push(result);
                state.j += 1;
            }
            None => {
                batches.push(result);
                break;
            }
        }
    }
    Ok(StreamRun {
        layout,
        schedule,
        batches,
        transcript: session.transcript(),
    })
}

/// Single-shot solve of one task set arriving at time 0.
pub fn solve_static(
    instance: &Instance,
    tasks: Vec<Task>,
    config: &SolverConfig,
    options: &PlannerOptions,
) -> Result<BatchResult, PlanError> {
    let stream = TaskStream::single(tasks)?;
    let mut run = run_stream(instance, &stream, config, options)?;
    Ok(run.batches.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AgentSpec, InstanceConfig, LocationGraph};
    use crate::session::PointValue;
    use Action::*;

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

    fn task0() -> Task {
        Task {
            id: 0,
            start: 1,
            end: 2,
            arrival: 0,
            deadline: 7,
        }
    }

    fn model(rows: Vec<Vec<(i64, i64, i64)>>) -> ModelImage {
        ModelImage {
            points: rows
                .into_iter()
                .map(|r| r.into_iter().map(|(id, time, load)| PointValue { id, time, load }).collect())
                .collect(),
            tasks: Vec::new(),
        }
    }

    fn layout(points: usize) -> LiteralLayout {
        LiteralLayout {
            n_agents: 1,
            m_max: 1,
            points,
            n_gammas: 1,
        }
    }

    #[test]
    fn d_bounds() {
        assert_eq!(d_max(5), 11);
        assert_eq!(d_min(3, 2), 5);
        for n in 1..6 {
            assert_eq!(d_min(n, n), 3);
        }
    }

    #[test]
    fn save_past_state_examples() {
        let m = model(vec![vec![(0, 0, 0), (1, 3, 1), (2, 7, 0), (0, 100, 0)]]);
        let (scope, delta) = save_past_state(&m, 5, &layout(4), &[0]);
        assert_eq!(delta, vec![3]);
        assert_eq!(scope.formulas.len(), 9);
        let (_, delta) = save_past_state(&m, 0, &layout(4), &[0]);
        assert_eq!(delta, vec![1]);
        let home = model(vec![vec![(0, 0, 0), (0, 100, 0), (0, 100, 0)]]);
        assert_eq!(save_past_state(&home, 5, &layout(3), &[0]).1, vec![1]);
        // Already pinned points are not re-asserted.
        let (scope, _) = save_past_state(&m, 5, &layout(4), &[2]);
        assert_eq!(scope.formulas.len(), 3);
    }

    #[test]
    fn get_plan_examples() {
        let inst = t1();
        let m = model(vec![vec![(0, 0, 0), (1, 3, 1), (2, 7, 0)]]);
        let plan = get_plan(&m, &layout(3), &inst, &[task0()]).unwrap();
        assert_eq!(plan.sequences[0], vec![Move(1), Pick(0), Move(2), Drop(0)]);
        let m = model(vec![vec![(0, 0, 0), (1, 3, 1), (2, 9, 0)]]);
        let plan = get_plan(&m, &layout(3), &inst, &[task0()]).unwrap();
        assert_eq!(plan.sequences[0], vec![Move(1), Pick(0), Wait(2), Move(2), Drop(0)]);
        let m = model(vec![vec![(0, 0, 0), (0, 100, 0), (0, 100, 0)]]);
        assert!(get_plan(&m, &layout(3), &inst, &[task0()]).unwrap().sequences[0].is_empty());
        let bad = model(vec![vec![(0, 0, 0), (0, 100, 0), (2, 7, 0)]]);
        assert!(matches!(get_plan(&bad, &layout(3), &inst, &[task0()]), Err(PlanError::MalformedModel(_))));
    }

    #[test]
    fn free_point_count() {
        let sched = assumption_schedule(3, 1, 1, None).unwrap();
        let lay = LiteralLayout::new(1, 3, 7, &sched);
        assert_eq!(free_points(&lay, &sched, 0, &[1]), 2);
        assert_eq!(free_points(&lay, &sched, 2, &[3]), 4);
    }
}
