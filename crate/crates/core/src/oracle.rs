// SPDX-License-Identifier: Apache-2.0

//! Exhaustive feasibility oracle for small instances.
//!
//! For a fixed order of pick and drop events, scheduling every event as
//! early as possible is optimal: travel times are exact lower bounds,
//! waiting only delays later events, and every deadline is an upper bound
//! on an event time. Enumerating assignments and orders therefore decides
//! feasibility exactly.

use std::collections::{BTreeSet, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::model::{Action, ActionSequence, Instance, Plan, Task, TaskStream};
use crate::planner::{run_stream, PlanError, PlannerOptions, StreamRun};
use crate::session::{SolverConfig, Verdict};
use crate::{AgentId, LocationId, TaskId, Time};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("input exceeds oracle budget: {0}")]
    BudgetExceeded(String),
    #[error("previous plan is not executable: {0}")]
    BadPrefix(String),
    #[error(transparent)]
    Planner(#[from] PlanError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleBudget {
    pub max_agents: usize,
    pub max_tasks: usize,
    pub max_locations: usize,
}

impl Default for OracleBudget {
    fn default() -> Self {
        Self {
            max_agents: 2,
            max_tasks: 3,
            max_locations: 5,
        }
    }
}

impl OracleBudget {
    fn check(&self, instance: &Instance, tasks: &[Task]) -> Result<(), OracleError> {
        let over = |what: &str, have: usize, max: usize| {
            Err(OracleError::BudgetExceeded(format!("{have} {what} > {max}")))
        };
        if instance.n_agents() > self.max_agents {
            return over("agents", instance.n_agents(), self.max_agents);
        }
        if tasks.len() > self.max_tasks {
            return over("tasks", tasks.len(), self.max_tasks);
        }
        if instance.graph.n_locations() > self.max_locations {
            return over("locations", instance.graph.n_locations(), self.max_locations);
        }
        Ok(())
    }
}

/// Per-agent state after the part of a previous plan that must be kept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentResume {
    pub prefix: ActionSequence,
    pub location: LocationId,
    /// Completion time of the kept prefix.
    pub time: Time,
    pub carried: Vec<TaskId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResumeState {
    pub t: Time,
    pub agents: Vec<AgentResume>,
    /// Tasks whose pick lies in some kept prefix.
    pub started: BTreeSet<TaskId>,
}

/// Cut each sequence of `prev` after its first pick or drop completing at
/// or after `t`, or keep it whole if it finishes before `t`.
pub fn resume_state(prev: &Plan, t: Time, instance: &Instance) -> Result<ResumeState, OracleError> {
    let rho = instance.rho();
    let mut agents = Vec::new();
    let mut started = BTreeSet::new();
    for n in 0..instance.n_agents() {
        let seq = prev.sequence(n);
        let mut location = instance.agents[n].start;
        let mut time: Time = 0;
        let mut carried = Vec::new();
        let mut cut = seq.len();
        for (i, action) in seq.iter().enumerate() {
            match *action {
                Action::Move(l) => {
                    time += instance.graph.weight(location, l);
                    location = l;
                }
                Action::Wait(w) => time += w,
                Action::Pick(mu) => {
                    time += rho;
                    carried.push(mu);
                    started.insert(mu);
                }
                Action::Drop(mu) => {
                    time += rho;
                    let Some(pos) = carried.iter().position(|&c| c == mu) else {
                        return Err(OracleError::BadPrefix(format!("agent {n} drops {mu} without carrying it")));
                    };
                    carried.remove(pos);
                }
            }
            if action.is_service() && time >= t {
                cut = i + 1;
                break;
            }
        }
        if cut < seq.len() && !seq[cut - 1].is_service() {
            return Err(OracleError::BadPrefix(format!("agent {n} prefix does not end at a service")));
        }
        agents.push(AgentResume {
            prefix: seq[..cut].to_vec(),
            location,
            time,
            carried,
        });
    }
    Ok(ResumeState { t, agents, started })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Event {
    Pick(TaskId),
    Drop(TaskId),
}

struct AgentProblem<'a> {
    instance: &'a Instance,
    tasks: &'a HashMap<TaskId, Task>,
    start_loc: LocationId,
    /// Earliest departure for the first new event.
    depart: Time,
    carried: &'a [TaskId],
}

impl AgentProblem<'_> {
    /// First feasible event order for `assigned` new tasks, if any.
    fn solve(&self, assigned: &[TaskId]) -> Option<Vec<(Event, Time)>> {
        let mut order = Vec::new();
        let mut picked = vec![false; assigned.len()];
        let mut dropped_new = vec![false; assigned.len()];
        let mut dropped_old = vec![false; self.carried.len()];
        let load = self.carried.len() as u64;
        if load > self.instance.config.capacity {
            return None;
        }
        self.search(
            assigned,
            &mut picked,
            &mut dropped_new,
            &mut dropped_old,
            self.start_loc,
            self.depart,
            load,
            &mut order,
        )
        .then_some(order)
    }

    #[allow(clippy::too_many_arguments)]
    fn search(
        &self,
        assigned: &[TaskId],
        picked: &mut [bool],
        dropped_new: &mut [bool],
        dropped_old: &mut [bool],
        here: LocationId,
        now: Time,
        load: u64,
        order: &mut Vec<(Event, Time)>,
    ) -> bool {
        if dropped_new.iter().all(|&d| d) && dropped_old.iter().all(|&d| d) {
            return true;
        }
        let rho = self.instance.rho();
        let graph = &self.instance.graph;
        for i in 0..self.carried.len() {
            if dropped_old[i] {
                continue;
            }
            let task = &self.tasks[&self.carried[i]];
            let at = now + graph.weight(here, task.end) + rho;
            if at > task.deadline {
                continue;
            }
            dropped_old[i] = true;
            order.push((Event::Drop(task.id), at));
            if self.search(assigned, picked, dropped_new, dropped_old, task.end, at, load - 1, order) {
                return true;
            }
            order.pop();
            dropped_old[i] = false;
        }
        for i in 0..assigned.len() {
            let task = &self.tasks[&assigned[i]];
            if !picked[i] {
                if load >= self.instance.config.capacity {
                    continue;
                }
                let at = now + graph.weight(here, task.start) + rho;
                picked[i] = true;
                order.push((Event::Pick(task.id), at));
                if self.search(assigned, picked, dropped_new, dropped_old, task.start, at, load + 1, order) {
                    return true;
                }
                order.pop();
                picked[i] = false;
            } else if !dropped_new[i] {
                let at = now + graph.weight(here, task.end) + rho;
                if at > task.deadline {
                    continue;
                }
                dropped_new[i] = true;
                order.push((Event::Drop(task.id), at));
                if self.search(assigned, picked, dropped_new, dropped_old, task.end, at, load - 1, order) {
                    return true;
                }
                order.pop();
                dropped_new[i] = false;
            }
        }
        false
    }
}

/// Timed service events of one agent, in execution order.
type Ordering = Vec<(Event, Time)>;

/// Decide whether a valid plan exists for `tasks` (all tasks arrived so
/// far), optionally continuing from a previous plan. Returns a witness plan
/// when feasible.
pub fn feasible(
    instance: &Instance,
    tasks: &[Task],
    from: Option<&ResumeState>,
    budget: &OracleBudget,
) -> Result<(bool, Option<Plan>), OracleError> {
    budget.check(instance, tasks)?;
    let n_agents = instance.n_agents();
    let by_id: HashMap<TaskId, Task> = tasks.iter().map(|t| (t.id, *t)).collect();
    let fresh;
    let resume = match from {
        Some(r) => r,
        None => {
            fresh = ResumeState {
                t: 0,
                agents: instance
                    .agents
                    .iter()
                    .map(|a| AgentResume {
                        prefix: Vec::new(),
                        location: a.start,
                        time: 0,
                        carried: Vec::new(),
                    })
                    .collect(),
                started: BTreeSet::new(),
            };
            &fresh
        }
    };
    if resume.agents.len() != n_agents {
        return Err(OracleError::BadPrefix("resume state agent count differs".into()));
    }
    for a in &resume.agents {
        if let Some(&mu) = a.carried.iter().find(|mu| !by_id.contains_key(mu)) {
            return Err(OracleError::BadPrefix(format!("carried task {mu} is not in the task set")));
        }
    }
    let open: Vec<TaskId> = tasks
        .iter()
        .map(|t| t.id)
        .filter(|id| !resume.started.contains(id))
        .collect();
    let problems: Vec<AgentProblem> = resume
        .agents
        .iter()
        .map(|a| AgentProblem {
            instance,
            tasks: &by_id,
            start_loc: a.location,
            depart: a.time.max(resume.t),
            carried: &a.carried,
        })
        .collect();

    let mut memo: HashMap<(AgentId, u32), Option<Ordering>> = HashMap::new();
    let combos = n_agents.pow(open.len() as u32);
    for code in 0..combos {
        let mut masks = vec![0u32; n_agents];
        let mut c = code;
        for i in 0..open.len() {
            masks[c % n_agents] |= 1 << i;
            c /= n_agents;
        }
        let mut orders = Vec::with_capacity(n_agents);
        let mut ok = true;
        for (n, &mask) in masks.iter().enumerate() {
            let entry = memo.entry((n, mask)).or_insert_with(|| {
                let assigned: Vec<TaskId> = (0..open.len()).filter(|i| mask >> i & 1 == 1).map(|i| open[i]).collect();
                problems[n].solve(&assigned)
            });
            match entry {
                Some(order) => orders.push(order.clone()),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            return Ok((true, Some(witness(instance, resume, &by_id, &orders))));
        }
    }
    Ok((false, None))
}

fn witness(
    instance: &Instance,
    resume: &ResumeState,
    tasks: &HashMap<TaskId, Task>,
    orders: &[Vec<(Event, Time)>],
) -> Plan {
    let mut sequences = Vec::new();
    for (a, order) in resume.agents.iter().zip(orders) {
        let mut seq = a.prefix.clone();
        if !order.is_empty() && a.time < resume.t {
            seq.push(Action::Wait(resume.t - a.time));
        }
        for &(event, _) in order {
            match event {
                Event::Pick(mu) => seq.extend([Action::Move(tasks[&mu].start), Action::Pick(mu)]),
                Event::Drop(mu) => seq.extend([Action::Move(tasks[&mu].end), Action::Drop(mu)]),
            }
        }
        sequences.push(seq);
    }
    debug_assert_eq!(sequences.len(), instance.n_agents());
    Plan { sequences }
}

#[derive(Debug, Clone, Serialize)]
pub struct Disagreement {
    pub instance: String,
    pub batch: usize,
    pub solver: Verdict,
    pub oracle: bool,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct AgreementReport {
    /// Batches compared.
    pub compared: usize,
    pub disagreements: Vec<Disagreement>,
}

impl AgreementReport {
    pub fn agreed(&self) -> bool {
        self.disagreements.is_empty()
    }
}

/// Compare solver and oracle batch by batch. Each batch after the first is
/// judged from the solver's own previous plan at the batch arrival time.
pub fn differential(
    family: &[(String, Instance, TaskStream)],
    config: &SolverConfig,
    options: &PlannerOptions,
    budget: &OracleBudget,
) -> Result<AgreementReport, OracleError> {
    let mut report = AgreementReport::default();
    for (name, instance, stream) in family {
        let run = run_stream(instance, stream, config, options)?;
        let part = compare_run(name, instance, stream, &run, budget)?;
        report.compared += part.compared;
        report.disagreements.extend(part.disagreements);
    }
    Ok(report)
}

/// Oracle verdicts for the batches of an existing solver run.
pub fn compare_run(
    name: &str,
    instance: &Instance,
    stream: &TaskStream,
    run: &StreamRun,
    budget: &OracleBudget,
) -> Result<AgreementReport, OracleError> {
    let mut report = AgreementReport::default();
    let mut prev = Plan::empty(instance.n_agents());
    for (j, result) in run.batches.iter().enumerate() {
        let tasks = stream.cumulative(j);
        let from = if j == 0 {
            None
        } else {
            Some(resume_state(&prev, stream.batches()[j].arrival, instance)?)
        };
        let (ok, _) = feasible(instance, &tasks, from.as_ref(), budget)?;
        report.compared += 1;
        if ok != (result.verdict == Verdict::Sat) {
            report.disagreements.push(Disagreement {
                instance: name.to_string(),
                batch: j,
                solver: result.verdict,
                oracle: ok,
            });
        }
        if let Some(plan) = &result.plan {
            prev = plan.clone();
        }
    }
    Ok(report)
}
