// SPDX-License-Identifier: Apache-2.0

//! Executable plan semantics: prefix duration and load, sequence
//! consistency, task completion and the updated-plan relation. These
//! checkers know nothing about the encoding and serve as the validation
//! oracle for every plan the solver produces.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::model::{Action, Instance, LocationGraph, Plan, Task};
use crate::{AgentId, LocationId, TaskId, Time};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SemanticsError {
    #[error("prefix length {k} exceeds sequence length {len}")]
    PrefixTooLong { k: usize, len: usize },
    #[error("element {index} ({action}) has no location: it must directly follow a move")]
    UnresolvedLocation { index: usize, action: Action },
    #[error("element {index} moves to unknown location {location}")]
    UnknownLocation { index: usize, location: LocationId },
}

/// Which plan component a violation is attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "id", rename_all = "lowercase")]
pub enum Subject {
    Agent(AgentId),
    Task(TaskId),
}

/// Names the failed predicate family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Predicate {
    /// Consistent action sequence.
    Consistency,
    /// Task completed by exactly one agent within its window.
    Completion,
    /// Plan updated from the previous plan.
    Update,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub subject: Subject,
    pub predicate: Predicate,
    /// 1-based element index into the offending sequence, when one applies.
    pub index: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let subject = match self.subject {
            Subject::Agent(a) => format!("agent {a}"),
            Subject::Task(t) => format!("task {t}"),
        };
        let predicate = match self.predicate {
            Predicate::Consistency => "consistency",
            Predicate::Completion => "completion",
            Predicate::Update => "update",
        };
        match self.index {
            Some(i) => write!(f, "[{predicate}] {subject} @ {i}: {}", self.message),
            None => write!(f, "[{predicate}] {subject}: {}", self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn from_violations(violations: Vec<Violation>) -> Self {
        Self {
            ok: violations.is_empty(),
            violations,
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok {
            return writeln!(f, "ok");
        }
        writeln!(f, "invalid: {} violation(s)", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  {v}")?;
        }
        Ok(())
    }
}

/// Per-element durations of a whole sequence: entry `k` is the duration
/// of the prefix of length `k`, so entry 0 is always 0.
pub fn prefix_durations(
    seq: &[Action],
    graph: &LocationGraph,
    agent_start: LocationId,
    rho: Time,
) -> Result<Vec<Time>, SemanticsError> {
    let mut out = Vec::with_capacity(seq.len() + 1);
    out.push(0);
    let mut here = agent_start;
    let mut total: Time = 0;
    for (i, action) in seq.iter().enumerate() {
        let index = i + 1;
        total += match *action {
            Action::Move(to) => {
                if !graph.contains(to) {
                    return Err(SemanticsError::UnknownLocation {
                        index,
                        location: to,
                    });
                }
                let w = graph.weight(here, to);
                here = to;
                w
            }
            Action::Pick(_) | Action::Drop(_) => {
                if i == 0 || !seq[i - 1].is_move() {
                    return Err(SemanticsError::UnresolvedLocation {
                        index,
                        action: *action,
                    });
                }
                rho
            }
            Action::Wait(dt) => dt,
        };
        out.push(total);
    }
    Ok(out)
}

/// Duration of the prefix of length `k`.
pub fn duration(
    seq: &[Action],
    k: usize,
    graph: &LocationGraph,
    agent_start: LocationId,
    rho: Time,
) -> Result<Time, SemanticsError> {
    if k > seq.len() {
        return Err(SemanticsError::PrefixTooLong { k, len: seq.len() });
    }
    Ok(prefix_durations(&seq[..k], graph, agent_start, rho)?[k])
}

/// Picks minus drops over the prefix of length `k` (clamped to the
/// sequence length).
pub fn load(seq: &[Action], k: usize) -> i64 {
    seq.iter()
        .take(k)
        .map(|a| match a {
            Action::Pick(_) => 1,
            Action::Drop(_) => -1,
            _ => 0,
        })
        .sum()
}

fn task_index(tasks: &[Task]) -> HashMap<TaskId, &Task> {
    tasks.iter().map(|t| (t.id, t)).collect()
}

/// Consistency of a single agent's sequence. An empty list means the
/// sequence is consistent.
pub fn is_consistent(
    agent: AgentId,
    seq: &[Action],
    capacity: u64,
    graph: &LocationGraph,
    tasks: &[Task],
) -> Vec<Violation> {
    let by_id = task_index(tasks);
    let mut out = Vec::new();
    let mut push = |index: Option<usize>, message: String| {
        out.push(Violation {
            subject: Subject::Agent(agent),
            predicate: Predicate::Consistency,
            index,
            message,
        })
    };
    if seq.is_empty() {
        return Vec::new();
    }
    if !(seq[0].is_move() || seq[0].is_wait()) {
        push(Some(1), format!("first element {} is not a move or wait", seq[0]));
    }
    if seq[seq.len() - 1].is_move() {
        push(Some(seq.len()), "last element is a move".into());
    }
    let mut running: i64 = 0;
    for (i, action) in seq.iter().enumerate() {
        let index = i + 1;
        match action {
            Action::Pick(_) => running += 1,
            Action::Drop(_) => running -= 1,
            Action::Move(loc) if !graph.contains(*loc) => {
                push(Some(index), format!("move to unknown location {loc}"));
            }
            Action::Wait(0) => push(Some(index), "wait of zero duration".into()),
            _ => {}
        }
        if running < 0 || running > capacity as i64 {
            push(
                Some(index),
                format!("capacity violated: load {running} outside 0..={capacity}"),
            );
        }
        if i + 1 < seq.len() && action.is_move() && seq[i + 1].is_move() {
            push(Some(index + 1), "consecutive moves".into());
        }
    }
    for (i, action) in seq.iter().enumerate() {
        let index = i + 1;
        let (task_id, is_pick) = match *action {
            Action::Pick(t) => (t, true),
            Action::Drop(t) => (t, false),
            _ => continue,
        };
        let Some(task) = by_id.get(&task_id) else {
            push(Some(index), format!("unknown task {task_id}"));
            continue;
        };
        let want = if is_pick { task.start } else { task.end };
        let verb = if is_pick { "pick" } else { "drop" };
        if i == 0 || seq[i - 1] != Action::Move(want) {
            push(
                Some(index),
                format!("{verb} of task {task_id} not preceded by move to location {want}"),
            );
        }
        let same = |a: &Action| if is_pick { *a == Action::Pick(task_id) } else { *a == Action::Drop(task_id) };
        if seq.iter().enumerate().any(|(j, a)| j != i && same(a)) && seq[..i].iter().any(same) {
            push(Some(index), format!("task {task_id} {verb}ed more than once"));
        }
        if is_pick {
            if !seq[i + 1..].contains(&Action::Drop(task_id)) {
                push(Some(index), format!("pick of task {task_id} without a later drop"));
            }
        } else if !seq[..i].contains(&Action::Pick(task_id)) {
            push(Some(index), format!("drop of task {task_id} without a prior pick"));
        }
    }
    out
}

/// Completion of one task by the plan.
pub fn task_completed(plan: &Plan, task: &Task, instance: &Instance, tasks: &[Task]) -> Vec<Violation> {
    let violation = |index: Option<usize>, message: String| Violation {
        subject: Subject::Task(task.id),
        predicate: Predicate::Completion,
        index,
        message,
    };
    let holders: Vec<AgentId> = plan
        .sequences
        .iter()
        .enumerate()
        .filter(|(_, seq)| {
            seq.iter()
                .any(|a| *a == Action::Pick(task.id) || *a == Action::Drop(task.id))
        })
        .map(|(agent, _)| agent)
        .collect();
    match holders.len() {
        0 => return vec![violation(None, "task is never picked or dropped".into())],
        1 => {}
        _ => {
            return vec![violation(
                None,
                format!("multiple agents handle the task: {holders:?}"),
            )]
        }
    }
    let agent = holders[0];
    let seq = plan.sequence(agent);
    let mut out = Vec::new();
    if !is_consistent(agent, seq, instance.config.capacity, &instance.graph, tasks).is_empty() {
        out.push(violation(None, format!("sequence of agent {agent} is not consistent")));
    }
    let pick = seq.iter().position(|a| *a == Action::Pick(task.id));
    let drop = seq.iter().position(|a| *a == Action::Drop(task.id));
    let (Some(pick), Some(drop)) = (pick, drop) else {
        out.push(violation(
            None,
            format!("agent {agent} does not both pick and drop the task"),
        ));
        return out;
    };
    let start = instance.agents[agent].start;
    let durations = match prefix_durations(seq, &instance.graph, start, instance.rho()) {
        Ok(d) => d,
        Err(e) => {
            out.push(violation(None, format!("durations undefined: {e}")));
            return out;
        }
    };
    // Positions are 0-based; prefix lengths are 1-based.
    let drop_len = drop + 1;
    if durations[drop_len] > task.deadline {
        out.push(violation(
            Some(drop_len),
            format!(
                "deadline missed: drop completes at {} > {}",
                durations[drop_len], task.deadline
            ),
        ));
    }
    let before_move = (pick + 1).saturating_sub(2);
    if durations[before_move] < task.arrival {
        out.push(violation(
            Some(pick + 1),
            format!(
                "agent heads for the pickup at {} before the task arrives at {}",
                durations[before_move], task.arrival
            ),
        ));
    }
    out
}

/// Whether `new_plan` is updated at time `t` from `old_plan`. An all-empty
/// previous plan imposes nothing.
pub fn is_updated_from(new_plan: &Plan, old_plan: &Plan, t: Time, instance: &Instance) -> Vec<Violation> {
    if old_plan.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    for agent in 0..instance.n_agents() {
        if let Err(message) = agent_updated(
            new_plan.sequence(agent),
            old_plan.sequence(agent),
            t,
            instance,
            instance.agents[agent].start,
        ) {
            out.push(Violation {
                subject: Subject::Agent(agent),
                predicate: Predicate::Update,
                index: None,
                message,
            });
        }
    }
    out
}

fn agent_updated(
    new: &[Action],
    old: &[Action],
    t: Time,
    instance: &Instance,
    start: LocationId,
) -> Result<(), String> {
    let rho = instance.rho();
    let old_d = prefix_durations(old, &instance.graph, start, rho)
        .map_err(|e| format!("previous sequence ill-formed: {e}"))?;
    let new_d = prefix_durations(new, &instance.graph, start, rho)
        .map_err(|e| format!("new sequence ill-formed: {e}"))?;

    // Whole previous sequence kept, then either nothing or one wait up to t.
    let old_total = old_d[old.len()];
    if new.len() >= old.len() && new[..old.len()] == *old {
        if new.len() == old.len() {
            return Ok(());
        }
        if old_total < t
            && new[old.len()] == Action::Wait(t - old_total)
            && !new[old.len() + 1..].iter().any(Action::is_wait)
        {
            return Ok(());
        }
    }

    // A kept prefix ending at a pick or drop completed at or after t, and no
    // waiting once t has been reached.
    let kept = (1..=old.len()).any(|k| {
        old[k - 1].is_service() && old_d[k] >= t && new.len() >= k && new[..k] == old[..k]
    });
    if !kept {
        return Err(format!(
            "prefix broken before t={t}: no shared prefix ending at a pick or drop completed at or after t"
        ));
    }
    if let Some(k) = (1..=new.len()).find(|&k| new[k - 1].is_wait() && new_d[k] >= t) {
        return Err(format!("wait at element {k} after the update time {t}"));
    }
    Ok(())
}

/// Full validity check for batch `j`: consistency of every sequence,
/// completion of every task that has arrived, and the update relation to
/// the previous plan at the batch arrival time.
pub fn validate(
    plan: &Plan,
    instance: &Instance,
    cumulative_tasks: &[Task],
    prev_plan: &Plan,
    t_j: Time,
) -> ValidationReport {
    let mut violations = Vec::new();
    if plan.sequences.len() != instance.n_agents() {
        violations.push(Violation {
            subject: Subject::Agent(plan.sequences.len()),
            predicate: Predicate::Consistency,
            index: None,
            message: format!(
                "plan has {} sequences for {} agents",
                plan.sequences.len(),
                instance.n_agents()
            ),
        });
    }
    for (agent, seq) in plan.sequences.iter().enumerate() {
        violations.extend(is_consistent(
            agent,
            seq,
            instance.config.capacity,
            &instance.graph,
            cumulative_tasks,
        ));
    }
    for task in cumulative_tasks {
        violations.extend(task_completed(plan, task, instance, cumulative_tasks));
    }
    violations.extend(is_updated_from(plan, prev_plan, t_j, instance));
    ValidationReport::from_violations(violations)
}
