// SPDX-License-Identifier: Apache-2.0

//! Formula construction. Each agent owns `D` action points with an id, a
//! time and a load; each task owns a start time, an end time and an agent.
//! Constraints are split into a persistent base group, a per-batch update
//! group that lives in one push frame, and a persistent group per task
//! batch.

mod lower;
pub mod term;

use thiserror::Error;

use crate::model::{Instance, Task};
use crate::{AgentId, TaskId, Time};

pub use lower::{declarations, emit_smtlib, lower, BitWidths, Theory};
use term::{and, dist, eq, ge, implies, ite, le, loc, lt, not, num, or, parity, sub, var, Sort, Term, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("task {0} is already encoded")]
    TaskCollision(TaskId),
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error("constant {value} does not fit {sort:?} at width {width}")]
    WidthOverflow { value: u64, sort: Sort, width: u32 },
    #[error("parity of a non-variable id term cannot be lowered to integers")]
    UnsupportedParity,
}

/// Shape of the variable space. Every declaration is a deterministic
/// function of these numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LiteralLayout {
    pub n_agents: usize,
    pub m_max: usize,
    /// Action points per agent (`D`).
    pub points: usize,
    pub n_gammas: usize,
}

impl LiteralLayout {
    pub fn new(n_agents: usize, m_max: usize, points: usize, schedule: &AssumptionSchedule) -> Self {
        Self {
            n_agents,
            m_max,
            points,
            n_gammas: schedule.len(),
        }
    }

    /// All declared variables in declaration order, quotient variables
    /// excluded.
    pub fn variables(&self) -> Vec<Var> {
        let mut out = Vec::new();
        for n in 0..self.n_agents {
            for d in 0..self.points {
                out.extend([Var::Id(n, d), Var::Time(n, d), Var::Load(n, d)]);
            }
        }
        for m in 0..self.m_max {
            out.extend([Var::TaskStart(m), Var::TaskEnd(m), Var::TaskAgent(m)]);
        }
        out.extend((0..self.n_gammas).map(Var::Gamma));
        out
    }

    pub fn quotients(&self) -> Vec<Var> {
        (0..self.n_agents)
            .flat_map(|n| (0..self.points).map(move |d| Var::Quotient(n, d)))
            .collect()
    }
}

/// `2M_max + 1`: the number of action points after which more points add
/// nothing.
pub fn d_max(m_max: usize) -> usize {
    2 * m_max + 1
}

/// Smallest forced-home index that still leaves every agent room for
/// `⌈m/N⌉` pick/drop pairs after its initial point.
pub fn d_min(m: usize, n_agents: usize) -> usize {
    2 * m.div_ceil(n_agents) + 1
}

/// Action-point list `K` with one assumption literal per entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssumptionSchedule {
    points: Vec<usize>,
}

impl AssumptionSchedule {
    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn get(&self, k: usize) -> Option<usize> {
        self.points.get(k).copied()
    }

    pub fn gamma(&self, k: usize) -> Var {
        Var::Gamma(k)
    }
}

/// Build `K`. The default list runs from the first batch's minimum in
/// steps of two up to `D_max`; a user list must be strictly increasing,
/// positive and end at `D_max`.
pub fn assumption_schedule(
    m_max: usize,
    n_agents: usize,
    first_batch: usize,
    user: Option<&[usize]>,
) -> Result<AssumptionSchedule, EncodeError> {
    let top = d_max(m_max);
    let points = match user {
        Some(list) => {
            if list.is_empty() {
                return Err(EncodeError::Schedule("empty list".into()));
            }
            if list[0] == 0 || list.windows(2).any(|w| w[0] >= w[1]) {
                return Err(EncodeError::Schedule(format!(
                    "{list:?} is not strictly increasing positive"
                )));
            }
            if *list.last().unwrap() != top {
                return Err(EncodeError::Schedule(format!(
                    "{list:?} must end at D_max = {top}"
                )));
            }
            list.to_vec()
        }
        None => {
            let start = d_min(first_batch, n_agents).min(top);
            (start..=top).step_by(2).collect()
        }
    };
    Ok(AssumptionSchedule { points })
}

/// Which part of the incremental solver state a scope belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScopeGroup {
    Base,
    Update,
    Tasks,
    SavedState,
}

impl ScopeGroup {
    /// Only the update group is asserted inside a push frame.
    pub fn is_framed(self) -> bool {
        self == ScopeGroup::Update
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodingScope {
    pub group: ScopeGroup,
    pub formulas: Vec<Term>,
}

impl EncodingScope {
    pub fn new(group: ScopeGroup) -> Self {
        Self {
            group,
            formulas: Vec::new(),
        }
    }

    fn push(&mut self, t: Term) {
        if t != Term::Bool(true) {
            self.formulas.push(t);
        }
    }

    pub fn len(&self) -> usize {
        self.formulas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.formulas.is_empty()
    }
}

fn id(n: AgentId, d: usize) -> Term {
    var(Var::Id(n, d))
}

fn time(n: AgentId, d: usize) -> Term {
    var(Var::Time(n, d))
}

fn load(n: AgentId, d: usize) -> Term {
    var(Var::Load(n, d))
}

fn id_num(v: usize) -> Term {
    num(v as u64, Sort::Id)
}

fn pick_id(mu: TaskId, n_agents: usize) -> usize {
    n_agents + 2 * mu
}

fn drop_id(mu: TaskId, n_agents: usize) -> usize {
    n_agents + 2 * mu + 1
}

/// 1 on pick ids, 0 elsewhere: parity matches `N mod 2` and `i >= N`.
pub fn pick_indicator(i: Term, n_agents: usize) -> Term {
    let r = (n_agents % 2) as u64;
    indicator(i, n_agents, r)
}

/// 1 on drop ids, 0 elsewhere: parity differs from `N mod 2` and `i >= N`.
pub fn drop_indicator(i: Term, n_agents: usize) -> Term {
    let r = (n_agents % 2).abs_diff(1) as u64;
    indicator(i, n_agents, r)
}

fn indicator(i: Term, n_agents: usize, r: u64) -> Term {
    ite(
        and(vec![eq(parity(i.clone()), num(r, Sort::Id)), ge(i, id_num(n_agents))]),
        num(1, Sort::Load),
        num(0, Sort::Load),
    )
}

/// Task `mu` is dropped by agent `n` at some point after `d`.
pub fn droplater(layout: &LiteralLayout, n: AgentId, d: usize, mu: TaskId) -> Term {
    let target = drop_id(mu, layout.n_agents);
    or((d + 1..layout.points).map(|dd| eq(id(n, dd), id_num(target))).collect())
}

/// Agent `n` picks task `mu` at some non-initial point.
pub fn agentstarts(layout: &LiteralLayout, n: AgentId, mu: TaskId) -> Term {
    let target = pick_id(mu, layout.n_agents);
    or((1..layout.points).map(|d| eq(id(n, d), id_num(target))).collect())
}

/// `N <= i < 2M + N` for the id at `(n, d)`.
pub fn validid(layout: &LiteralLayout, n: AgentId, d: usize, m: usize) -> Term {
    and(vec![
        le(id_num(layout.n_agents), id(n, d)),
        lt(id(n, d), id_num(2 * m + layout.n_agents)),
    ])
}

/// Initial points, forced-home implications, home absorption, load
/// tracking, distance table, agent start locations and domain bounds.
pub fn build_base(
    instance: &Instance,
    layout: &LiteralLayout,
    schedule: &AssumptionSchedule,
    theory: Theory,
) -> Result<EncodingScope, EncodeError> {
    let n_agents = layout.n_agents;
    let big_d = layout.points;
    if n_agents != instance.n_agents() {
        return Err(EncodeError::LayoutMismatch(format!(
            "layout has {n_agents} agents, instance {}",
            instance.n_agents()
        )));
    }
    if big_d == 0 {
        return Err(EncodeError::LayoutMismatch("zero action points".into()));
    }
    let guarded = schedule.len().saturating_sub(1);
    if let Some(&k) = schedule.points()[..guarded].iter().find(|&&k| k >= big_d) {
        return Err(EncodeError::LayoutMismatch(format!(
            "schedule entry {k} exceeds {big_d} action points"
        )));
    }
    if layout.n_gammas != schedule.len() {
        return Err(EncodeError::LayoutMismatch("assumption count differs from schedule".into()));
    }
    let c = instance.config.capacity;
    let t_max = instance.config.t_max;
    let mut scope = EncodingScope::new(ScopeGroup::Base);
    for n in 0..n_agents {
        let nu = id_num(n);
        // Initial point and forced-home assumptions.
        scope.push(eq(id(n, 0), nu.clone()));
        scope.push(eq(load(n, 0), num(0, Sort::Load)));
        scope.push(eq(time(n, 0), num(0, Sort::Time)));
        for (k, &point) in schedule.points()[..guarded].iter().enumerate() {
            scope.push(implies(var(schedule.gamma(k)), eq(id(n, point), nu.clone())));
        }
        // Home absorption.
        for d in 1..big_d.saturating_sub(1) {
            scope.push(implies(eq(id(n, d), nu.clone()), eq(id(n, d + 1), nu.clone())));
        }
        // Load tracking and no immediate repetition.
        for d in 1..big_d {
            scope.push(eq(
                load(n, d),
                sub(
                    Term::Add(vec![load(n, d - 1), pick_indicator(id(n, d), n_agents)]),
                    drop_indicator(id(n, d), n_agents),
                ),
            ));
            scope.push(implies(not(eq(id(n, d), nu.clone())), not(eq(id(n, d - 1), id(n, d)))));
        }
        // Domain bounds and home time.
        for d in 0..big_d {
            if d >= 1 {
                scope.push(le(num(0, Sort::Load), load(n, d)));
                scope.push(le(load(n, d), num(c, Sort::Load)));
                scope.push(ge(id(n, d), id_num(0)));
                scope.push(implies(eq(id(n, d), nu.clone()), eq(time(n, d), num(t_max, Sort::Time))));
            }
            if theory == Theory::Lia {
                scope.push(Term::ParityBound(n, d));
            }
        }
    }
    let graph = &instance.graph;
    for a in 0..graph.n_locations() {
        for b in 0..graph.n_locations() {
            scope.push(eq(
                dist(num(a as u64, Sort::Loc), num(b as u64, Sort::Loc)),
                num(graph.weight(a, b), Sort::Time),
            ));
        }
    }
    for agent in &instance.agents {
        scope.push(eq(loc(id_num(agent.id)), num(agent.start as u64, Sort::Loc)));
    }
    Ok(scope)
}

/// Time chaining from each agent's first free point, and valid ids for the
/// current cumulative task count `m`.
pub fn build_update(
    instance: &Instance,
    layout: &LiteralLayout,
    delta: &[usize],
    t_j: Time,
    m: usize,
) -> Result<EncodingScope, EncodeError> {
    if delta.len() != layout.n_agents {
        return Err(EncodeError::LayoutMismatch("one start index per agent required".into()));
    }
    if m > layout.m_max {
        return Err(EncodeError::LayoutMismatch(format!(
            "{m} tasks exceed layout bound {}",
            layout.m_max
        )));
    }
    let rho = instance.rho();
    let mut scope = EncodingScope::new(ScopeGroup::Update);
    for (n, &start) in delta.iter().enumerate() {
        for d in start.max(1)..layout.points {
            let prev = time(n, d - 1);
            let chained = Term::Add(vec![
                ite(le(prev.clone(), num(t_j, Sort::Time)), num(t_j, Sort::Time), prev),
                dist(loc(id(n, d - 1)), loc(id(n, d))),
                num(rho, Sort::Time),
            ]);
            scope.push(implies(ge(id(n, d), id_num(layout.n_agents)), eq(time(n, d), chained)));
        }
        for d in 1..layout.points {
            scope.push(implies(not(eq(id(n, d), id_num(n))), validid(layout, n, d, m)));
        }
    }
    Ok(scope)
}

/// Task locations, pick/drop bookkeeping, assignment and time windows for
/// one batch. `encoded_before` is the number of tasks encoded by earlier
/// batches.
pub fn build_tasks(
    layout: &LiteralLayout,
    tasks: &[Task],
    encoded_before: usize,
    rho: Time,
) -> Result<EncodingScope, EncodeError> {
    let n_agents = layout.n_agents;
    let mut scope = EncodingScope::new(ScopeGroup::Tasks);
    for task in tasks {
        let mu = task.id;
        if mu < encoded_before {
            return Err(EncodeError::TaskCollision(mu));
        }
        if mu >= layout.m_max {
            return Err(EncodeError::LayoutMismatch(format!(
                "task {mu} beyond layout bound {}",
                layout.m_max
            )));
        }
        let (p, q) = (pick_id(mu, n_agents), drop_id(mu, n_agents));
        scope.push(eq(loc(id_num(p)), num(task.start as u64, Sort::Loc)));
        scope.push(eq(loc(id_num(q)), num(task.end as u64, Sort::Loc)));
        let start = var(Var::TaskStart(mu));
        let end = var(Var::TaskEnd(mu));
        let agent = var(Var::TaskAgent(mu));
        for n in 0..n_agents {
            for d in 1..layout.points {
                scope.push(implies(
                    eq(id(n, d), id_num(p)),
                    and(vec![eq(start.clone(), time(n, d)), droplater(layout, n, d, mu)]),
                ));
                scope.push(implies(
                    eq(id(n, d), id_num(q)),
                    and(vec![eq(end.clone(), time(n, d)), eq(agent.clone(), id_num(n))]),
                ));
            }
            scope.push(implies(eq(agent.clone(), id_num(n)), agentstarts(layout, n, mu)));
        }
        scope.push(le(id_num(0), agent.clone()));
        scope.push(lt(agent, id_num(n_agents)));
        scope.push(ge(start, num(task.arrival + rho, Sort::Time)));
        scope.push(le(end, num(task.deadline, Sort::Time)));
    }
    Ok(scope)
}

/// Equalities pinning one action point to concrete values.
pub fn fix_point(n: AgentId, d: usize, id_value: u64, time_value: Time, load_value: u64) -> Vec<Term> {
    vec![
        eq(id(n, d), num(id_value, Sort::Id)),
        eq(time(n, d), num(time_value, Sort::Time)),
        eq(load(n, d), num(load_value, Sort::Load)),
    ]
}
