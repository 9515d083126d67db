// SPDX-License-Identifier: Apache-2.0

//! Domain model: the static world (locations, agents, capacity, service
//! time, horizon), the dynamic task stream, actions and plans, and the
//! action-id numbering shared by the encoder and plan extraction.

mod document;

use std::fmt;

use thiserror::Error;

pub use document::{
    instance_to_document, load_instance, parse_plan, plan_to_document, ActionDoc, AgentDoc,
    AgentPlanDoc, BatchDoc, InstanceDoc, PlanDoc, TaskDoc,
};

use crate::{AgentId, LocationId, TaskId, Time};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("action id {id} out of range for {n_agents} agents and {m_max} tasks")]
    ActionIdOutOfRange {
        id: u64,
        n_agents: usize,
        m_max: usize,
    },
}

fn invariant(msg: impl Into<String>) -> ModelError {
    ModelError::Invariant(msg.into())
}

/// Complete, undirected, metric travel-time graph over dense location ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocationGraph {
    weights: Vec<Vec<Time>>,
}

impl LocationGraph {
    /// Builds a graph from a full square matrix, checking symmetry, the
    /// zero-diagonal rule and the triangle inequality.
    pub fn new(weights: Vec<Vec<Time>>) -> Result<Self, ModelError> {
        let n = weights.len();
        if n == 0 {
            return Err(invariant("graph needs at least one location"));
        }
        for (i, row) in weights.iter().enumerate() {
            if row.len() != n {
                return Err(invariant(format!(
                    "distance matrix row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
        }
        for i in 0..n {
            for j in 0..n {
                if weights[i][j] != weights[j][i] {
                    return Err(invariant(format!(
                        "distance matrix not symmetric at ({i},{j})"
                    )));
                }
                if (weights[i][j] == 0) != (i == j) {
                    return Err(invariant(format!(
                        "weight zero if and only if same location violated at ({i},{j})"
                    )));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if weights[i][k] + weights[k][j] < weights[i][j] {
                        return Err(invariant(format!(
                            "triangle inequality violated at ({i},{j},{k})"
                        )));
                    }
                }
            }
        }
        Ok(Self { weights })
    }

    pub fn n_locations(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, from: LocationId, to: LocationId) -> Time {
        self.weights[from][to]
    }

    pub fn max_weight(&self) -> Time {
        self.weights
            .iter()
            .flat_map(|row| row.iter().copied())
            .max()
            .unwrap_or(0)
    }

    pub fn weights(&self) -> &[Vec<Time>] {
        &self.weights
    }

    pub fn contains(&self, loc: LocationId) -> bool {
        loc < self.n_locations()
    }
}

/// A pickup-and-delivery request. `arrival` equals the arrival time of the
/// batch the task belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Task {
    pub id: TaskId,
    pub start: LocationId,
    pub end: LocationId,
    pub arrival: Time,
    pub deadline: Time,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub arrival: Time,
    pub tasks: Vec<Task>,
}

/// Ordered task batches with strictly increasing arrivals starting at 0 and
/// task ids numbered contiguously in arrival order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TaskStream {
    batches: Vec<Batch>,
}

impl TaskStream {
    pub fn new(batches: Vec<Batch>) -> Result<Self, ModelError> {
        let stream = Self { batches };
        stream.validate()?;
        Ok(stream)
    }

    fn validate(&self) -> Result<(), ModelError> {
        let mut next_id = 0;
        for (j, batch) in self.batches.iter().enumerate() {
            if j == 0 && batch.arrival != 0 {
                return Err(invariant(format!(
                    "first batch must arrive at 0, got {}",
                    batch.arrival
                )));
            }
            if j > 0 && batch.arrival <= self.batches[j - 1].arrival {
                return Err(invariant(format!(
                    "strictly increasing arrivals violated at batch {j} ({} after {})",
                    batch.arrival,
                    self.batches[j - 1].arrival
                )));
            }
            for task in &batch.tasks {
                if task.id != next_id {
                    return Err(invariant(format!(
                        "task ids must be contiguous in arrival order: expected {next_id}, got {}",
                        task.id
                    )));
                }
                if task.arrival != batch.arrival {
                    return Err(invariant(format!(
                        "task {} arrival {} differs from batch arrival {}",
                        task.id, task.arrival, batch.arrival
                    )));
                }
                if task.deadline == 0 {
                    return Err(invariant(format!("task {} deadline must be positive", task.id)));
                }
                if task.deadline < task.arrival {
                    return Err(invariant(format!(
                        "task {} deadline {} before arrival {}",
                        task.id, task.deadline, task.arrival
                    )));
                }
                next_id += 1;
            }
        }
        Ok(())
    }

    /// One batch at arrival 0.
    pub fn single(tasks: Vec<Task>) -> Result<Self, ModelError> {
        Self::new(vec![Batch { arrival: 0, tasks }])
    }

    pub fn batches(&self) -> &[Batch] {
        &self.batches
    }

    pub fn len(&self) -> usize {
        self.batches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.batches.is_empty()
    }

    /// Total number of tasks over the whole stream.
    pub fn m_max(&self) -> usize {
        self.batches.iter().map(|b| b.tasks.len()).sum()
    }

    /// Every task that has arrived up to and including batch `j`.
    pub fn cumulative(&self, j: usize) -> Vec<Task> {
        self.batches[..=j]
            .iter()
            .flat_map(|b| b.tasks.iter().copied())
            .collect()
    }

    pub fn all_tasks(&self) -> Vec<Task> {
        self.batches
            .iter()
            .flat_map(|b| b.tasks.iter().copied())
            .collect()
    }

    pub fn max_deadline(&self) -> Time {
        self.batches
            .iter()
            .flat_map(|b| b.tasks.iter().map(|t| t.deadline))
            .max()
            .unwrap_or(0)
    }

    /// Regroups the tasks into batches of `size` tasks each, the last batch
    /// taking the remainder. Each batch arrives at the original arrival of
    /// its first task; deadlines are kept.
    pub fn rebatch(&self, size: usize) -> Result<Self, ModelError> {
        if size == 0 {
            return Err(invariant("batch size must be at least 1"));
        }
        let tasks = self.all_tasks();
        let batches = tasks
            .chunks(size)
            .map(|chunk| {
                let arrival = chunk[0].arrival;
                Batch {
                    arrival,
                    tasks: chunk
                        .iter()
                        .map(|t| Task {
                            arrival,
                            deadline: t.deadline.max(arrival),
                            ..*t
                        })
                        .collect(),
                }
            })
            .collect();
        Self::new(batches)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgentSpec {
    pub id: AgentId,
    pub start: LocationId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstanceConfig {
    /// Objects an agent can carry at once.
    pub capacity: u64,
    /// Duration of every pick and every drop.
    pub service_time: Time,
    pub t_max: Time,
}

/// The static world a task stream is solved against.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub graph: LocationGraph,
    pub agents: Vec<AgentSpec>,
    pub config: InstanceConfig,
}

impl Instance {
    pub fn new(
        graph: LocationGraph,
        agents: Vec<AgentSpec>,
        config: InstanceConfig,
    ) -> Result<Self, ModelError> {
        if agents.is_empty() {
            return Err(invariant("at least one agent is required"));
        }
        for (i, agent) in agents.iter().enumerate() {
            if agent.id != i {
                return Err(invariant(format!(
                    "agent ids must be 0..N-1 in order: position {i} has id {}",
                    agent.id
                )));
            }
            if !graph.contains(agent.start) {
                return Err(invariant(format!(
                    "agent {} start location {} is not a valid location id",
                    agent.id, agent.start
                )));
            }
        }
        if config.capacity == 0 {
            return Err(invariant("capacity must be positive"));
        }
        if config.service_time == 0 {
            return Err(invariant("service time rho must be at least 1"));
        }
        if config.t_max == 0 {
            return Err(invariant("t_max must be positive"));
        }
        Ok(Self {
            graph,
            agents,
            config,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn rho(&self) -> Time {
        self.config.service_time
    }

    /// Checks that every task's endpoints exist in the graph.
    pub fn check_tasks(&self, stream: &TaskStream) -> Result<(), ModelError> {
        for task in stream.batches().iter().flat_map(|b| &b.tasks) {
            if !self.graph.contains(task.start) || !self.graph.contains(task.end) {
                return Err(invariant(format!(
                    "task {} references a location outside 0..{}",
                    task.id,
                    self.graph.n_locations()
                )));
            }
        }
        Ok(())
    }

    /// `t_max` must exceed every deadline plus the largest travel time.
    pub fn check_horizon(&self, stream: &TaskStream) -> Result<(), ModelError> {
        let needed = stream.max_deadline() + self.graph.max_weight();
        if self.config.t_max <= needed {
            return Err(invariant(format!(
                "t_max {} must exceed max deadline plus max edge weight ({needed})",
                self.config.t_max
            )));
        }
        Ok(())
    }

    /// Online variant of [`Self::check_horizon`]: future deadlines are
    /// unknown, so a short horizon only yields a warning.
    pub fn horizon_warning(&self, stream: &TaskStream) -> Option<String> {
        self.check_horizon(stream).err().map(|e| e.to_string())
    }
}

/// What a single action id stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActionRole {
    Home(AgentId),
    Pick(TaskId),
    Drop(TaskId),
}

/// Ids `0..N` are the agents' home ids; after them task `μ` owns the pair
/// `N + 2μ` (pick) and `N + 2μ + 1` (drop).
pub fn decode_action_id(id: u64, n_agents: usize, m_max: usize) -> Result<ActionRole, ModelError> {
    let n = n_agents as u64;
    if id >= n + 2 * m_max as u64 {
        return Err(ModelError::ActionIdOutOfRange {
            id,
            n_agents,
            m_max,
        });
    }
    Ok(if id < n {
        ActionRole::Home(id as AgentId)
    } else {
        let offset = id - n;
        let task = (offset / 2) as TaskId;
        if offset.is_multiple_of(2) {
            ActionRole::Pick(task)
        } else {
            ActionRole::Drop(task)
        }
    })
}

pub fn encode_action_id(role: ActionRole, n_agents: usize) -> u64 {
    let n = n_agents as u64;
    match role {
        ActionRole::Home(agent) => agent as u64,
        ActionRole::Pick(task) => n + 2 * task as u64,
        ActionRole::Drop(task) => n + 2 * task as u64 + 1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Move(LocationId),
    Pick(TaskId),
    Drop(TaskId),
    Wait(Time),
}

impl Action {
    pub fn is_move(&self) -> bool {
        matches!(self, Action::Move(_))
    }

    pub fn is_wait(&self) -> bool {
        matches!(self, Action::Wait(_))
    }

    pub fn is_service(&self) -> bool {
        matches!(self, Action::Pick(_) | Action::Drop(_))
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Move(loc) => write!(f, "(M {loc})"),
            Action::Pick(task) => write!(f, "(P {task})"),
            Action::Drop(task) => write!(f, "(D {task})"),
            Action::Wait(dt) => write!(f, "(W {dt})"),
        }
    }
}

pub type ActionSequence = Vec<Action>;

/// One action sequence per agent, indexed by agent id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Plan {
    pub sequences: Vec<ActionSequence>,
}

impl Plan {
    pub fn empty(n_agents: usize) -> Self {
        Self {
            sequences: vec![Vec::new(); n_agents],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.iter().all(|s| s.is_empty())
    }

    pub fn sequence(&self, agent: AgentId) -> &[Action] {
        self.sequences.get(agent).map(Vec::as_slice).unwrap_or(&[])
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (agent, seq) in self.sequences.iter().enumerate() {
            write!(f, "agent {agent}:")?;
            for action in seq {
                write!(f, " {action}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
