// SPDX-License-Identifier: Apache-2.0

//! JSON instance and plan documents.

use serde::{Deserialize, Serialize};

use super::{
    Action, AgentSpec, Batch, Instance, InstanceConfig, LocationGraph, ModelError, Plan, Task,
    TaskStream,
};
use crate::Time;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDoc {
    pub locations: usize,
    /// Row-major distance matrix, one inner array per row.
    pub dist: Vec<Vec<Time>>,
    pub agents: Vec<AgentDoc>,
    pub capacity: u64,
    /// Service time; 1 when omitted.
    #[serde(default = "unit_rho")]
    pub rho: Time,
    pub t_max: Time,
    #[serde(default)]
    pub stream: Vec<BatchDoc>,
}

fn unit_rho() -> Time {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentDoc {
    pub id: usize,
    pub start: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchDoc {
    pub arrival: Time,
    pub tasks: Vec<TaskDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskDoc {
    pub id: usize,
    pub start: usize,
    pub end: usize,
    pub deadline: Time,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanDoc {
    pub agents: Vec<AgentPlanDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentPlanDoc {
    pub id: usize,
    pub actions: Vec<ActionDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionDoc {
    pub kind: String,
    pub arg: u64,
}

fn parse_error(err: serde_json::Error) -> ModelError {
    ModelError::Parse {
        line: err.line(),
        column: err.column(),
        message: err.to_string(),
    }
}

impl InstanceDoc {
    pub fn into_model(self) -> Result<(Instance, TaskStream), ModelError> {
        if self.dist.len() != self.locations {
            return Err(ModelError::Invariant(format!(
                "`locations` is {} but `dist` has {} rows",
                self.locations,
                self.dist.len()
            )));
        }
        let graph = LocationGraph::new(self.dist)?;
        let mut seen = vec![false; self.agents.len()];
        for agent in &self.agents {
            if agent.id >= seen.len() || std::mem::replace(&mut seen[agent.id], true) {
                return Err(ModelError::Invariant(format!(
                    "agent ids must be unique and within 0..{}: got {}",
                    self.agents.len(),
                    agent.id
                )));
            }
        }
        let mut agents: Vec<AgentSpec> = self
            .agents
            .iter()
            .map(|a| AgentSpec {
                id: a.id,
                start: a.start,
            })
            .collect();
        agents.sort_by_key(|a| a.id);
        let instance = Instance::new(
            graph,
            agents,
            InstanceConfig {
                capacity: self.capacity,
                service_time: self.rho,
                t_max: self.t_max,
            },
        )?;
        let batches = self
            .stream
            .into_iter()
            .map(|b| Batch {
                arrival: b.arrival,
                tasks: b
                    .tasks
                    .into_iter()
                    .map(|t| Task {
                        id: t.id,
                        start: t.start,
                        end: t.end,
                        arrival: b.arrival,
                        deadline: t.deadline,
                    })
                    .collect(),
            })
            .collect();
        let stream = TaskStream::new(batches)?;
        instance.check_tasks(&stream)?;
        Ok((instance, stream))
    }

    pub fn from_model(instance: &Instance, stream: &TaskStream) -> Self {
        Self {
            locations: instance.graph.n_locations(),
            dist: instance.graph.weights().to_vec(),
            agents: instance
                .agents
                .iter()
                .map(|a| AgentDoc {
                    id: a.id,
                    start: a.start,
                })
                .collect(),
            capacity: instance.config.capacity,
            rho: instance.config.service_time,
            t_max: instance.config.t_max,
            stream: stream
                .batches()
                .iter()
                .map(|b| BatchDoc {
                    arrival: b.arrival,
                    tasks: b
                        .tasks
                        .iter()
                        .map(|t| TaskDoc {
                            id: t.id,
                            start: t.start,
                            end: t.end,
                            deadline: t.deadline,
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

/// Parses and fully validates an instance document, including the horizon
/// check against the complete stream.
pub fn load_instance(text: &str) -> Result<(Instance, TaskStream), ModelError> {
    let doc: InstanceDoc = serde_json::from_str(text).map_err(parse_error)?;
    let (instance, stream) = doc.into_model()?;
    instance.check_horizon(&stream)?;
    Ok((instance, stream))
}

pub fn instance_to_document(instance: &Instance, stream: &TaskStream) -> String {
    let doc = InstanceDoc::from_model(instance, stream);
    serde_json::to_string_pretty(&doc).expect("instance document serializes")
}

pub fn parse_plan(text: &str) -> Result<Plan, ModelError> {
    let doc: PlanDoc = serde_json::from_str(text).map_err(parse_error)?;
    let n = doc.agents.len();
    let mut sequences = vec![None; n];
    for agent in doc.agents {
        if agent.id >= n || sequences[agent.id].is_some() {
            return Err(ModelError::Invariant(format!(
                "plan agent ids must be unique and within 0..{n}: got {}",
                agent.id
            )));
        }
        let actions = agent
            .actions
            .iter()
            .map(|a| match a.kind.as_str() {
                "M" => Ok(Action::Move(a.arg as usize)),
                "P" => Ok(Action::Pick(a.arg as usize)),
                "D" => Ok(Action::Drop(a.arg as usize)),
                "W" if a.arg >= 1 => Ok(Action::Wait(a.arg)),
                "W" => Err(ModelError::Invariant("wait duration must be at least 1".into())),
                other => Err(ModelError::Invariant(format!(
                    "unknown action kind {other:?}, expected one of M, P, D, W"
                ))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        sequences[agent.id] = Some(actions);
    }
    Ok(Plan {
        sequences: sequences.into_iter().map(Option::unwrap_or_default).collect(),
    })
}

pub fn plan_to_document(plan: &Plan) -> String {
    let doc = PlanDoc {
        agents: plan
            .sequences
            .iter()
            .enumerate()
            .map(|(id, seq)| AgentPlanDoc {
                id,
                actions: seq
                    .iter()
                    .map(|a| {
                        let (kind, arg) = match *a {
                            Action::Move(l) => ("M", l as u64),
                            Action::Pick(t) => ("P", t as u64),
                            Action::Drop(t) => ("D", t as u64),
                            Action::Wait(w) => ("W", w),
                        };
                        ActionDoc {
                            kind: kind.to_string(),
                            arg,
                        }
                    })
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("plan document serializes")
}
