// SPDX-License-Identifier: Apache-2.0

//! Seeded instance and stream generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{AgentSpec, Batch, Instance, InstanceConfig, LocationGraph, Task, TaskStream};
use crate::Time;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphSource {
    /// Random integer weights closed under shortest paths.
    Random,
    /// The bundled 20-location sample workspace.
    Hospital,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenParams {
    pub n_agents: usize,
    pub n_tasks: usize,
    /// Ignored for the bundled graph.
    pub n_locations: usize,
    pub graph: GraphSource,
    /// Upper bound of random edge weights before closure.
    pub max_weight: Time,
    pub capacity: u64,
    pub rho: Time,
    pub seed: u64,
    /// Relative deadline drawn uniformly from `deadline_lo..=deadline_hi`.
    pub deadline_lo: Time,
    pub deadline_hi: Time,
    /// One task per `arrival_gap` time units.
    pub arrival_gap: Time,
    pub batch_size: usize,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            n_agents: 5,
            n_tasks: 10,
            n_locations: 20,
            graph: GraphSource::Hospital,
            max_weight: 20,
            capacity: 3,
            rho: 1,
            seed: 0,
            deadline_lo: 300,
            deadline_hi: 500,
            arrival_gap: 8,
            batch_size: 1,
        }
    }
}

impl GenParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.deadline_lo > self.deadline_hi {
            return Err(format!("deadline range {}..{} is empty", self.deadline_lo, self.deadline_hi));
        }
        if self.n_agents == 0 || self.n_tasks == 0 || self.batch_size == 0 || self.capacity == 0 || self.rho == 0 {
            return Err("counts, capacity and service time must be at least 1".into());
        }
        if self.graph == GraphSource::Random && (self.n_locations < 2 || self.max_weight == 0) {
            return Err("random graphs need at least 2 locations and positive weights".into());
        }
        if self.arrival_gap == 0 {
            return Err("arrival gap must be positive".into());
        }
        Ok(())
    }
}

/// Random metric graph with the default weight bound.
pub fn gen_graph(n_locations: usize, seed: u64) -> LocationGraph {
    gen_graph_with(n_locations, seed, GenParams::default().max_weight)
}

/// Symmetric weights drawn from `1..=max_weight`, then replaced by
/// all-pairs shortest-path distances.
pub fn gen_graph_with(n_locations: usize, seed: u64, max_weight: Time) -> LocationGraph {
    assert!(n_locations >= 2, "need at least two locations");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_locations;
    let mut w = vec![vec![0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let x = rng.gen_range(1..=max_weight);
            w[i][j] = x;
            w[j][i] = x;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = w[i][k] + w[k][j];
                if via < w[i][j] {
                    w[i][j] = via;
                }
            }
        }
    }
    LocationGraph::new(w).expect("shortest-path closure is metric")
}

/// Grid coordinates of the sample workspace: four wards along two
/// corridors, a central station and a far storage room.
const HOSPITAL: [(i64, i64); 20] = [
    (0, 0),
    (4, 0),
    (8, 0),
    (12, 0),
    (16, 0),
    (4, 3),
    (12, 3),
    (0, 5),
    (16, 5),
    (6, 7),
    (10, 7),
    (0, 10),
    (4, 10),
    (8, 10),
    (12, 10),
    (16, 10),
    (2, 14),
    (8, 14),
    (14, 14),
    (8, 18),
];

/// The bundled sample graph: Manhattan distances between fixed points.
pub fn hospital_graph() -> LocationGraph {
    let w = HOSPITAL
        .iter()
        .map(|&(x1, y1)| {
            HOSPITAL
                .iter()
                .map(|&(x2, y2)| ((x1 - x2).abs() + (y1 - y2).abs()) as Time)
                .collect()
        })
        .collect();
    LocationGraph::new(w).expect("manhattan distances are metric")
}

fn world(params: &GenParams, rng: &mut ChaCha8Rng) -> LocationGraph {
    match params.graph {
        GraphSource::Random => gen_graph_with(params.n_locations, rng.gen(), params.max_weight),
        GraphSource::Hospital => hospital_graph(),
    }
}

fn assemble(params: &GenParams, graph: LocationGraph, rng: &mut ChaCha8Rng, batches: Vec<(Time, usize)>) -> (Instance, TaskStream) {
    let n_loc = graph.n_locations();
    let agents: Vec<AgentSpec> = (0..params.n_agents)
        .map(|id| AgentSpec {
            id,
            start: rng.gen_range(0..n_loc),
        })
        .collect();
    let mut next_id = 0;
    let mut out = Vec::new();
    for (arrival, count) in batches {
        let mut tasks = Vec::with_capacity(count);
        for _ in 0..count {
            let start = rng.gen_range(0..n_loc);
            let mut end = rng.gen_range(0..n_loc - 1);
            if end >= start {
                end += 1;
            }
            let deadline = arrival + rng.gen_range(params.deadline_lo..=params.deadline_hi);
            tasks.push(Task {
                id: next_id,
                start,
                end,
                arrival,
                deadline: deadline.max(1),
            });
            next_id += 1;
        }
        out.push(Batch { arrival, tasks });
    }
    let stream = TaskStream::new(out).expect("generated stream is well formed");
    let t_max = stream.max_deadline() + graph.max_weight() + 1;
    let instance = Instance::new(
        graph,
        agents,
        InstanceConfig {
            capacity: params.capacity,
            service_time: params.rho,
            t_max,
        },
    )
    .expect("generated instance is well formed");
    (instance, stream)
}

/// All tasks at time 0 in a single batch.
pub fn gen_static(params: &GenParams) -> (Instance, TaskStream) {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let graph = world(params, &mut rng);
    assemble(params, graph, &mut rng, vec![(0, params.n_tasks)])
}

/// One task every `arrival_gap` units, grouped into batches of
/// `batch_size` stamped with their first task's slot.
pub fn gen_stream(params: &GenParams) -> (Instance, TaskStream) {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let graph = world(params, &mut rng);
    let b = params.batch_size;
    let batches = (0..params.n_tasks)
        .step_by(b)
        .map(|first| (first as Time * params.arrival_gap, b.min(params.n_tasks - first)))
        .collect();
    assemble(params, graph, &mut rng, batches)
}

/// One generated document and the parameters that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub kind: String,
    pub params: GenParams,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}
