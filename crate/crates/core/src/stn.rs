//! The merged Search Trajectory Network of a dataset.
//!
//! Nodes are locations (a distinct solution, or a cluster of solutions when a
//! partition is supplied). Every trajectory is mapped to its sequence of
//! locations with consecutive repeats collapsed; that walk contributes one
//! visit per distinct node and one traversal per step along an edge.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::partition::PartitionResult;
use crate::trajectory::{fitness_eq, Dataset, Sense, SolutionPoint};

/// Index of a node in [`Stn::nodes`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct LocationId(pub usize);

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StnNode {
    pub id: LocationId,
    /// Solution text, or `c<cluster id>` for clustered locations.
    pub label: String,
    pub best_fitness_at_node: f64,
    pub is_start: bool,
    pub is_end: bool,
    pub is_best: bool,
    pub is_shared: bool,
    /// Trajectories of each algorithm passing through the node, in algorithm order.
    pub visits: Vec<usize>,
}

impl StnNode {
    pub fn total_visits(&self) -> usize {
        self.visits.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StnEdge {
    pub from: LocationId,
    pub to: LocationId,
    /// Traversal count per algorithm, in algorithm order.
    pub traversals: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Stn {
    pub nodes: Vec<StnNode>,
    pub edges: Vec<StnEdge>,
    pub algorithms: Vec<String>,
    pub best_global_fitness: f64,
    pub sense: Sense,
    /// Collapsed walk of every trajectory, `walks[algorithm][trajectory]`.
    pub walks: Vec<Vec<Vec<LocationId>>>,
}

#[derive(Debug, Error, PartialEq)]
pub enum StnError {
    #[error("partition does not cover solution `{0}`")]
    PartitionGap(String),
}

impl Stn {
    /// Location sets of each trajectory of one algorithm.
    pub fn location_sets(&self, algorithm: usize) -> Vec<HashSet<LocationId>> {
        self.walks[algorithm]
            .iter()
            .map(|w| w.iter().copied().collect())
            .collect()
    }

    pub fn edge(&self, from: LocationId, to: LocationId) -> Option<&StnEdge> {
        self.edges.iter().find(|e| e.from == from && e.to == to)
    }
}

pub fn build_stn(dataset: &Dataset, partition: Option<&PartitionResult>) -> Result<Stn, StnError> {
    let algo_count = dataset.algorithms.len();
    let best_global = dataset.best_global_fitness();
    let sense = dataset.sense;

    // Location key: cluster id under a partition, otherwise the solution itself.
    #[derive(PartialEq, Eq, Hash)]
    enum Key<'a> {
        Cluster(usize),
        Point(&'a SolutionPoint),
    }

    let mut index: HashMap<Key, LocationId> = HashMap::new();
    let mut nodes: Vec<StnNode> = Vec::new();
    let mut edge_index: BTreeMap<(LocationId, LocationId), usize> = BTreeMap::new();
    let mut edges: Vec<StnEdge> = Vec::new();
    let mut walks = Vec::with_capacity(algo_count);

    for (a, algo) in dataset.algorithms.iter().enumerate() {
        let mut algo_walks = Vec::with_capacity(algo.trajectories.len());
        for traj in &algo.trajectories {
            let mut walk: Vec<LocationId> = Vec::new();
            for step in &traj.steps {
                let (key, label) = match partition {
                    Some(p) => {
                        let c = p
                            .cluster(&step.solution)
                            .ok_or_else(|| StnError::PartitionGap(step.solution.to_string()))?;
                        (Key::Cluster(c), format!("c{c}"))
                    }
                    None => (Key::Point(&step.solution), String::new()),
                };
                let id = *index.entry(key).or_insert_with(|| {
                    let id = LocationId(nodes.len());
                    nodes.push(StnNode {
                        id,
                        label: if label.is_empty() {
                            step.solution.to_string()
                        } else {
                            label
                        },
                        best_fitness_at_node: step.fitness,
                        is_start: false,
                        is_end: false,
                        is_best: false,
                        is_shared: false,
                        visits: vec![0; algo_count],
                    });
                    id
                });
                let node = &mut nodes[id.0];
                node.best_fitness_at_node = sense.best_of(node.best_fitness_at_node, step.fitness);
                if walk.last() != Some(&id) {
                    walk.push(id);
                }
            }

            nodes[walk[0].0].is_start = true;
            nodes[walk[walk.len() - 1].0].is_end = true;
            let distinct: HashSet<LocationId> = walk.iter().copied().collect();
            for id in distinct {
                nodes[id.0].visits[a] += 1;
            }
            for pair in walk.windows(2) {
                let slot = *edge_index.entry((pair[0], pair[1])).or_insert_with(|| {
                    edges.push(StnEdge {
                        from: pair[0],
                        to: pair[1],
                        traversals: vec![0; algo_count],
                    });
                    edges.len() - 1
                });
                edges[slot].traversals[a] += 1;
            }
            algo_walks.push(walk);
        }
        walks.push(algo_walks);
    }

    for node in &mut nodes {
        node.is_best = fitness_eq(node.best_fitness_at_node, best_global);
        node.is_shared = node.visits.iter().filter(|&&v| v > 0).count() >= 2;
    }

    Ok(Stn {
        nodes,
        edges,
        algorithms: dataset.algorithms.iter().map(|a| a.name.clone()).collect(),
        best_global_fitness: best_global,
        sense,
        walks,
    })
}
