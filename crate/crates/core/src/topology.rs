//! Static sensing-node graph.
//!
//! A deployment is an undirected simple graph whose vertices are vehicles and
//! roadside units. Every vertex takes part in consensus on equal terms; the
//! role tag only lets a scenario treat RSUs differently when it wants to.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeRole {
    Vehicle,
    Rsu,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("a topology needs at least two nodes, got {0}")]
    TooFewNodes(usize),
    #[error("node index {index} out of range for {node_count} nodes")]
    IndexOutOfRange { index: usize, node_count: usize },
    #[error("self loop on node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("graph is disconnected: node {unreachable} is unreachable from node 0")]
    DisconnectedGraph { unreachable: usize },
    #[error("expected {expected} node roles, got {got}")]
    RoleCountMismatch { expected: usize, got: usize },
    #[error("invalid generator: {0}")]
    InvalidGenerator(String),
}

/// Connected undirected simple graph over `node_count` sensing nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    node_count: usize,
    // row-major, node_count * node_count
    adjacency: Vec<bool>,
    pub(crate) neighbors: Vec<Vec<usize>>,
    roles: Vec<NodeRole>,
}

impl Topology {
    /// Builds a topology from an explicit edge list.
    ///
    /// Edges are unordered pairs; `(a, b)` and `(b, a)` are the same edge and
    /// listing both is a duplicate. Disconnected graphs are rejected here
    /// because consensus cannot converge on them.
    pub fn new(
        node_count: usize,
        edges: &[(usize, usize)],
        roles: Vec<NodeRole>,
    ) -> Result<Self, TopologyError> {
        if node_count < 2 {
            return Err(TopologyError::TooFewNodes(node_count));
        }
        if roles.len() != node_count {
            return Err(TopologyError::RoleCountMismatch {
                expected: node_count,
                got: roles.len(),
            });
        }
        let mut adjacency = vec![false; node_count * node_count];
        for &(a, b) in edges {
            for index in [a, b] {
                if index >= node_count {
                    return Err(TopologyError::IndexOutOfRange { index, node_count });
                }
            }
            if a == b {
                return Err(TopologyError::SelfLoop(a));
            }
            if adjacency[a * node_count + b] {
                return Err(TopologyError::DuplicateEdge(a, b));
            }
            adjacency[a * node_count + b] = true;
            adjacency[b * node_count + a] = true;
        }
        let neighbors = (0..node_count)
            .map(|i| {
                (0..node_count)
                    .filter(|&j| adjacency[i * node_count + j])
                    .collect()
            })
            .collect();
        let topology = Self {
            node_count,
            adjacency,
            neighbors,
            roles,
        };
        if let Some(unreachable) = topology.first_unreachable() {
            return Err(TopologyError::DisconnectedGraph { unreachable });
        }
        Ok(topology)
    }

    /// Same as [`Topology::new`] with every node tagged as a vehicle.
    pub fn with_vehicles(node_count: usize, edges: &[(usize, usize)]) -> Result<Self, TopologyError> {
        Self::new(node_count, edges, vec![NodeRole::Vehicle; node_count])
    }

    pub fn path(node_count: usize) -> Result<Self, TopologyError> {
        let edges: Vec<_> = (1..node_count).map(|i| (i - 1, i)).collect();
        Self::with_vehicles(node_count, &edges)
    }

    pub fn ring(node_count: usize) -> Result<Self, TopologyError> {
        if node_count < 3 {
            return Err(TopologyError::InvalidGenerator(format!(
                "a ring needs at least three nodes, got {node_count}"
            )));
        }
        let edges: Vec<_> = (0..node_count).map(|i| (i, (i + 1) % node_count)).collect();
        Self::with_vehicles(node_count, &edges)
    }

    pub fn complete(node_count: usize) -> Result<Self, TopologyError> {
        let mut edges = Vec::new();
        for i in 0..node_count {
            for j in i + 1..node_count {
                edges.push((i, j));
            }
        }
        Self::with_vehicles(node_count, &edges)
    }

    /// Node 0 is the hub, every other node a leaf.
    pub fn star(node_count: usize) -> Result<Self, TopologyError> {
        let edges: Vec<_> = (1..node_count).map(|leaf| (0, leaf)).collect();
        Self::with_vehicles(node_count, &edges)
    }

    /// Random spanning tree plus each remaining pair with probability
    /// `extra_edge_probability`. Deterministic in `seed`.
    pub fn random_connected(
        node_count: usize,
        extra_edge_probability: f64,
        seed: u64,
    ) -> Result<Self, TopologyError> {
        if !(0.0..=1.0).contains(&extra_edge_probability) {
            return Err(TopologyError::InvalidGenerator(format!(
                "edge probability {extra_edge_probability} outside [0, 1]"
            )));
        }
        if node_count < 2 {
            return Err(TopologyError::TooFewNodes(node_count));
        }
        let mut rng = SimRng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..node_count).collect();
        order.shuffle(&mut rng);
        let mut linked = vec![false; node_count * node_count];
        let mut edges = Vec::new();
        for k in 1..node_count {
            let parent = order[rng.random_range(0..k)];
            let child = order[k];
            linked[parent * node_count + child] = true;
            linked[child * node_count + parent] = true;
            edges.push((parent.min(child), parent.max(child)));
        }
        for i in 0..node_count {
            for j in i + 1..node_count {
                if !linked[i * node_count + j] && rng.random_bool(extra_edge_probability) {
                    edges.push((i, j));
                }
            }
        }
        edges.sort_unstable();
        Self::with_vehicles(node_count, &edges)
    }

    /// Returns a copy with the given nodes re-tagged as roadside units.
    pub fn with_rsu_nodes(mut self, rsu_nodes: &[usize]) -> Result<Self, TopologyError> {
        for &index in rsu_nodes {
            self.check_index(index)?;
            self.roles[index] = NodeRole::Rsu;
        }
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn roles(&self) -> &[NodeRole] {
        &self.roles
    }

    pub fn role(&self, i: usize) -> Result<NodeRole, TopologyError> {
        self.check_index(i)?;
        Ok(self.roles[i])
    }

    /// `a_ij`; false for out-of-range indices.
    pub fn is_adjacent(&self, i: usize, j: usize) -> bool {
        i < self.node_count && j < self.node_count && self.adjacency[i * self.node_count + j]
    }

    /// Adjacency matrix as 0/1 rows.
    pub fn adjacency_matrix(&self) -> Vec<Vec<u8>> {
        self.adjacency
            .chunks(self.node_count)
            .map(|row| row.iter().map(|&a| u8::from(a)).collect())
            .collect()
    }

    /// One-hop neighbor set `N(i)`, ascending.
    pub fn neighbors(&self, i: usize) -> Result<&[usize], TopologyError> {
        self.check_index(i)?;
        Ok(&self.neighbors[i])
    }

    pub fn degree(&self, i: usize) -> Result<usize, TopologyError> {
        Ok(self.neighbors(i)?.len())
    }

    pub fn max_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Exclusive upper bound on the consensus step size, `1 / max_i |N(i)|`.
    pub fn epsilon_upper_bound(&self) -> f64 {
        1.0 / self.max_degree() as f64
    }

    /// Edge list with `a < b`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::new();
        for (i, row) in self.neighbors.iter().enumerate() {
            edges.extend(row.iter().filter(|&&j| j > i).map(|&j| (i, j)));
        }
        edges
    }

    fn check_index(&self, index: usize) -> Result<(), TopologyError> {
        if index < self.node_count {
            Ok(())
        } else {
            Err(TopologyError::IndexOutOfRange {
                index,
                node_count: self.node_count,
            })
        }
    }

    fn first_unreachable(&self) -> Option<usize> {
        let mut seen = vec![false; self.node_count];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for &j in &self.neighbors[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen.iter().position(|&s| !s)
    }
}

/// Topology description as it appears in a scenario configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TopologySpec {
    Complete {
        #[serde(default)]
        rsu_nodes: Vec<usize>,
    },
    Ring {
        #[serde(default)]
        rsu_nodes: Vec<usize>,
    },
    Star {
        #[serde(default)]
        rsu_nodes: Vec<usize>,
    },
    Path {
        #[serde(default)]
        rsu_nodes: Vec<usize>,
    },
    RandomConnected {
        edge_probability: f64,
        seed: u64,
        #[serde(default)]
        rsu_nodes: Vec<usize>,
    },
    Edges {
        edges: Vec<(usize, usize)>,
        #[serde(default)]
        rsu_nodes: Vec<usize>,
    },
}

impl Default for TopologySpec {
    fn default() -> Self {
        TopologySpec::Complete { rsu_nodes: Vec::new() }
    }
}

impl TopologySpec {
    pub fn build(&self, node_count: usize) -> Result<Topology, TopologyError> {
        let (topology, rsu_nodes) = match self {
            TopologySpec::Complete { rsu_nodes } => (Topology::complete(node_count)?, rsu_nodes),
            TopologySpec::Ring { rsu_nodes } => (Topology::ring(node_count)?, rsu_nodes),
            TopologySpec::Star { rsu_nodes } => (Topology::star(node_count)?, rsu_nodes),
            TopologySpec::Path { rsu_nodes } => (Topology::path(node_count)?, rsu_nodes),
            TopologySpec::RandomConnected {
                edge_probability,
                seed,
                rsu_nodes,
            } => (
                Topology::random_connected(node_count, *edge_probability, *seed)?,
                rsu_nodes,
            ),
            TopologySpec::Edges { edges, rsu_nodes } => {
                (Topology::with_vehicles(node_count, edges)?, rsu_nodes)
            }
        };
        topology.with_rsu_nodes(rsu_nodes)
    }
}
