//! Pairwise trust and the consensus weights derived from it.
//!
//! Node `i` keeps `T_ij` in `[0, 1]` for each neighbor `j`. Every iteration it
//! compares what `j` reported against its own current value and moves `T_ij`
//! by `eta * (tol - d) / tol`, clamped to `[0, 1]`. Reports closer than the
//! tolerance raise trust; reports further away lower it.
//!
//! Weights follow `w_ij = T_ij / (1 + sum_{j' in N(i)} T_ij')`, so the weights
//! of one node always sum to strictly less than one.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::Topology;

pub const DEFAULT_INITIAL_TRUST: f64 = 0.5;
pub const DEFAULT_LEARNING_RATE: f64 = 0.1;
pub const DEFAULT_DEVIATION_TOLERANCE_DB: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrustError {
    #[error("invalid trust parameters: {0}")]
    InvalidParams(String),
    #[error("node {neighbor} is not a neighbor of node {node}")]
    NotNeighbor { node: usize, neighbor: usize },
    #[error("node {node} has no report from neighbor {neighbor}")]
    MissingReport { node: usize, neighbor: usize },
    #[error("node {node} received a report from non-neighbor {reporter}")]
    UnknownNeighbor { node: usize, reporter: usize },
    #[error("node index {index} out of range for {node_count} nodes")]
    IndexOutOfRange { index: usize, node_count: usize },
}

/// How trust evolves during a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrustScheme {
    /// Deviation-driven update every iteration.
    #[default]
    Deviation,
    /// Trust stays at its initial value; weights are fixed.
    Static,
}

impl TrustScheme {
    pub const REGISTERED: [&'static str; 2] = ["deviation", "static"];

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "deviation" => Some(TrustScheme::Deviation),
            "static" => Some(TrustScheme::Static),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TrustScheme::Deviation => "deviation",
            TrustScheme::Static => "static",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrustParams {
    pub initial_trust: f64,
    /// `eta`
    pub learning_rate: f64,
    pub deviation_tolerance_db: f64,
}

impl Default for TrustParams {
    fn default() -> Self {
        Self {
            initial_trust: DEFAULT_INITIAL_TRUST,
            learning_rate: DEFAULT_LEARNING_RATE,
            deviation_tolerance_db: DEFAULT_DEVIATION_TOLERANCE_DB,
        }
    }
}

impl TrustParams {
    pub fn validate(&self) -> Result<(), TrustError> {
        if !(0.0..=1.0).contains(&self.initial_trust) {
            return Err(TrustError::InvalidParams(format!(
                "initial_trust {} outside [0, 1]",
                self.initial_trust
            )));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(TrustError::InvalidParams(format!(
                "learning_rate {} must be positive",
                self.learning_rate
            )));
        }
        if !(self.deviation_tolerance_db.is_finite() && self.deviation_tolerance_db > 0.0) {
            return Err(TrustError::InvalidParams(format!(
                "deviation_tolerance_db {} must be positive",
                self.deviation_tolerance_db
            )));
        }
        Ok(())
    }

    /// Trust after one deviation-driven step from `current`.
    pub fn step(&self, current: f64, deviation_db: f64) -> f64 {
        let tol = self.deviation_tolerance_db;
        (current + self.learning_rate * (tol - deviation_db) / tol).clamp(0.0, 1.0)
    }
}

/// Trust held by every node toward each of its neighbors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustState {
    node_count: usize,
    // row i holds node i's view; only neighbor entries are meaningful
    trust: Vec<f64>,
    params: TrustParams,
    scheme: TrustScheme,
}

impl TrustState {
    /// Uniform `initial_trust` on every neighbor pair.
    pub fn init(topology: &Topology, params: TrustParams) -> Result<Self, TrustError> {
        Self::with_scheme(topology, params, TrustScheme::Deviation)
    }

    pub fn with_scheme(
        topology: &Topology,
        params: TrustParams,
        scheme: TrustScheme,
    ) -> Result<Self, TrustError> {
        params.validate()?;
        let n = topology.node_count();
        let mut trust = vec![0.0; n * n];
        for (i, j) in topology.edges() {
            trust[i * n + j] = params.initial_trust;
            trust[j * n + i] = params.initial_trust;
        }
        Ok(Self {
            node_count: n,
            trust,
            params,
            scheme,
        })
    }

    pub fn params(&self) -> &TrustParams {
        &self.params
    }

    pub fn scheme(&self) -> TrustScheme {
        self.scheme
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// `T_ij`: how much `i` trusts `j`. Zero for non-neighbors.
    pub fn trust(&self, i: usize, j: usize) -> f64 {
        self.trust[i * self.node_count + j]
    }

    /// Overrides `T_ij`.
    pub fn set_trust(
        &mut self,
        topology: &Topology,
        i: usize,
        j: usize,
        value: f64,
    ) -> Result<(), TrustError> {
        self.check_neighbor(topology, i, j)?;
        if !(0.0..=1.0).contains(&value) {
            return Err(TrustError::InvalidParams(format!("trust {value} outside [0, 1]")));
        }
        self.trust[i * self.node_count + j] = value;
        Ok(())
    }

    /// Consensus weight `w_ij`.
    pub fn weight(&self, topology: &Topology, i: usize, j: usize) -> Result<f64, TrustError> {
        self.check_neighbor(topology, i, j)?;
        Ok(self.trust(i, j) / self.denominator(topology, i))
    }

    /// Weights of node `i` toward `topology.neighbors(i)`, in the same order.
    pub fn weights(&self, topology: &Topology, i: usize) -> Result<Vec<f64>, TrustError> {
        let neighbors = self.neighbors_of(topology, i)?;
        let denom = self.denominator(topology, i);
        Ok(neighbors.iter().map(|&j| self.trust(i, j) / denom).collect())
    }

    /// Applies one deviation-driven update to node `i`'s trust row.
    ///
    /// `reports` must hold exactly one value per neighbor of `i`.
    pub fn update_trust(
        &mut self,
        topology: &Topology,
        i: usize,
        own_value_db: f64,
        reports: &BTreeMap<usize, f64>,
    ) -> Result<(), TrustError> {
        let neighbors = self.neighbors_of(topology, i)?;
        if let Some(&reporter) = reports.keys().find(|&&r| !topology.is_adjacent(i, r)) {
            return Err(TrustError::UnknownNeighbor { node: i, reporter });
        }
        if let Some(&neighbor) = neighbors.iter().find(|j| !reports.contains_key(j)) {
            return Err(TrustError::MissingReport { node: i, neighbor });
        }
        for &j in neighbors {
            self.apply(i, j, own_value_db, reports[&j]);
        }
        Ok(())
    }

    /// Like [`TrustState::update_trust`] but reads reports from a vector
    /// indexed by node, which always covers `N(i)`.
    pub(crate) fn update_from_broadcast(
        &mut self,
        topology: &Topology,
        i: usize,
        own_value_db: f64,
        reported: &[f64],
    ) {
        for &j in &topology.neighbors[i] {
            self.apply(i, j, own_value_db, reported[j]);
        }
    }

    fn apply(&mut self, i: usize, j: usize, own_value_db: f64, report_db: f64) {
        let idx = i * self.node_count + j;
        let deviation = (report_db - own_value_db).abs();
        self.trust[idx] = self.params.step(self.trust[idx], deviation);
    }

    pub(crate) fn denominator(&self, topology: &Topology, i: usize) -> f64 {
        1.0 + topology.neighbors[i].iter().map(|&j| self.trust(i, j)).sum::<f64>()
    }

    fn neighbors_of<'t>(&self, topology: &'t Topology, i: usize) -> Result<&'t [usize], TrustError> {
        topology.neighbors(i).map_err(|_| TrustError::IndexOutOfRange {
            index: i,
            node_count: topology.node_count(),
        })
    }

    fn check_neighbor(&self, topology: &Topology, i: usize, j: usize) -> Result<(), TrustError> {
        self.neighbors_of(topology, i)?;
        if topology.is_adjacent(i, j) {
            Ok(())
        } else {
            Err(TrustError::NotNeighbor { node: i, neighbor: j })
        }
    }
}
