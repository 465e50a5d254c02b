//! Trust-weighted average consensus and the final PU decision.
//!
//! Each honest node moves toward what its neighbors reported:
//!
//! ```text
//! x_i(k+1) = x_i(k) + eps * sum_{j in N(i)} w_ij * (r_j(k) - x_i(k))
//! ```
//!
//! with `w_ij` from [`TrustState::weight`] and `0 < eps < 1 / max_i |N(i)|`.
//! A round is synchronous: every node broadcasts (attackers falsify), honest
//! nodes update trust from the reports, then honest nodes update values.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack::{AttackError, AttackProfile};
use crate::sensing::EnergyMeasurement;
use crate::topology::Topology;
use crate::trust::{TrustError, TrustScheme, TrustState};

/// Default step size as a fraction of the topology's bound.
pub const DEFAULT_EPSILON_FRACTION: f64 = 0.9;
pub const DEFAULT_TOLERANCE_DB: f64 = 0.01;
pub const DEFAULT_MAX_ITERATIONS: usize = 500;
/// PU presence threshold, dB.
pub const DEFAULT_THRESHOLD_DB: f64 = 11.4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConsensusError {
    #[error("epsilon {epsilon} outside (0, {bound})")]
    EpsilonOutOfRange { epsilon: f64, bound: f64 },
    #[error("invalid consensus parameters: {0}")]
    InvalidParams(String),
    #[error("inconsistent inputs: {0}")]
    InconsistentInputs(String),
    #[error(transparent)]
    Trust(#[from] TrustError),
    #[error(transparent)]
    Attack(#[from] AttackError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsensusParams {
    pub epsilon: f64,
    pub tolerance_db: f64,
    pub max_iterations: usize,
    pub threshold_db: f64,
}

impl ConsensusParams {
    /// Defaults for `topology`: `eps = 0.9 / max degree`.
    pub fn for_topology(topology: &Topology) -> Self {
        Self {
            epsilon: DEFAULT_EPSILON_FRACTION * topology.epsilon_upper_bound(),
            tolerance_db: DEFAULT_TOLERANCE_DB,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            threshold_db: DEFAULT_THRESHOLD_DB,
        }
    }

    pub fn validate(&self, topology: &Topology) -> Result<(), ConsensusError> {
        check_epsilon(topology, self.epsilon)?;
        if !(self.tolerance_db.is_finite() && self.tolerance_db > 0.0) {
            return Err(ConsensusError::InvalidParams(format!(
                "tolerance_db {} must be positive",
                self.tolerance_db
            )));
        }
        if self.max_iterations == 0 {
            return Err(ConsensusError::InvalidParams("max_iterations must be at least 1".into()));
        }
        if !self.threshold_db.is_finite() {
            return Err(ConsensusError::InvalidParams("threshold_db must be finite".into()));
        }
        Ok(())
    }
}

fn check_epsilon(topology: &Topology, epsilon: f64) -> Result<(), ConsensusError> {
    let bound = topology.epsilon_upper_bound();
    if epsilon > 0.0 && epsilon < bound {
        Ok(())
    } else {
        Err(ConsensusError::EpsilonOutOfRange { epsilon, bound })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Present,
    Absent,
    Undecided,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Present => "present",
            Decision::Absent => "absent",
            Decision::Undecided => "undecided",
        }
    }

    pub fn from_ground_truth(pu_present: bool) -> Self {
        if pu_present {
            Decision::Present
        } else {
            Decision::Absent
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Threshold test. A value exactly at the threshold counts as present.
pub fn decide(x_star_db: f64, threshold_db: f64) -> Decision {
    if x_star_db >= threshold_db {
        Decision::Present
    } else {
        Decision::Absent
    }
}

/// One synchronous consensus update for every node.
///
/// `reported[j]` is what node `j` broadcast this round. Entries for attacker
/// nodes are computed like any other and are expected to be overwritten by
/// the caller.
pub fn consensus_step(
    topology: &Topology,
    values: &[f64],
    reported: &[f64],
    trust: &TrustState,
    epsilon: f64,
) -> Result<Vec<f64>, ConsensusError> {
    check_epsilon(topology, epsilon)?;
    let n = topology.node_count();
    if values.len() != n || reported.len() != n || trust.node_count() != n {
        return Err(ConsensusError::InconsistentInputs(format!(
            "expected {n} values, reports and trust rows; got {}, {}, {}",
            values.len(),
            reported.len(),
            trust.node_count()
        )));
    }
    Ok(step_unchecked(topology, values, reported, trust, epsilon))
}

fn step_unchecked(
    topology: &Topology,
    values: &[f64],
    reported: &[f64],
    trust: &TrustState,
    epsilon: f64,
) -> Vec<f64> {
    values
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let pull: f64 = topology.neighbors[i]
                .iter()
                .map(|&j| trust.trust(i, j) * (reported[j] - x))
                .sum();
            x + epsilon * pull / trust.denominator(topology, i)
        })
        .collect()
}

/// Full record of one consensus run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusRun {
    /// `trace[k]` is the value vector `x(k)`, for `k = 0..=iterations_used`.
    pub trace: Vec<Vec<f64>>,
    /// `reported[k]` is what each node broadcast in round `k`.
    pub reported: Vec<Vec<f64>>,
    /// `trust_trace[k]` is the trust in effect when `x(k)` is current.
    pub trust_trace: Vec<TrustState>,
    /// Attacker node indices, ascending.
    pub attackers: Vec<usize>,
    pub converged: bool,
    pub iterations_used: usize,
    pub decision: Decision,
    /// Honest-node mean at the stopping iteration.
    pub consensus_value: f64,
}

impl ConsensusRun {
    pub fn is_attacker(&self, node: usize) -> bool {
        self.attackers.binary_search(&node).is_ok()
    }

    pub fn node_count(&self) -> usize {
        self.trace[0].len()
    }

    pub fn honest_nodes(&self) -> Vec<usize> {
        (0..self.node_count()).filter(|&i| !self.is_attacker(i)).collect()
    }

    pub fn final_values(&self) -> &[f64] {
        self.trace.last().expect("trace holds x(0)")
    }

    pub fn final_trust(&self) -> &TrustState {
        self.trust_trace.last().expect("trust trace holds T(0)")
    }

    /// Max minus min over honest nodes at iteration `k`.
    pub fn honest_spread(&self, k: usize) -> f64 {
        let mask: Vec<bool> = (0..self.node_count()).map(|i| self.is_attacker(i)).collect();
        spread(&self.trace[k], &mask)
    }
}

fn spread(values: &[f64], is_attacker: &[bool]) -> f64 {
    let (lo, hi) = values
        .iter()
        .zip(is_attacker)
        .filter(|(_, &a)| !a)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&v, _)| {
            (lo.min(v), hi.max(v))
        });
    hi - lo
}

fn honest_mean(values: &[f64], is_attacker: &[bool]) -> f64 {
    let (sum, count) = values
        .iter()
        .zip(is_attacker)
        .filter(|(_, &a)| !a)
        .fold((0.0, 0usize), |(s, c), (&v, _)| (s + v, c + 1));
    sum / count as f64
}

/// Runs consensus from the initial readings until the honest spread is at
/// most `params.tolerance_db` or `params.max_iterations` rounds have passed.
///
/// Attackers keep their sensed value as internal state and broadcast what
/// their profile dictates. Trust is updated each round unless `trust` uses
/// [`TrustScheme::Static`].
pub fn run_consensus<R: Rng + ?Sized>(
    topology: &Topology,
    initial: &[EnergyMeasurement],
    mut trust: TrustState,
    params: &ConsensusParams,
    attackers: &[AttackProfile],
    rng: &mut R,
) -> Result<ConsensusRun, ConsensusError> {
    params.validate(topology)?;
    let n = topology.node_count();
    let inconsistent = |msg: String| Err(ConsensusError::InconsistentInputs(msg));

    let mut values = vec![f64::NAN; n];
    for m in initial {
        if m.node >= n {
            return inconsistent(format!("measurement for node {} out of range", m.node));
        }
        if !values[m.node].is_nan() {
            return inconsistent(format!("duplicate measurement for node {}", m.node));
        }
        if !m.value_db.is_finite() {
            return inconsistent(format!("non-finite measurement at node {}", m.node));
        }
        values[m.node] = m.value_db;
    }
    if let Some(missing) = values.iter().position(|v| v.is_nan()) {
        return inconsistent(format!("no measurement for node {missing}"));
    }
    if trust.node_count() != n {
        return inconsistent(format!("trust state covers {} nodes, topology {n}", trust.node_count()));
    }

    let mut is_attacker = vec![false; n];
    let mut profiles = attackers.to_vec();
    profiles.sort_by_key(|a| a.node);
    for a in &profiles {
        a.validate()?;
        if a.node >= n {
            return inconsistent(format!("attacker node {} out of range", a.node));
        }
        if is_attacker[a.node] {
            return inconsistent(format!("node {} has more than one attack profile", a.node));
        }
        is_attacker[a.node] = true;
    }
    if is_attacker.iter().all(|&a| a) {
        return inconsistent("every node is an attacker".into());
    }

    let adaptive = trust.scheme() == TrustScheme::Deviation;
    let mut trace = vec![values.clone()];
    let mut reported_trace = Vec::new();
    let mut trust_trace = vec![trust.clone()];
    let mut k = 0;
    let converged = loop {
        let mut reported = values.clone();
        for a in &profiles {
            reported[a.node] = a.falsify(k, values[a.node], rng)?;
        }
        reported_trace.push(reported.clone());

        if spread(&values, &is_attacker) <= params.tolerance_db {
            break true;
        }
        if k == params.max_iterations {
            break false;
        }

        if adaptive {
            for i in (0..n).filter(|&i| !is_attacker[i]) {
                trust.update_from_broadcast(topology, i, values[i], &reported);
            }
        }
        let mut next = step_unchecked(topology, &values, &reported, &trust, params.epsilon);
        for a in &profiles {
            next[a.node] = values[a.node];
        }
        values = next;
        k += 1;
        trace.push(values.clone());
        trust_trace.push(trust.clone());
    };

    let consensus_value = honest_mean(&values, &is_attacker);
    let decision = if converged {
        decide(consensus_value, params.threshold_db)
    } else {
        Decision::Undecided
    };
    Ok(ConsensusRun {
        trace,
        reported: reported_trace,
        trust_trace,
        attackers: profiles.iter().map(|a| a.node).collect(),
        converged,
        iterations_used: k,
        decision,
        consensus_value,
    })
}
