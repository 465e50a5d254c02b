//! End-to-end experiments: configuration, repeated consensus runs, and the
//! availability and latency sweeps.
//!
//! A configuration is a deployment template with an extra `scenario` block:
//!
//! ```json
//! {
//!   "number_of_servers": 6,
//!   "context": {"network": "cr-vanet"},
//!   "sensing_algorithm": {"name": "consensus-trust", "params": {"threshold_db": 11.4}},
//!   "trust_algorithm": {"name": "deviation", "params": {"learning_rate": 0.1}},
//!   "scenario": {
//!     "topology": {"kind": "complete"},
//!     "sensing": {"pu_present": true, "noise_std_db": 1.0},
//!     "attackers": [{"node": 5, "strategy": "constant", "value_db": 0.0}],
//!     "seed": 42,
//!     "repetitions": 100
//!   }
//! }
//! ```

use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::attack::{AttackError, AttackProfile, Strategy};
use crate::cloud::{
    self, AvailabilityModel, CloudError, CloudKind, DeploymentTemplate, LatencyModel, SensingMode, TemplateError,
    DEFAULT_HOSTS, DEFAULT_ROUNDS,
};
use crate::consensus::{self, ConsensusError, ConsensusParams, ConsensusRun, Decision};
use crate::sensing::{SensingError, SensingSpec};
use crate::topology::{Topology, TopologyError, TopologySpec};
use crate::trust::{TrustError, TrustState};
use crate::SimRng;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_REPETITIONS: usize = 100;
pub const DEFAULT_TRIALS: usize = 10_000;
pub const DEFAULT_P_AV_GRID: [f64; 7] = [0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90];
pub const DEFAULT_VM_COUNTS: [usize; 4] = [2, 4, 6, 8];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("configuration is not valid JSON: {0}")]
    Parse(String),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("invalid scenario block: {0}")]
    Config(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Sensing(#[from] SensingError),
    #[error(transparent)]
    Trust(#[from] TrustError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Consensus(#[from] ConsensusError),
    #[error(transparent)]
    Cloud(#[from] CloudError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AvailabilitySweep {
    pub p_av_grid: Vec<f64>,
    pub trials: usize,
    pub rounds: usize,
    pub n_hosts: usize,
    pub migration_enabled: bool,
}

impl Default for AvailabilitySweep {
    fn default() -> Self {
        Self {
            p_av_grid: DEFAULT_P_AV_GRID.to_vec(),
            trials: DEFAULT_TRIALS,
            rounds: DEFAULT_ROUNDS,
            n_hosts: DEFAULT_HOSTS,
            migration_enabled: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyParams {
    pub trust_fetch_ms: f64,
    pub exchange_ms: f64,
}

impl LatencyParams {
    fn model(self, cloud_kind: CloudKind) -> LatencyModel {
        LatencyModel {
            trust_fetch_ms: self.trust_fetch_ms,
            exchange_ms: self.exchange_ms,
            cloud_kind,
        }
    }

    fn defaults(cloud_kind: CloudKind) -> Self {
        let m = LatencyModel::defaults(cloud_kind);
        Self {
            trust_fetch_ms: m.trust_fetch_ms,
            exchange_ms: m.exchange_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatencySweep {
    pub vm_counts: Vec<usize>,
    pub rounds: usize,
    pub local: LatencyParams,
    pub conventional: LatencyParams,
}

impl Default for LatencySweep {
    fn default() -> Self {
        Self {
            vm_counts: DEFAULT_VM_COUNTS.to_vec(),
            rounds: DEFAULT_ROUNDS,
            local: LatencyParams::defaults(CloudKind::Local),
            conventional: LatencyParams::defaults(CloudKind::Conventional),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub availability: AvailabilitySweep,
    pub latency: LatencySweep,
}

/// The `scenario` extension block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioBlock {
    pub topology: TopologySpec,
    pub sensing: SensingSpec,
    pub attackers: Vec<AttackProfile>,
    pub seed: u64,
    pub repetitions: usize,
    pub sweep: SweepSpec,
}

impl Default for ScenarioBlock {
    fn default() -> Self {
        Self {
            topology: TopologySpec::default(),
            sensing: SensingSpec::default(),
            attackers: Vec::new(),
            seed: DEFAULT_SEED,
            repetitions: DEFAULT_REPETITIONS,
            sweep: SweepSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(flatten)]
    pub template: DeploymentTemplate,
    pub scenario: ScenarioBlock,
}

impl ScenarioConfig {
    /// Parses a configuration document. The template part is validated with
    /// [`cloud::validate_template_value`]; a missing `scenario` block means
    /// all scenario defaults.
    pub fn from_json(raw: &str) -> Result<Self, ScenarioError> {
        let doc: Value = serde_json::from_str(raw).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        let template = cloud::validate_template_value(&doc)?;
        let scenario = match doc.get("scenario") {
            None => ScenarioBlock::default(),
            Some(block) => {
                serde_json::from_value(block.clone()).map_err(|e| ScenarioError::Config(e.to_string()))?
            }
        };
        let config = Self { template, scenario };
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn node_count(&self) -> usize {
        self.template.number_of_servers
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let topology = self.topology()?;
        self.scenario.sensing.build(topology.node_count())?;
        self.consensus_params(&topology)?;
        self.template.trust_algorithm.params.validate()?;
        let n = topology.node_count();
        let mut seen = vec![false; n];
        for a in &self.scenario.attackers {
            a.validate()?;
            if a.node >= n {
                return Err(ScenarioError::InvalidParams(format!("attacker node {} out of range", a.node)));
            }
            if std::mem::replace(&mut seen[a.node], true) {
                return Err(ScenarioError::InvalidParams(format!("node {} listed twice as attacker", a.node)));
            }
        }
        let attackers = self.scenario.attackers.len();
        if 2 * attackers >= n {
            return Err(ScenarioError::InvalidParams(format!(
                "{attackers} attackers among {n} nodes; attackers must be fewer than half"
            )));
        }
        if 3 * attackers > n {
            log::warn!("{attackers} attackers among {n} nodes exceeds one third; expect degraded decisions");
        }
        if self.scenario.repetitions == 0 {
            return Err(ScenarioError::InvalidParams("repetitions must be at least 1".into()));
        }
        Ok(())
    }

    pub fn topology(&self) -> Result<Topology, ScenarioError> {
        Ok(self.scenario.topology.build(self.node_count())?)
    }

    pub fn consensus_params(&self, topology: &Topology) -> Result<ConsensusParams, ScenarioError> {
        let p = &self.template.sensing_algorithm.params;
        let defaults = ConsensusParams::for_topology(topology);
        let params = ConsensusParams {
            epsilon: p.epsilon.unwrap_or(defaults.epsilon),
            tolerance_db: p.tolerance_db,
            max_iterations: p.max_iterations,
            threshold_db: p.threshold_db,
        };
        params.validate(topology)?;
        Ok(params)
    }

    pub fn trust_state(&self, topology: &Topology) -> Result<TrustState, ScenarioError> {
        let alg = &self.template.trust_algorithm;
        Ok(TrustState::with_scheme(topology, alg.params, alg.scheme())?)
    }
}

/// Ready-made configurations for the reference experiments.
pub mod presets {
    use super::*;
    use crate::cloud::{SensingAlgorithm, SensingAlgorithmParams, TrustAlgorithm};
    use crate::trust::TrustParams;

    pub fn template(number_of_servers: usize) -> DeploymentTemplate {
        DeploymentTemplate {
            number_of_servers,
            context: [
                ("network".to_string(), Value::from("cr-vanet")),
                ("cloud".to_string(), Value::from("joint rsu and vehicle local cloud")),
            ]
            .into_iter()
            .collect(),
            sensing_algorithm: SensingAlgorithm {
                name: "consensus-trust".into(),
                params: SensingAlgorithmParams::default(),
            },
            trust_algorithm: TrustAlgorithm {
                name: "deviation".into(),
                params: TrustParams::default(),
            },
        }
    }

    /// Six virtual vehicles, complete graph, PU present, one attacker at
    /// node 5 constantly reporting 0 dB.
    pub fn one_attacker() -> ScenarioConfig {
        ScenarioConfig {
            template: template(6),
            scenario: ScenarioBlock {
                attackers: vec![AttackProfile::constant(5, 0.0)],
                ..ScenarioBlock::default()
            },
        }
    }

    /// [`one_attacker`] plus node 3 reporting uniform draws from [0, 5] dB.
    pub fn two_attackers() -> ScenarioConfig {
        let mut config = one_attacker();
        config.scenario.attackers.push(AttackProfile {
            node: 3,
            strategy: Strategy::RandomUniform {
                low_db: 0.0,
                high_db: 5.0,
            },
        });
        config
    }

    /// Same as [`one_attacker`] with trust held fixed at its initial value.
    pub fn without_trust(mut config: ScenarioConfig) -> ScenarioConfig {
        config.template.trust_algorithm.name = "static".into();
        config
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: usize,
    pub seed: u64,
    pub converged: bool,
    pub iterations: usize,
    pub decision: Decision,
    pub ground_truth: Decision,
    pub x_star_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Repetition {
    pub summary: RunSummary,
    pub run: ConsensusRun,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub mean: f64,
    pub median: usize,
    pub p90: usize,
    pub max: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AvailabilityPoint {
    pub p_av: f64,
    pub traditional: f64,
    pub ssaas: f64,
}

impl AvailabilityPoint {
    pub fn value(&self, mode: SensingMode) -> f64 {
        match mode {
            SensingMode::Traditional => self.traditional,
            SensingMode::Ssaas => self.ssaas,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyPoint {
    pub n_vms: usize,
    pub local_ms: f64,
    pub conventional_ms: f64,
}

impl LatencyPoint {
    pub fn value(&self, kind: CloudKind) -> f64 {
        match kind {
            CloudKind::Local => self.local_ms,
            CloudKind::Conventional => self.conventional_ms,
        }
    }

    pub fn ratio(&self) -> f64 {
        self.conventional_ms / self.local_ms
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub repetitions: Vec<Repetition>,
    /// Fraction of repetitions whose decision matches the ground truth.
    pub accuracy: Option<f64>,
    pub iterations: Option<IterationStats>,
    pub availability: Vec<AvailabilityPoint>,
    pub latency: Vec<LatencyPoint>,
}

impl ExperimentReport {
    pub fn summaries(&self) -> impl Iterator<Item = &RunSummary> {
        self.repetitions.iter().map(|r| &r.summary)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Mixes a stream index into a base seed (SplitMix64 finalizer).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One repetition: sense, then run consensus with the same random stream.
pub fn run_repetition(config: &ScenarioConfig, run_id: usize, seed: u64) -> Result<Repetition, ScenarioError> {
    let topology = config.topology()?;
    let sensing = config.scenario.sensing.build(topology.node_count())?;
    let params = config.consensus_params(&topology)?;
    let trust = config.trust_state(&topology)?;
    let mut rng = SimRng::seed_from_u64(seed);
    let initial = sensing.sense_all(&mut rng);
    let run = consensus::run_consensus(&topology, &initial, trust, &params, &config.scenario.attackers, &mut rng)?;
    let summary = RunSummary {
        run_id,
        seed,
        converged: run.converged,
        iterations: run.iterations_used,
        decision: run.decision,
        ground_truth: Decision::from_ground_truth(sensing.pu_present()),
        x_star_db: run.consensus_value,
    };
    Ok(Repetition { summary, run })
}

/// Runs every repetition (seeds `seed, seed + 1, ...`) and aggregates.
///
/// Repetitions execute in parallel; results are collected in run order so the
/// report does not depend on scheduling.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ExperimentReport, ScenarioError> {
    config.validate()?;
    let base = config.scenario.seed;
    let repetitions = (0..config.scenario.repetitions)
        .into_par_iter()
        .map(|r| run_repetition(config, r, base.wrapping_add(r as u64)))
        .collect::<Result<Vec<_>, _>>()?;

    let correct = repetitions
        .iter()
        .filter(|r| r.summary.decision == r.summary.ground_truth)
        .count();
    let accuracy = correct as f64 / repetitions.len() as f64;

    let mut counts: Vec<usize> = repetitions.iter().map(|r| r.summary.iterations).collect();
    let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
    counts.sort_unstable();
    let stats = IterationStats {
        mean,
        median: nearest_rank(&counts, 0.5),
        p90: nearest_rank(&counts, 0.9),
        max: *counts.last().expect("at least one repetition"),
    };

    Ok(ExperimentReport {
        repetitions,
        accuracy: Some(accuracy),
        iterations: Some(stats),
        ..ExperimentReport::default()
    })
}

fn nearest_rank(sorted: &[usize], q: f64) -> usize {
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank - 1]
}

/// Probability of success for both modes at each availability level.
///
/// `n_nodes` is the template's server count; rounds, hosts and migration come
/// from the configuration's availability sweep block.
pub fn sweep_availability(
    config: &ScenarioConfig,
    p_av_grid: &[f64],
    trials: usize,
) -> Result<ExperimentReport, ScenarioError> {
    if p_av_grid.is_empty() {
        return Err(ScenarioError::InvalidParams("availability grid is empty".into()));
    }
    if let Some(p) = p_av_grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(ScenarioError::InvalidParams(format!("p_av {p} outside [0, 1]")));
    }
    let sweep = &config.scenario.sweep.availability;
    let base = derive_seed(config.scenario.seed, 0xA7A1_1AB1);
    let availability = p_av_grid
        .par_iter()
        .enumerate()
        .map(|(idx, &p_av)| {
            let model = AvailabilityModel {
                p_av,
                n_nodes: config.node_count(),
                rounds: sweep.rounds,
                migration_enabled: sweep.migration_enabled,
                n_hosts: sweep.n_hosts,
            };
            let estimate = |mode: SensingMode, stream: u64| {
                let mut rng = SimRng::seed_from_u64(derive_seed(base, stream));
                cloud::probability_of_success(&model, mode, trials, &mut rng)
            };
            Ok(AvailabilityPoint {
                p_av,
                traditional: estimate(SensingMode::Traditional, 2 * idx as u64)?,
                ssaas: estimate(SensingMode::Ssaas, 2 * idx as u64 + 1)?,
            })
        })
        .collect::<Result<Vec<_>, ScenarioError>>()?;
    Ok(ExperimentReport {
        availability,
        ..ExperimentReport::default()
    })
}

/// Latency of both cloud kinds for each VM count.
pub fn sweep_latency(config: &ScenarioConfig, vm_counts: &[usize]) -> Result<ExperimentReport, ScenarioError> {
    if vm_counts.is_empty() {
        return Err(ScenarioError::InvalidParams("VM count list is empty".into()));
    }
    let sweep = &config.scenario.sweep.latency;
    let local = sweep.local.model(CloudKind::Local);
    let conventional = sweep.conventional.model(CloudKind::Conventional);
    let latency = vm_counts
        .iter()
        .map(|&n_vms| {
            Ok(LatencyPoint {
                n_vms,
                local_ms: local.estimate_latency(n_vms, sweep.rounds)?,
                conventional_ms: conventional.estimate_latency(n_vms, sweep.rounds)?,
            })
        })
        .collect::<Result<Vec<_>, ScenarioError>>()?;
    Ok(ExperimentReport {
        latency,
        ..ExperimentReport::default()
    })
}
