//! Trust-weighted consensus spectrum sensing for cognitive-radio vehicular
//! networks, offered as a cloud service.
//!
//! Vehicles and roadside units form a static graph ([`topology`]). Each node
//! takes one energy-detection reading ([`sensing`]), then all nodes iterate a
//! weighted-average consensus ([`consensus`]) whose weights come from pairwise
//! trust ([`trust`]). Malicious nodes broadcast falsified values
//! ([`attack`]). The [`cloud`] module covers the deployment template, VM
//! availability with migration, and cloud latency; [`scenario`] ties it all
//! together into reproducible experiments.
//!
//! Every random quantity is drawn from a seeded [`SimRng`], so a run is a pure
//! function of its configuration and seed.

pub mod attack;
pub mod cloud;
pub mod consensus;
pub mod scenario;
pub mod sensing;
pub mod topology;
pub mod trust;

use rand::SeedableRng;

pub use attack::{AttackError, AttackProfile, Strategy};
pub use cloud::{
    validate_template, AvailabilityModel, CloudError, CloudKind, DeploymentTemplate, LatencyModel, SchemaViolation,
    SensingMode, TemplateError,
};
pub use consensus::{consensus_step, decide, run_consensus, ConsensusError, ConsensusParams, ConsensusRun, Decision};
pub use scenario::{
    run_scenario, sweep_availability, sweep_latency, ExperimentReport, RunSummary, ScenarioConfig, ScenarioError,
};
pub use sensing::{EnergyMeasurement, SensingError, SensingScenario};
pub use topology::{NodeRole, Topology, TopologyError, TopologySpec};
pub use trust::{TrustError, TrustParams, TrustScheme, TrustState};

/// Random stream used throughout the simulator. ChaCha8 output is stable
/// across platforms and releases, which keeps traces reproducible.
pub type SimRng = rand_chacha::ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
