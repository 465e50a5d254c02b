//! Energy-detection measurements in dB.
//!
//! Each node senses once per run. The measurement is the configured mean for
//! the current PU state plus additive Gaussian noise, both in dB.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_MEAN_PRESENT_DB: f64 = 15.0;
pub const DEFAULT_MEAN_ABSENT_DB: f64 = 5.0;
pub const DEFAULT_NOISE_STD_DB: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SensingError {
    #[error("node index {index} out of range for {node_count} nodes")]
    IndexOutOfRange { index: usize, node_count: usize },
    #[error("{field} has {got} entries, expected {expected}")]
    LengthMismatch {
        field: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("noise standard deviation must be finite and non-negative, got {0}")]
    InvalidNoise(f64),
    #[error("{0} contains a non-finite mean")]
    NonFiniteMean(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyMeasurement {
    pub node: usize,
    pub value_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingScenario {
    pu_present: bool,
    energy_mean_present_db: Vec<f64>,
    energy_mean_absent_db: Vec<f64>,
    noise_std_db: f64,
}

impl SensingScenario {
    pub fn new(
        pu_present: bool,
        energy_mean_present_db: Vec<f64>,
        energy_mean_absent_db: Vec<f64>,
        noise_std_db: f64,
    ) -> Result<Self, SensingError> {
        if energy_mean_absent_db.len() != energy_mean_present_db.len() {
            return Err(SensingError::LengthMismatch {
                field: "energy_mean_absent_db",
                expected: energy_mean_present_db.len(),
                got: energy_mean_absent_db.len(),
            });
        }
        if !(noise_std_db.is_finite() && noise_std_db >= 0.0) {
            return Err(SensingError::InvalidNoise(noise_std_db));
        }
        if !energy_mean_present_db.iter().all(|m| m.is_finite()) {
            return Err(SensingError::NonFiniteMean("energy_mean_present_db"));
        }
        if !energy_mean_absent_db.iter().all(|m| m.is_finite()) {
            return Err(SensingError::NonFiniteMean("energy_mean_absent_db"));
        }
        Ok(Self {
            pu_present,
            energy_mean_present_db,
            energy_mean_absent_db,
            noise_std_db,
        })
    }

    /// Same means at every node.
    pub fn uniform(
        node_count: usize,
        pu_present: bool,
        mean_present_db: f64,
        mean_absent_db: f64,
        noise_std_db: f64,
    ) -> Result<Self, SensingError> {
        Self::new(
            pu_present,
            vec![mean_present_db; node_count],
            vec![mean_absent_db; node_count],
            noise_std_db,
        )
    }

    pub fn pu_present(&self) -> bool {
        self.pu_present
    }

    pub fn node_count(&self) -> usize {
        self.energy_mean_present_db.len()
    }

    pub fn noise_std_db(&self) -> f64 {
        self.noise_std_db
    }

    /// Mean received energy at node `i` for the current PU state.
    pub fn mean_db(&self, i: usize) -> Result<f64, SensingError> {
        let means = if self.pu_present {
            &self.energy_mean_present_db
        } else {
            &self.energy_mean_absent_db
        };
        means.get(i).copied().ok_or(SensingError::IndexOutOfRange {
            index: i,
            node_count: self.node_count(),
        })
    }

    /// One energy-detection reading at node `i`.
    ///
    /// Always consumes exactly one standard-normal draw, so the stream
    /// position does not depend on the noise level.
    pub fn sense<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> Result<EnergyMeasurement, SensingError> {
        let mean = self.mean_db(i)?;
        let z: f64 = rng.sample(StandardNormal);
        Ok(EnergyMeasurement {
            node: i,
            value_db: mean + self.noise_std_db * z,
        })
    }

    /// Readings for nodes `0..node_count`, in order.
    pub fn sense_all<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<EnergyMeasurement> {
        (0..self.node_count())
            .map(|i| self.sense(i, rng).expect("index in range"))
            .collect()
    }
}

/// A per-node quantity given either as one broadcast scalar or a full vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerNode {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl PerNode {
    pub fn expand(&self, node_count: usize) -> Vec<f64> {
        match self {
            PerNode::Scalar(v) => vec![*v; node_count],
            PerNode::Vector(v) => v.clone(),
        }
    }
}

/// Sensing block of a scenario configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensingSpec {
    #[serde(default = "default_true")]
    pub pu_present: bool,
    #[serde(default = "default_mean_present")]
    pub energy_mean_present_db: PerNode,
    #[serde(default = "default_mean_absent")]
    pub energy_mean_absent_db: PerNode,
    #[serde(default = "default_noise")]
    pub noise_std_db: f64,
}

impl Default for SensingSpec {
    fn default() -> Self {
        Self {
            pu_present: true,
            energy_mean_present_db: default_mean_present(),
            energy_mean_absent_db: default_mean_absent(),
            noise_std_db: DEFAULT_NOISE_STD_DB,
        }
    }
}

impl SensingSpec {
    pub fn build(&self, node_count: usize) -> Result<SensingScenario, SensingError> {
        let present = self.energy_mean_present_db.expand(node_count);
        if present.len() != node_count {
            return Err(SensingError::LengthMismatch {
                field: "energy_mean_present_db",
                expected: node_count,
                got: present.len(),
            });
        }
        SensingScenario::new(
            self.pu_present,
            present,
            self.energy_mean_absent_db.expand(node_count),
            self.noise_std_db,
        )
    }
}

fn default_true() -> bool {
    true
}

fn default_mean_present() -> PerNode {
    PerNode::Scalar(DEFAULT_MEAN_PRESENT_DB)
}

fn default_mean_absent() -> PerNode {
    PerNode::Scalar(DEFAULT_MEAN_ABSENT_DB)
}

fn default_noise() -> f64 {
    DEFAULT_NOISE_STD_DB
}
