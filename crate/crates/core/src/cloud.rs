//! Service deployment layer: the JSON deployment template, host availability
//! with VM migration, and the analytic latency model for local versus
//! Internet-based clouds.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::consensus::{DEFAULT_MAX_ITERATIONS, DEFAULT_THRESHOLD_DB, DEFAULT_TOLERANCE_DB};
use crate::trust::{TrustParams, TrustScheme};

/// Sensing algorithms the service knows how to run.
pub const SENSING_ALGORITHMS: [&str; 1] = ["consensus-trust"];

pub const DEFAULT_ROUNDS: usize = 10;
pub const DEFAULT_HOSTS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaViolation {
    pub field: String,
    pub reason: String,
}

impl fmt::Display for SchemaViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.reason)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TemplateError {
    #[error("template is not valid JSON: {0}")]
    Parse(String),
    #[error("template has {} schema violation(s): {}", .0.len(), join_violations(.0))]
    SchemaViolation(Vec<SchemaViolation>),
}

fn join_violations(violations: &[SchemaViolation]) -> String {
    violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CloudError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// Consensus settings carried by the template. `epsilon` is optional because
/// its default depends on the topology.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensingAlgorithmParams {
    pub epsilon: Option<f64>,
    pub tolerance_db: f64,
    pub max_iterations: usize,
    pub threshold_db: f64,
}

impl Default for SensingAlgorithmParams {
    fn default() -> Self {
        Self {
            epsilon: None,
            tolerance_db: DEFAULT_TOLERANCE_DB,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            threshold_db: DEFAULT_THRESHOLD_DB,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingAlgorithm {
    pub name: String,
    #[serde(default)]
    pub params: SensingAlgorithmParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustAlgorithm {
    pub name: String,
    #[serde(default)]
    pub params: TrustParams,
}

impl TrustAlgorithm {
    pub fn scheme(&self) -> TrustScheme {
        TrustScheme::from_name(&self.name).expect("validated template")
    }
}

/// A validated service deployment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeploymentTemplate {
    pub number_of_servers: usize,
    pub context: BTreeMap<String, Value>,
    pub sensing_algorithm: SensingAlgorithm,
    pub trust_algorithm: TrustAlgorithm,
}

/// Parses and validates a deployment template, collecting every violation
/// rather than stopping at the first.
///
/// Unknown top-level keys are allowed so a scenario document can carry its
/// own extension block alongside the template fields.
pub fn validate_template(raw: &str) -> Result<DeploymentTemplate, TemplateError> {
    let doc: Value = serde_json::from_str(raw).map_err(|e| TemplateError::Parse(e.to_string()))?;
    validate_template_value(&doc)
}

pub fn validate_template_value(doc: &Value) -> Result<DeploymentTemplate, TemplateError> {
    let mut violations = Vec::new();
    let mut violation = |field: &str, reason: String| {
        violations.push(SchemaViolation {
            field: field.to_string(),
            reason,
        })
    };

    let Some(root) = doc.as_object() else {
        violation("$", "template must be a JSON object".into());
        return Err(TemplateError::SchemaViolation(violations));
    };

    let servers = match root.get("number_of_servers") {
        None => {
            violation("number_of_servers", "required field is missing".into());
            None
        }
        Some(v) => match v.as_u64() {
            Some(n) if n >= 2 => Some(n as usize),
            Some(n) => {
                violation(
                    "number_of_servers",
                    format!("cooperative sensing needs at least 2 servers, got {n}"),
                );
                None
            }
            None => {
                violation("number_of_servers", format!("expected a positive integer, got {v}"));
                None
            }
        },
    };

    let context = match root.get("context") {
        None => {
            violation("context", "required field is missing".into());
            None
        }
        Some(Value::Object(map)) => Some(map.clone().into_iter().collect::<BTreeMap<_, _>>()),
        Some(v) => {
            violation("context", format!("expected an object, got {v}"));
            None
        }
    };

    let sensing = match root.get("sensing_algorithm") {
        None => {
            violation("sensing_algorithm", "required field is missing".into());
            None
        }
        Some(v) => match serde_json::from_value::<SensingAlgorithm>(v.clone()) {
            Err(e) => {
                violation("sensing_algorithm", e.to_string());
                None
            }
            Ok(alg) => {
                let mut ok = true;
                if !SENSING_ALGORITHMS.contains(&alg.name.as_str()) {
                    violation(
                        "sensing_algorithm.name",
                        format!("unregistered algorithm {:?}; known: {:?}", alg.name, SENSING_ALGORITHMS),
                    );
                    ok = false;
                }
                let p = &alg.params;
                if let Some(eps) = p.epsilon {
                    if !(eps.is_finite() && eps > 0.0) {
                        violation("sensing_algorithm.params.epsilon", format!("must be positive, got {eps}"));
                        ok = false;
                    }
                }
                if !(p.tolerance_db.is_finite() && p.tolerance_db > 0.0) {
                    violation(
                        "sensing_algorithm.params.tolerance_db",
                        format!("must be positive, got {}", p.tolerance_db),
                    );
                    ok = false;
                }
                if p.max_iterations == 0 {
                    violation("sensing_algorithm.params.max_iterations", "must be at least 1".into());
                    ok = false;
                }
                if !p.threshold_db.is_finite() {
                    violation("sensing_algorithm.params.threshold_db", "must be finite".into());
                    ok = false;
                }
                ok.then_some(alg)
            }
        },
    };

    let trust = match root.get("trust_algorithm") {
        None => {
            violation("trust_algorithm", "required field is missing".into());
            None
        }
        Some(v) => match serde_json::from_value::<TrustAlgorithm>(v.clone()) {
            Err(e) => {
                violation("trust_algorithm", e.to_string());
                None
            }
            Ok(alg) => {
                let mut ok = true;
                if TrustScheme::from_name(&alg.name).is_none() {
                    violation(
                        "trust_algorithm.name",
                        format!("unregistered scheme {:?}; known: {:?}", alg.name, TrustScheme::REGISTERED),
                    );
                    ok = false;
                }
                if let Err(e) = alg.params.validate() {
                    violation("trust_algorithm.params", e.to_string());
                    ok = false;
                }
                ok.then_some(alg)
            }
        },
    };

    match (servers, context, sensing, trust) {
        (Some(number_of_servers), Some(context), Some(sensing_algorithm), Some(trust_algorithm))
            if violations.is_empty() =>
        {
            Ok(DeploymentTemplate {
                number_of_servers,
                context,
                sensing_algorithm,
                trust_algorithm,
            })
        }
        _ => Err(TemplateError::SchemaViolation(violations)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensingMode {
    /// Physical vehicles sense directly; every one must stay available.
    Traditional,
    /// Virtualized vehicles on cloud hosts, re-placed when a host drops out.
    Ssaas,
}

impl SensingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SensingMode::Traditional => "traditional",
            SensingMode::Ssaas => "ssaas",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AvailabilityModel {
    /// Per-round availability of a physical vehicle or host.
    pub p_av: f64,
    pub n_nodes: usize,
    pub rounds: usize,
    pub migration_enabled: bool,
    pub n_hosts: usize,
}

impl AvailabilityModel {
    pub fn new(p_av: f64, n_nodes: usize) -> Self {
        Self {
            p_av,
            n_nodes,
            rounds: DEFAULT_ROUNDS,
            migration_enabled: true,
            n_hosts: DEFAULT_HOSTS,
        }
    }

    pub fn validate(&self) -> Result<(), CloudError> {
        if !(0.0..=1.0).contains(&self.p_av) {
            return Err(CloudError::InvalidParams(format!("p_av {} outside [0, 1]", self.p_av)));
        }
        if self.n_nodes == 0 || self.rounds == 0 || self.n_hosts == 0 {
            return Err(CloudError::InvalidParams(
                "n_nodes, rounds and n_hosts must all be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Monte-Carlo estimate of the probability that the sensing procedure
/// completes.
///
/// Every node (or host) is independently available with probability `p_av`
/// in each round. Traditional sensing fails as soon as any vehicle is
/// unavailable in any round. Under SSaaS each VM is placed on one of
/// `n_hosts` independent candidates; with migration it may move to another
/// available candidate every round, without migration it must stay on the
/// host chosen in the first round.
pub fn probability_of_success<R: Rng + ?Sized>(
    model: &AvailabilityModel,
    mode: SensingMode,
    trials: usize,
    rng: &mut R,
) -> Result<f64, CloudError> {
    model.validate()?;
    if trials == 0 {
        return Err(CloudError::InvalidParams("trials must be at least 1".into()));
    }
    let successes = (0..trials)
        .filter(|_| match mode {
            SensingMode::Traditional => traditional_trial(model, rng),
            SensingMode::Ssaas if model.migration_enabled => migrating_trial(model, rng),
            SensingMode::Ssaas => pinned_trial(model, rng),
        })
        .count();
    Ok(successes as f64 / trials as f64)
}

fn available<R: Rng + ?Sized>(p_av: f64, rng: &mut R) -> bool {
    rng.random::<f64>() < p_av
}

fn traditional_trial<R: Rng + ?Sized>(m: &AvailabilityModel, rng: &mut R) -> bool {
    (0..m.rounds * m.n_nodes).all(|_| available(m.p_av, rng))
}

fn migrating_trial<R: Rng + ?Sized>(m: &AvailabilityModel, rng: &mut R) -> bool {
    (0..m.rounds * m.n_nodes).all(|_| (0..m.n_hosts).any(|_| available(m.p_av, rng)))
}

fn pinned_trial<R: Rng + ?Sized>(m: &AvailabilityModel, rng: &mut R) -> bool {
    (0..m.n_nodes).all(|_| {
        (0..m.n_hosts).any(|_| available(m.p_av, rng))
            && (1..m.rounds).all(|_| available(m.p_av, rng))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CloudKind {
    /// Joint RSU and vehicle cloud next to the vehicles.
    Local,
    /// Internet-based data center.
    Conventional,
}

impl CloudKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CloudKind::Local => "local",
            CloudKind::Conventional => "conventional",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyModel {
    pub trust_fetch_ms: f64,
    pub exchange_ms: f64,
    pub cloud_kind: CloudKind,
}

impl LatencyModel {
    /// Local: 10 ms trust fetch, 20 ms exchange. Conventional: 40 ms, 20 ms.
    pub fn defaults(cloud_kind: CloudKind) -> Self {
        let trust_fetch_ms = match cloud_kind {
            CloudKind::Local => 10.0,
            CloudKind::Conventional => 40.0,
        };
        Self {
            trust_fetch_ms,
            exchange_ms: 20.0,
            cloud_kind,
        }
    }

    pub fn validate(&self) -> Result<(), CloudError> {
        for (name, v) in [("trust_fetch_ms", self.trust_fetch_ms), ("exchange_ms", self.exchange_ms)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CloudError::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Every VM fetches trust and exchanges values once per round.
    pub fn estimate_latency(&self, n_vms: usize, rounds: usize) -> Result<f64, CloudError> {
        self.validate()?;
        if n_vms == 0 || rounds == 0 {
            return Err(CloudError::InvalidParams("n_vms and rounds must be at least 1".into()));
        }
        Ok(rounds as f64 * n_vms as f64 * (self.trust_fetch_ms + self.exchange_ms))
    }
}
