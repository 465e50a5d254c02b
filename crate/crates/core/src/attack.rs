//! Spectrum sensing data falsification.
//!
//! A malicious node ignores what it hears and broadcasts a value chosen by its
//! strategy each iteration. Attackers do not collude and never update trust.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AttackError {
    #[error("invalid attack profile for node {node}: {reason}")]
    InvalidProfile { node: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case", deny_unknown_fields)]
pub enum Strategy {
    /// Always reports `value_db`.
    Constant { value_db: f64 },
    /// Reports its own sensed value shifted by `offset_db`.
    Offset { offset_db: f64 },
    /// Uniform draw from `[low_db, high_db]` each iteration.
    RandomUniform { low_db: f64, high_db: f64 },
    /// Square wave `base + amplitude * sign(sin(2 pi k / period))`.
    Oscillating {
        base_db: f64,
        amplitude_db: f64,
        period: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackProfile {
    pub node: usize,
    #[serde(flatten)]
    pub strategy: Strategy,
}

impl AttackProfile {
    pub fn new(node: usize, strategy: Strategy) -> Result<Self, AttackError> {
        let profile = Self { node, strategy };
        profile.validate()?;
        Ok(profile)
    }

    pub fn constant(node: usize, value_db: f64) -> Self {
        Self {
            node,
            strategy: Strategy::Constant { value_db },
        }
    }

    pub fn validate(&self) -> Result<(), AttackError> {
        let invalid = |reason: String| AttackError::InvalidProfile {
            node: self.node,
            reason,
        };
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be finite")))
            }
        };
        match self.strategy {
            Strategy::Constant { value_db } => finite("value_db", value_db),
            Strategy::Offset { offset_db } => finite("offset_db", offset_db),
            Strategy::RandomUniform { low_db, high_db } => {
                finite("low_db", low_db)?;
                finite("high_db", high_db)?;
                if low_db > high_db {
                    return Err(invalid(format!("range [{low_db}, {high_db}] is empty")));
                }
                Ok(())
            }
            Strategy::Oscillating {
                base_db,
                amplitude_db,
                period,
            } => {
                finite("base_db", base_db)?;
                finite("amplitude_db", amplitude_db)?;
                if period == 0 {
                    return Err(invalid("period must be at least 1".into()));
                }
                Ok(())
            }
        }
    }

    /// Value broadcast at iteration `k` by an attacker whose own reading is
    /// `true_value_db`. Only `RandomUniform` consumes randomness.
    pub fn falsify<R: Rng + ?Sized>(
        &self,
        k: usize,
        true_value_db: f64,
        rng: &mut R,
    ) -> Result<f64, AttackError> {
        self.validate()?;
        Ok(match self.strategy {
            Strategy::Constant { value_db } => value_db,
            Strategy::Offset { offset_db } => true_value_db + offset_db,
            Strategy::RandomUniform { low_db, high_db } => {
                if low_db == high_db {
                    low_db
                } else {
                    rng.random_range(low_db..=high_db)
                }
            }
            Strategy::Oscillating {
                base_db,
                amplitude_db,
                period,
            } => base_db + amplitude_db * square_sign(k, period),
        })
    }
}

/// `sign(sin(2 pi k / period))`, evaluated on integers so zero crossings are exact.
fn square_sign(k: usize, period: u32) -> f64 {
    let period = u64::from(period);
    let twice_phase = 2 * (k as u64 % period);
    if twice_phase == 0 || twice_phase == period {
        0.0
    } else if twice_phase < period {
        1.0
    } else {
        -1.0
    }
}
