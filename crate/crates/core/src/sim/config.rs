use serde::{Deserialize, Serialize};

use crate::engine::Scheme;
use crate::threat::AdversaryConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionConfig {
    /// Distinct reporters needed to revoke.
    pub votes_needed: usize,
    /// Report later claims that reference an already rejected digest.
    pub rejected_blacklist: bool,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            votes_needed: 5,
            rejected_blacklist: false,
        }
    }
}

/// Which receivers contribute per-message records.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricsScope {
    /// Only node 0, the vehicle at the center of the area.
    #[default]
    Evaluated,
    AllBenign,
}

/// Full description of one simulated scenario. Times in seconds, rates in Hz,
/// distances in meters, bitrate in bits per second.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Benign vehicles, including the evaluated node 0.
    pub n_nodes: usize,
    pub pr_check: f64,
    pub alpha: usize,
    pub tau: f64,
    pub gamma: f64,
    pub scheme: Scheme,
    pub duration: f64,
    pub area_side: f64,
    pub bitrate: f64,
    pub seed: u64,
    pub loss_prob: f64,
    pub metrics_scope: MetricsScope,
    /// Re-check engine invariants after every event.
    pub audit: bool,
    pub adversary: Option<AdversaryConfig>,
    pub detection: DetectionConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n_nodes: 30,
            pr_check: 0.2,
            alpha: 5,
            tau: 0.005,
            gamma: 10.0,
            scheme: Scheme::Cooperative,
            duration: 120.0,
            area_side: 200.0,
            bitrate: 6e6,
            seed: 1,
            loss_prob: 0.0,
            metrics_scope: MetricsScope::Evaluated,
            audit: false,
            adversary: None,
            detection: DetectionConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("invalid `{field}`: {reason}")]
pub struct ConfigError {
    pub field: String,
    pub reason: String,
}

fn err(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError {
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn positive(field: &str, x: f64) -> Result<(), ConfigError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(err(
            field,
            format!("must be a positive finite number, got {x}"),
        ))
    }
}

fn probability(field: &str, x: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(err(field, format!("must lie in [0, 1], got {x}")))
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_nodes == 0 {
            return Err(err("n_nodes", "at least one node is required"));
        }
        if self.n_nodes > 100_000 {
            return Err(err("n_nodes", "more than 100000 nodes is not supported"));
        }
        probability("pr_check", self.pr_check)?;
        if self.alpha > u8::MAX as usize {
            return Err(err("alpha", "at most 255 digests fit in a beacon"));
        }
        positive("tau", self.tau)?;
        positive("gamma", self.gamma)?;
        positive("duration", self.duration)?;
        positive("area_side", self.area_side)?;
        positive("bitrate", self.bitrate)?;
        probability("loss_prob", self.loss_prob)?;
        if self.detection.votes_needed == 0 {
            return Err(err("detection.votes_needed", "must be at least 1"));
        }
        if let Some(adv) = &self.adversary {
            positive("adversary.gamma_adv", adv.gamma_adv)?;
            if adv.bogus_per_claim > self.alpha {
                return Err(err(
                    "adversary.bogus_per_claim",
                    format!(
                        "must not exceed alpha ({}), got {}",
                        self.alpha, adv.bogus_per_claim
                    ),
                ));
            }
            if !(adv.start_time.is_finite() && adv.start_time >= 0.0) {
                return Err(err("adversary.start_time", "must be a non-negative number"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = ScenarioConfig::default();
        c.validate().unwrap();
        assert_eq!((c.n_nodes, c.alpha), (30, 5));
        assert_eq!(
            (c.pr_check, c.tau, c.gamma, c.duration),
            (0.2, 0.005, 10.0, 120.0)
        );
    }

    #[test]
    fn rejects_bad_values() {
        let bad = |f: fn(&mut ScenarioConfig)| {
            let mut c = ScenarioConfig::default();
            f(&mut c);
            c.validate().unwrap_err()
        };
        assert_eq!(bad(|c| c.n_nodes = 0).field, "n_nodes");
        assert_eq!(bad(|c| c.pr_check = 1.5).field, "pr_check");
        assert_eq!(bad(|c| c.tau = 0.0).field, "tau");
        assert_eq!(bad(|c| c.gamma = f64::NAN).field, "gamma");
        assert_eq!(
            bad(|c| c.adversary = Some(AdversaryConfig {
                bogus_per_claim: 6,
                ..Default::default()
            }))
            .field,
            "adversary.bogus_per_claim"
        );
    }
}
