//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "profile": {"kind": "homogeneous", "params": [0.5, 1.0]},
//!   "lambda_grid": [0.5, 1, 2, 4, 8],
//!   "start": 0,
//!   "tmax": 500,
//!   "rmax": 1000,
//!   "runs": 5000,
//!   "p_floor": 0.02,
//!   "ci_level": 0.95,
//!   "seed": 42
//! }
//! ```
//!
//! A profile is `{"kind": "...", "params": [...]}` for the parametric
//! families or `{"kind": "tabulated", "p": [...], "delta": [...]}`. `rmax`
//! defaults to twice the horizon; `"rmax": 0` disables the cutoff.

use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::experiments::{default_right_cutoff, DEFAULT_CI_LEVEL, DEFAULT_HORIZON, DEFAULT_P_FLOOR};
use crate::model::RateProfile;
use crate::simulator::StopRule;

#[derive(Debug, Clone, Deserialize)]
pub struct ProfileConfig {
    pub kind: String,
    #[serde(default)]
    pub params: Vec<f64>,
    pub p: Option<Vec<f64>>,
    pub delta: Option<Vec<f64>>,
}

impl ProfileConfig {
    pub fn build(&self) -> Result<RateProfile> {
        if self.kind == "tabulated" {
            let p = self
                .p
                .clone()
                .ok_or_else(|| Error::Config("tabulated profile needs a `p` table".into()))?;
            let delta = self
                .delta
                .clone()
                .ok_or_else(|| Error::Config("tabulated profile needs a `delta` table".into()))?;
            RateProfile::tabulated(p, delta)
        } else {
            RateProfile::from_kind(&self.kind, &self.params)
        }
    }
}

/// Parses a profile given as an inline JSON string (the `--profile` flag).
pub fn profile_from_json(text: &str) -> Result<RateProfile> {
    let config: ProfileConfig =
        serde_json::from_str(text).map_err(|e| Error::Config(format!("profile: {e}")))?;
    config.build()
}

#[derive(Debug, Clone, Deserialize)]
pub struct ExperimentConfig {
    pub profile: ProfileConfig,
    pub lambda: Option<f64>,
    pub lambda_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub start: usize,
    pub tmax: Option<f64>,
    pub rmax: Option<usize>,
    pub runs: Option<u64>,
    pub p_floor: Option<f64>,
    pub ci_level: Option<f64>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    /// Pre-computed one-sided critical bracket, when available.
    pub lambda_c: Option<(f64, f64)>,
}

impl ExperimentConfig {
    pub fn parse_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("reading {}: {e}", path.display()))
        })?;
        Self::parse_str(&text)
    }

    pub fn horizon(&self) -> f64 {
        self.tmax.unwrap_or(DEFAULT_HORIZON)
    }

    /// The censoring rule: `rmax` when given (0 disables the cutoff),
    /// otherwise twice the horizon.
    pub fn stop_rule(&self) -> Result<StopRule> {
        let horizon = self.horizon();
        let cutoff = match self.rmax {
            Some(0) => None,
            Some(r) => Some(r),
            None => Some(default_right_cutoff(horizon)),
        };
        StopRule::new(horizon, cutoff)
    }

    pub fn runs(&self) -> u64 {
        self.runs.unwrap_or(1000)
    }

    pub fn p_floor(&self) -> f64 {
        self.p_floor.unwrap_or(DEFAULT_P_FLOOR)
    }

    pub fn ci_level(&self) -> f64 {
        self.ci_level.unwrap_or(DEFAULT_CI_LEVEL)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RatioLimit;

    #[test]
    fn parses_a_full_config() {
        let text = r#"{
            "profile": {"kind": "homogeneous", "params": [0.5, 1.0]},
            "lambda_grid": [0.5, 1, 2, 4, 8],
            "start": 3,
            "tmax": 250,
            "rmax": 600,
            "runs": 2000,
            "p_floor": 0.05,
            "ci_level": 0.9,
            "seed": 7
        }"#;
        let config = ExperimentConfig::parse_str(text).unwrap();
        assert_eq!(config.start, 3);
        assert_eq!(config.runs(), 2000);
        assert_eq!(config.p_floor(), 0.05);
        let stop = config.stop_rule().unwrap();
        assert_eq!(stop.horizon, 250.0);
        assert_eq!(stop.right_cutoff, Some(600));
        let profile = config.profile.build().unwrap();
        assert_eq!(profile.declared_limit(), Some(RatioLimit::Finite(0.5)));
    }

    #[test]
    fn defaults_apply_when_fields_are_absent() {
        let config =
            ExperimentConfig::parse_str(r#"{"profile": {"kind": "one_sided"}}"#).unwrap();
        assert_eq!(config.start, 0);
        assert_eq!(config.runs(), 1000);
        assert_eq!(config.ci_level(), 0.95);
        let stop = config.stop_rule().unwrap();
        assert_eq!(stop.horizon, 500.0);
        assert_eq!(stop.right_cutoff, Some(1000));
    }

    #[test]
    fn rmax_zero_disables_the_cutoff() {
        let config = ExperimentConfig::parse_str(
            r#"{"profile": {"kind": "one_sided"}, "rmax": 0}"#,
        )
        .unwrap();
        assert_eq!(config.stop_rule().unwrap().right_cutoff, None);
    }

    #[test]
    fn tabulated_profiles_parse_from_tables() {
        let profile =
            profile_from_json(r#"{"kind": "tabulated", "p": [1.0, 0.5], "delta": [1.0, 2.0]}"#)
                .unwrap();
        assert_eq!(profile.p_up(1), 0.5);
        assert_eq!(profile.delta(5), 2.0);
        assert!(profile_from_json(r#"{"kind": "tabulated", "p": [1.0]}"#).is_err());
    }

    #[test]
    fn rejects_malformed_and_unknown_input() {
        assert!(ExperimentConfig::parse_str("not json").is_err());
        assert!(profile_from_json(r#"{"kind": "mystery", "params": []}"#).is_err());
        assert!(profile_from_json(r#"{"kind": "power", "params": [1.0]}"#).is_err());
    }
}
