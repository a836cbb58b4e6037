//! JSON experiment configuration and the bundled presets.
//!
//! ```json
//! {
//!   "name": "rho085_c8",
//!   "scenario": {
//!     "period_length": 8, "lambda": 5.0,
//!     "utilization": 0.85, "scv": 0.5, "capacity_support_max": 20,
//!     "truncation_bound": 30
//!   },
//!   "choice": { "regular_price": 4.0, "u_min": 0.0, "u_max": 4.0 },
//!   "penalty": 8.0
//! }
//! ```
//!
//! The capacity distribution is given by exactly one of `utilization`,
//! `mean_capacity` (both with `scv` and `capacity_support_max`, discretized
//! Beta) or `capacity_pmf`. Optional blocks: `policy` (for `evaluate` and
//! `simulate`), `grid` (search grid) and `simulation`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chain::Scenario;
use crate::choice::ChoiceModel;
use crate::error::{Error, Result};
use crate::optimize::SearchGrid;
use crate::policy::PolicySpec;
use crate::sim::SimConfig;
use crate::stochastics::{discretized_beta, BetaDiscretization, CapacitySpec, Pmf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioBlock {
    pub period_length: usize,
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utilization: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_capacity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity_pmf: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scv: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity_support_max: Option<usize>,
    #[serde(default)]
    pub discretization: BetaDiscretization,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_bound: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejection_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub scenario: ScenarioBlock,
    pub choice: ChoiceModel,
    pub penalty: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<SearchGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<PolicySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimConfig>,
}

/// Names of the bundled presets.
pub const PRESETS: [&str; 6] = [
    "rho085_c8",
    "rho085_c12",
    "rho090_c8",
    "rho090_c12",
    "rho095_c8",
    "rho095_c12",
];

fn preset_text(name: &str) -> Option<&'static str> {
    Some(match name {
        "rho085_c8" => include_str!("../presets/rho085_c8.json"),
        "rho085_c12" => include_str!("../presets/rho085_c12.json"),
        "rho090_c8" => include_str!("../presets/rho090_c8.json"),
        "rho090_c12" => include_str!("../presets/rho090_c12.json"),
        "rho095_c8" => include_str!("../presets/rho095_c8.json"),
        "rho095_c12" => include_str!("../presets/rho095_c12.json"),
        _ => return None,
    })
}

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let text = preset_text(name).ok_or_else(|| {
            Error::config(
                "preset",
                format!("unknown preset '{name}'; available: {}", PRESETS.join(", ")),
            )
        })?;
        Self::parse(text, &format!("preset {name}"))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parses and validates; diagnostics carry the JSON path of the offending field.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(format!("{origin}: {path}"), e.into_inner().to_string())
        })?;
        cfg.scenario().map_err(|e| Error::config(origin, e.to_string()))?;
        if let Some(grid) = &cfg.grid {
            grid.validate(cfg.scenario.period_length, &cfg.choice)
                .map_err(|e| Error::config(format!("{origin}: grid"), e.to_string()))?;
        }
        if let Some(policy) = &cfg.policy {
            policy
                .build(cfg.scenario.period_length, &cfg.choice)
                .map_err(|e| Error::config(format!("{origin}: policy"), e.to_string()))?;
        }
        if let Some(sim) = &cfg.simulation {
            sim.validate()
                .map_err(|e| Error::config(format!("{origin}: simulation"), e.to_string()))?;
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| "custom".to_string())
    }

    pub fn capacity(&self) -> Result<Pmf> {
        let s = &self.scenario;
        let given = [
            s.utilization.is_some(),
            s.mean_capacity.is_some(),
            s.capacity_pmf.is_some(),
        ];
        if given.iter().filter(|g| **g).count() != 1 {
            return Err(Error::config(
                "scenario",
                "give exactly one of utilization, mean_capacity, capacity_pmf",
            ));
        }
        if let Some(mass) = &s.capacity_pmf {
            return Pmf::new(mass.clone()).map_err(|e| Error::config("scenario.capacity_pmf", e.to_string()));
        }
        let mean = match (s.utilization, s.mean_capacity) {
            (Some(rho), _) => {
                if !(rho > 0.0 && rho < 1.0) {
                    return Err(Error::config(
                        "scenario.utilization",
                        format!("must lie in (0, 1), got {rho}"),
                    ));
                }
                s.lambda / rho
            }
            (_, Some(m)) => m,
            _ => unreachable!(),
        };
        let scv = s
            .scv
            .ok_or_else(|| Error::config("scenario.scv", "required with a Beta capacity"))?;
        let support = s
            .capacity_support_max
            .ok_or_else(|| Error::config("scenario.capacity_support_max", "required with a Beta capacity"))?;
        let spec = CapacitySpec::new(support, mean, scv).with_discretization(s.discretization);
        Ok(discretized_beta(&spec)
            .map_err(|e| Error::config("scenario", e.to_string()))?
            .pmf)
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let s = &self.scenario;
        let mut scenario = Scenario::new(s.period_length, s.lambda, self.capacity()?, self.choice, self.penalty)?
            .with_truncation_bound(s.truncation_bound);
        if let Some(th) = s.rejection_threshold {
            scenario = scenario.with_rejection_threshold(th)?;
        }
        Ok(scenario)
    }

    pub fn grid(&self) -> SearchGrid {
        self.grid
            .clone()
            .unwrap_or_else(|| SearchGrid::standard(self.scenario.period_length))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse() {
        for name in PRESETS {
            let cfg = ExperimentConfig::preset(name).unwrap();
            let s = cfg.scenario().unwrap();
            assert_eq!(s.period_length, 8);
            assert!(s.truncation_bound.is_some());
            assert!(s.utilization() < 1.0);
        }
        assert!(ExperimentConfig::preset("rho099_c8").is_err());
    }

    #[test]
    fn roundtrip() {
        let cfg = ExperimentConfig::preset("rho090_c12").unwrap();
        let again = ExperimentConfig::parse(&cfg.to_json().unwrap(), "roundtrip").unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn diagnostics_name_the_field() {
        let text = r#"{"scenario": {"period_length": 8, "lambda": "five"}, "choice": {"regular_price": 4, "u_min": 0, "u_max": 4}, "penalty": 8}"#;
        let err = ExperimentConfig::parse(text, "x.json").unwrap_err().to_string();
        assert!(err.contains("scenario.lambda"), "{err}");

        let text = r#"{"scenario": {"period_length": 8, "lambda": 5, "utilization": 0.9, "mean_capacity": 6}, "choice": {"regular_price": 4, "u_min": 0, "u_max": 4}, "penalty": 8}"#;
        let err = ExperimentConfig::parse(text, "x.json").unwrap_err().to_string();
        assert!(err.contains("exactly one"), "{err}");

        let text = r#"{"scenario": {"period_length": 8, "lambda": 5, "capacity_pmf": [0, 0, 1]}, "choice": {"regular_price": 4, "u_min": 0, "u_max": 4}, "penalty": 8}"#;
        let err = ExperimentConfig::parse(text, "x.json").unwrap_err().to_string();
        assert!(err.contains("utilization"), "{err}");
    }

    #[test]
    fn explicit_pmf_accepted() {
        let text = r#"{"scenario": {"period_length": 2, "lambda": 1, "capacity_pmf": [0.25, 0.25, 0.5]}, "choice": {"regular_price": 4, "u_min": 0, "u_max": 4}, "penalty": 3,
                       "policy": {"family": "csp", "fee": 2.0}}"#;
        let cfg = ExperimentConfig::parse(text, "x.json").unwrap();
        assert_eq!(cfg.scenario().unwrap().capacity.mean(), 1.25);
    }
}
