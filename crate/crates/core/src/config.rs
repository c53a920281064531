//! TOML configuration: domain, grid, condition sets, environment, policy
//! and safety settings in one document.
//!
//! ```toml
//! seed = 2021
//! grid = [10, 10, 10]
//!
//! [[dimensions]]
//! name = "v"
//! min = 0.0
//! max = 10.0
//! unit = "in/s"          # optional, used for plot labels
//!
//! [[conditions]]
//! name = "oc3"
//! [conditions.marginals]
//! v = { kind = "clipped_gaussian", mu = 3.0, sigma = 2.0 }
//! t = { kind = "uniform", a = 0.0, b = 10.0 }
//! y = { kind = "uniform", a = 30.0, b = 50.0 }
//!
//! [env]                  # every key optional, defaults shown by `depgrid config`
//! [policy]
//! [safety]
//! ```
//!
//! Every condition must give exactly one marginal per dimension.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    ConditionSet, Dimension, DomainError, DomainSpace, Marginal, Partition, PartitionGrid,
};
use crate::policies::ScriptedPolicyParams;
use crate::safety::SafetyFunction;
use crate::simulator::{EnvConfig, SimError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot serialize config: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("unknown condition `{name}` (available: {available})")]
    UnknownCondition { name: String, available: String },
    #[error("condition `{condition}`: {reason}")]
    BadCondition { condition: String, reason: String },
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Env(#[from] SimError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionSpec {
    pub name: String,
    pub marginals: BTreeMap<String, Marginal>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub grid: PartitionGrid,
    pub dimensions: Vec<Dimension>,
    pub conditions: Vec<ConditionSpec>,
    #[serde(default)]
    pub env: EnvConfig,
    #[serde(default)]
    pub policy: ScriptedPolicyParams,
    #[serde(default)]
    pub safety: SafetyFunction,
}

fn uniform(a: f64, b: f64) -> Marginal {
    Marginal::Uniform { a, b }
}

fn gaussian(mu: f64, sigma: f64) -> Marginal {
    Marginal::ClippedGaussian { mu, sigma }
}

impl Config {
    /// The robot task with the testing condition and the four operating
    /// conditions `oc1`..`oc4`. The start time is `U(0, 10)` throughout.
    pub fn builtin() -> Self {
        let env = EnvConfig::default();
        let dimensions = env.domain().dims().to_vec();
        let presets = [
            ("testing", uniform(0.0, 10.0), uniform(0.0, 50.0)),
            ("oc1", uniform(0.0, 10.0), uniform(0.0, 30.0)),
            ("oc2", uniform(0.0, 10.0), uniform(30.0, 50.0)),
            ("oc3", gaussian(3.0, 2.0), uniform(30.0, 50.0)),
            ("oc4", gaussian(3.0, 2.0), gaussian(35.0, 10.0)),
        ];
        let conditions = presets
            .into_iter()
            .map(|(name, v, y)| ConditionSpec {
                name: name.to_string(),
                marginals: BTreeMap::from([
                    ("v".to_string(), v),
                    ("t".to_string(), uniform(0.0, 10.0)),
                    ("y".to_string(), y),
                ]),
            })
            .collect();
        Self {
            seed: 2021,
            grid: PartitionGrid::new(vec![10, 10, 10]),
            dimensions,
            conditions,
            env,
            policy: ScriptedPolicyParams::default(),
            safety: SafetyFunction::default(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let space = self.space()?;
        Partition::new(space, self.grid.clone())?;
        for spec in &self.conditions {
            self.build_condition(spec)?;
        }
        let mut names = std::collections::HashSet::new();
        for spec in &self.conditions {
            if !names.insert(spec.name.as_str()) {
                return Err(ConfigError::BadCondition {
                    condition: spec.name.clone(),
                    reason: "defined more than once".into(),
                });
            }
        }
        self.env.validate()?;
        self.policy.validate(&self.env)?;
        self.safety.validate(self.env.robot_bounds[1])?;
        Ok(())
    }

    pub fn space(&self) -> Result<DomainSpace, DomainError> {
        DomainSpace::new(self.dimensions.clone())
    }

    pub fn partition(&self) -> Result<Partition, DomainError> {
        Partition::new(self.space()?, self.grid.clone())
    }

    pub fn condition_names(&self) -> Vec<&str> {
        self.conditions.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn condition(&self, name: &str) -> Result<ConditionSet, ConfigError> {
        let spec = self
            .conditions
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| ConfigError::UnknownCondition {
                name: name.to_string(),
                available: self.condition_names().join(", "),
            })?;
        self.build_condition(spec)
    }

    fn build_condition(&self, spec: &ConditionSpec) -> Result<ConditionSet, ConfigError> {
        let space = self.space()?;
        let bad = |reason: String| ConfigError::BadCondition {
            condition: spec.name.clone(),
            reason,
        };
        if let Some(extra) = spec.marginals.keys().find(|k| space.dim_index(k).is_err()) {
            return Err(bad(format!("marginal for unknown dimension `{extra}`")));
        }
        let marginals = space
            .dims()
            .iter()
            .map(|d| {
                spec.marginals
                    .get(&d.name)
                    .copied()
                    .ok_or_else(|| bad(format!("no marginal for dimension `{}`", d.name)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ConditionSet::new(spec.name.clone(), space, marginals)?)
    }

    /// Checks that the configured domain is the `(v, t, y)` space the
    /// simulator runs on.
    pub fn check_robot_domain(&self) -> Result<(), ConfigError> {
        let expected = self.env.domain();
        let got = self.space()?;
        let same = expected.len() == got.len()
            && expected
                .dims()
                .iter()
                .zip(got.dims())
                .all(|(a, b)| a.name == b.name && a.min == b.min && a.max == b.max);
        if same {
            Ok(())
        } else {
            Err(ConfigError::Env(SimError::InvalidConfig(format!(
                "episodes need dimensions {:?}, config has {:?}",
                expected
                    .dims()
                    .iter()
                    .map(|d| (&d.name, d.min, d.max))
                    .collect::<Vec<_>>(),
                got.dims()
                    .iter()
                    .map(|d| (&d.name, d.min, d.max))
                    .collect::<Vec<_>>()
            ))))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::MassModel;

    #[test]
    fn default_config_is_valid() {
        let cfg = Config::builtin();
        cfg.validate().unwrap();
        cfg.check_robot_domain().unwrap();
        assert_eq!(
            cfg.condition_names(),
            vec!["testing", "oc1", "oc2", "oc3", "oc4"]
        );
        assert_eq!(cfg.partition().unwrap().region_count(), 1000);
    }

    #[test]
    fn toml_roundtrip() {
        let cfg = Config::builtin();
        let text = cfg.to_toml_string().unwrap();
        let back = Config::from_toml_str(&text).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(text, back.to_toml_string().unwrap());
    }

    #[test]
    fn unknown_condition_is_named() {
        let err = Config::builtin().condition("oc9").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("oc9") && msg.contains("oc4"), "{msg}");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = Config::from_toml_str("seed = 1\ngrid = [10, 10\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn missing_marginal_is_rejected() {
        let mut cfg = Config::builtin();
        cfg.conditions[0].marginals.remove("t");
        assert!(matches!(
            cfg.validate(),
            Err(ConfigError::BadCondition { .. })
        ));
    }

    #[test]
    fn minimal_document_uses_defaults() {
        let text = r#"
seed = 5
grid = [2]

[[dimensions]]
name = "x"
min = 0.0
max = 1.0

[[conditions]]
name = "flat"
marginals = { x = { kind = "uniform", a = 0.0, b = 1.0 } }
"#;
        let cfg = Config::from_toml_str(text).unwrap();
        assert_eq!(cfg.env, EnvConfig::default());
        let c = cfg.condition("flat").unwrap();
        let p = cfg.partition().unwrap();
        assert!((c.region_mass(&p.region_at(0)) - 0.5).abs() < 1e-15);
        assert!(cfg.check_robot_domain().is_err());
    }
}
