//! Pipeline configuration file (TOML).

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bayes_opt::BoConfig;
use crate::cell_sim::SimConfig;
use crate::doe::{ParameterBounds, SaltelliOrder};
use crate::electrode::PropertyModelConfig;
use crate::error::{Error, Result};
use crate::gp::GpConfig;
use crate::objective::Scenario;
use crate::validation::ValidationConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DoeGenerator {
    #[default]
    SobolSaltelli,
    LatinHypercube,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DoeConfig {
    pub generator: DoeGenerator,
    /// Saltelli base rows N.
    pub base_samples: usize,
    /// Sobol' points skipped before the base block.
    pub skip: u64,
    pub order: SaltelliOrder,
    /// Point count for the Latin-hypercube generator.
    pub lhs_points: usize,
}

impl Default for DoeConfig {
    fn default() -> Self {
        DoeConfig {
            generator: DoeGenerator::SobolSaltelli,
            base_samples: 40,
            skip: 1,
            order: SaltelliOrder::First,
            lhs_points: 174,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectiveConfig {
    /// Sobol' points over the bounds whose surrogate predictions widen the
    /// fitness scaler beyond the dataset range; 0 keeps the dataset range.
    pub scaler_probe_points: usize,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        ObjectiveConfig { scaler_probe_points: 4096 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema_version: u32,
    /// Root seed; every stage derives its own seed from it.
    pub seed: u64,
    pub out_dir: PathBuf,
    /// `am_pct`, `sc_pct`, `cd_pct` in this order.
    pub bounds: ParameterBounds<f64>,
    #[serde(default)]
    pub doe: DoeConfig,
    #[serde(default)]
    pub property_model: PropertyModelConfig<f64>,
    #[serde(default)]
    pub simulation: SimConfig<f64>,
    #[serde(default)]
    pub gp: GpConfig<f64>,
    #[serde(default)]
    pub validation: ValidationConfig,
    #[serde(default)]
    pub objective: ObjectiveConfig,
    #[serde(default = "pipeline_bo")]
    pub optimization: BoConfig<f64>,
    #[serde(default = "Scenario::reference_set")]
    pub scenarios: Vec<Scenario<f64>>,
}

/// Optimizer settings for the pipeline: the full iteration budget is spent.
fn pipeline_bo() -> BoConfig<f64> {
    BoConfig { early_stop: false, ..BoConfig::default() }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            schema_version: SCHEMA_VERSION,
            seed: 42,
            out_dir: PathBuf::from("run"),
            bounds: ParameterBounds::manufacturing_default(),
            doe: DoeConfig::default(),
            property_model: PropertyModelConfig::default(),
            simulation: SimConfig::default(),
            gp: GpConfig::default(),
            validation: ValidationConfig::default(),
            objective: ObjectiveConfig::default(),
            optimization: pipeline_bo(),
            scenarios: Scenario::reference_set(),
        }
    }
}

const PARAM_NAMES: [&str; 3] = ["am_pct", "sc_pct", "cd_pct"];

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| Error::Config(e.to_string());
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.bounds.validate().map_err(cfg_err)?;
        let names: Vec<&str> = self.bounds.iter().map(|b| b.name.as_str()).collect();
        if names != PARAM_NAMES {
            return Err(Error::Config(format!("bounds must be {PARAM_NAMES:?} in order, got {names:?}")));
        }
        match self.doe.generator {
            DoeGenerator::SobolSaltelli if self.doe.base_samples == 0 => {
                return Err(Error::Config("doe.base_samples must be positive".into()));
            }
            DoeGenerator::LatinHypercube if self.doe.lhs_points == 0 => {
                return Err(Error::Config("doe.lhs_points must be positive".into()));
            }
            _ => {}
        }
        self.property_model.validate().map_err(cfg_err)?;
        self.simulation.validate().map_err(cfg_err)?;
        self.gp.validate().map_err(cfg_err)?;
        self.validation.validate().map_err(cfg_err)?;
        self.optimization.validate().map_err(cfg_err)?;
        if self.scenarios.is_empty() {
            return Err(Error::Config("at least one scenario is required".into()));
        }
        let mut seen = HashSet::new();
        for s in &self.scenarios {
            if s.name.is_empty() || !s.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
                return Err(Error::Config(format!("scenario name {:?} must be non-empty [A-Za-z0-9_-]", s.name)));
            }
            if !seen.insert(s.name.as_str()) {
                return Err(Error::Config(format!("duplicate scenario {:?}", s.name)));
            }
            s.weights
                .validate()
                .map_err(|e| Error::Config(format!("scenario {}: {e}", s.name)))?;
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn scenario(&self, name: &str) -> Result<&Scenario<f64>> {
        self.scenarios.iter().find(|s| s.name == name).ok_or_else(|| {
            let known: Vec<&str> = self.scenarios.iter().map(|s| s.name.as_str()).collect();
            Error::Config(format!("unknown scenario {name:?}; available: {}", known.join(", ")))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let cfg = PipelineConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml().unwrap();
        assert!(text.starts_with("schema_version = 1"));
        assert_eq!(PipelineConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn minimal_file_uses_defaults() {
        let text = r#"
schema_version = 1
seed = 7
out_dir = "x"

[[bounds]]
name = "am_pct"
lower = 90.0
upper = 96.8

[[bounds]]
name = "sc_pct"
lower = 43.0
upper = 72.8

[[bounds]]
name = "cd_pct"
lower = 1.4
upper = 38.8
"#;
        let cfg = PipelineConfig::from_toml(text).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.scenarios.len(), 5);
        assert!(!cfg.optimization.early_stop);
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut text = PipelineConfig::default().to_toml().unwrap();
        text = text.replacen("seed = 42", "seed = 42\nsede = 1", 1);
        assert!(matches!(PipelineConfig::from_toml(&text), Err(Error::Config(_))));
    }

    #[test]
    fn bad_bounds_and_versions_rejected() {
        let mut cfg = PipelineConfig::default();
        cfg.schema_version = 2;
        assert!(cfg.validate().is_err());
        let text = PipelineConfig::default().to_toml().unwrap().replacen("upper = 96.8", "upper = 80.0", 1);
        assert!(PipelineConfig::from_toml(&text).is_err());
    }

    #[test]
    fn unknown_scenario_lists_names() {
        let err = PipelineConfig::default().scenario("nope").unwrap_err().to_string();
        assert!(err.contains("optimal-1c") && err.contains("ultra-low-c-rate"));
    }
}
