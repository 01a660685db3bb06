//! Run configuration file (TOML). Every table and key is optional; missing
//! values take their defaults.
//!
//! ```toml
//! [scenario]              # ScenarioParams
//! cross_count = 10
//!
//! [episode]
//! goal_tolerance = 0.3
//!
//! [episode.planner]       # PlannerConfig
//! k = 1.0
//!
//! [episode.limits]        # KinematicLimits
//! omega_max = 2.5
//!
//! [episode.perception]    # PerceptionConfig
//! sigma_v = { form = "affine", intercept = 0.01, slope = 0.09, floor = 0.001 }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{EpisodeConfig, ScenarioParams};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioParams,
    pub episode: EpisodeConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.episode.validate()
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Applies `dotted.path=value` assignments. Values are parsed as TOML and
    /// fall back to plain strings.
    pub fn with_overrides<S: AsRef<str>>(&self, assignments: &[S]) -> Result<Self> {
        let mut root = toml::Table::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        for assignment in assignments {
            let assignment = assignment.as_ref();
            let (path, raw) = assignment
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {assignment:?} is not PATH=VALUE")))?;
            let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(raw.to_string()));
            let keys: Vec<&str> = path.trim().split('.').collect();
            let (last, parents) = keys.split_last().expect("split yields one item");
            let mut table = &mut root;
            for key in parents {
                table = table
                    .entry(key.to_string())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                    .as_table_mut()
                    .ok_or_else(|| Error::Config(format!("{path}: {key} is not a table")))?;
            }
            table.insert(last.to_string(), value);
        }
        let config: Self = root.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }
}
