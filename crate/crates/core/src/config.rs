//! Single-file experiment configuration. Every section is optional; what is
//! missing keeps its built-in default.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::converter::BoostParams;
use crate::error::{PvError, Result};
use crate::mppt::{ControllerConfig, ControllerId};
use crate::pv::ModuleParams;
use crate::shading::{builtin_scenarios, ShadingScenario};
use crate::sim::{closed_loop_converter, SimConfig, SimSettings};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub module: ModuleParams,
    pub converter: BoostParams,
    pub controllers: ControllerConfig,
    /// Extra scenarios; a name matching a preset replaces it.
    pub scenarios: Vec<ShadingScenario>,
    pub sim: SimSettings,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            module: ModuleParams::reference(),
            converter: closed_loop_converter(),
            controllers: ControllerConfig::default(),
            scenarios: Vec::new(),
            sim: SimSettings::default(),
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Config = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.module.validate()?;
        self.converter.validate()?;
        self.controllers.validate()?;
        self.sim.validate()?;
        for s in &self.scenarios {
            s.validate()?;
        }
        Ok(())
    }

    /// Presets (in table order) with config scenarios overriding by name,
    /// then any new ones in file order.
    pub fn all_scenarios(&self) -> Vec<ShadingScenario> {
        let mut out = builtin_scenarios();
        for s in &self.scenarios {
            match out.iter_mut().find(|b| b.name.eq_ignore_ascii_case(&s.name)) {
                Some(slot) => *slot = s.clone(),
                None => out.push(s.clone()),
            }
        }
        out
    }

    pub fn scenario(&self, name: &str) -> Result<ShadingScenario> {
        self.all_scenarios()
            .into_iter()
            .find(|s| s.name.eq_ignore_ascii_case(name))
            .ok_or_else(|| PvError::UnknownScenario(name.to_string()))
    }

    pub fn sim_config(&self, scenario: ShadingScenario, controller: ControllerId) -> SimConfig {
        SimConfig {
            scenario,
            controller,
            controllers: self.controllers.clone(),
            module: self.module,
            converter: self.converter,
            settings: self.sim,
        }
    }

    /// SHA-256 of the fully resolved configuration (defaults included), as
    /// 16 hex digits.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
