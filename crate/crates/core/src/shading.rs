//! Shading scenarios and the severity-zone classifier.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{PvError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadingStep {
    /// Start time of the step (s).
    pub t: f64,
    /// Irradiance fraction per module.
    pub g: Vec<f64>,
}

/// Piecewise-constant irradiance profile over a string.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadingScenario {
    pub name: String,
    pub steps: Vec<ShadingStep>,
}

impl ShadingScenario {
    pub fn constant(name: &str, g: &[f64]) -> Self {
        ShadingScenario {
            name: name.to_string(),
            steps: vec![ShadingStep { t: 0.0, g: g.to_vec() }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(PvError::Config(format!("scenario `{}`: {msg}", self.name)));
        let Some(first) = self.steps.first() else {
            return bad("no steps".into());
        };
        if first.t != 0.0 {
            return bad(format!("first step starts at {} s, expected 0", first.t));
        }
        let modules = first.g.len();
        for w in self.steps.windows(2) {
            if w[1].t <= w[0].t || !w[1].t.is_finite() {
                return bad("step start times must be strictly increasing".into());
            }
        }
        for s in &self.steps {
            if s.g.len() != modules || modules == 0 {
                return bad("every step needs the same non-zero module count".into());
            }
            if let Some(g) = s.g.iter().find(|g| !(0.0..=1.0).contains(*g)) {
                return bad(format!("irradiance fraction {g} outside [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn module_count(&self) -> usize {
        self.steps.first().map_or(0, |s| s.g.len())
    }

    /// Index of the step active at time `t`.
    pub fn step_index_at(&self, t: f64) -> usize {
        self.steps
            .iter()
            .rposition(|s| s.t <= t)
            .unwrap_or(0)
    }

    /// Irradiance vector of the last step starting at or before `t`.
    pub fn at(&self, t: f64) -> &[f64] {
        &self.steps[self.step_index_at(t)].g
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: ShadingScenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

pub fn scenario_at(scenario: &ShadingScenario, t: f64) -> &[f64] {
    scenario.at(t)
}

/// The six single-step presets: healthy string, four partial-shading cases
/// and uniform heavy shading.
pub fn builtin_scenarios() -> Vec<ShadingScenario> {
    vec![
        ShadingScenario::constant("NoShading", &[1.0, 1.0, 1.0, 1.0, 1.0]),
        ShadingScenario::constant("Case1", &[0.6, 0.4, 1.0, 1.0, 1.0]),
        ShadingScenario::constant("Case2", &[0.6, 0.4, 0.2, 1.0, 1.0]),
        ShadingScenario::constant("Case3", &[1.0, 1.0, 0.4, 0.2, 1.0]),
        ShadingScenario::constant("Case4", &[0.6, 0.4, 0.2, 0.6, 0.4]),
        ShadingScenario::constant("FullShading", &[0.2, 0.2, 0.2, 0.2, 0.2]),
    ]
}

pub fn builtin_scenario(name: &str) -> Result<ShadingScenario> {
    builtin_scenarios()
        .into_iter()
        .find(|s| s.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| PvError::UnknownScenario(name.to_string()))
}

/// Shading severity, ordered from none to severe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ShadingZone {
    Zone0,
    Zone1,
    Zone2,
    Zone3,
}

impl ShadingZone {
    pub const ALL: [ShadingZone; 4] = [
        ShadingZone::Zone0,
        ShadingZone::Zone1,
        ShadingZone::Zone2,
        ShadingZone::Zone3,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Zone of a mean irradiance fraction. Bands are half-open:
    /// [0.90, ∞), [0.65, 0.90), [0.40, 0.65), (−∞, 0.40).
    pub fn from_mean_irradiance(g_mean: f64) -> ShadingZone {
        if g_mean >= 0.90 {
            ShadingZone::Zone0
        } else if g_mean >= 0.65 {
            ShadingZone::Zone1
        } else if g_mean >= 0.40 {
            ShadingZone::Zone2
        } else {
            ShadingZone::Zone3
        }
    }
}

impl fmt::Display for ShadingZone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

impl FromStr for ShadingZone {
    type Err = PvError;

    fn from_str(s: &str) -> Result<Self> {
        let idx = s.trim().trim_start_matches("Zone").trim_start_matches("zone");
        match idx {
            "0" => Ok(ShadingZone::Zone0),
            "1" => Ok(ShadingZone::Zone1),
            "2" => Ok(ShadingZone::Zone2),
            "3" => Ok(ShadingZone::Zone3),
            _ => Err(PvError::Config(format!("unknown shading zone `{s}`"))),
        }
    }
}

pub fn classify_zone(g: &[f64]) -> ShadingZone {
    if g.is_empty() {
        return ShadingZone::Zone3;
    }
    let mean = g.iter().sum::<f64>() / g.len() as f64;
    ShadingZone::from_mean_irradiance(mean)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_table() {
        assert_eq!(builtin_scenario("Case3").unwrap().at(0.0), &[1.0, 1.0, 0.4, 0.2, 1.0]);
        assert_eq!(builtin_scenario("FullShading").unwrap().at(3.0), &[0.2; 5]);
        assert_eq!(builtin_scenario("NoShading").unwrap().at(0.0), &[1.0; 5]);
        assert_eq!(builtin_scenarios().len(), 6);
        for s in builtin_scenarios() {
            s.validate().unwrap();
        }
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(builtin_scenario("missing"), Err(PvError::UnknownScenario(_))));
    }

    #[test]
    fn step_boundary_belongs_to_new_step() {
        let s = ShadingScenario {
            name: "step".into(),
            steps: vec![
                ShadingStep { t: 0.0, g: vec![1.0; 5] },
                ShadingStep { t: 0.5, g: vec![0.2; 5] },
            ],
        };
        assert_eq!(s.at(0.5), &[0.2; 5]);
        assert_eq!(s.at(0.499), &[1.0; 5]);
        assert_eq!(s.at(7.0), &[0.2; 5]);
    }

    #[test]
    fn invalid_scenarios_rejected() {
        let mut s = ShadingScenario::constant("x", &[1.0; 5]);
        s.steps[0].t = 0.1;
        assert!(s.validate().is_err());
        let s = ShadingScenario::constant("x", &[1.2; 5]);
        assert!(s.validate().is_err());
        let s = ShadingScenario { name: "x".into(), steps: vec![] };
        assert!(s.validate().is_err());
    }

    #[test]
    fn zone_anchors() {
        assert_eq!(classify_zone(&[1.0; 5]), ShadingZone::Zone0);
        assert_eq!(classify_zone(&[0.8; 5]), ShadingZone::Zone1);
        assert_eq!(classify_zone(&[0.55; 5]), ShadingZone::Zone2);
        assert_eq!(classify_zone(&[0.2; 5]), ShadingZone::Zone3);
        assert_eq!(ShadingZone::from_mean_irradiance(0.90), ShadingZone::Zone0);
        assert_eq!(ShadingZone::from_mean_irradiance(0.65), ShadingZone::Zone1);
        assert_eq!(ShadingZone::from_mean_irradiance(0.40), ShadingZone::Zone2);
    }

    #[test]
    fn zone_bands_are_contiguous() {
        let zones: Vec<ShadingZone> = (0..=1000)
            .map(|k| ShadingZone::from_mean_irradiance(k as f64 * 1e-3))
            .collect();
        let changes = zones.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(changes, 3);
        assert!(zones.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(zones[0], ShadingZone::Zone3);
        assert_eq!(zones[1000], ShadingZone::Zone0);
    }
}
