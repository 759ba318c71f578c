//! MPPT controllers behind one step-wise interface.
//!
//! Every control period the loop hands the controller the measured PV
//! operating point and receives the duty to apply during the next period.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{PvError, Result};
use crate::shading::ShadingZone;

mod flc;
mod hybrid;
mod po;
mod pso;
mod zone;

pub use flc::{default_rule_base, dzflc_step, flc_step, DzFlc, Flc, FlcParams, FlcState};
pub use hybrid::{hybrid_step, Hybrid, HybridParams, HybridPhase, HybridState};
pub use po::{po_step, PerturbObserve, PoParams, PoState};
pub use pso::{
    dsa_pso_step, pso_step, update_particle, DsaPso, DsaPsoParams, Init, Pso, PsoParams, Swarm,
    SwarmState,
};
pub use zone::{estimate_zone, reinit_detector, ReinitDetector, ReinitParams, ZoneEstimator, ZoneEstimatorParams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DutyLimits {
    pub min: f64,
    pub max: f64,
}

impl Default for DutyLimits {
    fn default() -> Self {
        DutyLimits { min: 0.05, max: 0.95 }
    }
}

impl DutyLimits {
    pub fn clamp(&self, d: f64) -> f64 {
        if d.is_nan() {
            return self.min;
        }
        d.clamp(self.min, self.max)
    }

    pub fn validate(&self) -> Result<()> {
        if 0.0 <= self.min && self.min < self.max && self.max < 1.0 {
            Ok(())
        } else {
            Err(PvError::Config(format!("duty limits must satisfy 0 ≤ min < max < 1: {self:?}")))
        }
    }
}

/// What a controller sees each control period.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControllerInput {
    pub v_pv: f64,
    pub i_pv: f64,
    pub t: f64,
    pub zone_hint: ShadingZone,
}

impl ControllerInput {
    pub fn power(&self) -> f64 {
        self.v_pv * self.i_pv
    }
}

/// Coarse label of what a controller is doing, recorded in traces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Tracking,
    Search,
    Settled,
    FlcCoarse,
    PsoSearch,
    FlcFine,
    Hold,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Tracking => "tracking",
            Phase::Search => "search",
            Phase::Settled => "settled",
            Phase::FlcCoarse => "coarse",
            Phase::PsoSearch => "pso",
            Phase::FlcFine => "fine",
            Phase::Hold => "hold",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub trait Controller: Send {
    /// Consumes the measurement taken under the previously emitted duty and
    /// returns the duty for the next period.
    fn step(&mut self, input: &ControllerInput) -> f64;

    /// Phase the controller is in after its latest decision.
    fn phase(&self) -> Phase;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ControllerId {
    #[serde(rename = "po")]
    Po,
    #[serde(rename = "flc")]
    Flc,
    #[serde(rename = "dzflc")]
    DzFlc,
    #[serde(rename = "pso")]
    Pso,
    #[serde(rename = "dsa-pso")]
    DsaPso,
    #[serde(rename = "hybrid")]
    Hybrid,
}

impl ControllerId {
    pub const ALL: [ControllerId; 6] = [
        ControllerId::Po,
        ControllerId::Flc,
        ControllerId::DzFlc,
        ControllerId::Pso,
        ControllerId::DsaPso,
        ControllerId::Hybrid,
    ];

    pub fn key(self) -> &'static str {
        match self {
            ControllerId::Po => "po",
            ControllerId::Flc => "flc",
            ControllerId::DzFlc => "dzflc",
            ControllerId::Pso => "pso",
            ControllerId::DsaPso => "dsa-pso",
            ControllerId::Hybrid => "hybrid",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ControllerId::Po => "P&O",
            ControllerId::Flc => "FLC",
            ControllerId::DzFlc => "DZ-FLC",
            ControllerId::Pso => "PSO",
            ControllerId::DsaPso => "DSA-PSO",
            ControllerId::Hybrid => "Hybrid FLC-PSO",
        }
    }

    fn stream(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for ControllerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for ControllerId {
    type Err = PvError;

    fn from_str(s: &str) -> Result<Self> {
        let k = s.trim().to_ascii_lowercase().replace(['_', '&'], "-");
        match k.as_str() {
            "po" | "p-o" | "p-and-o" => Ok(ControllerId::Po),
            "flc" => Ok(ControllerId::Flc),
            "dzflc" | "dz-flc" => Ok(ControllerId::DzFlc),
            "pso" => Ok(ControllerId::Pso),
            "dsa-pso" | "dsapso" => Ok(ControllerId::DsaPso),
            "hybrid" | "hybrid-flc-pso" => Ok(ControllerId::Hybrid),
            _ => Err(PvError::UnknownController(s.to_string())),
        }
    }
}

/// Hyperparameters of every controller, keyed by controller name in config
/// files. Missing keys keep their defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerConfig {
    pub duty: DutyLimits,
    pub po: PoParams,
    pub flc: FlcParams,
    pub dzflc: FlcParams,
    pub pso: PsoParams,
    #[serde(rename = "dsa-pso")]
    pub dsa_pso: DsaPsoParams,
    pub hybrid: HybridParams,
    pub reinit: ReinitParams,
    pub zone: ZoneEstimatorParams,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            duty: DutyLimits::default(),
            po: PoParams::default(),
            flc: FlcParams::default(),
            dzflc: FlcParams::zoned(),
            pso: PsoParams::default(),
            dsa_pso: DsaPsoParams::default(),
            hybrid: HybridParams::default(),
            reinit: ReinitParams::default(),
            zone: ZoneEstimatorParams::default(),
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        self.duty.validate()?;
        self.flc.rule_bases()?;
        self.dzflc.rule_bases()?;
        self.pso.validate()?;
        self.dsa_pso.validate()?;
        self.hybrid.validate()?;
        Ok(())
    }

    /// Builds a fresh controller starting from `initial_duty`.
    pub fn build(&self, id: ControllerId, initial_duty: f64, seed: u64) -> Result<Box<dyn Controller>> {
        let d0 = self.duty.clamp(initial_duty);
        let rng_seed = (seed, id.stream());
        Ok(match id {
            ControllerId::Po => Box::new(PerturbObserve::new(self.po, self.duty, d0)),
            ControllerId::Flc => Box::new(Flc::new(&self.flc, self.duty, d0)?),
            ControllerId::DzFlc => Box::new(DzFlc::new(&self.dzflc, self.duty, d0)?),
            ControllerId::Pso => Box::new(Pso::new(&self.pso, self.reinit, self.duty, rng_seed)),
            ControllerId::DsaPso => {
                Box::new(DsaPso::new(&self.dsa_pso, self.reinit, self.duty, rng_seed))
            }
            ControllerId::Hybrid => Box::new(Hybrid::new(self, d0, rng_seed)?),
        })
    }
}

/// Fixed duty, for harness tests.
#[derive(Clone, Debug)]
pub struct ConstantDuty(pub f64);

impl Controller for ConstantDuty {
    fn step(&mut self, _input: &ControllerInput) -> f64 {
        self.0
    }

    fn phase(&self) -> Phase {
        Phase::Hold
    }
}
