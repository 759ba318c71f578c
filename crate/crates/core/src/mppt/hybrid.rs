//! Hybrid tracker: a coarse fuzzy climb locates a peak, a shading-aware
//! swarm searches a window around it, and a fine fuzzy stage holds the
//! best point found.

use serde::{Deserialize, Serialize};

use super::{
    Controller, ControllerConfig, ControllerInput, DsaPso, DsaPsoParams, DutyLimits, DzFlc, Phase,
    ReinitDetector,
};
use crate::error::{PvError, Result};
use crate::shading::ShadingZone;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HybridParams {
    /// Search-window half-width per zone (Zone0..Zone3).
    pub window: [f64; 4],
    /// The coarse stage ends once |Δd| stays below this ...
    pub stall_threshold: f64,
    /// ... for this many consecutive periods.
    pub stall_periods: usize,
    /// Hard cap on the coarse stage.
    pub coarse_max_periods: usize,
    /// Swarm spread at which the search hands over to the fine stage; the
    /// fine stage does the last bit of refinement.
    pub handoff_tol: f64,
    /// Rule base used by the fine stage.
    pub fine_zone: ShadingZone,
}

impl Default for HybridParams {
    fn default() -> Self {
        HybridParams {
            window: [0.10, 0.10, 0.20, 0.20],
            stall_threshold: 0.002,
            stall_periods: 5,
            coarse_max_periods: 200,
            handoff_tol: 0.02,
            fine_zone: ShadingZone::Zone0,
        }
    }
}

impl HybridParams {
    pub fn validate(&self) -> Result<()> {
        if self.window.iter().any(|w| !(*w > 0.0))
            || !(self.stall_threshold > 0.0)
            || self.stall_periods == 0
            || !(self.handoff_tol > 0.0)
        {
            return Err(PvError::Config("hybrid window, stall threshold and stall periods must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HybridPhase {
    FlcCoarse,
    PsoSearch,
    FlcFine,
}

impl From<HybridPhase> for Phase {
    fn from(p: HybridPhase) -> Phase {
        match p {
            HybridPhase::FlcCoarse => Phase::FlcCoarse,
            HybridPhase::PsoSearch => Phase::PsoSearch,
            HybridPhase::FlcFine => Phase::FlcFine,
        }
    }
}

#[derive(Clone, Debug)]
pub struct HybridState {
    pub phase: HybridPhase,
    pub search_window: (f64, f64),
    pub flc: DzFlc,
    pub swarm: DsaPso,
    pub params: HybridParams,
    limits: DutyLimits,
    reinit: ReinitDetector,
    stall: usize,
    coarse_periods: usize,
}

impl HybridState {
    fn restart_coarse(&mut self, duty: f64) {
        self.phase = HybridPhase::FlcCoarse;
        self.flc.restart(duty);
        self.swarm.swarm = None;
        self.stall = 0;
        self.coarse_periods = 0;
    }
}

/// Window of half-width `w` around `d`, clipped to the duty limits and
/// shifted inward so it keeps its full width where possible.
fn window_around(d: f64, w: f64, limits: &DutyLimits) -> (f64, f64) {
    let w = w.min(0.5 * (limits.max - limits.min));
    let lo = (d - w).max(limits.min);
    let hi = (d + w).min(limits.max);
    if hi - lo >= 2.0 * w - 1e-12 {
        (lo, hi)
    } else if lo <= limits.min {
        (limits.min, limits.min + 2.0 * w)
    } else {
        (limits.max - 2.0 * w, limits.max)
    }
}

pub fn hybrid_step(state: &mut HybridState, input: &ControllerInput) -> f64 {
    let p = input.power();
    match state.phase {
        HybridPhase::FlcCoarse => {
            let d = state.flc.step(input);
            state.coarse_periods += 1;
            // The opening probe is not a stall.
            if state.coarse_periods > 1 && state.flc.state.last_delta.abs() < state.params.stall_threshold {
                state.stall += 1;
            } else {
                state.stall = 0;
            }
            if state.stall < state.params.stall_periods && state.coarse_periods < state.params.coarse_max_periods {
                return d;
            }
            let zone = input.zone_hint;
            let window = window_around(d, state.params.window[zone.index()], &state.limits);
            state.search_window = window;
            // Zone sub-range for the initial spread, the window as hard bounds.
            state.swarm.seed(zone, window);
            state.phase = HybridPhase::PsoSearch;
            // The swarm ignores this measurement (taken under the coarse
            // duty) and emits its first particle.
            state.swarm.search_step(p, zone)
        }
        HybridPhase::PsoSearch => {
            let d = state.swarm.search_step(p, input.zone_hint);
            if state.swarm.converged() {
                let (gd, gp) = state
                    .swarm
                    .swarm
                    .as_ref()
                    .and_then(|s| s.gbest)
                    .unwrap_or((d, p));
                state.flc.restart(gd);
                state.reinit.arm(gp);
                state.phase = HybridPhase::FlcFine;
                return gd;
            }
            d
        }
        HybridPhase::FlcFine => {
            if state.reinit.update(p) {
                let d = state.flc.state.duty;
                state.restart_coarse(d);
                return hybrid_step(state, input);
            }
            let zone = state.params.fine_zone;
            state.flc.step_in_zone(input, zone)
        }
    }
}

/// Hybrid FLC–PSO controller.
#[derive(Clone, Debug)]
pub struct Hybrid {
    pub state: HybridState,
}

impl Hybrid {
    pub fn new(cfg: &ControllerConfig, initial_duty: f64, seed: (u64, u64)) -> Result<Self> {
        cfg.hybrid.validate()?;
        let search = DsaPsoParams {
            converge_tol: cfg.hybrid.handoff_tol,
            ..cfg.dsa_pso.clone()
        };
        Ok(Hybrid {
            state: HybridState {
                phase: HybridPhase::FlcCoarse,
                search_window: (cfg.duty.min, cfg.duty.max),
                flc: DzFlc::new(&cfg.dzflc, cfg.duty, initial_duty)?,
                swarm: DsaPso::new(&search, cfg.reinit, cfg.duty, seed),
                params: cfg.hybrid,
                limits: cfg.duty,
                reinit: ReinitDetector::new(cfg.reinit),
                stall: 0,
                coarse_periods: 0,
            },
        })
    }
}

impl Controller for Hybrid {
    fn step(&mut self, input: &ControllerInput) -> f64 {
        hybrid_step(&mut self.state, input)
    }

    fn phase(&self) -> Phase {
        self.state.phase.into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(v: f64, p: f64) -> ControllerInput {
        ControllerInput { v_pv: v, i_pv: p / v, t: 0.0, zone_hint: ShadingZone::Zone2 }
    }

    #[test]
    fn window_is_clipped_and_shifted() {
        let l = DutyLimits::default();
        assert_eq!(window_around(0.5, 0.1, &l), (0.4, 0.6));
        let (lo, hi) = window_around(0.1, 0.2, &l);
        assert_eq!(lo, 0.05);
        assert!((hi - 0.45).abs() < 1e-12);
        let (lo, hi) = window_around(0.9, 0.2, &l);
        assert!((lo - 0.55).abs() < 1e-12);
        assert_eq!(hi, 0.95);
    }

    #[test]
    fn stalled_coarse_stage_hands_over_to_search() {
        let cfg = ControllerConfig::default();
        let mut h = Hybrid::new(&cfg, 0.5, (42, 6)).unwrap();
        // Constant power at constant voltage: zero slope, the FLC never moves.
        let mut phases = vec![];
        for _ in 0..10 {
            h.step(&input(100.0, 500.0));
            phases.push(h.phase());
        }
        assert_eq!(phases[0], Phase::FlcCoarse);
        assert!(phases.contains(&Phase::PsoSearch));
        let (lo, hi) = h.state.search_window;
        assert!(lo >= 0.05 && hi <= 0.95 && lo < hi);
    }

    #[test]
    fn bimodal_landscape_reaches_fine_stage_at_better_peak() {
        let cfg = ControllerConfig::default();
        let mut h = Hybrid::new(&cfg, 0.3, (42, 6)).unwrap();
        let f = |d: f64| 400.0 * (-(d - 0.35f64).powi(2) / 0.002).exp() + 600.0 * (-(d - 0.55f64).powi(2) / 0.004).exp();
        let mut d = 0.3;
        let mut seen = vec![];
        for _ in 0..1500 {
            let p = f(d).max(1e-3);
            // Voltage falls with duty, as through a boost converter.
            let v = 200.0 * (1.0 - d);
            d = h.step(&input(v, p));
            if seen.last() != Some(&h.phase()) {
                seen.push(h.phase());
            }
        }
        assert_eq!(seen, vec![Phase::FlcCoarse, Phase::PsoSearch, Phase::FlcFine]);
        assert!(f(d) > 0.97 * 600.0, "d = {d}, p = {}", f(d));
    }
}
