use serde::{Deserialize, Serialize};

use super::{Controller, ControllerInput, DutyLimits, Phase};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoParams {
    /// Fixed duty perturbation per control period.
    pub step: f64,
}

impl Default for PoParams {
    fn default() -> Self {
        PoParams { step: 0.005 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoState {
    pub duty: f64,
    pub prev_power: Option<f64>,
    /// +1 or −1.
    pub direction: f64,
}

impl PoState {
    pub fn new(duty: f64) -> Self {
        PoState {
            duty,
            prev_power: None,
            direction: 1.0,
        }
    }
}

/// Keeps the perturbation direction while power rises, reverses it otherwise.
pub fn po_step(state: &mut PoState, input: &ControllerInput, params: &PoParams, limits: &DutyLimits) -> f64 {
    let p = input.power();
    if let Some(prev) = state.prev_power {
        if p - prev <= 0.0 {
            state.direction = -state.direction;
        }
    }
    state.prev_power = Some(p);
    state.duty = limits.clamp(state.duty + state.direction * params.step);
    state.duty
}

#[derive(Clone, Debug)]
pub struct PerturbObserve {
    pub state: PoState,
    params: PoParams,
    limits: DutyLimits,
}

impl PerturbObserve {
    pub fn new(params: PoParams, limits: DutyLimits, initial_duty: f64) -> Self {
        PerturbObserve {
            state: PoState::new(initial_duty),
            params,
            limits,
        }
    }
}

impl Controller for PerturbObserve {
    fn step(&mut self, input: &ControllerInput) -> f64 {
        po_step(&mut self.state, input, &self.params, &self.limits)
    }

    fn phase(&self) -> Phase {
        Phase::Tracking
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shading::ShadingZone;

    fn input(p: f64) -> ControllerInput {
        ControllerInput { v_pv: 100.0, i_pv: p / 100.0, t: 0.0, zone_hint: ShadingZone::Zone0 }
    }

    #[test]
    fn rising_power_keeps_direction() {
        let mut s = PoState { duty: 0.4, prev_power: Some(100.0), direction: 1.0 };
        let d = po_step(&mut s, &input(105.0), &PoParams::default(), &DutyLimits::default());
        assert!((d - 0.405).abs() < 1e-12);
    }

    #[test]
    fn falling_power_reverses() {
        let mut s = PoState { duty: 0.4, prev_power: Some(100.0), direction: 1.0 };
        let d = po_step(&mut s, &input(95.0), &PoParams::default(), &DutyLimits::default());
        assert!((d - 0.395).abs() < 1e-12);
        assert_eq!(s.direction, -1.0);
    }

    #[test]
    fn duty_stays_clamped() {
        let mut s = PoState { duty: 0.95, prev_power: Some(1.0), direction: 1.0 };
        let d = po_step(&mut s, &input(2.0), &PoParams::default(), &DutyLimits::default());
        assert_eq!(d, 0.95);
    }
}
