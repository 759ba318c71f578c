use serde::{Deserialize, Serialize};

use super::{Controller, ControllerInput, DutyLimits, Phase};
use crate::error::{PvError, Result};
use crate::fuzzy::{LinguisticVariable, RuleBase, FIVE_LABELS};
use crate::shading::ShadingZone;

/// Default table indexed by [slope term][slope-change term]. A negative
/// slope (operating right of the peak) raises the duty, which lowers the PV
/// voltage through the boost converter. The table is antisymmetric.
const DEFAULT_TABLE: [[&str; 5]; 5] = [
    ["PB", "PB", "PB", "PS", "PS"],
    ["PS", "PS", "PS", "ZE", "ZE"],
    ["ZE", "ZE", "ZE", "ZE", "ZE"],
    ["ZE", "ZE", "NS", "NS", "NS"],
    ["NS", "NS", "NB", "NB", "NB"],
];

/// Rule base over normalized slope and slope change with output universe
/// `[−limit, +limit]` in duty units.
pub fn default_rule_base(limit: f64) -> RuleBase {
    let e = LinguisticVariable::uniform("slope", -1.0, 1.0, &FIVE_LABELS);
    let ce = LinguisticVariable::uniform("slope_change", -1.0, 1.0, &FIVE_LABELS);
    let out = LinguisticVariable::uniform("duty_step", -limit, limit, &FIVE_LABELS);
    let rules = DEFAULT_TABLE
        .iter()
        .map(|row| row.iter().map(|s| s.to_string()).collect())
        .collect();
    RuleBase::new([e, ce], out, rules).expect("default table is complete")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlcParams {
    /// Multiplier taking ΔP/ΔV (W/V) into the slope universe [−1, 1].
    pub e_scale: f64,
    /// Multiplier taking the slope change (W/V) into [−1, 1].
    pub ce_scale: f64,
    /// Half-width of the base output universe (duty per period).
    pub output_limit: f64,
    /// Duty step taken on the first period, before a slope is known.
    pub probe: f64,
    /// Output-universe gain per shading zone (Zone0..Zone3).
    pub zone_gains: [f64; 4],
    /// Explicit per-zone rule bases; overrides the generated ones.
    pub rule_bases: Option<Vec<RuleBase>>,
}

impl Default for FlcParams {
    fn default() -> Self {
        FlcParams {
            e_scale: 0.03,
            ce_scale: 1.0 / 50.0,
            output_limit: 0.02,
            probe: 0.005,
            zone_gains: [1.0; 4],
            rule_bases: None,
        }
    }
}

impl FlcParams {
    /// Zone-scheduled variant: narrow output when unshaded, widest under
    /// severe shading.
    pub fn zoned() -> Self {
        FlcParams {
            zone_gains: [0.5, 1.0, 1.5, 2.0],
            ..FlcParams::default()
        }
    }

    /// One rule base per zone.
    pub fn rule_bases(&self) -> Result<[RuleBase; 4]> {
        if let Some(rbs) = &self.rule_bases {
            let v: Vec<RuleBase> = rbs
                .iter()
                .map(|rb| RuleBase::new(rb.inputs.clone(), rb.output.clone(), rb.rules.clone()))
                .collect::<Result<_>>()?;
            return v
                .try_into()
                .map_err(|_| PvError::Config("exactly four zone rule bases required".into()));
        }
        if !(self.output_limit > 0.0) || self.zone_gains.iter().any(|g| !(*g > 0.0)) {
            return Err(PvError::Config("FLC output limit and zone gains must be positive".into()));
        }
        let base = default_rule_base(self.output_limit);
        let mut out = Vec::with_capacity(4);
        for g in self.zone_gains {
            out.push(base.with_output_gain(g)?);
        }
        Ok(out.try_into().expect("four zones"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlcState {
    pub duty: f64,
    /// Previous (voltage, power) sample.
    pub prev: Option<(f64, f64)>,
    /// Previous raw slope ΔP/ΔV (W/V).
    pub e_prev: f64,
    /// Duty change emitted by the latest step.
    pub last_delta: f64,
}

impl FlcState {
    pub fn new(duty: f64) -> Self {
        FlcState {
            duty,
            prev: None,
            e_prev: 0.0,
            last_delta: 0.0,
        }
    }
}

/// Slope E = ΔP/ΔV (zero when the voltage did not move) and its change.
fn slope_inputs(state: &mut FlcState, input: &ControllerInput) -> Option<(f64, f64)> {
    let (v, p) = (input.v_pv, input.power());
    let prev = state.prev.replace((v, p))?;
    let dv = v - prev.0;
    let e = if dv.abs() < 1e-6 { 0.0 } else { (p - prev.1) / dv };
    let ce = e - state.e_prev;
    state.e_prev = e;
    Some((e, ce))
}

pub fn flc_step(
    state: &mut FlcState,
    input: &ControllerInput,
    rb: &RuleBase,
    params: &FlcParams,
    limits: &DutyLimits,
) -> f64 {
    let delta = match slope_inputs(state, input) {
        Some((e, ce)) => rb.infer(e * params.e_scale, ce * params.ce_scale),
        None => params.probe,
    };
    let next = limits.clamp(state.duty + delta);
    state.last_delta = next - state.duty;
    state.duty = next;
    next
}

pub fn dzflc_step(
    state: &mut FlcState,
    input: &ControllerInput,
    zone_rbs: &[RuleBase; 4],
    params: &FlcParams,
    limits: &DutyLimits,
) -> f64 {
    flc_step(state, input, &zone_rbs[input.zone_hint.index()], params, limits)
}

/// Fixed-gain fuzzy controller.
#[derive(Clone, Debug)]
pub struct Flc {
    pub state: FlcState,
    rb: RuleBase,
    params: FlcParams,
    limits: DutyLimits,
}

impl Flc {
    pub fn new(params: &FlcParams, limits: DutyLimits, initial_duty: f64) -> Result<Self> {
        let [rb, ..] = params.rule_bases()?;
        Ok(Flc {
            state: FlcState::new(initial_duty),
            rb,
            params: params.clone(),
            limits,
        })
    }
}

impl Controller for Flc {
    fn step(&mut self, input: &ControllerInput) -> f64 {
        flc_step(&mut self.state, input, &self.rb, &self.params, &self.limits)
    }

    fn phase(&self) -> Phase {
        Phase::Tracking
    }
}

/// Fuzzy controller whose rule base follows the detected shading zone.
#[derive(Clone, Debug)]
pub struct DzFlc {
    pub state: FlcState,
    rbs: [RuleBase; 4],
    params: FlcParams,
    limits: DutyLimits,
}

impl DzFlc {
    pub fn new(params: &FlcParams, limits: DutyLimits, initial_duty: f64) -> Result<Self> {
        Ok(DzFlc {
            state: FlcState::new(initial_duty),
            rbs: params.rule_bases()?,
            params: params.clone(),
            limits,
        })
    }

    /// Restarts slope memory at `duty`.
    pub fn restart(&mut self, duty: f64) {
        self.state = FlcState::new(duty);
    }

    /// Steps with a forced zone instead of the hint.
    pub fn step_in_zone(&mut self, input: &ControllerInput, zone: ShadingZone) -> f64 {
        let forced = ControllerInput { zone_hint: zone, ..*input };
        dzflc_step(&mut self.state, &forced, &self.rbs, &self.params, &self.limits)
    }

    pub fn rule_bases(&self) -> &[RuleBase; 4] {
        &self.rbs
    }
}

impl Controller for DzFlc {
    fn step(&mut self, input: &ControllerInput) -> f64 {
        dzflc_step(&mut self.state, input, &self.rbs, &self.params, &self.limits)
    }

    fn phase(&self) -> Phase {
        Phase::Tracking
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(v: f64, p: f64, zone: ShadingZone) -> ControllerInput {
        ControllerInput { v_pv: v, i_pv: p / v, t: 0.0, zone_hint: zone }
    }

    #[test]
    fn default_table_is_antisymmetric() {
        let rb = default_rule_base(0.02);
        for k in 0..=40 {
            for j in 0..=40 {
                let e = -1.0 + k as f64 * 0.05;
                let ce = -1.0 + j as f64 * 0.05;
                let a = rb.infer(e, ce);
                let b = rb.infer(-e, -ce);
                assert!((a + b).abs() < 1e-6, "e={e} ce={ce}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_slope_means_no_move() {
        let rb = default_rule_base(0.02);
        assert!(rb.infer(0.0, 0.0).abs() < 1e-6);
        let rbs = FlcParams::zoned().rule_bases().unwrap();
        assert!(rbs[0].infer(0.0, 0.0).abs() < 1e-6);
    }

    #[test]
    fn positive_slope_lowers_duty() {
        let params = FlcParams::default();
        let rb = default_rule_base(params.output_limit);
        let mut s = FlcState::new(0.5);
        s.prev = Some((100.0, 500.0));
        // ΔP/ΔV = +50 W/V: left of the peak.
        let d = flc_step(&mut s, &at(101.0, 550.0, ShadingZone::Zone0), &rb, &params, &DutyLimits::default());
        assert!(d < 0.5);
    }

    #[test]
    fn first_step_probes() {
        let params = FlcParams::default();
        let rb = default_rule_base(params.output_limit);
        let mut s = FlcState::new(0.1);
        let d = flc_step(&mut s, &at(150.0, 100.0, ShadingZone::Zone0), &rb, &params, &DutyLimits::default());
        assert!((d - 0.105).abs() < 1e-12);
    }

    #[test]
    fn zone_gain_schedule_is_monotone() {
        let rbs = FlcParams::zoned().rule_bases().unwrap();
        for k in 0..=20 {
            for j in 0..=20 {
                let e = -1.0 + k as f64 * 0.1;
                let ce = -1.0 + j as f64 * 0.1;
                let out: Vec<f64> = rbs.iter().map(|rb| rb.infer(e, ce).abs()).collect();
                assert!(out.windows(2).all(|w| w[1] + 1e-12 >= w[0]), "{out:?}");
            }
        }
    }

    #[test]
    fn overridden_rule_bases_must_number_four() {
        let params = FlcParams {
            rule_bases: Some(vec![default_rule_base(0.02)]),
            ..FlcParams::default()
        };
        assert!(params.rule_bases().is_err());
    }
}
