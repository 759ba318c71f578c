//! Closed loop: PV string → boost converter → MPPT controller, one
//! controller decision per control period.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::converter::{duty_for_input_resistance, input_resistance, step_averaged, BoostParams, BoostState};
use crate::error::{PvError, Result};
use crate::mppt::{Controller, ControllerConfig, ControllerId, ControllerInput, Phase, ZoneEstimator};
use crate::pv::{module_mpp, sig6, EnvInput, ModuleParams, OperatingPoint, PvString};
use crate::roots::brent;
use crate::shading::{ShadingScenario, ShadingZone};

/// Load used by the closed loop. The reflected resistance R·(1 − d)² can
/// only span [0, R]; with 10 Ω most maximum power points (10–90 Ω at the
/// string terminals) would be out of reach.
pub const CLOSED_LOOP_LOAD: f64 = 1200.0;

/// Timing and start-up settings shared by every run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimSettings {
    pub duration: f64,
    pub control_period: f64,
    /// Converter integration step.
    pub substep: f64,
    pub initial_duty: f64,
    pub seed: u64,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            duration: 1.5,
            control_period: 1e-3,
            substep: 20e-6,
            initial_duty: 0.1,
            seed: 42,
        }
    }
}

impl SimSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.control_period > 0.0) || !(self.duration >= 10.0 * self.control_period) {
            return Err(PvError::Config(
                "need control_period > 0 and duration ≥ 10 control periods".into(),
            ));
        }
        if !(self.substep > 0.0 && self.substep <= self.control_period) {
            return Err(PvError::Config("substep must lie in (0, control_period]".into()));
        }
        if !(0.0..1.0).contains(&self.initial_duty) {
            return Err(PvError::Domain(self.initial_duty));
        }
        Ok(())
    }

    pub fn periods(&self) -> usize {
        (self.duration / self.control_period).round() as usize
    }
}

/// Default converter for the closed loop.
pub fn closed_loop_converter() -> BoostParams {
    BoostParams {
        load: CLOSED_LOOP_LOAD,
        ..BoostParams::default()
    }
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub scenario: ShadingScenario,
    pub controller: ControllerId,
    pub controllers: ControllerConfig,
    pub module: ModuleParams,
    pub converter: BoostParams,
    pub settings: SimSettings,
}

impl SimConfig {
    /// Defaults everywhere except scenario and controller.
    pub fn new(scenario: ShadingScenario, controller: ControllerId) -> Self {
        SimConfig {
            scenario,
            controller,
            controllers: ControllerConfig::default(),
            module: ModuleParams::reference(),
            converter: closed_loop_converter(),
            settings: SimSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.controllers.validate()?;
        self.module.validate()?;
        self.converter.validate()?;
        self.settings.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    /// Duty applied during this period.
    pub duty: f64,
    pub v_pv: f64,
    pub i_pv: f64,
    /// Period-mean power drawn by the converter, vin·iL.
    pub p_in: f64,
    /// Period-mean converter output power.
    pub p_out: f64,
    /// Zone estimate handed to the controller.
    pub zone: ShadingZone,
    /// Phase of the controller when it chose `duty`.
    pub phase: Phase,
}

impl TraceRecord {
    pub fn p_pv(&self) -> f64 {
        self.v_pv * self.i_pv
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimTrace {
    pub scenario: String,
    pub controller: String,
    pub control_period: f64,
    pub records: Vec<TraceRecord>,
    /// GMPP of each scenario step, keyed by the step's start time.
    pub oracle: Vec<(f64, OperatingPoint)>,
    /// Energy stored in the converter at t = 0 (J).
    pub initial_energy: f64,
}

impl SimTrace {
    pub fn duration(&self) -> f64 {
        self.records.len() as f64 * self.control_period
    }

    /// GMPP in force at time `t`.
    pub fn oracle_at(&self, t: f64) -> OperatingPoint {
        let k = self.oracle.iter().rposition(|(t0, _)| *t0 <= t).unwrap_or(0);
        self.oracle[k].1
    }

    pub fn final_oracle(&self) -> OperatingPoint {
        self.oracle.last().expect("at least one scenario step").1
    }

    /// Writes `t_s,duty,v_pv,i_pv,p_pv,p_out,zone,phase`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t_s,duty,v_pv,i_pv,p_pv,p_out,zone,phase")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                sig6(r.t),
                sig6(r.duty),
                sig6(r.v_pv),
                sig6(r.i_pv),
                sig6(r.p_pv()),
                sig6(r.p_out),
                r.zone,
                r.phase
            )?;
        }
        Ok(())
    }

    pub fn metrics(&self) -> Metrics {
        metrics_piecewise(self, |t| self.oracle_at(t).p(), self.final_oracle())
    }
}

/// PV operating point where the string characteristic meets the load line
/// v = r_in·i. A string that produces nothing yields (0, 0).
pub fn operating_point(string: &PvString, r_in: f64) -> Result<OperatingPoint> {
    let voc = string.open_circuit_voltage()?;
    if voc <= 0.0 || string.max_photocurrent() <= 0.0 {
        return Ok(OperatingPoint::new(0.0, 0.0));
    }
    // At i_hi every module is bypassed and the string voltage is negative.
    let i_hi = string.max_photocurrent() + 1.0;
    let mut err = None;
    let i = brent(
        |i| match string.voltage_at_current(i) {
            Ok(v) => v - r_in * i,
            Err(e) => {
                err.get_or_insert(e);
                f64::NAN
            }
        },
        0.0,
        i_hi,
        1e-10,
        200,
    );
    if let Some(e) = err {
        return Err(e);
    }
    let i = i.ok_or(PvError::Solver { iterations: 200, residual: f64::NAN })?;
    Ok(OperatingPoint::new(string.voltage_at_current(i)?, i))
}

/// Rated string power: module STC maximum power times module count.
pub fn rated_power(module: &ModuleParams, modules: usize) -> Result<f64> {
    Ok(module_mpp(module, &EnvInput::stc(1.0))?.p() * modules as f64)
}

pub fn run(config: &SimConfig) -> Result<SimTrace> {
    let controller = config
        .controllers
        .build(config.controller, config.settings.initial_duty, config.settings.seed)?;
    run_with(config, controller)
}

/// Runs the loop with an externally built controller (`config.controller`
/// only labels the trace).
pub fn run_with(config: &SimConfig, mut controller: Box<dyn Controller>) -> Result<SimTrace> {
    config.validate()?;
    let s = &config.settings;
    let conv = &config.converter;
    let strings = config
        .scenario
        .steps
        .iter()
        .map(|st| PvString::new(config.module, &st.g))
        .collect::<Result<Vec<_>>>()?;
    let oracle = config
        .scenario
        .steps
        .iter()
        .zip(&strings)
        .map(|(st, pv)| Ok((st.t, pv.gmpp()?)))
        .collect::<Result<Vec<_>>>()?;
    let mut zone = ZoneEstimator::new(
        config.controllers.zone,
        rated_power(&config.module, config.scenario.module_count())?,
    );

    let n = s.periods();
    let substeps = ((s.control_period / s.substep).round() as usize).max(1);
    let h = s.control_period / substeps as f64;

    let mut duty = config.controllers.duty.clamp(s.initial_duty);
    let first = operating_point(&strings[0], input_resistance(duty, conv))?;
    let mut state = BoostState::equilibrium(first.v, duty, conv);
    let initial_energy = 0.5 * conv.inductance * state.il.powi(2) + 0.5 * conv.capacitance * state.vc.powi(2);
    let mut phase = controller.phase();
    let mut records = Vec::with_capacity(n);

    for k in 0..n {
        let t = k as f64 * s.control_period;
        let step = config.scenario.step_index_at(t);
        let op = operating_point(&strings[step], input_resistance(duty, conv))?;
        // Trapezoid means over the substeps, so energies balance exactly.
        let (mut p_in, mut p_out) = (0.0, 0.0);
        for _ in 0..substeps {
            let next = step_averaged(&state, op.v, duty, h, conv);
            p_in += 0.5 * op.v * (state.il + next.il);
            p_out += 0.5 * (state.vc * state.vc + next.vc * next.vc) / conv.load;
            state = next;
        }
        p_in /= substeps as f64;
        p_out /= substeps as f64;
        let z = zone.observe(op.v, op.i);
        records.push(TraceRecord {
            t,
            duty,
            v_pv: op.v,
            i_pv: op.i,
            p_in,
            p_out,
            zone: z,
            phase,
        });
        let input = ControllerInput { v_pv: op.v, i_pv: op.i, t, zone_hint: z };
        duty = config.controllers.duty.clamp(controller.step(&input));
        phase = controller.phase();
    }

    Ok(SimTrace {
        scenario: config.scenario.name.clone(),
        controller: config.controller.key().to_string(),
        control_period: s.control_period,
        records,
        oracle,
        initial_energy,
    })
}

/// Test double that always applies the duty placing the string at its GMPP.
#[derive(Clone, Debug)]
pub struct OracleFollower {
    /// (start time, duty) per scenario step.
    steps: Vec<(f64, f64)>,
    period: f64,
}

impl OracleFollower {
    pub fn new(config: &SimConfig) -> Result<Self> {
        let steps = config
            .scenario
            .steps
            .iter()
            .map(|st| {
                let g = PvString::new(config.module, &st.g)?.gmpp()?;
                let d = if g.i > 0.0 {
                    duty_for_input_resistance(g.v / g.i, &config.converter)
                        .ok_or_else(|| PvError::Config(format!("GMPP at {} Ω exceeds the load", g.v / g.i)))?
                } else {
                    config.controllers.duty.min
                };
                Ok((st.t, config.controllers.duty.clamp(d)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(OracleFollower {
            steps,
            period: config.settings.control_period,
        })
    }

    pub fn duty_at(&self, t: f64) -> f64 {
        let k = self.steps.iter().rposition(|(t0, _)| *t0 <= t + 1e-12).unwrap_or(0);
        self.steps[k].1
    }
}

impl Controller for OracleFollower {
    fn step(&mut self, input: &ControllerInput) -> f64 {
        self.duty_at(input.t + self.period)
    }

    fn phase(&self) -> Phase {
        Phase::Hold
    }
}

/// Runs the oracle-following reference on `config`'s scenario.
pub fn run_oracle(config: &SimConfig) -> Result<SimTrace> {
    let follower = OracleFollower::new(config)?;
    let mut cfg = config.clone();
    cfg.settings.initial_duty = follower.duty_at(0.0);
    run_with(&cfg, Box::new(follower))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// `None` when power never stays inside the band through the end.
    pub settle_time: Option<f64>,
    pub p_final: f64,
    pub tracking_efficiency: f64,
    pub oscillation_amplitude: f64,
    pub reached_gmpp: bool,
}

/// Settling band around the final power.
pub const SETTLE_BAND: f64 = 0.02;

/// Metrics against a single (constant-scenario) oracle.
pub fn metrics(trace: &SimTrace, oracle: &OperatingPoint) -> Metrics {
    metrics_piecewise(trace, |_| oracle.p(), *oracle)
}

/// Metrics with a time-varying oracle; efficiency is integrated piecewise
/// and the GMPP test uses `final_oracle`.
pub fn metrics_piecewise(trace: &SimTrace, oracle_p: impl Fn(f64) -> f64, final_oracle: OperatingPoint) -> Metrics {
    let p: Vec<f64> = trace.records.iter().map(|r| r.p_pv()).collect();
    let n = p.len();
    if n == 0 {
        return Metrics {
            settle_time: None,
            p_final: 0.0,
            tracking_efficiency: 0.0,
            oscillation_amplitude: 0.0,
            reached_gmpp: false,
        };
    }
    let tail = (n / 10).max(1);
    let last = &p[n - tail..];
    let p_final = last.iter().sum::<f64>() / tail as f64;
    let band = SETTLE_BAND * p_final.abs();
    let inside = |x: f64| (x - p_final).abs() <= band;
    // Start of the final in-band run; unsettled unless it covers the tail.
    let start = p.iter().rposition(|&x| !inside(x)).map_or(0, |k| k + 1);
    let settle_time = (start <= n - tail).then(|| trace.records[start].t);
    let harvested: f64 = p.iter().sum();
    let available: f64 = trace.records.iter().map(|r| oracle_p(r.t)).sum();
    let tracking_efficiency = if available > 0.0 { harvested / available } else { 0.0 };
    let (lo, hi) = last
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    Metrics {
        settle_time,
        p_final,
        tracking_efficiency,
        oscillation_amplitude: hi - lo,
        reached_gmpp: p_final >= 0.98 * final_oracle.p(),
    }
}
