//! Averaged (duty-continuous) boost converter.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{PvError, Result};
use crate::pv::sig6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    /// Inductance (H).
    pub inductance: f64,
    /// Output capacitance (F).
    pub capacitance: f64,
    /// Load resistance (Ω).
    pub load: f64,
    /// Switching frequency (Hz); only used for the ripple estimate.
    pub switching_frequency: f64,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            inductance: 4.7e-3,
            capacitance: 470e-6,
            load: 10.0,
            switching_frequency: 25e3,
        }
    }
}

impl BoostParams {
    pub fn validate(&self) -> Result<()> {
        let v = [self.inductance, self.capacitance, self.load, self.switching_frequency];
        if v.iter().all(|x| x.is_finite() && *x > 0.0) {
            Ok(())
        } else {
            Err(PvError::Config(format!("boost parameters must be positive: {self:?}")))
        }
    }

    /// Peak-to-peak inductor ripple vin·d/(L·fs) of the switched circuit.
    pub fn ripple_current(&self, vin: f64, d: f64) -> f64 {
        vin * d / (self.inductance * self.switching_frequency)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoostState {
    /// Inductor current (A).
    pub il: f64,
    /// Capacitor (output) voltage (V).
    pub vc: f64,
}

impl BoostState {
    /// Steady state of the averaged model.
    pub fn equilibrium(vin: f64, d: f64, params: &BoostParams) -> Self {
        let k = 1.0 - d;
        BoostState {
            il: vin / (k * k * params.load),
            vc: vin / k,
        }
    }
}

/// Ideal voltage gain 1/(1 − d).
pub fn steady_gain(d: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&d) {
        return Err(PvError::Domain(d));
    }
    Ok(1.0 / (1.0 - d))
}

/// Resistance seen by the source, R·(1 − d)².
pub fn input_resistance(d: f64, params: &BoostParams) -> f64 {
    let k = 1.0 - d;
    params.load * k * k
}

/// Duty that reflects resistance `r_in` to the source (inverse of
/// [`input_resistance`]); `None` when `r_in` exceeds the load.
pub fn duty_for_input_resistance(r_in: f64, params: &BoostParams) -> Option<f64> {
    (r_in > 0.0 && r_in <= params.load).then(|| 1.0 - (r_in / params.load).sqrt())
}

fn derivative(s: &BoostState, vin: f64, d: f64, p: &BoostParams) -> (f64, f64) {
    let k = 1.0 - d;
    (
        (vin - k * s.vc) / p.inductance,
        (k * s.il - s.vc / p.load) / p.capacitance,
    )
}

/// One RK4 step of the averaged equations; inductor current is clamped at
/// zero afterwards (the diode blocks reverse current).
pub fn step_averaged(state: &BoostState, vin: f64, d: f64, dt: f64, params: &BoostParams) -> BoostState {
    let add = |s: &BoostState, k: (f64, f64), h: f64| BoostState {
        il: s.il + h * k.0,
        vc: s.vc + h * k.1,
    };
    let k1 = derivative(state, vin, d, params);
    let k2 = derivative(&add(state, k1, 0.5 * dt), vin, d, params);
    let k3 = derivative(&add(state, k2, 0.5 * dt), vin, d, params);
    let k4 = derivative(&add(state, k3, dt), vin, d, params);
    let il = state.il + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
    let vc = state.vc + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
    BoostState {
        il: il.max(0.0),
        vc: vc.max(0.0),
    }
}

/// Sampled converter trajectory.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoostTrace {
    pub t: Vec<f64>,
    pub states: Vec<BoostState>,
}

impl BoostTrace {
    /// Writes `t_s,iL_amps,vC_volts`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t_s,iL_amps,vC_volts")?;
        for (t, s) in self.t.iter().zip(&self.states) {
            writeln!(out, "{},{},{}", sig6(*t), sig6(s.il), sig6(s.vc))?;
        }
        Ok(())
    }
}

/// Integrates from `initial` under constant input for `duration` seconds.
pub fn simulate(
    initial: BoostState,
    vin: f64,
    d: f64,
    duration: f64,
    dt: f64,
    params: &BoostParams,
) -> BoostTrace {
    let steps = (duration / dt).round() as usize;
    let mut trace = BoostTrace {
        t: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
    };
    let mut s = initial;
    trace.t.push(0.0);
    trace.states.push(s);
    for k in 1..=steps {
        s = step_averaged(&s, vin, d, dt, params);
        trace.t.push(k as f64 * dt);
        trace.states.push(s);
    }
    trace
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepResponse {
    pub final_value: f64,
    /// Time to first reach the final value (s), the usual rise time of an
    /// underdamped response.
    pub rise_time: f64,
    /// 10–90 % rise time (s).
    pub rise_time_10_90: f64,
    /// Peak overshoot as a fraction of the final value.
    pub overshoot: f64,
}

/// Rise time and overshoot of the output voltage in a trace that starts at
/// rest and ends settled.
pub fn step_response(trace: &BoostTrace) -> StepResponse {
    let v: Vec<f64> = trace.states.iter().map(|s| s.vc).collect();
    let n = v.len();
    let tail = (n / 10).max(1);
    let final_value = v[n - tail..].iter().sum::<f64>() / tail as f64;
    let crossing = |level: f64| -> f64 {
        let target = level * final_value;
        for k in 1..n {
            if v[k] >= target && v[k - 1] < target {
                let frac = (target - v[k - 1]) / (v[k] - v[k - 1]);
                return trace.t[k - 1] + frac * (trace.t[k] - trace.t[k - 1]);
            }
        }
        f64::NAN
    };
    let peak = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    StepResponse {
        final_value,
        rise_time: crossing(1.0),
        rise_time_10_90: crossing(0.9) - crossing(0.1),
        overshoot: (peak - final_value) / final_value,
    }
}
