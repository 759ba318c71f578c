//! Single-diode PV module model, series strings with bypass diodes, curve
//! sweeps and the brute-force global-maximum oracle.
//!
//! A module obeys the implicit relation
//!
//! ```text
//! i = g·iph − i0·(exp((v + i·rs)/a) − 1) − (v + i·rs)/rsh,    a = n·ns·Vt
//! ```
//!
//! Strings are composed at common current: each module contributes the voltage
//! that carries the string current, clamped at `−bypass_drop` when its bypass
//! diode conducts.

use std::io::Write;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{PvError, Result};
use crate::par;
use crate::roots::{brent, golden_max};

const BOLTZMANN: f64 = 1.380_649e-23;
const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
const KELVIN_OFFSET: f64 = 273.15;

const NEWTON_MAX_ITER: usize = 100;
const RESIDUAL_TOL: f64 = 1e-9;

/// Minimum samples for a curve to be accepted by [`string_curve`].
pub const MIN_CURVE_POINTS: usize = 100;
/// Samples used for oracle-grade sweeps.
pub const ORACLE_POINTS: usize = 2000;
/// Modules in the reference string.
pub const STRING_MODULES: usize = 5;

/// Thermal voltage kT/q at a cell temperature in °C.
pub fn thermal_voltage(t_cell: f64) -> f64 {
    BOLTZMANN * (t_cell + KELVIN_OFFSET) / ELEMENTARY_CHARGE
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModuleParams {
    /// Photocurrent at STC (A).
    pub iph_stc: f64,
    /// Diode saturation current (A).
    pub i0: f64,
    /// Diode ideality factor.
    pub n: f64,
    /// Series-connected cells per module.
    pub ns_cells: u32,
    /// Series resistance (Ω).
    pub rs: f64,
    /// Shunt resistance (Ω).
    pub rsh: f64,
    /// Bypass diode forward drop (V).
    pub bypass_drop: f64,
    /// Reference cell temperature (°C).
    pub t_stc: f64,
}

impl ModuleParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.i0 > 0.0
            && self.iph_stc > 0.0
            && (1.0..=2.0).contains(&self.n)
            && self.ns_cells > 0
            && self.rs >= 0.0
            && self.rsh > 100.0 * self.rs
            && self.bypass_drop >= 0.0
            && [self.iph_stc, self.i0, self.n, self.rs, self.rsh, self.bypass_drop, self.t_stc]
                .iter()
                .all(|x| x.is_finite());
        if ok {
            Ok(())
        } else {
            Err(PvError::Config(format!("module parameters out of range: {self:?}")))
        }
    }

    /// Modified ideality voltage n·ns·Vt at the given cell temperature.
    pub fn diode_voltage_scale(&self, t_cell: f64) -> f64 {
        self.n * self.ns_cells as f64 * thermal_voltage(t_cell)
    }

    /// The calibrated reference module shared by the benchmarks.
    pub fn reference() -> ModuleParams {
        static REFERENCE: OnceLock<ModuleParams> = OnceLock::new();
        *REFERENCE.get_or_init(|| {
            calibrate(&CalibrationTargets::default())
                .expect("reference calibration targets are feasible")
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvInput {
    /// Irradiance fraction relative to 1000 W/m².
    pub g: f64,
    /// Cell temperature (°C).
    pub t_cell: f64,
}

impl EnvInput {
    pub fn stc(g: f64) -> Self {
        EnvInput { g, t_cell: 25.0 }
    }
}

/// A (voltage, current) pair. Power is always derived.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub v: f64,
    pub i: f64,
}

impl OperatingPoint {
    pub fn new(v: f64, i: f64) -> Self {
        OperatingPoint { v, i }
    }

    pub fn p(&self) -> f64 {
        self.v * self.i
    }
}

struct ModuleEq {
    iph: f64,
    i0: f64,
    a: f64,
    rs: f64,
    rsh: f64,
}

impl ModuleEq {
    fn new(params: &ModuleParams, env: &EnvInput) -> Self {
        ModuleEq {
            iph: env.g * params.iph_stc,
            i0: params.i0,
            a: params.diode_voltage_scale(env.t_cell),
            rs: params.rs,
            rsh: params.rsh,
        }
    }

    fn residual(&self, v: f64, i: f64) -> f64 {
        let x = v + i * self.rs;
        self.iph - self.i0 * (x / self.a).exp_m1() - x / self.rsh - i
    }
}

/// Residual of the implicit single-diode equation at (v, i).
pub fn module_residual(params: &ModuleParams, env: &EnvInput, v: f64, i: f64) -> f64 {
    ModuleEq::new(params, env).residual(v, i)
}

/// Safeguarded Newton for a strictly decreasing `f` with bracket `[lo, hi]`
/// (f(lo) > 0 > f(hi)). Newton steps that leave the bracket fall back to
/// bisection.
fn newton_decreasing<F>(f: F, mut lo: f64, mut hi: f64, x0: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> (f64, f64),
{
    let mut x = x0.clamp(lo, hi);
    let mut last = f64::INFINITY;
    for _ in 0..NEWTON_MAX_ITER {
        let (fx, dfx) = f(x);
        last = fx;
        if fx.abs() < tol {
            return Ok(x);
        }
        if fx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let step = x - fx / dfx;
        x = if step.is_finite() && step > lo && step < hi {
            step
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-15 * (1.0 + x.abs()) {
            let (fx, _) = f(x);
            if fx.abs() < RESIDUAL_TOL {
                return Ok(x);
            }
            last = fx;
            break;
        }
    }
    Err(PvError::Solver {
        iterations: NEWTON_MAX_ITER,
        residual: last,
    })
}

/// Module current at terminal voltage `v`.
pub fn solve_module_current(params: &ModuleParams, env: &EnvInput, v: f64) -> Result<f64> {
    if !v.is_finite() {
        return Err(PvError::Config(format!("non-finite module voltage {v}")));
    }
    let m = ModuleEq::new(params, env);
    let eval = |i: f64| {
        let x = v + i * m.rs;
        let e = (x / m.a).exp();
        let f = m.iph - m.i0 * (e - 1.0) - x / m.rsh - i;
        let df = -m.i0 * m.rs / m.a * e - m.rs / m.rsh - 1.0;
        (f, df)
    };
    let mut lo = -1.0;
    let mut hi = m.iph + 1.0;
    while eval(lo).0 <= 0.0 {
        lo = 2.0 * lo - 1.0;
        if lo < -1e9 {
            return Err(PvError::Solver { iterations: 0, residual: eval(lo).0 });
        }
    }
    while eval(hi).0 >= 0.0 {
        hi = 2.0 * hi + 1.0;
        if hi > 1e9 {
            return Err(PvError::Solver { iterations: 0, residual: eval(hi).0 });
        }
    }
    newton_decreasing(eval, lo, hi, m.iph, 1e-12)
}

/// Module terminal voltage carrying current `i`, clamped at `−bypass_drop`
/// when the bypass diode takes over.
pub fn module_voltage_at_current(params: &ModuleParams, env: &EnvInput, i: f64) -> Result<f64> {
    let m = ModuleEq::new(params, env);
    // Work in the junction voltage x = v + i·rs, where the equation is
    // strictly decreasing.
    let c = m.iph - i;
    let h = |x: f64| {
        let e = (x / m.a).exp();
        (c - m.i0 * (e - 1.0) - x / m.rsh, -m.i0 / m.a * e - 1.0 / m.rsh)
    };
    let x_clamp = -params.bypass_drop + i * m.rs;
    if h(x_clamp).0 <= 0.0 {
        return Ok(-params.bypass_drop);
    }
    let hi = if c > 0.0 {
        m.a * (c / m.i0).ln_1p() + 1e-9
    } else {
        0.0
    };
    let x = newton_decreasing(h, x_clamp, hi.max(x_clamp + 1e-12), hi, 1e-12)?;
    Ok((x - i * m.rs).max(-params.bypass_drop))
}

/// A series string of identical modules under per-module irradiance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PvString {
    pub params: ModuleParams,
    pub g: Vec<f64>,
    pub t_cell: f64,
}

impl PvString {
    pub fn new(params: ModuleParams, g: &[f64]) -> Result<Self> {
        params.validate()?;
        if g.is_empty() {
            return Err(PvError::Config("string needs at least one module".into()));
        }
        if let Some(bad) = g.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(PvError::Config(format!("irradiance fraction {bad} outside [0, 1]")));
        }
        Ok(PvString {
            params,
            g: g.to_vec(),
            t_cell: params.t_stc,
        })
    }

    fn env(&self, g: f64) -> EnvInput {
        EnvInput { g, t_cell: self.t_cell }
    }

    /// String voltage at common current `i`.
    pub fn voltage_at_current(&self, i: f64) -> Result<f64> {
        self.g
            .iter()
            .map(|&g| module_voltage_at_current(&self.params, &self.env(g), i))
            .sum()
    }

    /// Largest module short-circuit photocurrent in the string.
    pub fn max_photocurrent(&self) -> f64 {
        self.g.iter().cloned().fold(0.0, f64::max) * self.params.iph_stc
    }

    pub fn open_circuit_voltage(&self) -> Result<f64> {
        self.voltage_at_current(0.0)
    }

    /// String current at terminal voltage `v` (inverse of the common-current
    /// composition; string voltage is non-increasing in current).
    pub fn current_at_voltage(&self, v: f64) -> Result<f64> {
        let mut lo = 0.0;
        while self.voltage_at_current(lo)? < v {
            lo = 2.0 * lo - 1.0;
            if lo < -1e6 {
                return Err(PvError::Solver { iterations: 0, residual: v });
            }
        }
        let hi = self.max_photocurrent() + 1.0;
        let mut err = None;
        let root = brent(
            |i| match self.voltage_at_current(i) {
                Ok(vs) => vs - v,
                Err(e) => {
                    err.get_or_insert(e);
                    f64::NAN
                }
            },
            lo,
            hi,
            1e-12,
            200,
        );
        if let Some(e) = err {
            return Err(e);
        }
        root.ok_or(PvError::Solver { iterations: 200, residual: f64::NAN })
    }

    pub fn power_at_voltage(&self, v: f64) -> Result<f64> {
        Ok(v * self.current_at_voltage(v)?)
    }

    /// Samples the characteristic on a uniform voltage grid over [0, Voc].
    pub fn curve(&self, n_points: usize) -> Result<PvCurve> {
        if n_points < MIN_CURVE_POINTS {
            return Err(PvError::Config(format!(
                "curve needs at least {MIN_CURVE_POINTS} points, got {n_points}"
            )));
        }
        let voc = self.open_circuit_voltage()?;
        let span = if voc > 1e-9 { voc } else { 1.0 };
        let step = span / (n_points - 1) as f64;
        let currents = par::map_range(n_points, |k| {
            let v = if k + 1 == n_points { span } else { k as f64 * step };
            self.current_at_voltage(v).map(|i| OperatingPoint::new(v, i))
        });
        let points = currents.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(PvCurve {
            points,
            model: Some(self.clone()),
        })
    }

    /// Global maximum power point refined on the continuous model.
    pub fn gmpp(&self) -> Result<OperatingPoint> {
        gmpp_oracle(&self.curve(ORACLE_POINTS)?)
    }
}

/// Sampled string characteristic ordered by increasing voltage.
#[derive(Clone, Debug, PartialEq)]
pub struct PvCurve {
    pub points: Vec<OperatingPoint>,
    model: Option<PvString>,
}

impl PvCurve {
    /// A curve from raw samples, without a model to refine against.
    pub fn from_points(points: Vec<OperatingPoint>) -> Self {
        PvCurve { points, model: None }
    }

    pub fn model(&self) -> Option<&PvString> {
        self.model.as_ref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Checks ordering and monotonicity of the samples.
    pub fn check_invariants(&self) -> Result<()> {
        for w in self.points.windows(2) {
            if w[1].v <= w[0].v {
                return Err(PvError::Config("curve voltages not strictly increasing".into()));
            }
            if w[1].i > w[0].i + 1e-6 {
                return Err(PvError::Config(format!(
                    "curve current rises from {} A to {} A at {} V",
                    w[0].i, w[1].i, w[1].v
                )));
            }
        }
        Ok(())
    }

    /// Writes `v_volts,i_amps,p_watts` rows with six significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "v_volts,i_amps,p_watts")?;
        for pt in &self.points {
            writeln!(out, "{},{},{}", sig6(pt.v), sig6(pt.i), sig6(pt.p()))?;
        }
        Ok(())
    }
}

/// Formats with six significant digits, without exponent for ordinary
/// magnitudes.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".into() } else { format!("{x}") };
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-4..15).contains(&mag) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - mag).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        let t = s.trim_end_matches('0').trim_end_matches('.');
        if t == "-0" { "0".into() } else { t.to_string() }
    } else {
        s
    }
}

/// String characteristic for the given per-module irradiance fractions.
pub fn string_curve(params: &ModuleParams, g: &[f64], n_points: usize) -> Result<PvCurve> {
    PvString::new(*params, g)?.curve(n_points)
}

/// Global argmax of power over the curve, refined by golden-section search
/// on the continuous model between the neighbours of the sampled argmax.
pub fn gmpp_oracle(curve: &PvCurve) -> Result<OperatingPoint> {
    let pts = &curve.points;
    let Some((k, best)) = pts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.p().total_cmp(&b.1.p()))
    else {
        return Err(PvError::Config("empty curve".into()));
    };
    let Some(model) = &curve.model else {
        return Ok(*best);
    };
    let lo = pts[k.saturating_sub(1)].v;
    let hi = pts[(k + 1).min(pts.len() - 1)].v;
    let mut err = None;
    let (v, p) = golden_max(
        |v| match model.power_at_voltage(v) {
            Ok(p) => p,
            Err(e) => {
                err.get_or_insert(e);
                f64::NEG_INFINITY
            }
        },
        lo,
        hi,
        1e-3,
    );
    if let Some(e) = err {
        return Err(e);
    }
    if p < best.p() {
        return Ok(*best);
    }
    Ok(OperatingPoint::new(v, model.current_at_voltage(v)?))
}

/// Interior local power maxima (dP/dV changes sign from + to −) whose
/// topographic prominence is at least `min_prominence`, ordered by voltage.
pub fn local_maxima(curve: &PvCurve, min_prominence: f64) -> Vec<OperatingPoint> {
    let p: Vec<f64> = curve.points.iter().map(|pt| pt.p()).collect();
    let n = p.len();
    let mut out = Vec::new();
    if n < 3 {
        return out;
    }
    for j in 1..n - 1 {
        if !(p[j] > p[j - 1] && p[j] >= p[j + 1]) {
            continue;
        }
        // Plateau tops are counted once, at their left edge.
        let mut left_min = p[j];
        let mut k = j;
        while k > 0 {
            k -= 1;
            if p[k] > p[j] {
                break;
            }
            left_min = left_min.min(p[k]);
        }
        let mut right_min = p[j];
        let mut k = j;
        while k + 1 < n {
            k += 1;
            if p[k] > p[j] {
                break;
            }
            right_min = right_min.min(p[k]);
        }
        if p[j] - left_min.max(right_min) >= min_prominence {
            out.push(curve.points[j]);
        }
    }
    out
}

/// Datasheet-style STC targets for [`calibrate`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTargets {
    pub vmp: f64,
    pub imp: f64,
    pub voc: f64,
    pub isc: f64,
}

impl Default for CalibrationTargets {
    fn default() -> Self {
        // 131.73 V / 7.59 A string optimum split over five modules.
        CalibrationTargets {
            vmp: 26.346,
            imp: 7.59,
            voc: 32.9,
            isc: 8.10,
        }
    }
}

const CAL_NS_CELLS: u32 = 54;
const CAL_RSH: f64 = 300.0;
const CAL_BYPASS_DROP: f64 = 0.5;
const CAL_T: f64 = 25.0;
const MAX_FILL_FACTOR: f64 = 0.85;

/// Photocurrent and saturation current that reproduce Voc and Isc exactly
/// for a given ideality and series resistance (linear in both unknowns).
fn anchor_currents(t: &CalibrationTargets, n: f64, rs: f64) -> Option<(f64, f64)> {
    let a = n * CAL_NS_CELLS as f64 * thermal_voltage(CAL_T);
    let e_oc = (t.voc / a).exp_m1();
    let e_sc = (t.isc * rs / a).exp_m1();
    let b_oc = t.voc / CAL_RSH;
    let b_sc = t.isc * (1.0 + rs / CAL_RSH);
    // iph − i0·e_oc = b_oc ; iph − i0·e_sc = b_sc
    let i0 = (b_sc - b_oc) / (e_oc - e_sc);
    let iph = b_oc + i0 * e_oc;
    (i0 > 0.0 && iph > 0.0 && i0.is_finite()).then_some((iph, i0))
}

fn candidate(t: &CalibrationTargets, n: f64, rs: f64) -> Option<ModuleParams> {
    let (iph_stc, i0) = anchor_currents(t, n, rs)?;
    Some(ModuleParams {
        iph_stc,
        i0,
        n,
        ns_cells: CAL_NS_CELLS,
        rs,
        rsh: CAL_RSH,
        bypass_drop: CAL_BYPASS_DROP,
        t_stc: CAL_T,
    })
}

/// Maximum power point of a single module at the given irradiance.
pub fn module_mpp(params: &ModuleParams, env: &EnvInput) -> Result<OperatingPoint> {
    let voc = module_voltage_at_current(params, env, 0.0)?;
    if voc <= 0.0 {
        return Ok(OperatingPoint::new(0.0, 0.0));
    }
    let mut err = None;
    let (v, _) = golden_max(
        |v| match solve_module_current(params, env, v) {
            Ok(i) => v * i,
            Err(e) => {
                err.get_or_insert(e);
                f64::NEG_INFINITY
            }
        },
        0.0,
        voc,
        1e-7,
    );
    if let Some(e) = err {
        return Err(e);
    }
    Ok(OperatingPoint::new(v, solve_module_current(params, env, v)?))
}

/// Fits iph, i0, rs and the ideality factor so the STC curve passes through
/// (0, isc), (voc, 0) and has its maximum power point at (vmp, imp).
///
/// Voc and Isc are matched exactly; rs places the MPP voltage and the
/// ideality (searched over [1, 2]) minimizes the remaining MPP current error.
pub fn calibrate(targets: &CalibrationTargets) -> Result<ModuleParams> {
    let t = targets;
    let finite = [t.vmp, t.imp, t.voc, t.isc].iter().all(|x| x.is_finite());
    if !finite || !(0.0 < t.vmp && t.vmp < t.voc) || !(0.0 < t.imp && t.imp < t.isc) {
        return Err(PvError::Calibration(format!(
            "targets must satisfy 0 < vmp < voc and 0 < imp < isc: {t:?}"
        )));
    }
    let ff = t.vmp * t.imp / (t.voc * t.isc);
    if ff > MAX_FILL_FACTOR {
        return Err(PvError::Calibration(format!(
            "fill factor {ff:.3} exceeds {MAX_FILL_FACTOR}"
        )));
    }
    let env = EnvInput::stc(1.0);
    let mpp_of = |n: f64, rs: f64| -> Option<OperatingPoint> {
        let p = candidate(t, n, rs)?;
        module_mpp(&p, &env).ok()
    };
    let rs_max = ((t.voc - t.vmp) / t.imp).min(CAL_RSH / 100.0 * 0.999);
    // For a fixed ideality, the MPP voltage falls monotonically with rs.
    let rs_for = |n: f64| -> Option<f64> {
        let v0 = mpp_of(n, 0.0)?.v;
        if v0 <= t.vmp {
            return Some(0.0);
        }
        brent(
            |rs| mpp_of(n, rs).map_or(f64::NAN, |m| m.v - t.vmp),
            0.0,
            rs_max,
            1e-9,
            100,
        )
    };
    let current_error = |n: f64| -> f64 {
        rs_for(n)
            .and_then(|rs| mpp_of(n, rs))
            .map_or(f64::INFINITY, |m| (m.i / t.imp - 1.0).abs())
    };
    let (n_best, _) = golden_max(|n| -current_error(n), 1.0, 2.0, 1e-5);
    // Golden section never evaluates the bracket ends; the optimum often sits
    // at the lower bound.
    let n = [1.0, n_best, 2.0]
        .into_iter()
        .min_by(|a, b| current_error(*a).total_cmp(&current_error(*b)))
        .unwrap_or(n_best);
    let rs = rs_for(n).ok_or_else(|| PvError::Calibration("no series resistance fits vmp".into()))?;
    let params =
        candidate(t, n, rs).ok_or_else(|| PvError::Calibration("no positive diode currents".into()))?;
    params.validate().map_err(|e| PvError::Calibration(e.to_string()))?;

    let mpp = module_mpp(&params, &env)?;
    let isc = solve_module_current(&params, &env, 0.0)?;
    let voc = module_voltage_at_current(&params, &env, 0.0)?;
    let rel = |a: f64, b: f64| (a / b - 1.0).abs();
    if rel(mpp.v, t.vmp) > 0.005 || rel(mpp.i, t.imp) > 0.005 {
        return Err(PvError::Calibration(format!(
            "best fit MPP ({:.3} V, {:.4} A) misses targets ({} V, {} A) by more than 0.5%",
            mpp.v, mpp.i, t.vmp, t.imp
        )));
    }
    if rel(voc, t.voc) > 0.01 || rel(isc, t.isc) > 0.01 {
        return Err(PvError::Calibration(format!(
            "best fit Voc/Isc ({voc:.3} V, {isc:.4} A) miss targets by more than 1%"
        )));
    }
    Ok(params)
}
