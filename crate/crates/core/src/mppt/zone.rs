//! Zone estimation from measured power and the re-initialization trigger.

use serde::{Deserialize, Serialize};

use crate::shading::{classify_zone, ShadingZone};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ZoneEstimatorParams {
    /// Zone assumed before the first confident estimate.
    pub initial_zone: ShadingZone,
    /// Largest normalized slope |dP/dV|·V/P still counted as near a peak.
    pub slope_tolerance: f64,
    /// Largest relative voltage step for which ΔP/ΔV approximates dP/dV.
    pub max_relative_dv: f64,
}

impl Default for ZoneEstimatorParams {
    fn default() -> Self {
        ZoneEstimatorParams {
            initial_zone: ShadingZone::Zone2,
            slope_tolerance: 0.2,
            max_relative_dv: 0.05,
        }
    }
}

/// Zone from the operating point: mean irradiance is estimated as P/P_rated
/// while the operating point sits near a power peak; otherwise the last
/// confident estimate is held.
pub fn estimate_zone(
    v_pv: f64,
    i_pv: f64,
    normalized_slope: Option<f64>,
    rated_power: f64,
    slope_tolerance: f64,
    held: ShadingZone,
) -> ShadingZone {
    match normalized_slope {
        Some(s) if s.abs() <= slope_tolerance && rated_power > 0.0 => {
            let g = (v_pv * i_pv / rated_power).clamp(0.0, 1.0);
            classify_zone(&[g])
        }
        _ => held,
    }
}

#[derive(Clone, Debug)]
pub struct ZoneEstimator {
    params: ZoneEstimatorParams,
    rated_power: f64,
    prev: Option<(f64, f64)>,
    zone: ShadingZone,
}

impl ZoneEstimator {
    pub fn new(params: ZoneEstimatorParams, rated_power: f64) -> Self {
        ZoneEstimator {
            params,
            rated_power,
            prev: None,
            zone: params.initial_zone,
        }
    }

    pub fn zone(&self) -> ShadingZone {
        self.zone
    }

    /// Feeds one measurement and returns the current zone.
    pub fn observe(&mut self, v: f64, i: f64) -> ShadingZone {
        let p = v * i;
        let slope = self.prev.and_then(|(v0, p0)| {
            let dv = v - v0;
            let local = dv.abs() > 1e-6 && dv.abs() <= self.params.max_relative_dv * v.abs().max(1e-9);
            (local && p > 0.0).then(|| (p - p0) / dv * v / p)
        });
        self.prev = Some((v, p));
        self.zone = estimate_zone(v, i, slope, self.rated_power, self.params.slope_tolerance, self.zone);
        self.zone
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReinitParams {
    /// Relative power deviation that counts as a change.
    pub threshold: f64,
    /// Consecutive deviating periods before triggering.
    pub periods: usize,
    /// Smoothing factor for the reference while power stays in band.
    pub tracking: f64,
}

impl Default for ReinitParams {
    fn default() -> Self {
        ReinitParams {
            threshold: 0.10,
            periods: 3,
            tracking: 0.05,
        }
    }
}

/// True when `p_now` deviates from the reference by more than `threshold`
/// relative to max(p_ref, 1 W).
pub fn reinit_detector(p_now: f64, p_ref: f64, threshold: f64) -> bool {
    (p_now - p_ref).abs() / p_ref.max(1.0) > threshold
}

#[derive(Clone, Debug)]
pub struct ReinitDetector {
    params: ReinitParams,
    p_ref: Option<f64>,
    count: usize,
}

impl ReinitDetector {
    pub fn new(params: ReinitParams) -> Self {
        ReinitDetector { params, p_ref: None, count: 0 }
    }

    /// Starts watching around a settled power level.
    pub fn arm(&mut self, p_ref: f64) {
        self.p_ref = Some(p_ref);
        self.count = 0;
    }

    pub fn disarm(&mut self) {
        self.p_ref = None;
        self.count = 0;
    }

    pub fn reference(&self) -> Option<f64> {
        self.p_ref
    }

    /// Feeds one power sample; returns true (and disarms) on a sustained
    /// deviation.
    pub fn update(&mut self, p_now: f64) -> bool {
        let Some(p_ref) = self.p_ref else {
            return false;
        };
        if reinit_detector(p_now, p_ref, self.params.threshold) {
            self.count += 1;
            if self.count >= self.params.periods {
                self.disarm();
                return true;
            }
        } else {
            self.count = 0;
            self.p_ref = Some(p_ref + self.params.tracking * (p_now - p_ref));
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steady_power_never_triggers() {
        let mut d = ReinitDetector::new(ReinitParams::default());
        d.arm(1000.0);
        assert!((0..1000).all(|_| !d.update(1000.0)));
    }

    #[test]
    fn five_percent_ripple_never_triggers() {
        let mut d = ReinitDetector::new(ReinitParams::default());
        d.arm(600.0);
        for k in 0..2000 {
            let p = 600.0 * (1.0 + 0.05 * (k as f64 * 0.37).sin());
            assert!(!d.update(p));
        }
    }

    #[test]
    fn large_drop_triggers_on_third_period() {
        let mut d = ReinitDetector::new(ReinitParams::default());
        d.arm(1000.0);
        assert!(!d.update(180.0));
        assert!(!d.update(180.0));
        assert!(d.update(180.0));
        assert_eq!(d.reference(), None);
    }

    #[test]
    fn single_glitch_is_ignored() {
        let mut d = ReinitDetector::new(ReinitParams::default());
        d.arm(1000.0);
        assert!(!d.update(500.0));
        assert!(!d.update(1000.0));
        assert!(!d.update(500.0));
        assert!(!d.update(500.0));
        assert!(d.update(500.0));
    }

    #[test]
    fn zone_from_peak_power() {
        assert_eq!(estimate_zone(131.7, 7.59, Some(0.0), 1000.0, 0.2, ShadingZone::Zone3), ShadingZone::Zone0);
        assert_eq!(estimate_zone(123.5, 1.477, Some(0.01), 1000.0, 0.2, ShadingZone::Zone0), ShadingZone::Zone3);
        // Mid-transient: hold.
        assert_eq!(estimate_zone(150.0, 1.0, Some(-3.0), 1000.0, 0.2, ShadingZone::Zone1), ShadingZone::Zone1);
        assert_eq!(estimate_zone(150.0, 1.0, None, 1000.0, 0.2, ShadingZone::Zone2), ShadingZone::Zone2);
    }

    #[test]
    fn estimator_needs_a_local_slope() {
        let mut z = ZoneEstimator::new(ZoneEstimatorParams::default(), 1000.0);
        assert_eq!(z.observe(131.0, 7.6), ZoneEstimatorParams::default().initial_zone);
        // Flat power across a small voltage step: near a peak.
        assert_eq!(z.observe(131.5, 7.571), ShadingZone::Zone0);
        // Large jump: no derivative, zone held.
        assert_eq!(z.observe(60.0, 3.0), ShadingZone::Zone0);
    }
}
