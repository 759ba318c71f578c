//! Particle swarm over the duty cycle with sequential evaluation: one
//! particle is applied and measured per control period.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Controller, ControllerInput, DutyLimits, Phase, ReinitDetector, ReinitParams};
use crate::error::{PvError, Result};
use crate::shading::ShadingZone;

/// How a swarm spreads its particles over the initialization range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    /// Independent uniform draws.
    Random,
    /// Evenly spaced, end points included.
    Even,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsoParams {
    pub particles: usize,
    pub w: f64,
    pub c1: f64,
    pub c2: f64,
    pub v_max: f64,
    /// Converged once every particle is this close to the global best.
    pub converge_tol: f64,
    /// Passes after which the swarm is declared converged regardless.
    pub max_iterations: usize,
    /// Defaults to the duty limits.
    pub init_range: Option<(f64, f64)>,
    pub init: Init,
}

impl Default for PsoParams {
    fn default() -> Self {
        PsoParams {
            particles: 6,
            w: 0.6,
            c1: 1.8,
            c2: 1.8,
            v_max: 0.1,
            converge_tol: 0.005,
            max_iterations: 60,
            init_range: None,
            init: Init::Random,
        }
    }
}

impl PsoParams {
    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 || !(self.v_max > 0.0) || !(self.converge_tol > 0.0) {
            return Err(PvError::Config("PSO needs particles > 0, v_max > 0, converge_tol > 0".into()));
        }
        if let Some((lo, hi)) = self.init_range {
            if !(lo < hi) {
                return Err(PvError::Config("PSO init range is empty".into()));
            }
        }
        Ok(())
    }
}

/// Zone-scheduled swarm settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DsaPsoParams {
    pub particles: usize,
    /// Inertia per zone (Zone0..Zone3).
    pub w: [f64; 4],
    /// Cognitive coefficient per zone.
    pub c1: [f64; 4],
    /// Social coefficient per zone.
    pub c2: [f64; 4],
    pub v_max: f64,
    pub converge_tol: f64,
    pub max_iterations: usize,
    /// Duty sub-range the swarm is seeded over, per zone.
    pub init_ranges: [(f64, f64); 4],
    pub init: Init,
}

impl Default for DsaPsoParams {
    fn default() -> Self {
        DsaPsoParams {
            particles: 6,
            w: [0.40, 0.50, 0.60, 0.70],
            // c1 + c2 stays below 24(1 − w²)/(7 − 5w) in every zone, so
            // each swarm contracts; severe zones lean on the cognitive term.
            c1: [1.5, 1.5, 1.7, 1.7],
            c2: [1.5, 1.5, 1.3, 1.3],
            v_max: 0.1,
            converge_tol: 0.005,
            max_iterations: 60,
            init_ranges: [(0.84, 0.92), (0.80, 0.92), (0.76, 0.94), (0.70, 0.95)],
            init: Init::Even,
        }
    }
}

impl DsaPsoParams {
    pub fn coefficients(&self, zone: ShadingZone) -> (f64, f64, f64) {
        let z = zone.index();
        (self.w[z], self.c1[z], self.c2[z])
    }

    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 || !(self.v_max > 0.0) || !(self.converge_tol > 0.0) {
            return Err(PvError::Config("DSA-PSO needs particles > 0, v_max > 0, converge_tol > 0".into()));
        }
        if self.init_ranges.iter().any(|(lo, hi)| !(lo < hi)) {
            return Err(PvError::Config("DSA-PSO init ranges must be non-empty".into()));
        }
        Ok(())
    }
}

/// Velocity and position update for one particle; the position is clamped
/// to `bounds` and the velocity to `±v_max`.
#[allow(clippy::too_many_arguments)]
pub fn update_particle(
    x: f64,
    v: f64,
    pbest: f64,
    gbest: f64,
    (w, c1, c2): (f64, f64, f64),
    (r1, r2): (f64, f64),
    v_max: f64,
    bounds: (f64, f64),
) -> (f64, f64) {
    let v_next = (w * v + c1 * r1 * (pbest - x) + c2 * r2 * (gbest - x)).clamp(-v_max, v_max);
    ((x + v_next).clamp(bounds.0, bounds.1), v_next)
}

/// Swarm state for sequential evaluation.
#[derive(Clone, Debug)]
pub struct Swarm {
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
    /// Best (duty, power) per particle.
    pub pbest: Vec<(f64, f64)>,
    /// Best (duty, power) seen by any particle.
    pub gbest: Option<(f64, f64)>,
    pub eval_index: usize,
    pub iteration: usize,
    pub converged: bool,
    /// Whether `positions[eval_index]` has been emitted and awaits its power.
    pending: bool,
    bounds: (f64, f64),
    v_max: f64,
    tol: f64,
    max_iterations: usize,
    rng: ChaCha8Rng,
}

pub type SwarmState = Swarm;

impl Swarm {
    pub fn new(
        positions: Vec<f64>,
        bounds: (f64, f64),
        v_max: f64,
        tol: f64,
        max_iterations: usize,
        rng: ChaCha8Rng,
    ) -> Self {
        let n = positions.len();
        let positions: Vec<f64> = positions.iter().map(|x| x.clamp(bounds.0, bounds.1)).collect();
        let mut s = Swarm {
            pbest: positions.iter().map(|&x| (x, f64::NEG_INFINITY)).collect(),
            positions,
            velocities: vec![0.0; n],
            gbest: None,
            eval_index: 0,
            iteration: 0,
            converged: false,
            pending: false,
            bounds,
            v_max,
            tol,
            max_iterations,
            rng,
        };
        // A collapsed swarm at rest has nothing left to search.
        if n > 0 && s.spread_about(s.positions[0]) < tol {
            s.gbest = Some((s.positions[0], f64::NEG_INFINITY));
            s.converged = true;
        }
        s
    }

    /// Seeds `n` particles over `range` (intersected with `bounds`).
    #[allow(clippy::too_many_arguments)]
    pub fn seeded(
        n: usize,
        range: (f64, f64),
        init: Init,
        bounds: (f64, f64),
        v_max: f64,
        tol: f64,
        max_iterations: usize,
        mut rng: ChaCha8Rng,
    ) -> Self {
        let lo = range.0.max(bounds.0);
        let hi = range.1.min(bounds.1).max(lo);
        let positions = match init {
            Init::Random => (0..n).map(|_| rng.gen_range(lo..=hi)).collect(),
            Init::Even if n == 1 => vec![0.5 * (lo + hi)],
            Init::Even => (0..n)
                .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
                .collect(),
        };
        Swarm::new(positions, bounds, v_max, tol, max_iterations, rng)
    }

    fn spread_about(&self, d: f64) -> f64 {
        self.positions.iter().map(|x| (x - d).abs()).fold(0.0, f64::max)
    }

    pub fn bounds(&self) -> (f64, f64) {
        self.bounds
    }

    /// Duty the swarm currently wants applied.
    pub fn output(&self) -> f64 {
        match (self.converged, self.gbest) {
            (true, Some((d, _))) => d,
            _ => self.positions[self.eval_index],
        }
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Records the power measured under the pending particle, advances the
    /// evaluation cursor, updates the swarm after each full pass and returns
    /// the next duty to apply.
    pub fn step(&mut self, measured_power: f64, coeffs: (f64, f64, f64)) -> f64 {
        if self.converged {
            return self.output();
        }
        if self.pending {
            let k = self.eval_index;
            let x = self.positions[k];
            if measured_power > self.pbest[k].1 {
                self.pbest[k] = (x, measured_power);
            }
            if self.gbest.is_none_or(|(_, p)| measured_power > p) {
                self.gbest = Some((x, measured_power));
            }
            self.eval_index += 1;
            if self.eval_index == self.positions.len() {
                self.eval_index = 0;
                self.iteration += 1;
                self.advance(coeffs);
            }
        }
        self.pending = !self.converged;
        self.output()
    }

    fn advance(&mut self, coeffs: (f64, f64, f64)) {
        let g = self.gbest.map(|(d, _)| d).unwrap_or(self.positions[0]);
        for k in 0..self.positions.len() {
            let r1: f64 = self.rng.gen();
            let r2: f64 = self.rng.gen();
            let (x, v) = update_particle(
                self.positions[k],
                self.velocities[k],
                self.pbest[k].0,
                g,
                coeffs,
                (r1, r2),
                self.v_max,
                self.bounds,
            );
            self.positions[k] = x;
            self.velocities[k] = v;
        }
        if self.spread_about(g) < self.tol || self.iteration >= self.max_iterations {
            self.converged = true;
        }
    }
}

pub fn pso_step(state: &mut Swarm, measured_power: f64, params: &PsoParams) -> f64 {
    state.step(measured_power, (params.w, params.c1, params.c2))
}

pub fn dsa_pso_step(
    state: &mut Swarm,
    measured_power: f64,
    zone_hint: ShadingZone,
    params: &DsaPsoParams,
) -> f64 {
    state.step(measured_power, params.coefficients(zone_hint))
}

fn rng_for((seed, stream): (u64, u64)) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Fixed-coefficient PSO controller.
#[derive(Clone, Debug)]
pub struct Pso {
    pub swarm: Swarm,
    params: PsoParams,
    limits: DutyLimits,
    reinit: ReinitDetector,
}

impl Pso {
    pub fn new(params: &PsoParams, reinit: ReinitParams, limits: DutyLimits, seed: (u64, u64)) -> Self {
        let swarm = Self::seed_swarm(params, &limits, rng_for(seed));
        Pso {
            swarm,
            params: params.clone(),
            limits,
            reinit: ReinitDetector::new(reinit),
        }
    }

    fn seed_swarm(params: &PsoParams, limits: &DutyLimits, rng: ChaCha8Rng) -> Swarm {
        Swarm::seeded(
            params.particles,
            params.init_range.unwrap_or((limits.min, limits.max)),
            params.init,
            (limits.min, limits.max),
            params.v_max,
            params.converge_tol,
            params.max_iterations,
            rng,
        )
    }
}

impl Controller for Pso {
    fn step(&mut self, input: &ControllerInput) -> f64 {
        let p = input.power();
        if self.swarm.converged {
            if self.reinit.update(p) {
                let rng = self.swarm.rng.clone();
                self.swarm = Self::seed_swarm(&self.params, &self.limits, rng);
                return self.swarm.step(p, (self.params.w, self.params.c1, self.params.c2));
            }
            return self.swarm.output();
        }
        let d = pso_step(&mut self.swarm, p, &self.params);
        if self.swarm.converged {
            self.reinit.arm(self.swarm.gbest.map_or(p, |g| g.1));
        }
        d
    }

    fn phase(&self) -> Phase {
        if self.swarm.converged {
            Phase::Settled
        } else {
            Phase::Search
        }
    }
}

/// Shading-aware PSO: the zone picks the seeding sub-range at
/// (re)initialization and the coefficients at every pass.
#[derive(Clone, Debug)]
pub struct DsaPso {
    pub swarm: Option<Swarm>,
    params: DsaPsoParams,
    limits: DutyLimits,
    reinit: ReinitDetector,
    rng: ChaCha8Rng,
    /// Zone the current swarm was seeded for.
    pub seeded_zone: Option<ShadingZone>,
}

impl DsaPso {
    pub fn new(params: &DsaPsoParams, reinit: ReinitParams, limits: DutyLimits, seed: (u64, u64)) -> Self {
        DsaPso {
            swarm: None,
            params: params.clone(),
            limits,
            reinit: ReinitDetector::new(reinit),
            rng: rng_for(seed),
            seeded_zone: None,
        }
    }

    /// Seeds a swarm for `zone` over the zone's sub-range, confined to
    /// `bounds`.
    pub fn seed(&mut self, zone: ShadingZone, bounds: (f64, f64)) {
        let range = self.params.init_ranges[zone.index()];
        // Fall back to the bounds when the sub-range does not overlap them.
        let range = if range.1 <= bounds.0 || range.0 >= bounds.1 {
            bounds
        } else {
            range
        };
        self.seed_over(zone, range, bounds);
    }

    /// Seeds a swarm over an explicit `range`, confined to `bounds`.
    pub fn seed_over(&mut self, zone: ShadingZone, range: (f64, f64), bounds: (f64, f64)) {
        let p = &self.params;
        self.swarm = Some(Swarm::seeded(
            p.particles,
            range,
            p.init,
            bounds,
            p.v_max,
            p.converge_tol,
            p.max_iterations,
            ChaCha8Rng::seed_from_u64(self.rng.gen()),
        ));
        self.seeded_zone = Some(zone);
    }

    pub fn params(&self) -> &DsaPsoParams {
        &self.params
    }

    pub fn converged(&self) -> bool {
        self.swarm.as_ref().is_some_and(|s| s.converged)
    }

    /// Advances the swarm by one measurement.
    pub fn search_step(&mut self, measured_power: f64, zone: ShadingZone) -> f64 {
        if self.swarm.is_none() {
            self.seed(zone, (self.limits.min, self.limits.max));
        }
        let swarm = self.swarm.as_mut().expect("seeded");
        dsa_pso_step(swarm, measured_power, zone, &self.params)
    }
}

impl Controller for DsaPso {
    fn step(&mut self, input: &ControllerInput) -> f64 {
        let p = input.power();
        if self.converged() {
            if self.reinit.update(p) {
                self.seed(input.zone_hint, (self.limits.min, self.limits.max));
                return self.search_step(p, input.zone_hint);
            }
            return self.swarm.as_ref().expect("seeded").output();
        }
        let d = self.search_step(p, input.zone_hint);
        if self.converged() {
            let gp = self.swarm.as_ref().and_then(|s| s.gbest).map_or(p, |g| g.1);
            self.reinit.arm(gp);
        }
        d
    }

    fn phase(&self) -> Phase {
        if self.converged() {
            Phase::Settled
        } else {
            Phase::Search
        }
    }
}
