mod common;

use proptest::prelude::*;
use pvlab_core::converter::input_resistance;
use pvlab_core::mppt::{
    pso_step, Controller, ControllerConfig, ControllerId, ControllerInput, DsaPso, DutyLimits, Pso, PsoParams,
    ReinitDetector, ReinitParams, Swarm,
};
use pvlab_core::pv::{ModuleParams, PvString};
use pvlab_core::shading::{builtin_scenario, builtin_scenarios, ShadingZone};
use pvlab_core::sim::{closed_loop_converter, operating_point, run, run_oracle, SimConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FULL: [f64; 5] = [0.2; 5];
const NONE: [f64; 5] = [1.0; 5];

fn static_power(g: &[f64]) -> impl Fn(f64) -> f64 {
    let s = PvString::new(ModuleParams::reference(), g).unwrap();
    let conv = closed_loop_converter();
    move |d| operating_point(&s, input_resistance(d, &conv)).unwrap().p()
}

fn input(d: f64, p: f64, zone: ShadingZone) -> ControllerInput {
    // Any (v, i) with the requested power.
    let v = 100.0 * (1.0 - d);
    ControllerInput { v_pv: v, i_pv: p / v, t: 0.0, zone_hint: zone }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_controller_emits_bounded_duty(
        seed in any::<u64>(),
        samples in prop::collection::vec((0.0f64..250.0, 0.0f64..9.0, 0usize..4), 200),
    ) {
        let cfg = ControllerConfig::default();
        let lim = cfg.duty;
        for id in ControllerId::ALL {
            let mut c = cfg.build(id, 0.1, seed).unwrap();
            for (k, &(v, i, z)) in samples.iter().enumerate() {
                let inp = ControllerInput { v_pv: v, i_pv: i, t: k as f64 * 1e-3, zone_hint: ShadingZone::ALL[z] };
                let d = c.step(&inp);
                prop_assert!(d >= lim.min && d <= lim.max, "{} emitted {}", id, d);
            }
        }
    }
}

#[test]
fn degenerate_swarm_never_moves() {
    let params = PsoParams { particles: 1, c1: 0.0, c2: 0.0, ..PsoParams::default() };
    let mut s = Swarm::new(vec![0.37], (0.05, 0.95), 0.1, 0.005, 60, ChaCha8Rng::seed_from_u64(1));
    for k in 0..50 {
        let d = pso_step(&mut s, 100.0 + k as f64, &params);
        assert_eq!(d, 0.37);
    }
}

#[test]
fn zero_random_terms_and_unit_inertia_keep_velocity() {
    let params = PsoParams { w: 1.0, c1: 0.0, c2: 0.0, v_max: 1.0, ..PsoParams::default() };
    let mut s = Swarm::new(vec![0.2, 0.6], (0.05, 0.95), 1.0, 1e-9, 60, ChaCha8Rng::seed_from_u64(1));
    s.velocities = vec![0.01, -0.02];
    pso_step(&mut s, 0.0, &params);
    pso_step(&mut s, 1.0, &params);
    pso_step(&mut s, 0.0, &params);
    assert!((s.positions[0] - 0.21).abs() < 1e-12 && (s.positions[1] - 0.58).abs() < 1e-12);
}

#[test]
fn gbest_power_never_decreases_within_an_episode() {
    let limits = DutyLimits::default();
    let cfg = ControllerConfig::default();
    for sc in builtin_scenarios() {
        let f = static_power(&sc.steps[0].g);
        let mut pso = Pso::new(&PsoParams::default(), ReinitParams::default(), limits, (42, 4));
        let mut dsa = DsaPso::new(&cfg.dsa_pso, ReinitParams::default(), limits, (42, 5));
        let (mut dp, mut dd) = (0.1, 0.1);
        let (mut gp, mut gd) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for _ in 0..400 {
            dp = pso.step(&input(dp, f(dp), ShadingZone::Zone2));
            dd = dsa.step(&input(dd, f(dd), ShadingZone::Zone2));
            let p = pso.swarm.gbest.map_or(f64::NEG_INFINITY, |g| g.1);
            let d = dsa.swarm.as_ref().and_then(|s| s.gbest).map_or(f64::NEG_INFINITY, |g| g.1);
            assert!(p >= gp && d >= gd, "{}: gbest fell", sc.name);
            // gbest is the argmax of pbest.
            let best = pso.swarm.pbest.iter().map(|b| b.1).fold(f64::NEG_INFINITY, f64::max);
            assert!(p >= best);
            gp = p;
            gd = d;
        }
    }
}

#[test]
fn runs_are_bit_identical() {
    let sc = builtin_scenario("Case2").unwrap();
    for id in ControllerId::ALL {
        let cfg = SimConfig::new(sc.clone(), id);
        assert_eq!(run(&cfg).unwrap(), run(&cfg).unwrap(), "{id}");
    }
    let mut a = SimConfig::new(sc, ControllerId::Pso);
    let b = a.clone();
    a.settings.seed = 43;
    assert_ne!(run(&a).unwrap().records, run(&b).unwrap().records);
}

#[test]
fn hybrid_phase_sequence_per_episode() {
    let mut scs = builtin_scenarios();
    scs.push(common::two_step("Drop", NONE, FULL, 0.5));
    scs.push(common::two_step("Rise", FULL, NONE, 0.5));
    for sc in scs {
        let tr = run(&SimConfig::new(sc.clone(), ControllerId::Hybrid)).unwrap();
        let tags: Vec<&str> = tr.records.iter().map(|r| r.phase.as_str()).collect();
        assert!(common::hybrid_phases_ok(&tags), "{}: {:?}", sc.name, tags);
        assert!(tags.contains(&"fine"), "{} never reached fine tracking", sc.name);
    }
}

#[test]
fn reinit_fires_within_four_periods_of_a_drop() {
    let sc = common::two_step("Drop", NONE, FULL, 0.5);
    for id in [ControllerId::Pso, ControllerId::DsaPso, ControllerId::Hybrid] {
        let tr = run(&SimConfig::new(sc.clone(), id)).unwrap();
        let k0 = (0.5 / tr.control_period).round() as usize;
        let settled = tr.records[k0 - 1].phase.as_str();
        assert!(matches!(settled, "settled" | "fine"), "{id}: {settled} before the drop");
        let reset = tr.records[k0..]
            .iter()
            .position(|r| matches!(r.phase.as_str(), "search" | "coarse"))
            .expect("no reset");
        assert!(reset <= 4, "{id}: reset after {reset} periods");
    }
}

#[test]
fn steady_power_and_small_ripple_never_trigger() {
    let mut d = ReinitDetector::new(ReinitParams::default());
    d.arm(500.0);
    for k in 0..2000 {
        let p = 500.0 * (1.0 + 0.05 * (k as f64 * 0.3).sin());
        assert!(!d.update(p));
    }
}

#[test]
fn closed_loop_invariants_on_presets() {
    let module = ModuleParams::reference();
    for sc in builtin_scenarios() {
        let oracle = run_oracle(&SimConfig::new(sc.clone(), ControllerId::Hybrid)).unwrap().metrics();
        let pv = PvString::new(module, &sc.steps[0].g).unwrap();
        for id in ControllerId::ALL {
            let tr = run(&SimConfig::new(sc.clone(), id)).unwrap();
            let m = tr.metrics();
            assert!(m.tracking_efficiency >= 0.0 && m.tracking_efficiency <= 1.0 + 1e-9);
            assert!(m.tracking_efficiency <= oracle.tracking_efficiency + 1e-9, "{} {id}", sc.name);
            if let Some(t) = m.settle_time {
                assert!(t <= tr.duration());
            }
            let dt = tr.control_period;
            let (mut e_in, mut e_out) = (0.0, 0.0);
            for (k, r) in tr.records.iter().enumerate() {
                assert!((r.t - k as f64 * dt).abs() < 1e-12);
                assert!(r.v_pv >= 0.0 && r.i_pv >= 0.0);
                let i = pv.current_at_voltage(r.v_pv).unwrap();
                assert!((i - r.i_pv).abs() < 1e-5, "{} {id} t={}: off-curve", sc.name, r.t);
                e_in += r.p_in * dt;
                e_out += r.p_out * dt;
                assert!(
                    e_out <= e_in + tr.initial_energy + 1e-9 * e_in,
                    "{} {id} t={}: {e_out} J out vs {e_in} J in",
                    sc.name,
                    r.t
                );
            }
            // Once the loop has settled the converter passes the PV power through.
            let tail = &tr.records[tr.records.len() * 9 / 10..];
            let p_pv: f64 = tail.iter().map(|r| r.p_pv()).sum::<f64>() / tail.len() as f64;
            let p_out: f64 = tail.iter().map(|r| r.p_out).sum::<f64>() / tail.len() as f64;
            assert!((p_out / p_pv - 1.0).abs() < 0.01, "{} {id}: {p_out} W out vs {p_pv} W", sc.name);
        }
    }
}
