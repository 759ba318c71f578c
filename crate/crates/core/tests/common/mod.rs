#![allow(dead_code)]

use pvlab_core::fuzzy::RuleBase;
use pvlab_core::shading::{ShadingScenario, ShadingStep};

/// Exact centroid of max_k min(α_k, μ_k(y)) over the output universe.
///
/// The aggregate is piecewise linear; its kinks lie at MF corners, at the
/// clip levels and where edges of different terms cross. Between consecutive
/// kinks both ∫μ and ∫yμ are integrated in closed form.
pub fn exact_centroid(rb: &RuleBase, act: &[f64]) -> f64 {
    let (lo, hi) = rb.output.universe;
    if act.iter().all(|&a| a <= 0.0) {
        return 0.5 * (lo + hi);
    }
    // Linear pieces y ↦ s·y + c of every clipped MF edge.
    let mut lines: Vec<(f64, f64)> = Vec::new();
    let mut xs = vec![lo, hi];
    for (t, &a) in rb.output.terms.iter().zip(act) {
        let [p, q, r, s] = t.mf.corners();
        xs.extend([p, q, r, s]);
        if q > p {
            let k = 1.0 / (q - p);
            lines.push((k, -k * p));
            xs.push(p + a * (q - p));
        }
        if s > r {
            let k = -1.0 / (s - r);
            lines.push((k, s / (s - r)));
            xs.push(s - a * (s - r));
        }
        lines.push((0.0, a));
    }
    lines.push((0.0, 1.0));
    for (i, a) in lines.iter().enumerate() {
        for b in &lines[i + 1..] {
            if (a.0 - b.0).abs() > 1e-300 {
                xs.push((b.1 - a.1) / (a.0 - b.0));
            }
        }
    }
    let mut xs: Vec<f64> = xs.into_iter().filter(|x| x.is_finite() && *x >= lo && *x <= hi).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let (mut num, mut den) = (0.0, 0.0);
    for w in xs.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a < 1e-15 {
            continue;
        }
        // Evaluate slightly inside so a discontinuous shoulder does not leak.
        let fa = right_limit(rb, act, a, b);
        let fb = left_limit(rb, act, a, b);
        let h = b - a;
        den += 0.5 * h * (fa + fb);
        num += h / 6.0 * (fa * (2.0 * a + b) + fb * (a + 2.0 * b));
    }
    if den > 0.0 {
        num / den
    } else {
        0.5 * (lo + hi)
    }
}

fn right_limit(rb: &RuleBase, act: &[f64], a: f64, b: f64) -> f64 {
    let e = (b - a) * 1e-9;
    let f1 = rb.aggregate(act, a + e);
    let f2 = rb.aggregate(act, a + 2.0 * e);
    2.0 * f1 - f2
}

fn left_limit(rb: &RuleBase, act: &[f64], a: f64, b: f64) -> f64 {
    let e = (b - a) * 1e-9;
    let f1 = rb.aggregate(act, b - e);
    let f2 = rb.aggregate(act, b - 2.0 * e);
    2.0 * f1 - f2
}

pub fn two_step(name: &str, first: [f64; 5], second: [f64; 5], at: f64) -> ShadingScenario {
    ShadingScenario {
        name: name.to_string(),
        steps: vec![
            ShadingStep { t: 0.0, g: first.to_vec() },
            ShadingStep { t: at, g: second.to_vec() },
        ],
    }
}

/// Checks that phase tags follow coarse+ pso+ fine* per episode, with a new
/// episode starting only from coarse.
pub fn hybrid_phases_ok(tags: &[&str]) -> bool {
    let mut runs: Vec<&str> = Vec::new();
    for t in tags {
        if runs.last() != Some(t) {
            runs.push(t);
        }
    }
    if runs.first() != Some(&"coarse") {
        return false;
    }
    runs.windows(2)
        .all(|w| matches!((w[0], w[1]), ("coarse", "pso") | ("pso", "fine") | ("fine", "coarse")))
}
