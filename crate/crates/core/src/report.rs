//! Tables, benchmark matrix and plots.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::Result;
use crate::mppt::{ControllerId, Phase};
use crate::par;
use crate::pv::{local_maxima, sig6, ModuleParams, OperatingPoint, PvCurve, PvString};
use crate::shading::ShadingScenario;
use crate::sim::{run, Metrics, SimTrace};
use crate::svg::{render, Band, Marker, Panel, Series, PALETTE};

/// Prominence below which a bump on a P–V curve is not counted as a peak.
pub const PEAK_PROMINENCE: f64 = 1.0;

/// Samples used for published curves and the GMPP table.
pub const CURVE_POINTS: usize = 2000;

/// Display name used in tables: `Case3` → `Case 3`, `NoShading` → `No Shading`.
pub fn display_name(name: &str) -> String {
    let mut out = String::new();
    for (k, c) in name.chars().enumerate() {
        let prev = name.chars().nth(k.wrapping_sub(1));
        if k > 0 && (c.is_ascii_uppercase() || (c.is_ascii_digit() && !prev.is_some_and(|p| p.is_ascii_digit()))) {
            out.push(' ');
        }
        out.push(c);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmppRow {
    pub scenario: String,
    pub i_opt: f64,
    pub v_opt: f64,
    pub p_opt: f64,
    /// P_opt relative to the unshaded string, in percent.
    pub eta: f64,
    pub peaks: usize,
}

/// GMPP per scenario (first step of each), with η against the string under
/// full sun.
pub fn gmpp_table(module: &ModuleParams, scenarios: &[ShadingScenario]) -> Result<Vec<GmppRow>> {
    let rows = par::map(scenarios, |s| -> Result<(OperatingPoint, usize, f64)> {
        let g = &s.steps[0].g;
        let curve = PvString::new(*module, g)?.curve(CURVE_POINTS)?;
        let reference = PvString::new(*module, &vec![1.0; g.len()])?.gmpp()?;
        let peaks = local_maxima(&curve, PEAK_PROMINENCE).len();
        let gm = crate::pv::gmpp_oracle(&curve)?;
        Ok((gm, peaks, reference.p()))
    });
    scenarios
        .iter()
        .zip(rows)
        .map(|(s, r)| {
            let (gm, peaks, p_ref) = r?;
            Ok(GmppRow {
                scenario: display_name(&s.name),
                i_opt: gm.i,
                v_opt: gm.v,
                p_opt: gm.p(),
                eta: 100.0 * gm.p() / p_ref,
                peaks,
            })
        })
        .collect()
}

pub fn write_gmpp_csv<W: Write>(rows: &[GmppRow], mut out: W) -> Result<()> {
    writeln!(out, "scenario,I_opt_A,V_opt_V,P_opt_W,eta_percent,peaks")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.scenario,
            sig6(r.i_opt),
            sig6(r.v_opt),
            sig6(r.p_opt),
            sig6(r.eta),
            r.peaks
        )?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub scenario: String,
    pub controller: ControllerId,
    pub repetition: usize,
    pub seed: u64,
    pub gmpp: f64,
    pub metrics: Metrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchMeta {
    pub seed: u64,
    pub config_hash: String,
    pub version: String,
    pub repetitions: usize,
    pub duration: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchReport {
    pub meta: BenchMeta,
    pub gmpp: Vec<GmppRow>,
    pub rows: Vec<BenchRow>,
    #[serde(skip)]
    pub traces: Vec<SimTrace>,
}

/// Seed of repetition `rep`; repetition 0 uses the base seed.
pub fn repetition_seed(seed: u64, rep: usize) -> u64 {
    seed.wrapping_add(rep as u64)
}

/// Runs every (scenario, controller, repetition) combination. Rows come out
/// scenario-major, controller-minor, whatever order the runs finish in.
pub fn run_bench(
    config: &Config,
    scenarios: &[ShadingScenario],
    controllers: &[ControllerId],
    repetitions: usize,
) -> Result<BenchReport> {
    let reps = repetitions.max(1);
    let mut jobs = Vec::new();
    for s in scenarios {
        for &c in controllers {
            for rep in 0..reps {
                jobs.push((s, c, rep));
            }
        }
    }
    let results = par::map(&jobs, |&(s, c, rep)| {
        let mut cfg = config.sim_config(s.clone(), c);
        cfg.settings.seed = repetition_seed(config.sim.seed, rep);
        run(&cfg)
    });
    let mut rows = Vec::with_capacity(jobs.len());
    let mut traces = Vec::with_capacity(jobs.len());
    for ((s, c, rep), tr) in jobs.into_iter().zip(results) {
        let tr = tr?;
        rows.push(BenchRow {
            scenario: s.name.clone(),
            controller: c,
            repetition: rep,
            seed: repetition_seed(config.sim.seed, rep),
            gmpp: tr.final_oracle().p(),
            metrics: tr.metrics(),
        });
        traces.push(tr);
    }
    Ok(BenchReport {
        meta: BenchMeta {
            seed: config.sim.seed,
            config_hash: config.hash(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            repetitions: reps,
            duration: config.sim.duration,
        },
        gmpp: gmpp_table(&config.module, scenarios)?,
        rows,
        traces,
    })
}

pub fn write_metrics_csv<W: Write>(rows: &[BenchRow], mut out: W) -> Result<()> {
    writeln!(
        out,
        "scenario,controller,repetition,seed,gmpp_W,settle_time_s,p_final_W,tracking_efficiency,oscillation_W,reached_gmpp"
    )?;
    for r in rows {
        let m = &r.metrics;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.scenario,
            r.controller.key(),
            r.repetition,
            r.seed,
            sig6(r.gmpp),
            m.settle_time.map_or("unsettled".to_string(), sig6),
            sig6(m.p_final),
            sig6(m.tracking_efficiency),
            sig6(m.oscillation_amplitude),
            m.reached_gmpp
        )?;
    }
    Ok(())
}

/// Mean settle time with unsettled runs counted as the full duration.
pub fn mean_settle_time(rows: &[&BenchRow], duration: f64) -> f64 {
    if rows.is_empty() {
        return f64::NAN;
    }
    rows.iter().map(|r| r.metrics.settle_time.unwrap_or(duration)).sum::<f64>() / rows.len() as f64
}

pub fn mean_p_final(rows: &[&BenchRow]) -> f64 {
    if rows.is_empty() {
        return f64::NAN;
    }
    rows.iter().map(|r| r.metrics.p_final).sum::<f64>() / rows.len() as f64
}

/// Per-controller means over the rows of the given scenarios.
pub fn summarize(report: &BenchReport, scenarios: &[&str]) -> Vec<(ControllerId, f64, f64)> {
    let mut ids: Vec<ControllerId> = report.rows.iter().map(|r| r.controller).collect();
    ids.sort();
    ids.dedup();
    ids.into_iter()
        .map(|id| {
            let rows: Vec<&BenchRow> = report
                .rows
                .iter()
                .filter(|r| r.controller == id && scenarios.iter().any(|s| s.eq_ignore_ascii_case(&r.scenario)))
                .collect();
            (id, mean_settle_time(&rows, report.meta.duration), mean_p_final(&rows))
        })
        .collect()
}

/// I–V and P–V panels with the GMPP and every local peak marked.
pub fn curve_svg(title: &str, curve: &PvCurve, gmpp: &OperatingPoint) -> String {
    let peaks = local_maxima(curve, PEAK_PROMINENCE);
    let iv = Panel {
        title: format!("{title}: I–V"),
        x_label: "Voltage (V)".into(),
        y_label: "Current (A)".into(),
        series: vec![Series {
            label: "I".into(),
            points: curve.points.iter().map(|p| (p.v, p.i)).collect(),
            color: PALETTE[0].into(),
        }],
        markers: vec![Marker { x: gmpp.v, y: gmpp.i, label: format!("{:.2} A", gmpp.i) }],
        bands: vec![],
    };
    let mut markers: Vec<Marker> = peaks
        .iter()
        .filter(|p| (p.v - gmpp.v).abs() > 1e-6 * gmpp.v.max(1.0) && (p.p() - gmpp.p()).abs() > 1e-3)
        .map(|p| Marker { x: p.v, y: p.p(), label: format!("{:.1} W", p.p()) })
        .collect();
    markers.push(Marker { x: gmpp.v, y: gmpp.p(), label: format!("GMPP {:.2} W", gmpp.p()) });
    let pv = Panel {
        title: format!("{title}: P–V ({} peaks)", peaks.len()),
        x_label: "Voltage (V)".into(),
        y_label: "Power (W)".into(),
        series: vec![Series {
            label: "P".into(),
            points: curve.points.iter().map(|p| (p.v, p.p())).collect(),
            color: PALETTE[1].into(),
        }],
        markers,
        bands: vec![],
    };
    render(&[iv, pv])
}

fn power_series(tr: &SimTrace, color: &str, label: String) -> Series {
    Series {
        label,
        points: tr.records.iter().map(|r| (r.t, r.p_pv())).collect(),
        color: color.to_string(),
    }
}

/// One power-vs-time panel per scenario, all controllers overlaid.
pub fn bench_svg(report: &BenchReport) -> String {
    let mut scenarios: Vec<&str> = Vec::new();
    for t in &report.traces {
        if !scenarios.contains(&t.scenario.as_str()) {
            scenarios.push(&t.scenario);
        }
    }
    let panels: Vec<Panel> = scenarios
        .iter()
        .map(|s| {
            let rows = report.rows.iter().zip(&report.traces).filter(|(r, _)| r.scenario == *s && r.repetition == 0);
            let series = rows
                .enumerate()
                .map(|(k, (r, tr))| power_series(tr, PALETTE[k % PALETTE.len()], r.controller.label().to_string()))
                .collect();
            Panel {
                title: format!("{}: PV power", display_name(s)),
                x_label: "Time (s)".into(),
                y_label: "Power (W)".into(),
                series,
                markers: vec![],
                bands: vec![],
            }
        })
        .collect();
    render(&panels)
}

fn phase_color(p: Phase) -> &'static str {
    match p {
        Phase::FlcCoarse | Phase::Tracking => PALETTE[0],
        Phase::PsoSearch | Phase::Search => PALETTE[3],
        Phase::FlcFine | Phase::Settled => PALETTE[2],
        Phase::Hold => PALETTE[7],
    }
}

/// Contiguous runs of the same phase tag.
pub fn phase_bands(tr: &SimTrace) -> Vec<Band> {
    let mut out: Vec<Band> = Vec::new();
    let mut current: Option<Phase> = None;
    for r in &tr.records {
        if current != Some(r.phase) {
            if let Some(b) = out.last_mut() {
                b.x1 = r.t;
            }
            out.push(Band {
                x0: r.t,
                x1: r.t + tr.control_period,
                label: r.phase.as_str().to_string(),
                color: phase_color(r.phase).to_string(),
            });
            current = Some(r.phase);
        }
    }
    if let (Some(b), Some(r)) = (out.last_mut(), tr.records.last()) {
        b.x1 = r.t + tr.control_period;
    }
    out
}

/// Power (with phase bands and the GMPP level) and duty panels of one run.
pub fn trace_svg(tr: &SimTrace) -> String {
    let end = tr.duration();
    let mut gmpp: Vec<(f64, f64)> = Vec::new();
    for (k, (t0, op)) in tr.oracle.iter().enumerate() {
        let t1 = tr.oracle.get(k + 1).map_or(end, |x| x.0);
        gmpp.push((*t0, op.p()));
        gmpp.push((t1, op.p()));
    }
    let power = Panel {
        title: format!("{} / {}: power", display_name(&tr.scenario), tr.controller),
        x_label: "Time (s)".into(),
        y_label: "Power (W)".into(),
        series: vec![
            power_series(tr, PALETTE[0], "PV".into()),
            Series {
                label: "output".into(),
                points: tr.records.iter().map(|r| (r.t, r.p_out)).collect(),
                color: PALETTE[4].into(),
            },
            Series { label: "GMPP".into(), points: gmpp, color: PALETTE[7].into() },
        ],
        markers: vec![],
        bands: phase_bands(tr),
    };
    let duty = Panel {
        title: "Duty cycle".into(),
        x_label: "Time (s)".into(),
        y_label: "d".into(),
        series: vec![Series {
            label: "duty".into(),
            points: tr.records.iter().map(|r| (r.t, r.duty)).collect(),
            color: PALETTE[1].into(),
        }],
        markers: vec![],
        bands: phase_bands(tr),
    };
    render(&[power, duty])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shading::builtin_scenarios;

    #[test]
    fn display_names() {
        assert_eq!(display_name("NoShading"), "No Shading");
        assert_eq!(display_name("Case3"), "Case 3");
        assert_eq!(display_name("FullShading"), "Full Shading");
        assert_eq!(display_name("Case12"), "Case 12");
    }

    #[test]
    fn gmpp_table_layout() {
        let rows = gmpp_table(&ModuleParams::reference(), &builtin_scenarios()).unwrap();
        let names: Vec<&str> = rows.iter().map(|r| r.scenario.as_str()).collect();
        assert_eq!(names, ["No Shading", "Case 1", "Case 2", "Case 3", "Case 4", "Full Shading"]);
        assert!((rows[0].eta - 100.0).abs() < 1e-6);
        let mut buf = Vec::new();
        write_gmpp_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("scenario,I_opt_A,V_opt_V,P_opt_W,eta_percent,peaks\n"));
        assert_eq!(text.lines().count(), 7);
    }
}
