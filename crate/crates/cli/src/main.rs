//! `pvlab`: curve sweeps, GMPP tables, closed-loop runs and benchmark
//! matrices for PV strings under shading.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use pvlab_core::config::Config;
use pvlab_core::mppt::ControllerId;
use pvlab_core::pv::{gmpp_oracle, local_maxima, PvString};
use pvlab_core::report::{
    bench_svg, curve_svg, gmpp_table, run_bench, trace_svg, write_gmpp_csv, write_metrics_csv, CURVE_POINTS,
    PEAK_PROMINENCE,
};
use pvlab_core::shading::ShadingScenario;
use pvlab_core::sim::run;
use pvlab_core::PvError;

#[derive(Parser)]
#[command(name = "pvlab", version, about = "PV string MPPT benchmark under partial shading")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config with optional sections module, converter, controllers,
    /// scenarios, sim.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the I–V/P–V characteristic of one scenario.
    Curve {
        /// Scenario name, or path to a scenario JSON file.
        #[arg(long, default_value = "NoShading")]
        scenario: String,
        #[arg(long, default_value_t = CURVE_POINTS)]
        points: usize,
        #[command(flatten)]
        common: Common,
    },
    /// GMPP table over every scenario.
    Gmpp {
        #[command(flatten)]
        common: Common,
    },
    /// Run the controller × scenario matrix.
    Bench {
        /// Comma-separated controller ids (po, flc, dzflc, pso, dsa-pso, hybrid).
        #[arg(long, value_delimiter = ',')]
        controllers: Vec<String>,
        /// Comma-separated scenario names; all when omitted.
        #[arg(long, alias = "scenario", value_delimiter = ',')]
        scenarios: Vec<String>,
        #[arg(long, default_value_t = 1)]
        repetitions: usize,
        #[command(flatten)]
        common: Common,
    },
    /// One closed-loop run with its full trace.
    Simulate {
        #[arg(long, default_value = "NoShading")]
        scenario: String,
        #[arg(long, alias = "controllers", default_value = "hybrid")]
        controller: String,
        #[command(flatten)]
        common: Common,
    },
}

impl Common {
    fn load(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(p) => Config::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => Config::default(),
        };
        if let Some(seed) = self.seed {
            cfg.sim.seed = seed;
        }
        Ok(cfg)
    }

    fn out_dir(&self) -> Result<&Path> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(&self.out)
    }
}

fn resolve_scenario(cfg: &Config, name: &str) -> Result<ShadingScenario> {
    let path = Path::new(name);
    if path.extension().is_some_and(|e| e == "json") {
        let s = ShadingScenario::load(path).with_context(|| format!("loading {name}"))?;
        s.validate()?;
        return Ok(s);
    }
    Ok(cfg.scenario(name)?)
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

fn curve(scenario: &str, points: usize, common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let sc = resolve_scenario(&cfg, scenario)?;
    let pv = PvString::new(cfg.module, &sc.steps[0].g)?;
    let curve = pv.curve(points)?;
    let gmpp = gmpp_oracle(&curve)?;
    let dir = common.out_dir()?;
    let stem = format!("curve_{}", file_stem(&sc.name));
    curve.write_csv(fs::File::create(dir.join(format!("{stem}.csv")))?)?;
    fs::write(dir.join(format!("{stem}.svg")), curve_svg(&sc.name, &curve, &gmpp))?;
    let peaks = local_maxima(&curve, PEAK_PROMINENCE);
    println!(
        "{}: GMPP {:.2} W at {:.2} V, {:.3} A; {} peak(s)",
        sc.name,
        gmpp.p(),
        gmpp.v,
        gmpp.i,
        peaks.len()
    );
    for p in &peaks {
        println!("  peak {:.2} W at {:.2} V", p.p(), p.v);
    }
    Ok(())
}

fn gmpp(common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let rows = gmpp_table(&cfg.module, &cfg.all_scenarios())?;
    let dir = common.out_dir()?;
    write_gmpp_csv(&rows, fs::File::create(dir.join("gmpp.csv"))?)?;
    write_gmpp_csv(&rows, std::io::stdout().lock())?;
    Ok(())
}

fn bench(controllers: &[String], scenarios: &[String], repetitions: usize, common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let ids = if controllers.is_empty() {
        ControllerId::ALL.to_vec()
    } else {
        controllers.iter().map(|c| c.parse()).collect::<Result<Vec<ControllerId>, _>>()?
    };
    let scs = if scenarios.is_empty() {
        cfg.all_scenarios()
    } else {
        scenarios.iter().map(|s| resolve_scenario(&cfg, s)).collect::<Result<Vec<_>>>()?
    };
    let report = run_bench(&cfg, &scs, &ids, repetitions)?;
    let dir = common.out_dir()?;
    write_metrics_csv(&report.rows, fs::File::create(dir.join("metrics.csv"))?)?;
    write_gmpp_csv(&report.gmpp, fs::File::create(dir.join("gmpp.csv"))?)?;
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    fs::write(dir.join("bench.svg"), bench_svg(&report))?;
    write_metrics_csv(&report.rows, std::io::stdout().lock())?;
    eprintln!("config {} seed {}", report.meta.config_hash, report.meta.seed);
    Ok(())
}

fn simulate(scenario: &str, controller: &str, common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let sc = resolve_scenario(&cfg, scenario)?;
    let id: ControllerId = controller.parse()?;
    let trace = run(&cfg.sim_config(sc, id))?;
    let m = trace.metrics();
    let dir = common.out_dir()?;
    let stem = format!("trace_{}_{}", file_stem(&trace.scenario), file_stem(id.key()));
    trace.write_csv(fs::File::create(dir.join(format!("{stem}.csv")))?)?;
    fs::write(dir.join(format!("{stem}.svg")), trace_svg(&trace))?;
    println!(
        "{} on {}: p_final {:.2} W (GMPP {:.2} W), settle {}, efficiency {:.4}, oscillation {:.2} W",
        id.label(),
        trace.scenario,
        m.p_final,
        trace.final_oracle().p(),
        m.settle_time.map_or("unsettled".to_string(), |t| format!("{t:.3} s")),
        m.tracking_efficiency,
        m.oscillation_amplitude
    );
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<PvError>() {
        Some(e) if e.is_numerical() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Curve { scenario, points, common } => curve(scenario, *points, common),
        Command::Gmpp { common } => gmpp(common),
        Command::Bench { controllers, scenarios, repetitions, common } => {
            bench(controllers, scenarios, *repetitions, common)
        }
        Command::Simulate { scenario, controller, common } => simulate(scenario, controller, common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numerical_failures_exit_3() {
        let e = anyhow::Error::new(PvError::Solver { iterations: 50, residual: 1.0 });
        assert_eq!(exit_code(&e), 3);
        let e = anyhow::Error::new(PvError::UnknownScenario("x".into()));
        assert_eq!(exit_code(&e), 2);
        let e = anyhow::Error::new(PvError::Config("x".into())).context("loading cfg.json");
        assert_eq!(exit_code(&e), 2);
    }
}
