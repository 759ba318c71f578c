use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pvlab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pvlab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("spawn pvlab")
}

fn first_line(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn curve_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let o = pvlab(&["curve", "--scenario", "Case1", "--points", "400"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(first_line(&dir.path().join("curve_Case1.csv")), "v_volts,i_amps,p_watts");
    let svg = fs::read_to_string(dir.path().join("curve_Case1.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("3 peak(s)"), "{stdout}");
}

#[test]
fn gmpp_table_header_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = pvlab(&["gmpp"], dir.path());
    assert!(o.status.success());
    let text = fs::read_to_string(dir.path().join("gmpp.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "scenario,I_opt_A,V_opt_V,P_opt_W,eta_percent,peaks");
    assert_eq!(lines.len(), 7);
    assert!(lines[1].starts_with("No Shading,"));
    assert!(lines[6].starts_with("Full Shading,"));
}

#[test]
fn bench_outputs_and_byte_identical_reruns() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["bench", "--scenarios", "Case1,Case4", "--controllers", "po,pso,hybrid", "--seed", "11"];
    for d in [&a, &b] {
        let o = pvlab(&args, d.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(
        first_line(&a.path().join("metrics.csv")),
        "scenario,controller,repetition,seed,gmpp_W,settle_time_s,p_final_W,tracking_efficiency,oscillation_W,reached_gmpp"
    );
    for f in ["metrics.csv", "gmpp.csv", "report.json", "bench.svg"] {
        let x = fs::read(a.path().join(f)).unwrap();
        let y = fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs between identical runs");
    }
    let rows = fs::read_to_string(a.path().join("metrics.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 2 * 3);
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(a.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["meta"]["seed"], 11);
    assert_eq!(report["meta"]["config_hash"].as_str().unwrap().len(), 16);
}

#[test]
fn simulate_trace_header() {
    let dir = tempfile::tempdir().unwrap();
    let o = pvlab(&["simulate", "--scenario", "Case3", "--controller", "hybrid"], dir.path());
    assert!(o.status.success());
    let csv = dir.path().join("trace_Case3_hybrid.csv");
    assert_eq!(first_line(&csv), "t_s,duty,v_pv,i_pv,p_pv,p_out,zone,phase");
    assert!(dir.path().join("trace_Case3_hybrid.svg").exists());
}

#[test]
fn scenario_file_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("half.json");
    fs::write(&sc, r#"{"name": "Half", "steps": [{"t": 0.0, "g": [1, 1, 1, 1, 1, 0.5, 0.5, 0.5, 0.5, 0.5]}]}"#).unwrap();
    let o = pvlab(&["curve", "--scenario", sc.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("curve_Half.csv").exists());
}

#[test]
fn usage_and_config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(pvlab(&["curve", "--scenario", "Case9"], dir.path()).status.code(), Some(2));
    assert_eq!(pvlab(&["bench", "--controllers", "ga"], dir.path()).status.code(), Some(2));
    assert_eq!(pvlab(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(pvlab(&["gmpp", "--seed", "x"], dir.path()).status.code(), Some(2));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"sim": {"duration": -1.0}}"#).unwrap();
    assert_eq!(pvlab(&["gmpp", "--config", bad.to_str().unwrap()], dir.path()).status.code(), Some(2));
    fs::write(&bad, r#"{"no_such_section": 1}"#).unwrap();
    assert_eq!(pvlab(&["gmpp", "--config", bad.to_str().unwrap()], dir.path()).status.code(), Some(2));
    let missing = dir.path().join("missing.json");
    assert_eq!(pvlab(&["gmpp", "--config", missing.to_str().unwrap()], dir.path()).status.code(), Some(2));
}

#[test]
fn po_reaches_gmpp_without_shading() {
    let dir = tempfile::tempdir().unwrap();
    let o = pvlab(&["bench", "--controllers", "po", "--scenarios", "NoShading"], dir.path());
    assert!(o.status.success());
    let text = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    let row = text.lines().nth(1).unwrap();
    assert!(row.starts_with("NoShading,po,") && row.ends_with(",true"), "{row}");
}

#[test]
fn edited_config_changes_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    let hash = |cfg: Option<&Path>| {
        let out = dir.path().join("run");
        let mut args = vec!["bench", "--controllers", "po", "--scenarios", "NoShading"];
        let p;
        if let Some(c) = cfg {
            p = c.to_str().unwrap().to_string();
            args.extend(["--config", p.as_str()]);
        }
        assert!(pvlab(&args, &out).status.success());
        let v: serde_json::Value = serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
        v["meta"]["config_hash"].as_str().unwrap().to_string()
    };
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"controllers": {"po": {"step": 0.004}}}"#).unwrap();
    let a = hash(None);
    let b = hash(Some(&cfg));
    fs::write(&cfg, r#"{"controllers": {"po": {"step": 0.006}}}"#).unwrap();
    let c = hash(Some(&cfg));
    assert!(a != b && b != c && a != c);
    let example = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/example.json");
    assert_eq!(hash(Some(&example)), hash(Some(&example)));
}
