use std::path::PathBuf;

use pvlab_core::config::Config;
use pvlab_core::shading::{builtin_scenarios, ShadingScenario};

fn repo() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

#[test]
fn shipped_scenario_files_match_presets() {
    for sc in builtin_scenarios() {
        let file = ShadingScenario::load(&repo().join("scenarios").join(format!("{}.json", sc.name))).unwrap();
        assert_eq!(file, sc);
    }
    let drop = ShadingScenario::load(&repo().join("scenarios/StepDrop.json")).unwrap();
    drop.validate().unwrap();
    assert_eq!(drop.steps.len(), 2);
}

#[test]
fn example_config_loads_and_extends_presets() {
    let cfg = Config::load(&repo().join("config/example.json")).unwrap();
    let names: Vec<String> = cfg.all_scenarios().into_iter().map(|s| s.name).collect();
    assert_eq!(names.len(), 7);
    assert!(names.iter().any(|n| n == "StepDrop"));
    assert_ne!(cfg.hash(), Config::default().hash());
}
