use std::fs;

use vortex_rings::cli::{run, ExperimentConfig, Pipeline, SweepGrid, SweepTable};
use vortex_rings::error::Error;

fn config(pipeline: Pipeline, dir: &std::path::Path) -> ExperimentConfig {
    ExperimentConfig { pipeline, out: dir.to_path_buf(), ..ExperimentConfig::default() }
}

#[test]
fn electro_run_writes_stage_files() {
    let dir = tempfile::tempdir().unwrap();
    let v = run(&config(Pipeline::Electro, dir.path())).unwrap();
    for f in ["tf.csv", "giant_vortex.csv", "cost.csv", "electro.json"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let e = v.electro.unwrap();
    assert!(e.r_star > 0.0 && e.r_star < 1.0);
    assert!(e.vortex_number.is_some());
}

#[test]
fn json_output_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(&config(Pipeline::Cost, a.path())).unwrap();
    run(&config(Pipeline::Cost, b.path())).unwrap();
    let strip = |p: &std::path::Path| {
        let mut j: serde_json::Value = serde_json::from_str(&fs::read_to_string(p.join("cost.json")).unwrap()).unwrap();
        j["config"]["out"] = serde_json::Value::Null;
        j
    };
    assert_eq!(strip(a.path()), strip(b.path()));
}

#[test]
fn tf_without_hole_is_a_regime_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(Pipeline::Electro, dir.path());
    c.omega1 = Some(0.1);
    assert!(matches!(run(&c), Err(Error::NoHole { .. })));
}

#[test]
fn sweep_keeps_failed_points() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(Pipeline::Sweep, dir.path());
    c.sweep = Some(SweepGrid { epsilon: vec![0.05, 0.03], omega1: vec![0.04, 0.1], point: Pipeline::Electro });
    c.workers = 1;
    run(&c).unwrap();
    let table: SweepTable = serde_json::from_str(&fs::read_to_string(dir.path().join("sweep.json")).unwrap()).unwrap();
    assert_eq!(table.rows.len(), 4);
    let failed = table.rows.iter().find(|r| r.epsilon == 0.05 && r.omega1 == 0.1).unwrap();
    assert_eq!(failed.passed, Some(false));
    assert!(failed.error.is_some());
    assert!(table.rows.iter().filter(|r| r.omega1 == 0.04).all(|r| r.r_star.is_some()));
    assert!(dir.path().join("sweep.csv").exists());
}

#[test]
fn unknown_config_keys_are_rejected() {
    let err = ExperimentConfig::from_toml_str("pipeline = \"tf\"\nepsilon = 0.05\nbogus = 1\n");
    assert!(err.is_err());
}
