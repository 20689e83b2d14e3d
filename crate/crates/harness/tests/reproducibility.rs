mod common;

use std::fs;
use std::path::Path;

use common::{small_e6, small_e9};
use nfteig_harness::{run_experiment, ExperimentConfig};

fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    ["runs.csv", "summary.csv", "plot_data.csv", "summary.json"]
        .iter()
        .map(|f| (f.to_string(), fs::read(dir.join(f)).unwrap()))
        .collect()
}

#[test]
fn same_seed_gives_identical_bytes() {
    let cfg = ExperimentConfig::from_toml_str(&small_e9(24)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let a = run_experiment(&cfg, &dir.path().join("a"), Some(1)).unwrap();
    let b = run_experiment(&cfg, &dir.path().join("b"), Some(1)).unwrap();
    assert_eq!(artifacts(&dir.path().join("a")), artifacts(&dir.path().join("b")));
    assert_eq!(a.manifest.outputs, b.manifest.outputs);
    assert_eq!(a.manifest.config_sha256, b.manifest.config_sha256);

    let mut other = cfg.clone();
    other.seed += 1;
    run_experiment(&other, &dir.path().join("c"), Some(1)).unwrap();
    let runs = |d: &str| fs::read(dir.path().join(d).join("runs.csv")).unwrap();
    assert_ne!(runs("a"), runs("c"));
}

#[test]
fn worker_count_does_not_change_results() {
    let cfg = ExperimentConfig::from_toml_str(&small_e9(24)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let one = run_experiment(&cfg, &dir.path().join("one"), Some(1)).unwrap();
    let four = run_experiment(&cfg, &dir.path().join("four"), Some(4)).unwrap();
    assert_eq!(one.manifest.workers, 1);
    assert_eq!(four.manifest.workers, 4);
    assert_eq!(artifacts(&dir.path().join("one")), artifacts(&dir.path().join("four")));
}

#[test]
fn noiseless_segments_make_both_models_agree() {
    let cfg = ExperimentConfig::from_toml_str(&small_e6(0.0)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&cfg, dir.path(), Some(1)).unwrap();
    let runs = &report.artifacts.runs;
    for k in 1..=2 {
        let approx = runs.column(&format!("approx_g{k}")).unwrap();
        let direct = runs.column(&format!("direct_g{k}")).unwrap();
        assert_eq!(approx, direct);
        assert!(approx.windows(2).all(|w| w[0] == w[1]));
    }
}

#[test]
fn manifest_records_seeds_and_digests() {
    let cfg = ExperimentConfig::from_toml_str(&small_e9(10)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&cfg, dir.path(), Some(1)).unwrap();
    let m: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["master_seed"], 7);
    assert_eq!(m["experiment_id"], "E9");
    assert_eq!(m["seeds"].as_array().unwrap().len(), 10);
    for f in ["runs.csv", "summary.csv", "plot_data.csv", "summary.json"] {
        let digest = m["outputs"][f].as_str().unwrap();
        assert_eq!(digest.len(), 64);
    }
}
