mod common;

use std::process::Command;

use common::{bundled_path, small_e2};
use nfteig_harness::catalog::list_experiments;
use nfteig_harness::{exit, ExperimentConfig, HarnessError};

fn nfteig() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nfteig"))
}

#[test]
fn every_bundled_config_parses() {
    for i in 1..=10 {
        let cfg = ExperimentConfig::from_path(&bundled_path(&format!("e{i}.toml"))).unwrap();
        assert_eq!(cfg.id().to_string(), format!("E{i}"));
    }
}

#[test]
fn missing_seed_is_named() {
    let text = small_e2(2.0).replace("seed = 3\n", "");
    let err = ExperimentConfig::from_toml_str(&text).unwrap_err();
    assert!(matches!(err, HarnessError::Config { .. }));
    assert!(err.to_string().contains("seed"), "{err}");
    assert_eq!(err.exit_code(), exit::CONFIG_ERROR);
}

#[test]
fn bad_values_report_their_path() {
    let text = small_e2(2.0).replace("rho = 0.9", "rho = 1.5");
    let err = ExperimentConfig::from_toml_str(&text).unwrap_err();
    assert!(err.to_string().contains("rho"), "{err}");

    let text = small_e2(2.0).replace("sigma = 0.006", "sigma = \"big\"");
    let err = ExperimentConfig::from_toml_str(&text).unwrap_err();
    assert!(err.to_string().contains("params.noise"), "{err}");

    let text = small_e2(2.0).replace("[params]", "[params]\nbogus = 1");
    assert!(ExperimentConfig::from_toml_str(&text).is_err());
}

#[test]
fn catalog_has_ten_entries() {
    let ids: Vec<String> = list_experiments().iter().map(|e| e.id.to_string()).collect();
    assert_eq!(ids, (1..=10).map(|i| format!("E{i}")).collect::<Vec<_>>());

    let out = nfteig().arg("list").output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 10);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let run = |text: &str, name: &str| {
        let cfg = dir.path().join(format!("{name}.toml"));
        std::fs::write(&cfg, text).unwrap();
        nfteig()
            .args(["run", "--workers", "1", "--config"])
            .arg(&cfg)
            .arg("--output-dir")
            .arg(dir.path().join(name))
            .status()
            .unwrap()
            .code()
    };
    assert_eq!(run(&small_e2(2.0), "pass"), Some(exit::PASS));
    assert!(dir.path().join("pass/manifest.json").exists());
    assert_eq!(run(&small_e2(1e6), "fail"), Some(exit::THRESHOLD_FAIL));
    assert_eq!(run("experiment_id = \"E2\"\n", "broken"), Some(exit::CONFIG_ERROR));

    let status = nfteig()
        .args(["validate", "--config"])
        .arg(bundled_path("e7.toml"))
        .status()
        .unwrap();
    assert!(status.success());
}
