use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::ExperimentConfig;
use crate::error::{exit, HarnessError};
use crate::experiments::execute;
use crate::output::{sha256_hex, write_manifest, write_tables, Artifacts, Manifest, SEED_RULE};

#[derive(Debug)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub artifacts: Artifacts,
    pub manifest: Manifest,
    pub exit_code: i32,
}

/// Exit code of a finished experiment: the most severe case error, else
/// threshold failure, else pass.
pub fn exit_code(a: &Artifacts) -> i32 {
    if let Some(code) = a.errors.iter().map(|e| e.exit_code).max() {
        code
    } else if a.checks.iter().all(|c| c.passed) {
        exit::PASS
    } else {
        exit::THRESHOLD_FAIL
    }
}

/// Runs `cfg` on a pool of `workers` threads (all cores if `None`) and
/// writes the artifact set to `out_dir`.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    workers: Option<usize>,
) -> Result<RunReport, HarnessError> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| HarnessError::config("workers", e.to_string()))?;
    let start = Instant::now();
    let artifacts = pool.install(|| execute(cfg))?;
    let wall = start.elapsed().as_secs_f64();

    let outputs = write_tables(out_dir, &artifacts)?;
    let config = serde_json::to_value(cfg)?;
    let manifest = Manifest {
        experiment_id: cfg.id().to_string(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: sha256_hex(&serde_json::to_vec(&config)?),
        config,
        master_seed: cfg.seed,
        seed_rule: SEED_RULE.to_string(),
        workers: pool.current_num_threads(),
        wall_clock_seconds: wall,
        passed: artifacts.passed(),
        checks: artifacts.checks.clone(),
        errors: artifacts.errors.clone(),
        audit: artifacts.audits.clone(),
        outputs,
        seeds: artifacts.seeds.clone(),
    };
    write_manifest(out_dir, &manifest)?;
    Ok(RunReport {
        output_dir: out_dir.to_path_buf(),
        exit_code: exit_code(&artifacts),
        artifacts,
        manifest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nfteig_core::Error;

    #[test]
    fn exit_code_precedence() {
        let mut a = Artifacts::default();
        assert_eq!(exit_code(&a), exit::PASS);
        a.check("c", false, "");
        assert_eq!(exit_code(&a), exit::THRESHOLD_FAIL);
        a.case_error("x", &HarnessError::config("p", "m"));
        assert_eq!(exit_code(&a), exit::CONFIG_ERROR);
        a.case_error("y", &HarnessError::Numerical(Error::ZeroSignal));
        assert_eq!(exit_code(&a), exit::NUMERICAL_FAILURE);
    }
}
