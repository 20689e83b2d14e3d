//! Artifact sets: CSV tables, JSON summary and run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nfteig_core::noise::{Ensemble, ExclusionAudit};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::HarnessError;

/// A rectangular table written as RFC 4180 CSV.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i].as_str()).collect())
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, HarnessError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| HarnessError::Io(e.into_error()))
    }
}

/// Shortest round-trip decimal form; identical inputs give identical bytes.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Exclusion audit of one ensemble within an experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseAudit {
    pub case: String,
    #[serde(flatten)]
    pub audit: ExclusionAudit,
}

/// A case that could not be computed; the rest of the experiment goes on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseError {
    pub case: String,
    pub error: String,
    pub exit_code: i32,
}

impl CaseError {
    pub fn new(case: &str, e: &HarnessError) -> Self {
        Self {
            case: case.to_string(),
            error: e.to_string(),
            exit_code: e.exit_code(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedRecord {
    pub case: String,
    pub run: usize,
    pub seed: u64,
}

/// Everything an experiment produces before it is written to disk.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub runs: Table,
    pub summary: Table,
    /// Long format: `series, x, y`.
    pub plot: Table,
    pub summary_json: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    pub audits: Vec<CaseAudit>,
    pub seeds: Vec<SeedRecord>,
    pub errors: Vec<CaseError>,
}

impl Artifacts {
    pub fn with_tables(runs: &[&str], summary: &[&str]) -> Self {
        Self {
            runs: Table::new(runs),
            summary: Table::new(summary),
            plot: Table::new(&["series", "x", "y"]),
            ..Self::default()
        }
    }

    pub fn plot_point(&mut self, series: &str, x: f64, y: f64) {
        self.plot.push(vec![series.to_string(), num(x), num(y)]);
    }

    /// Records the audit and per-run seeds of an ensemble.
    pub fn record<T>(&mut self, case: &str, ens: &Ensemble<T>) {
        self.audits.push(CaseAudit {
            case: case.to_string(),
            audit: ens.audit.clone(),
        });
        self.seeds.extend(ens.records.iter().map(|r| SeedRecord {
            case: case.to_string(),
            run: r.run,
            seed: r.seed,
        }));
        self.seeds.extend(ens.audit.excluded.iter().map(|r| SeedRecord {
            case: case.to_string(),
            run: r.run,
            seed: r.seed,
        }));
    }

    pub fn case_error(&mut self, case: &str, e: &HarnessError) {
        self.errors.push(CaseError::new(case, e));
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check::new(name, passed, detail));
    }

    pub fn summary_value(&mut self, key: &str, value: impl Serialize) {
        self.summary_json
            .insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    pub fn passed(&self) -> bool {
        self.errors.is_empty() && self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub experiment_id: String,
    pub code_version: String,
    pub config_sha256: String,
    pub config: Value,
    pub master_seed: u64,
    pub seed_rule: String,
    pub workers: usize,
    pub wall_clock_seconds: f64,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub errors: Vec<CaseError>,
    pub audit: Vec<CaseAudit>,
    pub outputs: BTreeMap<String, String>,
    pub seeds: Vec<SeedRecord>,
}

pub const SEED_RULE: &str = "run i of stream s: SplitMix64(SplitMix64(SplitMix64(master) ^ s) ^ i), seeding ChaCha8";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `runs.csv`, `summary.csv`, `plot_data.csv` and `summary.json`, and
/// returns their SHA-256 digests by file name.
pub fn write_tables(dir: &Path, a: &Artifacts) -> Result<BTreeMap<String, String>, HarnessError> {
    fs::create_dir_all(dir)?;
    let summary = serde_json::json!({
        "passed": a.passed(),
        "checks": a.checks,
        "errors": a.errors,
        "statistics": a.summary_json,
    });
    let files: [(&str, Vec<u8>); 4] = [
        ("runs.csv", a.runs.to_csv()?),
        ("summary.csv", a.summary.to_csv()?),
        ("plot_data.csv", a.plot.to_csv()?),
        ("summary.json", serde_json::to_vec_pretty(&summary)?),
    ];
    let mut digests = BTreeMap::new();
    for (name, bytes) in files {
        fs::write(dir.join(name), &bytes)?;
        digests.insert(name.to_string(), sha256_hex(&bytes));
    }
    Ok(digests)
}

pub fn write_manifest(dir: &Path, m: &Manifest) -> Result<(), HarnessError> {
    fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-17, 1e300] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(opt(None), "");
    }

    #[test]
    fn csv_quotes_and_uses_crlf() {
        let mut t = Table::new(&["case", "x"]);
        t.push(vec!["a,b".into(), num(1.5)]);
        let text = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(text, "case,x\r\n\"a,b\",1.5\r\n");
        assert_eq!(t.column("x").unwrap(), vec!["1.5"]);
        assert!(t.column("y").is_none());
    }

    #[test]
    fn errors_and_failed_checks_fail_the_set() {
        let mut a = Artifacts::with_tables(&["x"], &["y"]);
        assert!(a.passed());
        a.check("fine", true, "");
        assert!(a.passed());
        a.check("bad", false, "detail");
        assert!(!a.passed());
        let mut b = Artifacts::default();
        b.case_error("c", &HarnessError::config("params", "nope"));
        assert!(!b.passed());
        assert_eq!(b.errors[0].exit_code, crate::exit::CONFIG_ERROR);
    }
}
