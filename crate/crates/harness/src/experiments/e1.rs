//! Correlation of `Im λ₁` and `Im λ₂` after noisy transmission, over a grid
//! of centred two-soliton inputs.

use nfteig_core::noise::{run_ensemble, tracked_spectrum, Ensemble};
use nfteig_core::stats::CovarianceSummary;
use nfteig_core::Complex64;
use serde::Serialize;

use super::{imag_pair, inversions, reference_eigenvalues, summarize, through_channel};
use crate::config::{E1Params, E1Thresholds, ExperimentConfig, PulseSpec};
use crate::error::HarnessError;
use crate::output::{num, opt, Artifacts, CaseError};

#[derive(Debug, Clone)]
pub struct PairOutcome {
    pub lambda1: f64,
    pub lambda2: f64,
    pub result: Result<PairData, String>,
}

#[derive(Debug, Clone)]
pub struct PairData {
    pub reference: Vec<Complex64>,
    pub ensemble: Ensemble<[f64; 2]>,
    pub summary: Option<CovarianceSummary>,
}

#[derive(Debug, Clone)]
pub struct E1Outcome {
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    /// Row-major over `lambda1`, then `lambda2`.
    pub pairs: Vec<PairOutcome>,
    pub errors: Vec<CaseError>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrendReport {
    pub all_positive: bool,
    /// Per fixed λ₁: adjacent increases of the correlation as λ₂ grows.
    pub row_inversions: usize,
    pub worst_row: usize,
    /// Per fixed λ₂: adjacent decreases as λ₁ grows.
    pub column_inversions: usize,
    pub worst_column: usize,
}

impl E1Outcome {
    /// Correlation matrix indexed `[λ₁][λ₂]`; `None` where undefined.
    pub fn correlations(&self) -> Vec<Vec<Option<f64>>> {
        self.pairs
            .chunks(self.lambda2.len())
            .map(|row| {
                row.iter()
                    .map(|p| p.result.as_ref().ok().and_then(|d| d.summary.as_ref()?.correlation))
                    .collect()
            })
            .collect()
    }

    /// Trend statistics; `None` if any correlation is missing.
    pub fn trend(&self) -> Option<TrendReport> {
        let c: Vec<Vec<f64>> = self
            .correlations()
            .into_iter()
            .map(|row| row.into_iter().collect::<Option<Vec<f64>>>())
            .collect::<Option<_>>()?;
        let rows: Vec<usize> = c.iter().map(|row| inversions(row, false)).collect();
        let cols: Vec<usize> = (0..self.lambda2.len())
            .map(|j| inversions(&c.iter().map(|row| row[j]).collect::<Vec<_>>(), true))
            .collect();
        Some(TrendReport {
            all_positive: c.iter().flatten().all(|&x| x > 0.0),
            row_inversions: rows.iter().sum(),
            worst_row: rows.iter().copied().max().unwrap_or(0),
            column_inversions: cols.iter().sum(),
            worst_column: cols.iter().copied().max().unwrap_or(0),
        })
    }

    pub fn artifacts(&self, th: &E1Thresholds) -> Artifacts {
        let mut a = Artifacts::with_tables(
            &["lambda1", "lambda2", "run", "seed", "im_lambda1", "im_lambda2"],
            &[
                "lambda1",
                "lambda2",
                "ref_im_lambda1",
                "ref_im_lambda2",
                "n",
                "excluded",
                "mean_im_lambda1",
                "mean_im_lambda2",
                "var_im_lambda1",
                "var_im_lambda2",
                "cov",
                "correlation",
                "principal_angle",
            ],
        );
        a.errors.extend(self.errors.iter().cloned());
        for p in &self.pairs {
            let case = format!("lambda1={} lambda2={}", p.lambda1, p.lambda2);
            let Ok(d) = &p.result else { continue };
            a.record(&case, &d.ensemble);
            for r in &d.ensemble.records {
                a.runs.push(vec![
                    num(p.lambda1),
                    num(p.lambda2),
                    r.run.to_string(),
                    r.seed.to_string(),
                    num(r.value[0]),
                    num(r.value[1]),
                ]);
            }
            let s = d.summary.as_ref();
            a.summary.push(vec![
                num(p.lambda1),
                num(p.lambda2),
                num(d.reference[0].im),
                num(d.reference[1].im),
                d.ensemble.records.len().to_string(),
                d.ensemble.audit.excluded.len().to_string(),
                opt(s.map(|s| s.mean[0])),
                opt(s.map(|s| s.mean[1])),
                opt(s.map(|s| s.cov[0][0])),
                opt(s.map(|s| s.cov[1][1])),
                opt(s.map(|s| s.cov[0][1])),
                opt(s.and_then(|s| s.correlation)),
                opt(s.and_then(|s| s.principal_angle)),
            ]);
            if let Some(c) = s.and_then(|s| s.correlation) {
                a.plot_point(&format!("correlation lambda1={}", p.lambda1), p.lambda2, c);
            }
        }
        a.summary_value("correlation_matrix", self.correlations());
        match self.trend() {
            Some(t) => {
                a.summary_value("trend", t);
                if th.require_positive {
                    a.check(
                        "all correlations positive",
                        t.all_positive,
                        format!("{:?}", self.correlations()),
                    );
                }
                a.check(
                    "correlation non-increasing in lambda2",
                    t.worst_row <= th.max_inversions_per_line,
                    format!(
                        "worst row has {} inversions (allowed {})",
                        t.worst_row, th.max_inversions_per_line
                    ),
                );
                a.check(
                    "correlation non-decreasing in lambda1",
                    t.worst_column <= th.max_inversions_per_line,
                    format!(
                        "worst column has {} inversions (allowed {})",
                        t.worst_column, th.max_inversions_per_line
                    ),
                );
            }
            None => a.check("correlation map complete", false, "some pairs have no correlation"),
        }
        a
    }
}

pub fn run(cfg: &ExperimentConfig, params: &E1Params) -> Result<E1Outcome, HarnessError> {
    let grid = cfg.grid.build()?;
    let ens_cfg = cfg.ensemble_config(cfg.runs);
    let mut pairs = Vec::new();
    let mut errors = Vec::new();
    for &l1 in &params.lambda1 {
        for &l2 in &params.lambda2 {
            let stream = pairs.len() as u64;
            let result = (|| -> Result<PairData, HarnessError> {
                let q0 = PulseSpec::centered(&[l1, l2]).build(&grid, "params")?;
                let reference = reference_eigenvalues(&q0, &cfg.search)?;
                if reference.len() != 2 {
                    return Err(HarnessError::config(
                        "params",
                        format!("pulse ({l1}j, {l2}j) resolves to {} eigenvalues", reference.len()),
                    ));
                }
                let ensemble = run_ensemble(&grid, &ens_cfg, stream, |p, rng, _| {
                    let out = through_channel(p, &q0, &params.channel, rng)?;
                    let eigs = tracked_spectrum(&out, &reference, &cfg.search, ens_cfg.ambiguity_ratio)?;
                    Ok(imag_pair(&eigs, 0, 1))
                })?;
                let summary = summarize(ensemble.values().copied().collect());
                Ok(PairData {
                    reference,
                    ensemble,
                    summary,
                })
            })();
            let result = result.map_err(|e| {
                let msg = e.to_string();
                errors.push(CaseError::new(&format!("lambda1={l1} lambda2={l2}"), &e));
                msg
            });
            pairs.push(PairOutcome {
                lambda1: l1,
                lambda2: l2,
                result,
            });
        }
    }
    Ok(E1Outcome {
        lambda1: params.lambda1.clone(),
        lambda2: params.lambda2.clone(),
        pairs,
        errors,
    })
}
