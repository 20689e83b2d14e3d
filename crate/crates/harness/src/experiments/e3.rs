//! Pairwise correlations of the imaginary parts of a three-soliton after
//! noisy transmission.

use nfteig_core::noise::{run_ensemble, tracked_spectrum, Ensemble};
use nfteig_core::stats::{covariance_summary, pairwise_projections, CovarianceSummary};
use nfteig_core::Complex64;

use super::{reference_eigenvalues, through_channel};
use crate::config::{E3Params, E3Thresholds, ExperimentConfig, PulseSpec};
use crate::error::HarnessError;
use crate::output::{num, opt, Artifacts};

#[derive(Debug, Clone)]
pub struct PairProjection {
    pub i: usize,
    pub j: usize,
    pub summary: CovarianceSummary,
}

#[derive(Debug, Clone)]
pub struct E3Outcome {
    pub reference: Vec<Complex64>,
    pub ensemble: Ensemble<Vec<f64>>,
    pub pairs: Vec<PairProjection>,
}

impl E3Outcome {
    pub fn artifacts(&self, th: &E3Thresholds) -> Artifacts {
        let mut runs_header = vec!["run".to_string(), "seed".to_string()];
        runs_header.extend((1..=self.reference.len()).map(|k| format!("im_lambda{k}")));
        let runs_header: Vec<&str> = runs_header.iter().map(String::as_str).collect();
        let mut a = Artifacts::with_tables(
            &runs_header,
            &[
                "i",
                "j",
                "ref_i",
                "ref_j",
                "n",
                "var_i",
                "var_j",
                "cov",
                "correlation",
                "principal_angle",
            ],
        );
        a.record("three-soliton", &self.ensemble);
        for r in &self.ensemble.records {
            let mut row = vec![r.run.to_string(), r.seed.to_string()];
            row.extend(r.value.iter().map(|&x| num(x)));
            a.runs.push(row);
        }
        for p in &self.pairs {
            let s = &p.summary;
            a.summary.push(vec![
                (p.i + 1).to_string(),
                (p.j + 1).to_string(),
                num(self.reference[p.i].im),
                num(self.reference[p.j].im),
                s.n.to_string(),
                num(s.cov[0][0]),
                num(s.cov[1][1]),
                num(s.cov[0][1]),
                opt(s.correlation),
                opt(s.principal_angle),
            ]);
            let series = format!("lambda{}-lambda{}", p.i + 1, p.j + 1);
            for r in self.ensemble.values().take(2000) {
                a.plot_point(&series, r[p.i], r[p.j]);
            }
        }
        let correlations: Vec<Option<f64>> = self.pairs.iter().map(|p| p.summary.correlation).collect();
        a.summary_value("pair_correlations", &correlations);
        if th.require_positive {
            a.check(
                "all pair correlations positive",
                correlations.iter().all(|c| c.is_some_and(|c| c > 0.0)),
                format!("{correlations:?}"),
            );
        }
        a
    }
}

pub fn run(cfg: &ExperimentConfig, params: &E3Params) -> Result<E3Outcome, HarnessError> {
    let grid = cfg.grid.build()?;
    let ens_cfg = cfg.ensemble_config(cfg.runs);
    let q0 = PulseSpec::centered(&params.imag).build(&grid, "params.imag")?;
    let reference = reference_eigenvalues(&q0, &cfg.search)?;
    if reference.len() != params.imag.len() {
        return Err(HarnessError::config(
            "params.imag",
            format!(
                "pulse resolves to {} eigenvalues, expected {}",
                reference.len(),
                params.imag.len()
            ),
        ));
    }
    let ensemble = run_ensemble(&grid, &ens_cfg, 0, |p, rng, _| {
        let out = through_channel(p, &q0, &params.channel, rng)?;
        let eigs = tracked_spectrum(&out, &reference, &cfg.search, ens_cfg.ambiguity_ratio)?;
        Ok(eigs.iter().map(|l| l.im).collect::<Vec<f64>>())
    })?;
    let rows: Vec<Vec<f64>> = ensemble.values().cloned().collect();
    let pairs = pairwise_projections(&rows)?
        .into_iter()
        .map(|((i, j), e)| {
            Ok(PairProjection {
                i,
                j,
                summary: covariance_summary(&e)?,
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    Ok(E3Outcome {
        reference,
        ensemble,
        pairs,
    })
}
