//! Decoupling model: the sum of independent per-segment perturbations
//! against the end-to-end perturbation of the same noise draws.

use nfteig_core::noise::{accumulate_perturbations, Accumulation, SegmentChannel};
use nfteig_core::stats::{covariance_matrix, mean_vector, sample_correlation, Ensemble2D};
use serde::Serialize;

use crate::config::{E6Params, E6Thresholds, ExperimentConfig};
use crate::error::HarnessError;
use crate::output::{num, opt, Artifacts};

#[derive(Debug, Clone)]
pub struct E6Outcome {
    pub accumulation: Accumulation,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub mean_approx: Vec<f64>,
    pub mean_direct: Vec<f64>,
    /// Means with `g(Λ₀)` removed.
    pub perturbation_mean_approx: Vec<f64>,
    pub perturbation_mean_direct: Vec<f64>,
    pub cov_approx: Vec<Vec<f64>>,
    pub cov_direct: Vec<Vec<f64>>,
    /// `max_k |μa − μd| / |μd|`.
    pub mean_rel_error: f64,
    /// `max_ij |Ca − Cd| / √(Cd_ii·Cd_jj)`.
    pub cov_rel_error: f64,
    /// Per component; `None` where a column is constant.
    pub pair_correlation: Vec<Option<f64>>,
}

impl E6Outcome {
    pub fn approx(&self) -> Vec<Vec<f64>> {
        self.accumulation.ensemble.values().map(|r| r.approx.clone()).collect()
    }

    pub fn direct(&self) -> Vec<Vec<f64>> {
        self.accumulation.ensemble.values().map(|r| r.direct.clone()).collect()
    }

    pub fn comparison(&self) -> Comparison {
        let (a, d) = (self.approx(), self.direct());
        let g0 = &self.accumulation.g0;
        let (ma, md) = (mean_vector(&a), mean_vector(&d));
        let (ca, cd) = (covariance_matrix(&a), covariance_matrix(&d));
        let dim = g0.len();
        let mean_rel_error = (0..dim)
            .map(|k| (ma[k] - md[k]).abs() / md[k].abs())
            .fold(0.0, f64::max);
        let mut cov_rel_error: f64 = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                cov_rel_error = cov_rel_error.max((ca[i][j] - cd[i][j]).abs() / (cd[i][i] * cd[j][j]).sqrt());
            }
        }
        let pair_correlation = (0..dim)
            .map(|k| {
                let x: Vec<f64> = a.iter().map(|r| r[k]).collect();
                let y: Vec<f64> = d.iter().map(|r| r[k]).collect();
                Ensemble2D::from_columns(&x, &y)
                    .ok()
                    .and_then(|e| sample_correlation(&e).ok())
            })
            .collect();
        let minus = |m: &[f64]| m.iter().zip(g0).map(|(x, g)| x - g).collect();
        Comparison {
            perturbation_mean_approx: minus(&ma),
            perturbation_mean_direct: minus(&md),
            mean_approx: ma,
            mean_direct: md,
            cov_approx: ca,
            cov_direct: cd,
            mean_rel_error,
            cov_rel_error,
            pair_correlation,
        }
    }

    pub fn artifacts(&self, th: &E6Thresholds) -> Artifacts {
        let dim = self.accumulation.g0.len();
        let mut header = vec!["run".to_string(), "seed".to_string()];
        for k in 1..=dim {
            header.push(format!("approx_g{k}"));
            header.push(format!("direct_g{k}"));
        }
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut a = Artifacts::with_tables(
            &header,
            &[
                "component",
                "g0",
                "mean_approx",
                "mean_direct",
                "perturbation_mean_approx",
                "perturbation_mean_direct",
                "var_approx",
                "var_direct",
                "pair_correlation",
            ],
        );
        a.record("segments", &self.accumulation.ensemble);
        for r in &self.accumulation.ensemble.records {
            let mut row = vec![r.run.to_string(), r.seed.to_string()];
            for k in 0..dim {
                row.push(num(r.value.approx[k]));
                row.push(num(r.value.direct[k]));
            }
            a.runs.push(row);
            if dim >= 2 && r.run < 2000 {
                a.plot_point("approx", r.value.approx[0], r.value.approx[1]);
                a.plot_point("direct", r.value.direct[0], r.value.direct[1]);
            }
        }
        let c = self.comparison();
        for k in 0..dim {
            a.summary.push(vec![
                (k + 1).to_string(),
                num(self.accumulation.g0[k]),
                num(c.mean_approx[k]),
                num(c.mean_direct[k]),
                num(c.perturbation_mean_approx[k]),
                num(c.perturbation_mean_direct[k]),
                num(c.cov_approx[k][k]),
                num(c.cov_direct[k][k]),
                opt(c.pair_correlation[k]),
            ]);
        }
        for (m, g) in self.accumulation.noiseless_g.iter().enumerate() {
            for (k, v) in g.iter().enumerate() {
                a.plot_point(&format!("noiseless g{}", k + 1), (m + 1) as f64, *v);
            }
        }
        a.check(
            "means agree",
            c.mean_rel_error <= th.mean_rel_tol,
            format!(
                "max relative error {:.3e} (allowed {})",
                c.mean_rel_error, th.mean_rel_tol
            ),
        );
        a.check(
            "covariances agree",
            c.cov_rel_error <= th.cov_rel_tol,
            format!(
                "max normalized entry error {:.3} (allowed {})",
                c.cov_rel_error, th.cov_rel_tol
            ),
        );
        a.check(
            "paired components correlate",
            c.pair_correlation
                .iter()
                .all(|r| r.is_some_and(|r| r > th.min_pair_correlation)),
            format!("{:?} (required > {})", c.pair_correlation, th.min_pair_correlation),
        );
        a.summary_value("comparison", c);
        a
    }
}

pub fn run(cfg: &ExperimentConfig, params: &E6Params) -> Result<E6Outcome, HarnessError> {
    let grid = cfg.grid.build()?;
    let q0 = params.pulse.build(&grid, "params.pulse")?;
    let channel = SegmentChannel {
        z_total: params.z_total,
        segments: params.segments,
        steps_per_segment: params.steps_per_segment,
        epsilon: params.epsilon,
        bandwidth: params.bandwidth,
    };
    let accumulation = accumulate_perturbations(&q0, &channel, params.g, &cfg.search, &cfg.ensemble_config(cfg.runs))?;
    Ok(E6Outcome { accumulation })
}
