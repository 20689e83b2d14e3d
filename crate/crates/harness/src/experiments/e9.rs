//! Linearity of eigenvalue perturbations: the shift caused by `n₁ + n₂`
//! against the sum of the shifts caused by each alone.

use nfteig_core::noise::{run_ensemble, tracked_spectrum, Ensemble};
use nfteig_core::stats::{sample_correlation, Ensemble2D};

use super::{point_noise, reference_eigenvalues};
use crate::config::{E9Params, E9Thresholds, ExperimentConfig};
use crate::error::HarnessError;
use crate::output::{num, opt, Artifacts};

/// Per component of `g`: `[g(Λ₃) − g(Λ₀), g(Λ₁) + g(Λ₂) − 2g(Λ₀)]`.
pub type Shifts = Vec<[f64; 2]>;

#[derive(Debug, Clone)]
pub struct E9Outcome {
    pub g0: Vec<f64>,
    pub ensemble: Ensemble<Shifts>,
}

impl E9Outcome {
    pub fn correlations(&self) -> Vec<Option<f64>> {
        (0..self.g0.len())
            .map(|k| {
                let pts: Vec<[f64; 2]> = self.ensemble.values().map(|v| v[k]).collect();
                Ensemble2D::new(pts).ok().and_then(|e| sample_correlation(&e).ok())
            })
            .collect()
    }

    pub fn artifacts(&self, th: &E9Thresholds) -> Artifacts {
        let mut a = Artifacts::with_tables(
            &["run", "seed", "component", "joint_shift", "summed_shift"],
            &["component", "g0", "n", "correlation"],
        );
        a.record("linearity", &self.ensemble);
        for r in &self.ensemble.records {
            for (k, v) in r.value.iter().enumerate() {
                a.runs.push(vec![
                    r.run.to_string(),
                    r.seed.to_string(),
                    (k + 1).to_string(),
                    num(v[0]),
                    num(v[1]),
                ]);
                a.plot_point(&format!("g{}", k + 1), v[1], v[0]);
            }
        }
        let corr = self.correlations();
        for (k, c) in corr.iter().enumerate() {
            a.summary.push(vec![
                (k + 1).to_string(),
                num(self.g0[k]),
                self.ensemble.records.len().to_string(),
                opt(*c),
            ]);
        }
        a.check(
            "perturbations add linearly",
            corr.iter().all(|c| c.is_some_and(|c| c > th.min_correlation)),
            format!("{corr:?} (required > {})", th.min_correlation),
        );
        a.summary_value("correlation", &corr);
        a
    }
}

pub fn run(cfg: &ExperimentConfig, params: &E9Params) -> Result<E9Outcome, HarnessError> {
    let grid = cfg.grid.build()?;
    let ens_cfg = cfg.ensemble_config(cfg.runs);
    let q0 = params.pulse.build(&grid, "params.pulse")?;
    let reference = reference_eigenvalues(&q0, &cfg.search)?;
    let g0 = params.g.apply(&reference);
    let ensemble = run_ensemble(&grid, &ens_cfg, 0, |p, rng, _| {
        let n1 = point_noise(p, &params.noise, &grid, rng)?;
        let n2 = point_noise(p, &params.noise, &grid, rng)?;
        let g = |q| -> Result<Vec<f64>, nfteig_core::noise::RunFailure> {
            Ok(params
                .g
                .apply(&tracked_spectrum(&q, &reference, &cfg.search, ens_cfg.ambiguity_ratio)?))
        };
        let g1 = g(q0.add(&n1)?)?;
        let g2 = g(q0.add(&n2)?)?;
        let g3 = g(q0.add(&n1)?.add(&n2)?)?;
        Ok((0..g0.len())
            .map(|k| [g3[k] - g0[k], g1[k] + g2[k] - 2.0 * g0[k]])
            .collect())
    })?;
    Ok(E9Outcome { g0, ensemble })
}
