//! Transmitter noise: point noise added before a noiseless fiber leaves the
//! eigenvalue covariance unchanged at the receiver. Optionally compares the
//! spread caused by distributed noise over the same distance.

use nfteig_core::noise::{noiseless_taps, run_ensemble, tracked_spectrum, Ensemble, RunFailure};
use nfteig_core::rng::{rng_from_seed, run_rng, RunRng};
use nfteig_core::soliton::nonlinear_phase_difference;
use nfteig_core::stats::{bootstrap_difference, covariance_summary, CovarianceSummary, Ensemble2D};
use nfteig_core::Complex64;
use serde::Serialize;

use super::{imag_pair, point_noise, reference_eigenvalues, summarize};
use crate::config::{BootstrapSpec, E10Params, ExperimentConfig};
use crate::error::HarnessError;
use crate::output::{num, opt, Artifacts};

const PROPAGATION_STREAM: u64 = 1;
const BOOTSTRAP_STREAM: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntryInterval {
    pub entry: (usize, usize),
    pub difference: f64,
    /// `|difference| / √(C_ii·C_jj)` of the clouds before propagation.
    pub relative: f64,
    pub ci: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct E10Outcome {
    pub z: f64,
    /// `[before, after]` imaginary parts of the first two eigenvalues.
    pub ensemble: Ensemble<[[f64; 2]; 2]>,
    pub before: CovarianceSummary,
    pub after: CovarianceSummary,
    pub intervals: Vec<EntryInterval>,
    /// Largest per-run change of the tracked eigenvalues.
    pub max_drift: f64,
    /// `Im` change of the noiseless spectrum over the same distance; the
    /// per-run drift is this discretization bias, not noise.
    pub reference_shift: [f64; 2],
    pub propagation: Option<(Ensemble<[f64; 2]>, Option<CovarianceSummary>)>,
}

impl E10Outcome {
    pub fn artifacts(&self) -> Artifacts {
        let mut a = Artifacts::with_tables(
            &["case", "run", "seed", "im_lambda1", "im_lambda2"],
            &[
                "case",
                "n",
                "var_im_lambda1",
                "var_im_lambda2",
                "cov",
                "correlation",
                "principal_angle",
            ],
        );
        a.record("transmitter", &self.ensemble);
        for r in &self.ensemble.records {
            for (k, case) in ["before", "after"].iter().enumerate() {
                a.runs.push(vec![
                    case.to_string(),
                    r.run.to_string(),
                    r.seed.to_string(),
                    num(r.value[k][0]),
                    num(r.value[k][1]),
                ]);
                if r.run < 2000 {
                    a.plot_point(case, r.value[k][0], r.value[k][1]);
                }
            }
        }
        let mut row = |case: &str, s: Option<&CovarianceSummary>| {
            a.summary.push(vec![
                case.to_string(),
                s.map(|s| s.n.to_string()).unwrap_or_default(),
                opt(s.map(|s| s.cov[0][0])),
                opt(s.map(|s| s.cov[1][1])),
                opt(s.map(|s| s.cov[0][1])),
                opt(s.and_then(|s| s.correlation)),
                opt(s.and_then(|s| s.principal_angle)),
            ]);
        };
        row("before", Some(&self.before));
        row("after", Some(&self.after));
        if let Some((ens, s)) = &self.propagation {
            row("propagation", s.as_ref());
            a.record("propagation", ens);
            for r in &ens.records {
                a.runs.push(vec![
                    "propagation".into(),
                    r.run.to_string(),
                    r.seed.to_string(),
                    num(r.value[0]),
                    num(r.value[1]),
                ]);
                if r.run < 2000 {
                    a.plot_point("propagation", r.value[0], r.value[1]);
                }
            }
        }
        for c in &self.intervals {
            a.check(
                &format!("covariance entry {:?} unchanged by propagation", c.entry),
                c.ci.0 <= 0.0 && 0.0 <= c.ci.1,
                format!(
                    "difference {:.3e} ({:.2}% of the scale), CI [{:.3e}, {:.3e}]",
                    c.difference,
                    100.0 * c.relative,
                    c.ci.0,
                    c.ci.1
                ),
            );
        }
        a.summary_value("z", self.z);
        a.summary_value("max_drift", self.max_drift);
        a.summary_value("reference_shift", self.reference_shift);
        a.summary_value("intervals", &self.intervals);
        a
    }
}

/// Bootstrap interval of `C_before − C_after` per covariance entry,
/// resampling the two clouds independently.
fn entry_intervals(
    before: &Ensemble2D,
    after: &Ensemble2D,
    bootstrap: &BootstrapSpec,
    rng: &mut RunRng,
) -> Result<Vec<EntryInterval>, HarnessError> {
    let (cb, ca) = (before.covariance(), after.covariance());
    [(0, 0), (0, 1), (1, 1)]
        .into_iter()
        .map(|(i, j)| {
            let ci = bootstrap_difference(
                before,
                after,
                bootstrap.resamples,
                bootstrap.confidence,
                rng,
                |e| Some(e.covariance()[i][j]),
                |x, y| x - y,
            )?;
            Ok(EntryInterval {
                entry: (i, j),
                difference: cb[i][j] - ca[i][j],
                relative: (cb[i][j] - ca[i][j]).abs() / (cb[i][i] * cb[j][j]).sqrt(),
                ci,
            })
        })
        .collect()
}

pub fn run(cfg: &ExperimentConfig, params: &E10Params) -> Result<E10Outcome, HarnessError> {
    let grid = cfg.grid.build()?;
    let ens_cfg = cfg.ensemble_config(cfg.runs);
    let q0 = params.pulse.build(&grid, "params.pulse")?;
    let reference = reference_eigenvalues(&q0, &cfg.search)?;
    if reference.len() < 2 {
        return Err(HarnessError::config("params.pulse", "need at least two eigenvalues"));
    }
    let rate = nonlinear_phase_difference(
        Complex64::new(0.0, reference[0].im),
        Complex64::new(0.0, reference[1].im),
        1.0,
    )
    .real()
    .expect("purely imaginary arguments");
    let z = params.target_phase / rate.abs();
    let steps = ((z * params.steps_per_unit as f64).ceil() as usize).max(1);
    let at_z = noiseless_taps(&q0, &[z], params.steps_per_unit)?.remove(0);
    let reference_z =
        tracked_spectrum(&at_z, &reference, &cfg.search, ens_cfg.ambiguity_ratio).map_err(|f| match f {
            RunFailure::Fatal(e) => HarnessError::from(e),
            RunFailure::Excluded(r) => {
                HarnessError::config("params.target_phase", format!("noiseless spectrum at z = {z}: {r}"))
            }
        })?;

    let ensemble = run_ensemble(&grid, &ens_cfg, 0, |p, rng, _| {
        let noisy = q0.add(&point_noise(p, &params.noise, &grid, rng)?)?;
        let before = tracked_spectrum(&noisy, &reference, &cfg.search, ens_cfg.ambiguity_ratio)?;
        let out = p
            .propagate(&noisy, z, &[], steps, 0.0, 1.0, &mut rng_from_seed(0))?
            .output;
        let after = tracked_spectrum(&out, &before, &cfg.search, ens_cfg.ambiguity_ratio)?;
        Ok([imag_pair(&before, 0, 1), imag_pair(&after, 0, 1)])
    })?;
    let pairs: Vec<[[f64; 2]; 2]> = ensemble.values().copied().collect();
    let before_cloud = Ensemble2D::new(pairs.iter().map(|p| p[0]).collect())?;
    let after_cloud = Ensemble2D::new(pairs.iter().map(|p| p[1]).collect())?;
    let max_drift = pairs
        .iter()
        .flat_map(|p| [(p[0][0] - p[1][0]).abs(), (p[0][1] - p[1][1]).abs()])
        .fold(0.0, f64::max);
    let mut rng = run_rng(cfg.seed, BOOTSTRAP_STREAM, 0);
    let intervals = entry_intervals(&before_cloud, &after_cloud, &params.bootstrap, &mut rng)?;
    let before = covariance_summary(&before_cloud)?;
    let after = covariance_summary(&after_cloud)?;

    let propagation = if params.propagation_epsilon > 0.0 {
        let ens = run_ensemble(&grid, &ens_cfg, PROPAGATION_STREAM, |p, rng, _| {
            let out = p
                .propagate(
                    &q0,
                    z,
                    &[],
                    steps,
                    params.propagation_epsilon,
                    params.noise.bandwidth,
                    rng,
                )?
                .output;
            Ok(imag_pair(
                &tracked_spectrum(&out, &reference_z, &cfg.search, ens_cfg.ambiguity_ratio)?,
                0,
                1,
            ))
        })?;
        let s = summarize(ens.values().copied().collect());
        Some((ens, s))
    } else {
        None
    };
    Ok(E10Outcome {
        z,
        ensemble,
        before,
        after,
        intervals,
        max_drift,
        reference_shift: [reference_z[0].im - reference[0].im, reference_z[1].im - reference[1].im],
        propagation,
    })
}
