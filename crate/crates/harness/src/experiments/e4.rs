//! Segment scatter at a series of taps along the fiber (E4) and the
//! principal angle against the nonlinear phase difference (E5).

use std::f64::consts::PI;

use nfteig_core::noise::{segment_scatter, Ensemble};
use nfteig_core::rng::run_rng;
use nfteig_core::soliton::nonlinear_phase_difference;
use nfteig_core::stats::{
    angle_difference, bootstrap_difference, covariance_summary, fold_angle, CovarianceSummary, Ensemble2D,
};
use nfteig_core::Complex64;
use serde::Serialize;

use crate::config::{ExperimentConfig, TapParams};
use crate::error::HarnessError;
use crate::output::{num, opt, Artifacts};

/// Streams for the bootstrap generators, clear of the tap streams.
const BOOTSTRAP_STREAM: u64 = 1 << 32;

#[derive(Debug, Clone)]
pub struct TapResult {
    pub z: f64,
    /// Nonlinear phase difference of the first two eigenvalues at `z`.
    pub phase: f64,
    pub reference: Vec<Complex64>,
    pub ensemble: Ensemble<Vec<Complex64>>,
    pub summary: CovarianceSummary,
}

impl TapResult {
    fn points(&self) -> Result<Ensemble2D, HarnessError> {
        Ok(Ensemble2D::new(
            self.ensemble.values().map(|v| [v[0].im, v[1].im]).collect(),
        )?)
    }
}

/// Bootstrap interval of the folded angle difference between two taps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AngleComparison {
    pub z_a: f64,
    pub z_b: f64,
    pub difference: f64,
    pub ci: (f64, f64),
}

impl AngleComparison {
    /// Whether the interval reaches an angle equivalent to 0 (mod π).
    pub fn contains_zero(&self) -> bool {
        [-PI, 0.0, PI].iter().any(|&k| self.ci.0 <= k && k <= self.ci.1)
    }
}

#[derive(Debug, Clone)]
pub struct TapOutcome {
    pub periodic: bool,
    /// d(phase)/dz.
    pub phase_rate: f64,
    pub taps: Vec<TapResult>,
    /// The two taps whose angles differ most.
    pub spread: Option<AngleComparison>,
    /// Taps one full period of the nonlinear phase apart.
    pub periods: Vec<AngleComparison>,
}

impl TapOutcome {
    pub fn tap(&self, z: f64) -> Option<&TapResult> {
        self.taps.iter().find(|t| (t.z - z).abs() < 1e-12)
    }

    pub fn artifacts(&self) -> Artifacts {
        let mut a = Artifacts::with_tables(
            &["z", "run", "seed", "im_lambda1", "im_lambda2"],
            &[
                "z",
                "nonlinear_phase",
                "ref_im_lambda1",
                "ref_im_lambda2",
                "n",
                "var_im_lambda1",
                "var_im_lambda2",
                "cov",
                "correlation",
                "principal_angle",
            ],
        );
        for t in &self.taps {
            a.record(&format!("z={}", t.z), &t.ensemble);
            for r in &t.ensemble.records {
                a.runs.push(vec![
                    num(t.z),
                    r.run.to_string(),
                    r.seed.to_string(),
                    num(r.value[0].im),
                    num(r.value[1].im),
                ]);
            }
            let s = &t.summary;
            a.summary.push(vec![
                num(t.z),
                num(t.phase),
                num(t.reference[0].im),
                num(t.reference[1].im),
                s.n.to_string(),
                num(s.cov[0][0]),
                num(s.cov[1][1]),
                num(s.cov[0][1]),
                opt(s.correlation),
                opt(s.principal_angle),
            ]);
            if let Some(theta) = s.principal_angle {
                if self.periodic {
                    a.plot_point("principal_angle", t.phase, theta);
                } else {
                    a.plot_point("principal_angle", t.z, theta);
                }
            }
            if !self.periodic {
                for v in t.ensemble.values().take(1000) {
                    a.plot_point(&format!("scatter z={}", t.z), v[0].im, v[1].im);
                }
            }
        }
        a.summary_value("phase_rate", self.phase_rate);
        a.summary_value("angle_spread", self.spread);
        a.summary_value("period_comparisons", &self.periods);
        match &self.spread {
            Some(c) => a.check(
                "principal angle varies across taps",
                !c.contains_zero(),
                format!(
                    "z={} vs z={}: {:.3} rad, CI [{:.3}, {:.3}]",
                    c.z_a, c.z_b, c.difference, c.ci.0, c.ci.1
                ),
            ),
            None => a.check(
                "principal angle varies across taps",
                false,
                "fewer than two taps with a defined angle",
            ),
        }
        for c in &self.periods {
            a.check(
                &format!("angle repeats after one phase period from z={}", c.z_a),
                c.contains_zero(),
                format!(
                    "z={} vs z={}: {:.3} rad, CI [{:.3}, {:.3}]",
                    c.z_a, c.z_b, c.difference, c.ci.0, c.ci.1
                ),
            );
        }
        a
    }
}

fn compare(
    cfg: &ExperimentConfig,
    params: &TapParams,
    a: &TapResult,
    b: &TapResult,
    stream: u64,
) -> Result<Option<AngleComparison>, HarnessError> {
    let (Some(ta), Some(tb)) = (a.summary.principal_angle, b.summary.principal_angle) else {
        return Ok(None);
    };
    let d = angle_difference(ta, tb);
    let mut rng = run_rng(cfg.seed, BOOTSTRAP_STREAM + stream, 0);
    // Resampled differences are folded around the observed one so the
    // interval does not wrap at ±π/2.
    let (lo, hi) = bootstrap_difference(
        &a.points()?,
        &b.points()?,
        params.bootstrap.resamples,
        params.bootstrap.confidence,
        &mut rng,
        |e| covariance_summary(e).ok()?.principal_angle,
        |x, y| fold_angle(x - y - d),
    )?;
    Ok(Some(AngleComparison {
        z_a: a.z,
        z_b: b.z,
        difference: d,
        ci: (d + lo, d + hi),
    }))
}

pub fn run(cfg: &ExperimentConfig, params: &TapParams, periodic: bool) -> Result<TapOutcome, HarnessError> {
    let grid = cfg.grid.build()?;
    let q0 = params.pulse.build(&grid, "params.pulse")?;
    let base = super::reference_eigenvalues(&q0, &cfg.search)?;
    if base.len() < 2 {
        return Err(HarnessError::config("params.pulse", "need at least two eigenvalues"));
    }
    let phase_rate = nonlinear_phase_difference(Complex64::new(0.0, base[0].im), Complex64::new(0.0, base[1].im), 1.0)
        .real()
        .expect("purely imaginary arguments");
    let period = 2.0 * PI / phase_rate.abs();

    let mut taps = params.taps.clone();
    for &z in &params.period_check_taps {
        taps.push(z);
        taps.push(z + period);
    }
    taps.sort_by(f64::total_cmp);
    taps.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let scattered = segment_scatter(
        &q0,
        &taps,
        params.steps_per_unit,
        params.noise.variance(&grid),
        params.noise.bandwidth,
        &cfg.search,
        &cfg.ensemble_config(cfg.runs),
    )?;
    let results = scattered
        .into_iter()
        .map(|t| {
            let points: Vec<[f64; 2]> = t.ensemble.values().map(|v| [v[0].im, v[1].im]).collect();
            Ok(TapResult {
                z: t.z,
                phase: phase_rate * t.z,
                summary: covariance_summary(&Ensemble2D::new(points)?)?,
                reference: t.reference,
                ensemble: t.ensemble,
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;

    let mut spread: Option<(f64, usize, usize)> = None;
    for i in 0..results.len() {
        for j in i + 1..results.len() {
            if let (Some(x), Some(y)) = (results[i].summary.principal_angle, results[j].summary.principal_angle) {
                let d = angle_difference(x, y).abs();
                if spread.is_none_or(|s| d > s.0) {
                    spread = Some((d, i, j));
                }
            }
        }
    }
    let spread = match spread {
        Some((_, i, j)) => compare(cfg, params, &results[i], &results[j], 0)?,
        None => None,
    };

    let find = |z: f64| results.iter().find(|t| (t.z - z).abs() < 1e-12);
    let mut periods = Vec::new();
    for (k, &z) in params.period_check_taps.iter().enumerate() {
        if let (Some(a), Some(b)) = (find(z), find(z + period)) {
            if let Some(c) = compare(cfg, params, a, b, 1 + k as u64)? {
                periods.push(c);
            }
        }
    }
    Ok(TapOutcome {
        periodic,
        phase_rate,
        taps: results,
        spread,
        periods,
    })
}
