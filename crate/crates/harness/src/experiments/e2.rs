//! Constellation packing: error rates of Euclidean and Mahalanobis decoding
//! on a sparse and a dense grid of centred two-soliton symbols.

use nfteig_core::noise::{run_ensemble, tracked_spectrum};
use nfteig_core::rng::run_rng;
use nfteig_core::stats::{covariance_summary, ml_classify, Classification, DecisionMetric, Ensemble2D};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{imag_pair, reference_eigenvalues, through_channel};
use crate::config::{ConstellationNoise, E2Params, E2Thresholds, ExperimentConfig, PulseSpec};
use crate::error::HarnessError;
use crate::output::{num, Artifacts, CaseError};

/// Stream offset of the dense constellation's points.
const DENSE_STREAM: u64 = 1000;

#[derive(Debug, Clone)]
pub struct Constellation {
    pub name: &'static str,
    pub shape: [usize; 2],
    /// Row-major over `Im λ₁`, then `Im λ₂`.
    pub points: Vec<[f64; 2]>,
    pub received: Vec<[f64; 2]>,
    pub truth: Vec<usize>,
    /// Within-class covariance pooled over all points.
    pub noise_cov: [[f64; 2]; 2],
    pub euclidean: Classification,
    pub mahalanobis: Classification,
}

impl Constellation {
    pub fn noise_correlation(&self) -> f64 {
        let c = self.noise_cov;
        c[0][1] / (c[0][0] * c[1][1]).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct E2Outcome {
    pub sparse: Constellation,
    pub dense: Constellation,
    pub errors: Vec<CaseError>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PackingReport {
    pub sparse_bits: f64,
    pub dense_bits: f64,
    pub bit_increase: f64,
    pub dense_euclidean_error: f64,
    pub dense_mahalanobis_error: f64,
    /// `None` when Mahalanobis decoding made no errors.
    pub error_ratio: Option<f64>,
    pub noise_correlation: f64,
}

impl E2Outcome {
    pub fn report(&self) -> PackingReport {
        let (e, m) = (self.dense.euclidean.error_rate, self.dense.mahalanobis.error_rate);
        PackingReport {
            sparse_bits: self.sparse.euclidean.bits_per_symbol,
            dense_bits: self.dense.euclidean.bits_per_symbol,
            bit_increase: self.dense.euclidean.bits_per_symbol / self.sparse.euclidean.bits_per_symbol - 1.0,
            dense_euclidean_error: e,
            dense_mahalanobis_error: m,
            error_ratio: (m > 0.0).then(|| e / m),
            noise_correlation: self.dense.noise_correlation(),
        }
    }

    pub fn artifacts(&self, th: &E2Thresholds) -> Artifacts {
        let mut a = Artifacts::with_tables(
            &[
                "constellation",
                "run",
                "symbol",
                "im_lambda1",
                "im_lambda2",
                "euclidean",
                "mahalanobis",
            ],
            &[
                "constellation",
                "points",
                "bits_per_symbol",
                "euclidean_error_rate",
                "mahalanobis_error_rate",
                "noise_var_im_lambda1",
                "noise_var_im_lambda2",
                "noise_correlation",
            ],
        );
        a.errors.extend(self.errors.iter().cloned());
        for c in [&self.sparse, &self.dense] {
            for (k, (r, t)) in c.received.iter().zip(&c.truth).enumerate() {
                a.runs.push(vec![
                    c.name.to_string(),
                    k.to_string(),
                    t.to_string(),
                    num(r[0]),
                    num(r[1]),
                    c.euclidean.assignments[k].to_string(),
                    c.mahalanobis.assignments[k].to_string(),
                ]);
            }
            a.summary.push(vec![
                c.name.to_string(),
                c.points.len().to_string(),
                num(c.euclidean.bits_per_symbol),
                num(c.euclidean.error_rate),
                num(c.mahalanobis.error_rate),
                num(c.noise_cov[0][0]),
                num(c.noise_cov[1][1]),
                num(c.noise_correlation()),
            ]);
            for p in &c.points {
                a.plot_point(&format!("{} constellation", c.name), p[0], p[1]);
            }
            for r in c.received.iter().take(2000) {
                a.plot_point(&format!("{} received", c.name), r[0], r[1]);
            }
        }
        let r = self.report();
        a.summary_value("packing", r);
        a.check(
            "bits per symbol",
            (r.sparse_bits - 24f64.log2()).abs() < 1e-12 && (r.dense_bits - 84f64.log2()).abs() < 1e-12,
            format!(
                "sparse {:.4}, dense {:.4}, increase {:.1}%",
                r.sparse_bits,
                r.dense_bits,
                100.0 * r.bit_increase
            ),
        );
        a.check(
            "noise correlation",
            r.noise_correlation >= th.min_noise_correlation,
            format!("{:.3} (required >= {})", r.noise_correlation, th.min_noise_correlation),
        );
        a.check(
            "mahalanobis beats euclidean on the dense grid",
            r.error_ratio
                .map_or(r.dense_euclidean_error > 0.0, |x| x > th.min_error_ratio),
            format!(
                "euclidean {:.4}, mahalanobis {:.4} (required ratio > {})",
                r.dense_euclidean_error, r.dense_mahalanobis_error, th.min_error_ratio
            ),
        );
        a
    }
}

pub fn linspace(range: [f64; 2], n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| range[0] + (range[1] - range[0]) * i as f64 / (n - 1) as f64)
        .collect()
}

fn grid_points(params: &E2Params, shape: [usize; 2]) -> Vec<[f64; 2]> {
    let l2 = linspace(params.lambda2_range, shape[1]);
    linspace(params.lambda1_range, shape[0])
        .into_iter()
        .flat_map(|x| l2.iter().map(move |&y| [x, y]))
        .collect()
}

struct Draws {
    points: Vec<[f64; 2]>,
    received: Vec<[f64; 2]>,
    truth: Vec<usize>,
}

fn pooled_covariance(d: &Draws) -> Result<[[f64; 2]; 2], HarnessError> {
    let deviations: Vec<[f64; 2]> = d
        .received
        .iter()
        .zip(&d.truth)
        .map(|(r, &t)| [r[0] - d.points[t][0], r[1] - d.points[t][1]])
        .collect();
    Ok(covariance_summary(&Ensemble2D::new(deviations)?)?.cov)
}

fn gaussian(cfg: &ExperimentConfig, points: Vec<[f64; 2]>, stream0: u64, sigma: f64, rho: f64) -> Draws {
    let mut received = Vec::with_capacity(points.len() * cfg.runs);
    let mut truth = Vec::with_capacity(points.len() * cfg.runs);
    let tail = (1.0 - rho * rho).sqrt();
    for (i, p) in points.iter().enumerate() {
        for r in 0..cfg.runs {
            let mut rng = run_rng(cfg.seed, stream0 + i as u64, r as u64);
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            received.push([p[0] + sigma * z1, p[1] + sigma * (rho * z1 + tail * z2)]);
            truth.push(i);
        }
    }
    Draws {
        points,
        received,
        truth,
    }
}

/// Propagates every symbol; the constellation is the noiseless spectrum of
/// the synthesized pulses.
fn channel(
    cfg: &ExperimentConfig,
    nominal: Vec<[f64; 2]>,
    stream0: u64,
    ch: &crate::config::ChannelSpec,
    errors: &mut Vec<CaseError>,
) -> Result<Draws, HarnessError> {
    let grid = cfg.grid.build()?;
    let ens_cfg = cfg.ensemble_config(cfg.runs);
    let mut points = Vec::with_capacity(nominal.len());
    let mut received = Vec::new();
    let mut truth = Vec::new();
    for (i, p) in nominal.iter().enumerate() {
        let q0 = PulseSpec::centered(p).build(&grid, "params")?;
        let reference = reference_eigenvalues(&q0, &cfg.search)?;
        if reference.len() != 2 {
            return Err(HarnessError::config(
                "params",
                format!(
                    "symbol ({}j, {}j) resolves to {} eigenvalues",
                    p[0],
                    p[1],
                    reference.len()
                ),
            ));
        }
        let ens = run_ensemble(&grid, &ens_cfg, stream0 + i as u64, |prop, rng, _| {
            let out = through_channel(prop, &q0, ch, rng)?;
            Ok(imag_pair(
                &tracked_spectrum(&out, &reference, &cfg.search, ens_cfg.ambiguity_ratio)?,
                0,
                1,
            ))
        });
        match ens {
            Ok(ens) => {
                received.extend(ens.values().copied());
                truth.extend(std::iter::repeat_n(i, ens.records.len()));
            }
            Err(e) => errors.push(CaseError::new(&format!("symbol {i}"), &e.into())),
        }
        points.push(imag_pair(&reference, 0, 1));
    }
    Ok(Draws {
        points,
        received,
        truth,
    })
}

fn decode(
    name: &'static str,
    shape: [usize; 2],
    d: Draws,
    metric_cov: [[f64; 2]; 2],
) -> Result<Constellation, HarnessError> {
    let noise_cov = pooled_covariance(&d)?;
    let euclidean = ml_classify(&d.received, &d.truth, &d.points, DecisionMetric::Euclidean)?;
    let mahalanobis = ml_classify(
        &d.received,
        &d.truth,
        &d.points,
        DecisionMetric::Mahalanobis(metric_cov),
    )?;
    Ok(Constellation {
        name,
        shape,
        points: d.points,
        received: d.received,
        truth: d.truth,
        noise_cov,
        euclidean,
        mahalanobis,
    })
}

pub fn run(cfg: &ExperimentConfig, params: &E2Params) -> Result<E2Outcome, HarnessError> {
    let sparse_nominal = grid_points(params, params.sparse_shape);
    let dense_nominal = grid_points(params, params.dense_shape);
    let mut errors = Vec::new();
    let (sparse, dense, sparse_metric, dense_metric) = match &params.noise {
        ConstellationNoise::Gaussian { sigma, rho } => {
            let cov = [
                [sigma * sigma, rho * sigma * sigma],
                [rho * sigma * sigma, sigma * sigma],
            ];
            (
                gaussian(cfg, sparse_nominal, 0, *sigma, *rho),
                gaussian(cfg, dense_nominal, DENSE_STREAM, *sigma, *rho),
                cov,
                cov,
            )
        }
        ConstellationNoise::Channel(ch) => {
            let sparse = channel(cfg, sparse_nominal, 0, ch, &mut errors)?;
            let dense = channel(cfg, dense_nominal, DENSE_STREAM, ch, &mut errors)?;
            // Each decoder uses the noise covariance learned on the other
            // constellation, so the metric is not fitted to its own test data.
            let (cs, cd) = (pooled_covariance(&sparse)?, pooled_covariance(&dense)?);
            (sparse, dense, cd, cs)
        }
    };
    Ok(E2Outcome {
        sparse: decode("sparse", params.sparse_shape, sparse, sparse_metric)?,
        dense: decode("dense", params.dense_shape, dense, dense_metric)?,
        errors,
    })
}
