//! The experiment catalog. Each experiment computes a typed outcome and
//! renders it into an [`Artifacts`] set.

pub mod e1;
pub mod e10;
pub mod e2;
pub mod e3;
pub mod e4;
pub mod e6;
pub mod e7;
pub mod e8;
pub mod e9;

use nfteig_core::nft::{find_discrete_eigenvalues, SearchConfig};
use nfteig_core::nlse::Propagator;
use nfteig_core::noise::RunFailure;
use nfteig_core::rng::RunRng;
use nfteig_core::stats::{covariance_summary, CovarianceSummary, Ensemble2D};
use nfteig_core::{Complex64, Signal, TimeGrid};

use crate::config::{ChannelSpec, ExperimentConfig, ExperimentSpec, PointNoiseSpec};
use crate::error::HarnessError;
use crate::output::Artifacts;

/// Runs the configured experiment without touching the filesystem.
pub fn execute(cfg: &ExperimentConfig) -> Result<Artifacts, HarnessError> {
    match &cfg.spec {
        ExperimentSpec::E1 { params, thresholds } => Ok(e1::run(cfg, params)?.artifacts(thresholds)),
        ExperimentSpec::E2 { params, thresholds } => Ok(e2::run(cfg, params)?.artifacts(thresholds)),
        ExperimentSpec::E3 { params, thresholds } => Ok(e3::run(cfg, params)?.artifacts(thresholds)),
        ExperimentSpec::E4 { params } => Ok(e4::run(cfg, params, false)?.artifacts()),
        ExperimentSpec::E5 { params } => Ok(e4::run(cfg, params, true)?.artifacts()),
        ExperimentSpec::E6 { params, thresholds } => Ok(e6::run(cfg, params)?.artifacts(thresholds)),
        ExperimentSpec::E7 { params, thresholds } => Ok(e7::run(cfg, params)?.artifacts(thresholds)),
        ExperimentSpec::E8 { params } => Ok(e8::run(cfg, params)?.artifacts()),
        ExperimentSpec::E9 { params, thresholds } => Ok(e9::run(cfg, params)?.artifacts(thresholds)),
        ExperimentSpec::E10 { params } => Ok(e10::run(cfg, params)?.artifacts()),
    }
}

/// Discrete eigenvalues of a noiseless input, sorted by `Im λ`.
pub fn reference_eigenvalues(q: &Signal, search: &SearchConfig) -> Result<Vec<Complex64>, HarnessError> {
    let eigs = find_discrete_eigenvalues(q, search)?.spectrum.eigenvalues;
    if eigs.is_empty() {
        return Err(HarnessError::config(
            "params",
            "input pulse has no discrete eigenvalues in the search box",
        ));
    }
    Ok(eigs)
}

/// Propagates `q0` through a noisy fiber.
pub fn through_channel(
    p: &mut Propagator,
    q0: &Signal,
    ch: &ChannelSpec,
    rng: &mut RunRng,
) -> Result<Signal, RunFailure> {
    Ok(p.propagate(q0, ch.z, &[], ch.steps(), ch.epsilon, ch.bandwidth, rng)?
        .output)
}

/// One draw of lumped segment noise.
pub fn point_noise(
    p: &mut Propagator,
    spec: &PointNoiseSpec,
    grid: &TimeGrid,
    rng: &mut RunRng,
) -> Result<Signal, RunFailure> {
    Ok(p.noise(spec.variance(grid), spec.bandwidth, rng)?)
}

pub fn imag_pair(eigs: &[Complex64], i: usize, j: usize) -> [f64; 2] {
    [eigs[i].im, eigs[j].im]
}

pub fn summarize(points: Vec<[f64; 2]>) -> Option<CovarianceSummary> {
    Ensemble2D::new(points).ok().and_then(|e| covariance_summary(&e).ok())
}

/// Number of adjacent pairs of `seq` that break the expected order.
pub fn inversions(seq: &[f64], increasing: bool) -> usize {
    seq.windows(2)
        .filter(|w| if increasing { w[1] < w[0] } else { w[1] > w[0] })
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inversion_counts() {
        assert_eq!(inversions(&[3.0, 2.0, 2.0, 1.0], false), 0);
        assert_eq!(inversions(&[3.0, 2.5, 2.7, 1.0], false), 1);
        assert_eq!(inversions(&[1.0, 2.0, 1.5, 1.4], true), 2);
    }

    #[test]
    fn linspace_hits_both_ends() {
        let x = e2::linspace([0.9, 1.02], 6);
        assert_eq!(x.len(), 6);
        assert_eq!(x[0], 0.9);
        assert!((x[5] - 1.02).abs() < 1e-15);
        assert!((x[1] - 0.924).abs() < 1e-15);
    }
}
