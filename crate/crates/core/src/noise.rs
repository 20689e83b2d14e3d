//! Eigenvalue perturbation models: segment decoupling, scaling/residual
//! noise decomposition, transceiver noise terms, and the seeded ensemble
//! runner used by all Monte Carlo experiments.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Signal, TimeGrid};
use crate::nft::{find_discrete_eigenvalues, SearchConfig};
use crate::nlse::{retained_bins, Propagator};
use crate::rng::{derive_seed, rng_from_seed, RunRng};

/// Scalar or vector summary of a set of eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GSelector {
    /// `Im λ_k` for every eigenvalue, in ascending order.
    PerEigenvalueImag,
    MinImag,
    MaxImag,
    SumImag,
}

impl GSelector {
    pub fn dimension(self, eigenvalue_count: usize) -> usize {
        match self {
            GSelector::PerEigenvalueImag => eigenvalue_count,
            _ => 1,
        }
    }

    pub fn apply(self, eigenvalues: &[Complex64]) -> Vec<f64> {
        let imag = eigenvalues.iter().map(|l| l.im);
        match self {
            GSelector::PerEigenvalueImag => imag.collect(),
            GSelector::MinImag => vec![imag.fold(f64::INFINITY, f64::min)],
            GSelector::MaxImag => vec![imag.fold(f64::NEG_INFINITY, f64::max)],
            GSelector::SumImag => vec![imag.sum()],
        }
    }
}

/// One segment's contribution to the accumulated perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSample {
    pub segment_index: usize,
    /// `g` of the noisy segment field.
    pub g_value: Vec<f64>,
    /// `g` of the noiseless field entering the same segment.
    pub reference: Vec<f64>,
    /// `g_value − reference`.
    pub epsilon: Vec<f64>,
}

impl PerturbationSample {
    pub fn new(segment_index: usize, g_value: Vec<f64>, reference: Vec<f64>) -> Self {
        let epsilon = g_value.iter().zip(&reference).map(|(g, r)| g - r).collect();
        Self {
            segment_index,
            g_value,
            reference,
            epsilon,
        }
    }
}

/// Split of a noise realization into the part along the signal and the part
/// orthogonal to it.
#[derive(Debug, Clone)]
pub struct NoiseDecomposition {
    /// Projection onto `q`; adding it rescales the signal.
    pub scaling: Signal,
    pub residual: Signal,
}

pub fn decompose_noise(q: &Signal, n: &Signal) -> Result<NoiseDecomposition> {
    q.check_same_grid(n)?;
    let qq = q.inner(q)?.re;
    if qq == 0.0 {
        return Err(Error::ZeroSignal);
    }
    let coef = n.inner(q)? / qq;
    let scaling: Vec<Complex64> = q.samples().iter().map(|x| coef * x).collect();
    let residual: Vec<Complex64> = n.samples().iter().zip(&scaling).map(|(a, b)| a - b).collect();
    Ok(NoiseDecomposition {
        scaling: Signal::from_parts_unchecked(*q.grid(), scaling),
        residual: Signal::from_parts_unchecked(*q.grid(), residual),
    })
}

/// A time-varying noise term: per-sample standard deviation after
/// filtering, and the retained fraction of the grid bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseTerm {
    pub sigma: f64,
    #[serde(default = "full_band")]
    pub bandwidth: f64,
}

fn full_band() -> f64 {
    1.0
}

impl Default for NoiseTerm {
    fn default() -> Self {
        Self {
            sigma: 0.0,
            bandwidth: 1.0,
        }
    }
}

impl NoiseTerm {
    fn validate(&self, name: &str) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::invalid(format!("{name}.sigma must be >= 0, got {}", self.sigma)));
        }
        if !(self.bandwidth > 0.0 && self.bandwidth <= 1.0) {
            return Err(Error::invalid(format!(
                "{name}.bandwidth must be in (0, 1], got {}",
                self.bandwidth
            )));
        }
        Ok(())
    }

    fn is_active(&self) -> bool {
        self.sigma > 0.0
    }

    /// Complex draw with `E|x|² = σ²` per sample.
    fn complex<R: Rng + ?Sized>(&self, p: &mut Propagator, rng: &mut R) -> Result<Signal> {
        let n = p.grid().len();
        let kept = retained_bins(n, self.bandwidth) as f64 / n as f64;
        p.noise(self.sigma * self.sigma / kept, self.bandwidth, rng)
    }

    /// Real draw with `E x² = σ²` per sample.
    fn real<R: Rng + ?Sized>(&self, p: &mut Propagator, rng: &mut R) -> Result<Vec<f64>> {
        let z = self.complex(p, rng)?;
        Ok(z.samples().iter().map(|x| x.re * std::f64::consts::SQRT_2).collect())
    }
}

/// `[A₀ + A(t)]·q·exp(2πj[B₀ + B(t)]) + C₀ + C(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransceiverNoiseSpec {
    pub a0: Complex64,
    pub a_t: NoiseTerm,
    pub b0: f64,
    pub b_t: NoiseTerm,
    pub c0: Complex64,
    pub c_t: NoiseTerm,
}

impl Default for TransceiverNoiseSpec {
    fn default() -> Self {
        Self {
            a0: Complex64::new(1.0, 0.0),
            a_t: NoiseTerm::default(),
            b0: 0.0,
            b_t: NoiseTerm::default(),
            c0: Complex64::new(0.0, 0.0),
            c_t: NoiseTerm::default(),
        }
    }
}

impl TransceiverNoiseSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, term) in [("a_t", &self.a_t), ("b_t", &self.b_t), ("c_t", &self.c_t)] {
            term.validate(name)?;
        }
        let finite = |c: Complex64| c.re.is_finite() && c.im.is_finite();
        if !(finite(self.a0) && finite(self.c0) && self.b0.is_finite()) {
            return Err(Error::invalid("transceiver constants must be finite"));
        }
        Ok(())
    }
}

pub fn apply_transceiver_noise<R: Rng + ?Sized>(
    q: &Signal,
    spec: &TransceiverNoiseSpec,
    rng: &mut R,
) -> Result<Signal> {
    let mut p = Propagator::new(*q.grid());
    apply_transceiver_noise_with(&mut p, q, spec, rng)
}

/// As [`apply_transceiver_noise`], reusing the FFT plans in `p`. Draws are
/// taken in the order A(t), B(t), C(t); inactive terms consume no randomness.
pub fn apply_transceiver_noise_with<R: Rng + ?Sized>(
    p: &mut Propagator,
    q: &Signal,
    spec: &TransceiverNoiseSpec,
    rng: &mut R,
) -> Result<Signal> {
    spec.validate()?;
    if q.grid() != p.grid() {
        return Err(Error::invalid("signal grid does not match the noise generator grid"));
    }
    let n = q.len();
    let a_t = if spec.a_t.is_active() {
        Some(spec.a_t.complex(p, rng)?)
    } else {
        None
    };
    let b_t = if spec.b_t.is_active() {
        Some(spec.b_t.real(p, rng)?)
    } else {
        None
    };
    let c_t = if spec.c_t.is_active() {
        Some(spec.c_t.complex(p, rng)?)
    } else {
        None
    };
    let constant_phase = spec.b0 != 0.0;
    let rotation = Complex64::from_polar(1.0, 2.0 * PI * spec.b0);
    let out = (0..n)
        .map(|k| {
            let mut gain = spec.a0;
            if let Some(a) = &a_t {
                gain += a.samples()[k];
            }
            let mut x = gain * q.samples()[k];
            if constant_phase {
                x *= rotation;
            }
            if let Some(b) = &b_t {
                x *= Complex64::from_polar(1.0, 2.0 * PI * b[k]);
            }
            x += spec.c0;
            if let Some(c) = &c_t {
                x += c.samples()[k];
            }
            x
        })
        .collect();
    Signal::new(*q.grid(), out)
}

/// Why a run was left out of an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExclusionReason {
    CountChanged { expected: usize, found: usize },
    Ambiguous { reference: Complex64, ratio: f64 },
    Numerical { detail: String },
}

impl std::fmt::Display for ExclusionReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExclusionReason::CountChanged { expected, found } => {
                write!(f, "eigenvalue count changed from {expected} to {found}")
            }
            ExclusionReason::Ambiguous { reference, ratio } => {
                write!(f, "ambiguous match for {reference} (distance ratio {ratio:.3})")
            }
            ExclusionReason::Numerical { detail } => write!(f, "numerical failure: {detail}"),
        }
    }
}

#[derive(Debug)]
pub enum RunFailure {
    Excluded(ExclusionReason),
    Fatal(Error),
}

impl From<Error> for RunFailure {
    fn from(e: Error) -> Self {
        match e {
            Error::NumericalBlowup { .. }
            | Error::DegenerateRoot { .. }
            | Error::NearSingular { .. }
            | Error::Range { .. } => RunFailure::Excluded(ExclusionReason::Numerical { detail: e.to_string() }),
            other => RunFailure::Fatal(other),
        }
    }
}

impl From<ExclusionReason> for RunFailure {
    fn from(r: ExclusionReason) -> Self {
        RunFailure::Excluded(r)
    }
}

/// Matches perturbed eigenvalues to the reference ones by nearest neighbour.
///
/// The result is in reference order. A reference whose nearest candidate is
/// not clearly closer than the runner-up (`best/second > ambiguity_ratio`),
/// or two references claiming the same candidate, is ambiguous.
pub fn track_eigenvalues(
    reference: &[Complex64],
    found: &[Complex64],
    ambiguity_ratio: f64,
) -> std::result::Result<Vec<Complex64>, ExclusionReason> {
    if found.len() != reference.len() {
        return Err(ExclusionReason::CountChanged {
            expected: reference.len(),
            found: found.len(),
        });
    }
    let mut taken = vec![false; found.len()];
    let mut out = Vec::with_capacity(reference.len());
    for r in reference {
        let mut dists: Vec<(f64, usize)> = found.iter().enumerate().map(|(i, f)| ((f - r).norm(), i)).collect();
        dists.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (best, idx) = dists[0];
        if let Some(&(second, _)) = dists.get(1) {
            let ratio = if second > 0.0 { best / second } else { 1.0 };
            if ratio > ambiguity_ratio {
                return Err(ExclusionReason::Ambiguous { reference: *r, ratio });
            }
        }
        if taken[idx] {
            return Err(ExclusionReason::Ambiguous {
                reference: *r,
                ratio: 1.0,
            });
        }
        taken[idx] = true;
        out.push(found[idx]);
    }
    Ok(out)
}

/// Finds the discrete spectrum of `signal` and matches it to `reference`.
pub fn tracked_spectrum(
    signal: &Signal,
    reference: &[Complex64],
    search: &SearchConfig,
    ambiguity_ratio: f64,
) -> std::result::Result<Vec<Complex64>, RunFailure> {
    let cfg = SearchConfig {
        extra_seeds: reference.to_vec(),
        compute_amplitudes: false,
        ..search.clone()
    };
    let outcome = find_discrete_eigenvalues(signal, &cfg)?;
    Ok(track_eigenvalues(
        reference,
        &outcome.spectrum.eigenvalues,
        ambiguity_ratio,
    )?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    pub runs: usize,
    pub master_seed: u64,
    /// Abort when more than this fraction of runs is excluded.
    pub max_excluded_fraction: f64,
    pub ambiguity_ratio: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            runs: 500,
            master_seed: 0,
            max_excluded_fraction: 0.05,
            ambiguity_ratio: 0.8,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::invalid("runs must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.max_excluded_fraction) {
            return Err(Error::invalid("max_excluded_fraction must be in [0, 1]"));
        }
        if !(self.ambiguity_ratio > 0.0 && self.ambiguity_ratio <= 1.0) {
            return Err(Error::invalid("ambiguity_ratio must be in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedRun {
    pub run: usize,
    pub seed: u64,
    pub reason: ExclusionReason,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExclusionAudit {
    pub total: usize,
    pub excluded: Vec<ExcludedRun>,
}

impl ExclusionAudit {
    pub fn excluded_fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.excluded.len() as f64 / self.total as f64
        }
    }

    pub fn merge(&mut self, other: ExclusionAudit) {
        self.total += other.total;
        self.excluded.extend(other.excluded);
    }
}

#[derive(Debug, Clone)]
pub struct RunRecord<T> {
    pub run: usize,
    pub seed: u64,
    pub value: T,
}

#[derive(Debug, Clone)]
pub struct Ensemble<T> {
    pub records: Vec<RunRecord<T>>,
    pub audit: ExclusionAudit,
}

impl<T> Ensemble<T> {
    pub fn values(&self) -> impl Iterator<Item = &T> {
        self.records.iter().map(|r| &r.value)
    }
}

/// Runs `body` once per run index in parallel. Run `i` gets a generator
/// seeded with `derive_seed(master_seed, stream, i)`, so results do not
/// depend on the number of worker threads.
pub fn run_ensemble<T, F>(grid: &TimeGrid, cfg: &EnsembleConfig, stream: u64, body: F) -> Result<Ensemble<T>>
where
    T: Send,
    F: Fn(&mut Propagator, &mut RunRng, usize) -> std::result::Result<T, RunFailure> + Sync,
{
    cfg.validate()?;
    let outcomes: Vec<(usize, u64, std::result::Result<T, RunFailure>)> = (0..cfg.runs)
        .into_par_iter()
        .map_init(
            || Propagator::new(*grid),
            |p, i| {
                let seed = derive_seed(cfg.master_seed, stream, i as u64);
                let mut rng = rng_from_seed(seed);
                (i, seed, body(p, &mut rng, i))
            },
        )
        .collect();

    let mut records = Vec::with_capacity(cfg.runs);
    let mut audit = ExclusionAudit {
        total: cfg.runs,
        excluded: Vec::new(),
    };
    for (run, seed, outcome) in outcomes {
        match outcome {
            Ok(value) => records.push(RunRecord { run, seed, value }),
            Err(RunFailure::Excluded(reason)) => audit.excluded.push(ExcludedRun { run, seed, reason }),
            Err(RunFailure::Fatal(e)) => return Err(e),
        }
    }
    check_exclusions(&audit, cfg.max_excluded_fraction)?;
    Ok(Ensemble { records, audit })
}

pub fn check_exclusions(audit: &ExclusionAudit, limit: f64) -> Result<()> {
    if audit.excluded_fraction() > limit {
        let reason = audit
            .excluded
            .first()
            .map(|e| format!("run {}: {}", e.run, e.reason))
            .unwrap_or_default();
        return Err(Error::ExcessExclusions {
            excluded: audit.excluded.len(),
            total: audit.total,
            limit,
            reason,
        });
    }
    Ok(())
}

/// A fiber cut into equal segments, each propagated noiselessly and then
/// hit by one lumped noise draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentChannel {
    pub z_total: f64,
    pub segments: usize,
    pub steps_per_segment: usize,
    /// Noise density ε; one segment's draw has per-sample variance
    /// `ε²·(z_total/segments)/Δt` before filtering.
    pub epsilon: f64,
    pub bandwidth: f64,
}

impl SegmentChannel {
    pub fn validate(&self) -> Result<()> {
        if !(self.z_total.is_finite() && self.z_total > 0.0) {
            return Err(Error::invalid(format!(
                "z_total must be positive, got {}",
                self.z_total
            )));
        }
        if self.segments == 0 || self.steps_per_segment == 0 {
            return Err(Error::invalid("segments and steps_per_segment must be at least 1"));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::invalid(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if !(self.bandwidth > 0.0 && self.bandwidth <= 1.0) {
            return Err(Error::invalid(format!(
                "bandwidth must be in (0, 1], got {}",
                self.bandwidth
            )));
        }
        Ok(())
    }

    pub fn segment_length(&self) -> f64 {
        self.z_total / self.segments as f64
    }

    pub fn point_noise_variance(&self, dt: f64) -> f64 {
        self.epsilon * self.epsilon * self.segment_length() / dt
    }

    /// Noiseless propagation across one segment.
    pub fn propagate_segment(&self, p: &mut Propagator, q: &Signal) -> Result<Signal> {
        let mut rng = rng_from_seed(0);
        Ok(p.propagate(
            q,
            self.segment_length(),
            &[],
            self.steps_per_segment,
            0.0,
            1.0,
            &mut rng,
        )?
        .output)
    }

    /// Noiseless fields at the end of every segment, `q̄₁ … q̄_M`.
    pub fn noiseless_trajectory(&self, p: &mut Propagator, q0: &Signal) -> Result<Vec<Signal>> {
        let mut out = Vec::with_capacity(self.segments);
        let mut q = q0.clone();
        for _ in 0..self.segments {
            q = self.propagate_segment(p, &q)?;
            out.push(q.clone());
        }
        Ok(out)
    }
}

/// Paired end-to-end and accumulated perturbations for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccumulatedRun {
    /// `g(Λ₀) + Σ_m ε_m`.
    pub approx: Vec<f64>,
    /// `g(Λ₀) + g(Λ_M) − g(Λ̄_M)`: the end-to-end perturbation added to the
    /// same baseline.
    pub direct: Vec<f64>,
    pub segments: Vec<PerturbationSample>,
}

#[derive(Debug, Clone)]
pub struct Accumulation {
    pub baseline_eigenvalues: Vec<Complex64>,
    pub g0: Vec<f64>,
    /// `g(Λ̄_m)` for m = 1..M.
    pub noiseless_g: Vec<Vec<f64>>,
    pub ensemble: Ensemble<AccumulatedRun>,
}

/// Compares the full segmented channel against the sum of independent
/// single-segment perturbations.
///
/// Each run draws one noise `n_m` per segment. The direct path propagates
/// `q_m = P(q_{m−1}) + n_m`; the approximation adds the same `n_m` to the
/// noiseless `q̄_m` and sums the resulting shifts of `g`. All shifts are
/// measured against the numerically computed noiseless spectrum at the same
/// distance, so zero noise gives `approx = direct = g(Λ₀)` exactly.
pub fn accumulate_perturbations(
    q0: &Signal,
    channel: &SegmentChannel,
    g: GSelector,
    search: &SearchConfig,
    ensemble: &EnsembleConfig,
) -> Result<Accumulation> {
    channel.validate()?;
    let grid = *q0.grid();
    let mut p = Propagator::new(grid);
    let baseline = find_discrete_eigenvalues(q0, search)?.spectrum.eigenvalues;
    if baseline.is_empty() {
        return Err(Error::invalid("input signal has no discrete eigenvalues"));
    }
    let g0 = g.apply(&baseline);
    let trajectory = channel.noiseless_trajectory(&mut p, q0)?;
    let mut noiseless = Vec::with_capacity(trajectory.len());
    for (m, q) in trajectory.iter().enumerate() {
        let eigs = tracked_spectrum(q, &baseline, search, ensemble.ambiguity_ratio)
            .map_err(|f| noiseless_failure(f, m + 1))?;
        noiseless.push(eigs);
    }
    let noiseless_g: Vec<Vec<f64>> = noiseless.iter().map(|e| g.apply(e)).collect();
    let variance = channel.point_noise_variance(grid.dt());

    let ens = run_ensemble(&grid, ensemble, 0, |p, rng, _| {
        let mut draws = Vec::with_capacity(channel.segments);
        for _ in 0..channel.segments {
            draws.push(p.noise(variance, channel.bandwidth, rng)?);
        }
        let mut segments = Vec::with_capacity(channel.segments);
        let mut approx = g0.clone();
        for (m, n) in draws.iter().enumerate() {
            let noisy = trajectory[m].add(n)?;
            let eigs = tracked_spectrum(&noisy, &noiseless[m], search, ensemble.ambiguity_ratio)?;
            let sample = PerturbationSample::new(m + 1, g.apply(&eigs), noiseless_g[m].clone());
            approx.iter_mut().zip(&sample.epsilon).for_each(|(a, e)| *a += e);
            segments.push(sample);
        }
        let mut q = q0.clone();
        for n in &draws {
            q = channel.propagate_segment(p, &q)?.add(n)?;
        }
        let last = noiseless.last().expect("at least one segment");
        let end = g.apply(&tracked_spectrum(&q, last, search, ensemble.ambiguity_ratio)?);
        let reference = noiseless_g.last().expect("at least one segment");
        let direct = g0
            .iter()
            .zip(end.iter().zip(reference))
            .map(|(b, (e, r))| b + (e - r))
            .collect();
        Ok(AccumulatedRun {
            approx,
            direct,
            segments,
        })
    })?;

    Ok(Accumulation {
        baseline_eigenvalues: baseline,
        g0,
        noiseless_g,
        ensemble: ens,
    })
}

fn noiseless_failure(f: RunFailure, segment: usize) -> Error {
    match f {
        RunFailure::Fatal(e) => e,
        RunFailure::Excluded(r) => Error::IllConditioned(format!("noiseless field after segment {segment}: {r}")),
    }
}

/// Point-noise ensemble around one noiseless field.
#[derive(Debug, Clone)]
pub struct TapEnsemble {
    pub z: f64,
    pub reference: Vec<Complex64>,
    /// Tracked eigenvalues per run, in reference order.
    pub ensemble: Ensemble<Vec<Complex64>>,
}

/// For each tap distance, adds fresh point noise of the given pre-filter
/// variance to the noiselessly propagated field and collects the perturbed
/// eigenvalues. Tap `i` uses seed stream `i`.
pub fn segment_scatter(
    q0: &Signal,
    taps: &[f64],
    steps_per_unit: usize,
    noise_variance: f64,
    bandwidth: f64,
    search: &SearchConfig,
    ensemble: &EnsembleConfig,
) -> Result<Vec<TapEnsemble>> {
    let fields = noiseless_taps(q0, taps, steps_per_unit)?;
    let baseline = find_discrete_eigenvalues(q0, search)?.spectrum.eigenvalues;
    if baseline.is_empty() {
        return Err(Error::invalid("input signal has no discrete eigenvalues"));
    }
    let mut out = Vec::with_capacity(taps.len());
    for (i, (z, field)) in taps.iter().zip(&fields).enumerate() {
        let reference = tracked_spectrum(field, &baseline, search, ensemble.ambiguity_ratio).map_err(|f| match f {
            RunFailure::Fatal(e) => e,
            RunFailure::Excluded(r) => Error::IllConditioned(format!("noiseless field at z = {z}: {r}")),
        })?;
        let ens = run_ensemble(q0.grid(), ensemble, i as u64, |p, rng, _| {
            let n = p.noise(noise_variance, bandwidth, rng)?;
            tracked_spectrum(&field.add(&n)?, &reference, search, ensemble.ambiguity_ratio)
        })?;
        out.push(TapEnsemble {
            z: *z,
            reference,
            ensemble: ens,
        });
    }
    Ok(out)
}

/// Noiseless fields at the given distances with a step of at most
/// `1/steps_per_unit`.
pub fn noiseless_taps(q0: &Signal, taps: &[f64], steps_per_unit: usize) -> Result<Vec<Signal>> {
    if steps_per_unit == 0 {
        return Err(Error::invalid("steps_per_unit must be at least 1"));
    }
    let z_max = taps.iter().copied().fold(0.0, f64::max);
    if z_max == 0.0 {
        return Ok(taps.iter().map(|_| q0.clone()).collect());
    }
    let steps = ((z_max * steps_per_unit as f64).ceil() as usize).max(1);
    let mut p = Propagator::new(*q0.grid());
    let mut rng = rng_from_seed(0);
    Ok(p.propagate(q0, z_max, taps, steps, 0.0, 1.0, &mut rng)?.taps)
}

/// Circular complex Gaussian samples with `E|x|² = variance`, no filtering.
pub fn white_noise<R: Rng + ?Sized>(grid: &TimeGrid, variance: f64, rng: &mut R) -> Signal {
    let sd = (variance / 2.0).sqrt();
    let samples = (0..grid.len())
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * sd, im * sd)
        })
        .collect();
    Signal::from_parts_unchecked(*grid, samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::soliton::sech_pulse;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn grid() -> TimeGrid {
        TimeGrid::symmetric(16.0, 1024).unwrap()
    }

    #[test]
    fn selector_values() {
        let eigs = [c(0.0, 0.5), c(0.1, 1.5)];
        assert_eq!(GSelector::PerEigenvalueImag.apply(&eigs), vec![0.5, 1.5]);
        assert_eq!(GSelector::MinImag.apply(&eigs), vec![0.5]);
        assert_eq!(GSelector::MaxImag.apply(&eigs), vec![1.5]);
        assert_eq!(GSelector::SumImag.apply(&eigs), vec![2.0]);
        assert_eq!(GSelector::PerEigenvalueImag.dimension(3), 3);
        assert_eq!(GSelector::SumImag.dimension(3), 1);
    }

    #[test]
    fn decomposition_of_parallel_noise() {
        let q = sech_pulse(1.0, &grid()).unwrap();
        let n = q.scale(c(0.1, 0.0));
        let d = decompose_noise(&q, &n).unwrap();
        assert!(d.scaling.max_abs_diff(&n).unwrap() < 1e-15);
        assert!(d.residual.max_abs() < 1e-15);
    }

    #[test]
    fn decomposition_of_orthogonal_noise() {
        // Odd noise on an even pulse. The samples are symmetric about
        // t = −Δt/2, so both functions are centred there.
        let centre = -grid().dt() / 2.0;
        let q = Signal::from_fn(grid(), |t| c(1.0 / (t - centre).cosh(), 0.0)).unwrap();
        let n = Signal::from_fn(grid(), |t| c((t - centre).tanh() / (t - centre).cosh(), 0.0)).unwrap();
        let d = decompose_noise(&q, &n).unwrap();
        assert!(d.scaling.max_abs() < 1e-12, "{}", d.scaling.max_abs());
        assert!(d.residual.max_abs_diff(&n).unwrap() < 1e-12);
    }

    #[test]
    fn decomposition_is_orthogonal_and_complete() {
        let q = sech_pulse(2.0, &grid()).unwrap();
        let n = white_noise(&grid(), 0.01, &mut rng_from_seed(1));
        let d = decompose_noise(&q, &n).unwrap();
        let cross = d.scaling.inner(&d.residual).unwrap().norm();
        let scale = (d.scaling.energy() * d.residual.energy()).sqrt();
        assert!(cross / scale < 1e-12);
        let back = d.scaling.add(&d.residual).unwrap();
        assert!(back.max_abs_diff(&n).unwrap() <= 4.0 * f64::EPSILON * n.max_abs());
    }

    #[test]
    fn decomposition_needs_nonzero_signal() {
        let q = Signal::zeros(grid());
        let n = white_noise(&grid(), 0.01, &mut rng_from_seed(1));
        assert!(matches!(decompose_noise(&q, &n), Err(Error::ZeroSignal)));
    }

    #[test]
    fn identity_transceiver() {
        let q = sech_pulse(2.0, &grid()).unwrap();
        let out = apply_transceiver_noise(&q, &TransceiverNoiseSpec::default(), &mut rng_from_seed(4)).unwrap();
        assert_eq!(out.samples(), q.samples());
    }

    #[test]
    fn transceiver_terms_have_requested_power() {
        let q = sech_pulse(1.0, &grid()).unwrap();
        let spec = TransceiverNoiseSpec {
            a0: c(0.0, 0.0),
            c_t: NoiseTerm {
                sigma: 0.1,
                bandwidth: 0.3,
            },
            ..TransceiverNoiseSpec::default()
        };
        let mut rng = rng_from_seed(5);
        let mut power = 0.0;
        for _ in 0..100 {
            let out = apply_transceiver_noise(&q, &spec, &mut rng).unwrap();
            power += out.samples().iter().map(|x| x.norm_sqr()).sum::<f64>() / 1024.0;
        }
        assert!((power / 100.0 / 0.01 - 1.0).abs() < 0.05, "{}", power / 100.0);

        let spec = TransceiverNoiseSpec {
            b_t: NoiseTerm {
                sigma: 0.05,
                bandwidth: 1.0,
            },
            ..TransceiverNoiseSpec::default()
        };
        let out = apply_transceiver_noise(&q, &spec, &mut rng).unwrap();
        // Pure phase noise keeps |q|.
        for (a, b) in out.samples().iter().zip(q.samples()) {
            assert!((a.norm() - b.norm()).abs() < 1e-14);
        }
        assert!(TransceiverNoiseSpec {
            a_t: NoiseTerm {
                sigma: -1.0,
                bandwidth: 1.0
            },
            ..TransceiverNoiseSpec::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn tracking_rules() {
        let reference = [c(0.0, 0.5), c(0.0, 1.5)];
        let found = [c(0.01, 1.49), c(0.0, 0.52)];
        assert_eq!(
            track_eigenvalues(&reference, &found, 0.8).unwrap(),
            vec![c(0.0, 0.52), c(0.01, 1.49)]
        );
        assert!(matches!(
            track_eigenvalues(&reference, &found[..1], 0.8),
            Err(ExclusionReason::CountChanged { expected: 2, found: 1 })
        ));
        // Halfway between the two candidates.
        let found = [c(0.0, 1.0), c(0.0, 0.0001)];
        assert!(matches!(
            track_eigenvalues(&[c(0.0, 0.5), c(0.0, 1.5)], &found, 0.8),
            Err(ExclusionReason::Ambiguous { .. })
        ));
        // Single eigenvalue: nothing to be confused with.
        assert_eq!(
            track_eigenvalues(&[c(0.0, 0.5)], &[c(0.0, 0.9)], 0.8).unwrap(),
            vec![c(0.0, 0.9)]
        );
    }

    #[test]
    fn ensemble_is_independent_of_thread_count() {
        let cfg = EnsembleConfig {
            runs: 64,
            master_seed: 11,
            ..EnsembleConfig::default()
        };
        let body = |p: &mut Propagator, rng: &mut RunRng, _: usize| -> std::result::Result<f64, RunFailure> {
            Ok(p.noise(1.0, 0.5, rng)?.energy())
        };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| run_ensemble(&grid(), &cfg, 3, body)).unwrap();
        let b = four.install(|| run_ensemble(&grid(), &cfg, 3, body)).unwrap();
        let va: Vec<f64> = a.values().copied().collect();
        let vb: Vec<f64> = b.values().copied().collect();
        assert_eq!(va, vb);
    }

    #[test]
    fn exclusions_are_audited_and_capped() {
        let cfg = EnsembleConfig {
            runs: 100,
            ..EnsembleConfig::default()
        };
        let body = |limit: usize| {
            move |_: &mut Propagator, _: &mut RunRng, i: usize| -> std::result::Result<usize, RunFailure> {
                if i < limit {
                    Err(ExclusionReason::CountChanged { expected: 2, found: 3 }.into())
                } else {
                    Ok(i)
                }
            }
        };
        let ok = run_ensemble(&grid(), &cfg, 0, body(5)).unwrap();
        assert_eq!(ok.records.len(), 95);
        assert_eq!(ok.audit.excluded.len(), 5);
        let err = run_ensemble(&grid(), &cfg, 0, body(6)).unwrap_err();
        assert!(matches!(
            err,
            Error::ExcessExclusions {
                excluded: 6,
                total: 100,
                ..
            }
        ));
    }

    #[test]
    fn zero_noise_accumulation_is_exact() {
        let q = sech_pulse(2.0, &grid()).unwrap();
        let channel = SegmentChannel {
            z_total: 0.2,
            segments: 2,
            steps_per_segment: 10,
            epsilon: 0.0,
            bandwidth: 1.0,
        };
        let cfg = EnsembleConfig {
            runs: 2,
            ..EnsembleConfig::default()
        };
        let acc = accumulate_perturbations(
            &q,
            &channel,
            GSelector::PerEigenvalueImag,
            &SearchConfig::default(),
            &cfg,
        )
        .unwrap();
        for run in acc.ensemble.values() {
            assert_eq!(run.approx, acc.g0);
            assert_eq!(run.direct, acc.g0);
        }
    }

    #[test]
    fn tap_at_origin_is_point_noise_on_input() {
        let q = sech_pulse(1.0, &grid()).unwrap();
        let fields = noiseless_taps(&q, &[0.0, 0.3], 100).unwrap();
        assert_eq!(fields[0].samples(), q.samples());
        let cfg = EnsembleConfig {
            runs: 4,
            master_seed: 2,
            ..EnsembleConfig::default()
        };
        let taps = segment_scatter(&q, &[0.0], 100, 1e-4, 1.0, &SearchConfig::default(), &cfg).unwrap();
        // Same seeds, drawn directly on q0.
        let mut p = Propagator::new(grid());
        for rec in &taps[0].ensemble.records {
            let mut rng = rng_from_seed(rec.seed);
            let n = p.noise(1e-4, 1.0, &mut rng).unwrap();
            let direct =
                tracked_spectrum(&q.add(&n).unwrap(), &taps[0].reference, &SearchConfig::default(), 0.8).unwrap();
            assert_eq!(direct, rec.value);
        }
    }
}
