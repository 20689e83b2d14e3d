//! Experiment configuration files.
//!
//! A config is one TOML document. Common settings live at the top level;
//! experiment-specific settings live under `[params]` and `[thresholds]`
//! and are checked against the schema of the chosen `experiment_id`.

use std::fmt;
use std::path::{Path, PathBuf};

use nfteig_core::nft::SearchConfig;
use nfteig_core::noise::{EnsembleConfig, GSelector};
use nfteig_core::soliton::{darboux_synthesize, sech_pulse, SolitonPrescription, TAIL_LEAK_THRESHOLD};
use nfteig_core::{Complex64, Signal, TimeGrid};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExperimentId {
    E1,
    E2,
    E3,
    E4,
    E5,
    E6,
    E7,
    E8,
    E9,
    E10,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 10] = [
        ExperimentId::E1,
        ExperimentId::E2,
        ExperimentId::E3,
        ExperimentId::E4,
        ExperimentId::E5,
        ExperimentId::E6,
        ExperimentId::E7,
        ExperimentId::E8,
        ExperimentId::E9,
        ExperimentId::E10,
    ];
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub half_width: f64,
    pub samples: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            half_width: 16.0,
            samples: 1024,
        }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<TimeGrid, HarnessError> {
        TimeGrid::symmetric(self.half_width, self.samples).map_err(|e| HarnessError::config("grid", e.to_string()))
    }
}

/// Exclusion policy shared by every ensemble of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleOptions {
    pub max_excluded_fraction: f64,
    pub ambiguity_ratio: f64,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        let d = EnsembleConfig::default();
        Self {
            max_excluded_fraction: d.max_excluded_fraction,
            ambiguity_ratio: d.ambiguity_ratio,
        }
    }
}

/// Input pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PulseSpec {
    /// `amplitude·sech(t)`.
    Sech { amplitude: f64 },
    /// Darboux multi-soliton with purely imaginary eigenvalues `j·imag[k]`,
    /// all centred at `t = 0`.
    Centered { imag: Vec<f64> },
    /// Darboux multi-soliton with explicit eigenvalues `[re, im]` and
    /// spectral amplitudes `[re, im]`.
    Prescribed {
        eigenvalues: Vec<[f64; 2]>,
        amplitudes: Vec<[f64; 2]>,
    },
}

impl PulseSpec {
    pub fn centered(imag: &[f64]) -> Self {
        PulseSpec::Centered { imag: imag.to_vec() }
    }

    pub fn build(&self, grid: &TimeGrid, path: &str) -> Result<Signal, HarnessError> {
        let bad = |e: nfteig_core::Error| HarnessError::config(path, e.to_string());
        let prescription = match self {
            PulseSpec::Sech { amplitude } => return sech_pulse(*amplitude, grid).map_err(bad),
            PulseSpec::Centered { imag } => {
                SolitonPrescription::centered(imag.iter().map(|&y| Complex64::new(0.0, y)).collect()).map_err(bad)?
            }
            PulseSpec::Prescribed {
                eigenvalues,
                amplitudes,
            } => {
                let c = |v: &Vec<[f64; 2]>| v.iter().map(|p| Complex64::new(p[0], p[1])).collect();
                SolitonPrescription::new(c(eigenvalues), c(amplitudes)).map_err(bad)?
            }
        };
        let synth = darboux_synthesize(&prescription, grid);
        if synth.tail_leak {
            return Err(HarnessError::config(
                path,
                format!(
                    "pulse does not decay inside the window: edge amplitude {:e} exceeds {TAIL_LEAK_THRESHOLD:e}",
                    synth.edge_amplitude
                ),
            ));
        }
        Ok(synth.signal)
    }
}

/// Distributed noise along a fiber of normalized length `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub z: f64,
    pub epsilon: f64,
    #[serde(default = "default_steps_per_unit")]
    pub steps_per_unit: usize,
    #[serde(default = "full_band")]
    pub bandwidth: f64,
}

impl ChannelSpec {
    pub fn steps(&self) -> usize {
        ((self.z * self.steps_per_unit as f64).ceil() as usize).max(1)
    }

    fn validate(&self, path: &str) -> Result<(), HarnessError> {
        positive(self.z, &format!("{path}.z"))?;
        non_negative(self.epsilon, &format!("{path}.epsilon"))?;
        bandwidth(self.bandwidth, &format!("{path}.bandwidth"))?;
        at_least_one(self.steps_per_unit, &format!("{path}.steps_per_unit"))
    }
}

/// One segment's worth of lumped noise: pre-filter per-sample variance
/// `ε²·segment_length/Δt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointNoiseSpec {
    pub epsilon: f64,
    pub segment_length: f64,
    #[serde(default = "full_band")]
    pub bandwidth: f64,
}

impl PointNoiseSpec {
    pub fn variance(&self, grid: &TimeGrid) -> f64 {
        self.epsilon * self.epsilon * self.segment_length / grid.dt()
    }

    fn validate(&self, path: &str) -> Result<(), HarnessError> {
        non_negative(self.epsilon, &format!("{path}.epsilon"))?;
        positive(self.segment_length, &format!("{path}.segment_length"))?;
        bandwidth(self.bandwidth, &format!("{path}.bandwidth"))
    }
}

fn default_steps_per_unit() -> usize {
    400
}

fn full_band() -> f64 {
    1.0
}

fn default_runs() -> usize {
    500
}

fn default_resamples() -> usize {
    1000
}

fn default_confidence() -> f64 {
    0.95
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapSpec {
    #[serde(default = "default_resamples")]
    pub resamples: usize,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
}

impl Default for BootstrapSpec {
    fn default() -> Self {
        Self {
            resamples: default_resamples(),
            confidence: default_confidence(),
        }
    }
}

impl BootstrapSpec {
    fn validate(&self, path: &str) -> Result<(), HarnessError> {
        if self.resamples < 10 {
            return Err(HarnessError::config(format!("{path}.resamples"), "must be at least 10"));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(HarnessError::config(format!("{path}.confidence"), "must be in (0, 1)"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Per-experiment parameters.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct E1Params {
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub channel: ChannelSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct E1Thresholds {
    pub require_positive: bool,
    /// Adjacent pairs allowed to break the expected order along each row
    /// (fixed λ₁) and each column (fixed λ₂).
    pub max_inversions_per_line: usize,
}

impl Default for E1Thresholds {
    fn default() -> Self {
        Self {
            require_positive: true,
            max_inversions_per_line: 1,
        }
    }
}

/// Received-eigenvalue noise for the constellation study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ConstellationNoise {
    /// Synthetic bivariate Gaussian with standard deviation `sigma` per axis
    /// and correlation `rho`.
    Gaussian { sigma: f64, rho: f64 },
    /// Propagate every constellation pulse through a noisy fiber.
    Channel(ChannelSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct E2Params {
    /// Inclusive `Im λ₁` range shared by both constellations.
    pub lambda1_range: [f64; 2],
    pub lambda2_range: [f64; 2],
    /// Points per axis `[λ₁, λ₂]`.
    pub sparse_shape: [usize; 2],
    pub dense_shape: [usize; 2],
    pub noise: ConstellationNoise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct E2Thresholds {
    /// Euclidean error rate over Mahalanobis error rate on the dense grid.
    pub min_error_ratio: f64,
    pub min_noise_correlation: f64,
}

impl Default for E2Thresholds {
    fn default() -> Self {
        Self {
            min_error_ratio: 2.0,
            min_noise_correlation: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct E3Params {
    pub imag: Vec<f64>,
    pub channel: ChannelSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct E3Thresholds {
    pub require_positive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TapParams {
    pub pulse: PulseSpec,
    pub taps: Vec<f64>,
    pub noise: PointNoiseSpec,
    #[serde(default = "default_steps_per_unit")]
    pub steps_per_unit: usize,
    #[serde(default)]
    pub bootstrap: BootstrapSpec,
    /// Base taps `z` for the periodicity check; the partner tap one full
    /// period of the nonlinear phase later is added automatically.
    #[serde(default)]
    pub period_check_taps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct E6Params {
    pub pulse: PulseSpec,
    pub z_total: f64,
    pub segments: usize,
    pub steps_per_segment: usize,
    pub epsilon: f64,
    #[serde(default = "full_band")]
    pub bandwidth: f64,
    pub g: GSelector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct E6Thresholds {
    /// Relative tolerance on the per-component means.
    pub mean_rel_tol: f64,
    /// Tolerance on each covariance entry relative to `√(C_ii·C_jj)` of the
    /// direct ensemble.
    pub cov_rel_tol: f64,
    pub min_pair_correlation: f64,
}

impl Default for E6Thresholds {
    fn default() -> Self {
        Self {
            mean_rel_tol: 0.15,
            cov_rel_tol: 0.15,
            min_pair_correlation: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct E7Params {
    pub noise: PointNoiseSpec,
    #[serde(default = "one")]
    pub fundamental_amplitude: f64,
    /// `[start, stop, step]` of the `A·sech(t)` sweep.
    pub sweep: [f64; 3],
    pub sweep_runs: usize,
    /// Centred two-soliton used for the sum-imag comparison.
    #[serde(default)]
    pub two_soliton: Vec<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct E7Thresholds {
    pub n1_min_ratio: f64,
    pub n2_max_ratio: f64,
    /// Amplitudes at which a new eigenvalue is born.
    pub birth_thresholds: Vec<f64>,
    /// An n₂ peak counts as "just above" a threshold `t` if it lies in
    /// `[t, t + peak_window]`.
    pub peak_window: f64,
    /// Sweep points closer than this to a threshold belong to no regime.
    pub threshold_guard: f64,
    /// Largest `(max − min)/mean` of the n₁ variance inside one regime.
    pub n1_regime_spread: f64,
}

impl Default for E7Thresholds {
    fn default() -> Self {
        Self {
            n1_min_ratio: 0.8,
            n2_max_ratio: 0.2,
            birth_thresholds: vec![1.5, 2.5],
            peak_window: 0.2,
            threshold_guard: 0.05,
            n1_regime_spread: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct E8Params {
    /// `Im λ₁` of each pair; `lambda2[i]` is its partner.
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    /// Common standard deviation of every noise term.
    pub sigma: f64,
    #[serde(default = "full_band")]
    pub bandwidth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct E9Params {
    pub pulse: PulseSpec,
    pub noise: PointNoiseSpec,
    pub g: GSelector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct E9Thresholds {
    pub min_correlation: f64,
}

impl Default for E9Thresholds {
    fn default() -> Self {
        Self { min_correlation: 0.95 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct E10Params {
    pub pulse: PulseSpec,
    pub noise: PointNoiseSpec,
    /// Nonlinear phase difference between the first two eigenvalues at which
    /// the propagated ensemble is taken.
    pub target_phase: f64,
    #[serde(default = "default_steps_per_unit")]
    pub steps_per_unit: usize,
    #[serde(default)]
    pub bootstrap: BootstrapSpec,
    /// If positive, also propagate the clean pulse through a fiber with this
    /// distributed noise density over the same distance.
    #[serde(default)]
    pub propagation_epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoThresholds {}

/// Experiment-specific part of a config.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "experiment_id")]
pub enum ExperimentSpec {
    E1 { params: E1Params, thresholds: E1Thresholds },
    E2 { params: E2Params, thresholds: E2Thresholds },
    E3 { params: E3Params, thresholds: E3Thresholds },
    E4 { params: TapParams },
    E5 { params: TapParams },
    E6 { params: E6Params, thresholds: E6Thresholds },
    E7 { params: E7Params, thresholds: E7Thresholds },
    E8 { params: E8Params },
    E9 { params: E9Params, thresholds: E9Thresholds },
    E10 { params: E10Params },
}

impl ExperimentSpec {
    pub fn id(&self) -> ExperimentId {
        match self {
            ExperimentSpec::E1 { .. } => ExperimentId::E1,
            ExperimentSpec::E2 { .. } => ExperimentId::E2,
            ExperimentSpec::E3 { .. } => ExperimentId::E3,
            ExperimentSpec::E4 { .. } => ExperimentId::E4,
            ExperimentSpec::E5 { .. } => ExperimentId::E5,
            ExperimentSpec::E6 { .. } => ExperimentId::E6,
            ExperimentSpec::E7 { .. } => ExperimentId::E7,
            ExperimentSpec::E8 { .. } => ExperimentId::E8,
            ExperimentSpec::E9 { .. } => ExperimentId::E9,
            ExperimentSpec::E10 { .. } => ExperimentId::E10,
        }
    }
}

/// A fully parsed and validated experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub runs: usize,
    pub output_dir: Option<PathBuf>,
    pub grid: GridConfig,
    pub search: SearchConfig,
    pub ensemble: EnsembleOptions,
    #[serde(flatten)]
    pub spec: ExperimentSpec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment_id: ExperimentId,
    seed: u64,
    #[serde(default = "default_runs")]
    runs: usize,
    #[serde(default)]
    output_dir: Option<PathBuf>,
    #[serde(default)]
    grid: GridConfig,
    #[serde(default)]
    search: SearchConfig,
    #[serde(default)]
    ensemble: EnsembleOptions,
    #[serde(default)]
    params: toml::Table,
    #[serde(default)]
    thresholds: toml::Table,
}

fn section<T: DeserializeOwned>(table: toml::Table, name: &str) -> Result<T, HarnessError> {
    serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." {
            name.to_string()
        } else {
            format!("{name}.{path}")
        };
        HarnessError::config(path, e.into_inner().to_string())
    })
}

fn no_thresholds(table: toml::Table) -> Result<(), HarnessError> {
    section::<NoThresholds>(table, "thresholds").map(|_| ())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let de = toml::Deserializer::parse(text).map_err(|e| HarnessError::config("<document>", e.to_string()))?;
        let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            HarnessError::config(
                if path == "." { "<root>".into() } else { path },
                e.into_inner().to_string(),
            )
        })?;
        let (p, t) = (raw.params, raw.thresholds);
        let spec = match raw.experiment_id {
            ExperimentId::E1 => ExperimentSpec::E1 {
                params: section(p, "params")?,
                thresholds: section(t, "thresholds")?,
            },
            ExperimentId::E2 => ExperimentSpec::E2 {
                params: section(p, "params")?,
                thresholds: section(t, "thresholds")?,
            },
            ExperimentId::E3 => ExperimentSpec::E3 {
                params: section(p, "params")?,
                thresholds: section(t, "thresholds")?,
            },
            ExperimentId::E4 => {
                no_thresholds(t)?;
                ExperimentSpec::E4 {
                    params: section(p, "params")?,
                }
            }
            ExperimentId::E5 => {
                no_thresholds(t)?;
                ExperimentSpec::E5 {
                    params: section(p, "params")?,
                }
            }
            ExperimentId::E6 => ExperimentSpec::E6 {
                params: section(p, "params")?,
                thresholds: section(t, "thresholds")?,
            },
            ExperimentId::E7 => ExperimentSpec::E7 {
                params: section(p, "params")?,
                thresholds: section(t, "thresholds")?,
            },
            ExperimentId::E8 => {
                no_thresholds(t)?;
                ExperimentSpec::E8 {
                    params: section(p, "params")?,
                }
            }
            ExperimentId::E9 => ExperimentSpec::E9 {
                params: section(p, "params")?,
                thresholds: section(t, "thresholds")?,
            },
            ExperimentId::E10 => {
                no_thresholds(t)?;
                ExperimentSpec::E10 {
                    params: section(p, "params")?,
                }
            }
        };
        let cfg = ExperimentConfig {
            seed: raw.seed,
            runs: raw.runs,
            output_dir: raw.output_dir,
            grid: raw.grid,
            search: raw.search,
            ensemble: raw.ensemble,
            spec,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::config("<file>", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn id(&self) -> ExperimentId {
        self.spec.id()
    }

    pub fn ensemble_config(&self, runs: usize) -> EnsembleConfig {
        EnsembleConfig {
            runs,
            master_seed: self.seed,
            max_excluded_fraction: self.ensemble.max_excluded_fraction,
            ambiguity_ratio: self.ensemble.ambiguity_ratio,
        }
    }

    /// Checks every field against the preconditions of the modules it feeds.
    pub fn validate(&self) -> Result<(), HarnessError> {
        at_least_one(self.runs, "runs")?;
        if self.runs < 3 {
            return Err(HarnessError::config("runs", "ensemble statistics need at least 3 runs"));
        }
        let grid = self.grid.build()?;
        self.search
            .validate()
            .map_err(|e| HarnessError::config("search", e.to_string()))?;
        self.ensemble_config(self.runs)
            .validate()
            .map_err(|e| HarnessError::config("ensemble", e.to_string()))?;
        match &self.spec {
            ExperimentSpec::E1 { params, .. } => {
                imag_list(&params.lambda1, "params.lambda1")?;
                imag_list(&params.lambda2, "params.lambda2")?;
                params.channel.validate("params.channel")?;
                for &l1 in &params.lambda1 {
                    for &l2 in &params.lambda2 {
                        PulseSpec::centered(&[l1, l2]).build(&grid, "params.lambda1/lambda2")?;
                    }
                }
            }
            ExperimentSpec::E2 { params, .. } => {
                for (name, r) in [
                    ("lambda1_range", params.lambda1_range),
                    ("lambda2_range", params.lambda2_range),
                ] {
                    if !(r[0] > 0.0 && r[1] > r[0]) {
                        return Err(HarnessError::config(format!("params.{name}"), "need 0 < lo < hi"));
                    }
                }
                for (name, s) in [
                    ("sparse_shape", params.sparse_shape),
                    ("dense_shape", params.dense_shape),
                ] {
                    if s[0] < 2 || s[1] < 2 {
                        return Err(HarnessError::config(
                            format!("params.{name}"),
                            "need at least 2 points per axis",
                        ));
                    }
                }
                if params.lambda1_range[1] >= params.lambda2_range[0] {
                    return Err(HarnessError::config(
                        "params.lambda2_range",
                        "must lie above lambda1_range",
                    ));
                }
                match &params.noise {
                    ConstellationNoise::Gaussian { sigma, rho } => {
                        positive(*sigma, "params.noise.sigma")?;
                        if !(rho.abs() < 1.0) {
                            return Err(HarnessError::config("params.noise.rho", "must be in (-1, 1)"));
                        }
                    }
                    ConstellationNoise::Channel(c) => c.validate("params.noise")?,
                }
            }
            ExperimentSpec::E3 { params, .. } => {
                imag_list(&params.imag, "params.imag")?;
                params.channel.validate("params.channel")?;
                PulseSpec::centered(&params.imag).build(&grid, "params.imag")?;
            }
            ExperimentSpec::E4 { params } | ExperimentSpec::E5 { params } => {
                params.pulse.build(&grid, "params.pulse")?;
                params.noise.validate("params.noise")?;
                params.bootstrap.validate("params.bootstrap")?;
                at_least_one(params.steps_per_unit, "params.steps_per_unit")?;
                if params.taps.len() < 2 {
                    return Err(HarnessError::config("params.taps", "need at least two taps"));
                }
                for (i, z) in params.taps.iter().chain(&params.period_check_taps).enumerate() {
                    non_negative(*z, &format!("params.taps[{i}]"))?;
                }
            }
            ExperimentSpec::E6 { params, .. } => {
                params.pulse.build(&grid, "params.pulse")?;
                positive(params.z_total, "params.z_total")?;
                at_least_one(params.segments, "params.segments")?;
                at_least_one(params.steps_per_segment, "params.steps_per_segment")?;
                non_negative(params.epsilon, "params.epsilon")?;
                bandwidth(params.bandwidth, "params.bandwidth")?;
            }
            ExperimentSpec::E7 { params, thresholds } => {
                params.noise.validate("params.noise")?;
                positive(params.fundamental_amplitude, "params.fundamental_amplitude")?;
                let [start, stop, step] = params.sweep;
                if !(start > 0.0 && stop >= start && step > 0.0) {
                    return Err(HarnessError::config(
                        "params.sweep",
                        "need 0 < start <= stop and step > 0",
                    ));
                }
                if params.sweep_runs < 3 {
                    return Err(HarnessError::config("params.sweep_runs", "need at least 3 runs"));
                }
                if !params.two_soliton.is_empty() {
                    imag_list(&params.two_soliton, "params.two_soliton")?;
                }
                if thresholds.birth_thresholds.is_empty() {
                    return Err(HarnessError::config("thresholds.birth_thresholds", "must not be empty"));
                }
            }
            ExperimentSpec::E8 { params } => {
                if params.lambda1.len() != params.lambda2.len() {
                    return Err(HarnessError::config(
                        "params.lambda2",
                        "must pair up with params.lambda1",
                    ));
                }
                imag_list(&params.lambda1, "params.lambda1")?;
                imag_list(&params.lambda2, "params.lambda2")?;
                positive(params.sigma, "params.sigma")?;
                bandwidth(params.bandwidth, "params.bandwidth")?;
            }
            ExperimentSpec::E9 { params, .. } => {
                params.pulse.build(&grid, "params.pulse")?;
                params.noise.validate("params.noise")?;
            }
            ExperimentSpec::E10 { params } => {
                params.pulse.build(&grid, "params.pulse")?;
                params.noise.validate("params.noise")?;
                params.bootstrap.validate("params.bootstrap")?;
                positive(params.target_phase, "params.target_phase")?;
                non_negative(params.propagation_epsilon, "params.propagation_epsilon")?;
                at_least_one(params.steps_per_unit, "params.steps_per_unit")?;
            }
        }
        Ok(())
    }
}

fn positive(x: f64, path: &str) -> Result<(), HarnessError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(HarnessError::config(path, format!("must be positive, got {x}")))
    }
}

fn non_negative(x: f64, path: &str) -> Result<(), HarnessError> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(HarnessError::config(path, format!("must be >= 0, got {x}")))
    }
}

fn at_least_one(n: usize, path: &str) -> Result<(), HarnessError> {
    if n >= 1 {
        Ok(())
    } else {
        Err(HarnessError::config(path, "must be at least 1"))
    }
}

fn bandwidth(bw: f64, path: &str) -> Result<(), HarnessError> {
    if bw > 0.0 && bw <= 1.0 {
        Ok(())
    } else {
        Err(HarnessError::config(path, format!("must be in (0, 1], got {bw}")))
    }
}

fn imag_list(v: &[f64], path: &str) -> Result<(), HarnessError> {
    if v.is_empty() {
        return Err(HarnessError::config(path, "must not be empty"));
    }
    for (i, x) in v.iter().enumerate() {
        positive(*x, &format!("{path}[{i}]"))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_steps_round_up() {
        let ch = ChannelSpec {
            z: 0.26667,
            epsilon: 0.05,
            steps_per_unit: 400,
            bandwidth: 1.0,
        };
        assert_eq!(ch.steps(), 107);
        assert_eq!(ChannelSpec { z: 1e-6, ..ch }.steps(), 1);
    }

    #[test]
    fn point_noise_variance_scales_with_segment() {
        let grid = TimeGrid::symmetric(16.0, 1024).unwrap();
        let n = PointNoiseSpec {
            epsilon: 0.0125,
            segment_length: 0.1,
            bandwidth: 1.0,
        };
        assert!((n.variance(&grid) - 0.0125f64.powi(2) * 0.1 * 32.0).abs() < 1e-15);
    }

    #[test]
    fn defaults_fill_optional_sections() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
experiment_id = "E9"
seed = 1
[params]
g = "sum-imag"
[params.pulse]
kind = "sech"
amplitude = 2.0
[params.noise]
epsilon = 0.01
segment_length = 0.1
[thresholds]
min_correlation = 0.95
"#,
        )
        .unwrap();
        assert_eq!(cfg.grid, GridConfig::default());
        assert_eq!(cfg.id(), ExperimentId::E9);
        assert!(cfg.output_dir.is_none());
    }

    #[test]
    fn thresholds_are_rejected_where_none_apply() {
        let text = r#"
experiment_id = "E8"
seed = 1
[params]
lambda1 = [0.3]
lambda2 = [0.9]
sigma = 0.01
[thresholds]
anything = 1
"#;
        let err = ExperimentConfig::from_toml_str(text).unwrap_err();
        assert!(err.to_string().contains("thresholds"), "{err}");
    }
}
