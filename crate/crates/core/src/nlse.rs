//! Normalized stochastic NLSE `j q_z = q_tt + 2|q|²q + noise`, solved by
//! symmetric split-step Fourier, plus the physical/normalized unit maps.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Signal, TimeGrid};
use crate::rng::rng_from_seed;

/// Largest nonlinear phase rotation per step before the result is flagged.
pub const MAX_STEP_NONLINEAR_PHASE: f64 = 0.1;

/// Physical fiber parameters. `beta2` in s²/km, `gamma` in 1/(W·km).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberSpec {
    pub beta2: f64,
    pub gamma: f64,
    /// dB/km. Propagation assumes ideal distributed gain, so this is only
    /// carried along for bookkeeping.
    pub alpha_db_per_km: f64,
    pub length_km: f64,
}

impl FiberSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta2.is_finite() && self.beta2 < 0.0) {
            return Err(Error::invalid(format!(
                "beta2 must be negative (anomalous dispersion), got {}",
                self.beta2
            )));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::invalid(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.length_km.is_finite() && self.length_km > 0.0) {
            return Err(Error::invalid(format!(
                "length must be positive, got {}",
                self.length_km
            )));
        }
        if !self.alpha_db_per_km.is_finite() {
            return Err(Error::invalid("alpha must be finite"));
        }
        Ok(())
    }
}

/// Scales between physical and normalized units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationMap {
    /// W
    pub power_scale: f64,
    /// s
    pub time_scale: f64,
    /// km
    pub distance_scale: f64,
    gamma: f64,
    beta2: f64,
}

impl NormalizationMap {
    /// `P = 2/(γ𝔏)`, `T = √(|β₂|𝔏/2)`.
    pub fn new(fiber: &FiberSpec) -> Result<Self> {
        fiber.validate()?;
        let l = fiber.length_km;
        Ok(Self {
            power_scale: 2.0 / (fiber.gamma * l),
            time_scale: (fiber.beta2.abs() * l / 2.0).sqrt(),
            distance_scale: l,
            gamma: fiber.gamma,
            beta2: fiber.beta2,
        })
    }

    pub fn normalized_distance(&self, km: f64) -> f64 {
        km / self.distance_scale
    }

    pub fn physical_distance(&self, z: f64) -> f64 {
        z * self.distance_scale
    }

    /// Normalized noise density from the physical one: `ε² = γ/√(2|β₂|)·κ²`.
    pub fn epsilon_from_kappa(&self, kappa: f64) -> f64 {
        (self.gamma / (2.0 * self.beta2.abs()).sqrt()).sqrt() * kappa
    }
}

/// A sampled field in physical units: time in seconds, amplitude in √W.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalSignal {
    pub t_start: f64,
    pub t_end: f64,
    pub samples: Vec<Complex64>,
}

pub fn normalize(physical: &PhysicalSignal, fiber: &FiberSpec) -> Result<Signal> {
    let map = NormalizationMap::new(fiber)?;
    let grid = TimeGrid::new(
        physical.t_start / map.time_scale,
        physical.t_end / map.time_scale,
        physical.samples.len(),
    )?;
    let root_p = map.power_scale.sqrt();
    Signal::new(grid, physical.samples.iter().map(|a| a / root_p).collect())
}

pub fn denormalize(signal: &Signal, fiber: &FiberSpec) -> Result<PhysicalSignal> {
    let map = NormalizationMap::new(fiber)?;
    let root_p = map.power_scale.sqrt();
    Ok(PhysicalSignal {
        t_start: signal.grid().t_start() * map.time_scale,
        t_end: signal.grid().t_end() * map.time_scale,
        samples: signal.samples().iter().map(|q| q * root_p).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationConfig {
    pub n_steps: usize,
    /// ε: noise injected over a distance h has per-sample variance ε²h/Δt
    /// before filtering.
    pub noise_sigma: f64,
    /// Fraction of the grid bandwidth kept by the brick-wall noise filter.
    pub noise_bandwidth: f64,
    pub rng_seed: u64,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self {
            n_steps: 200,
            noise_sigma: 0.0,
            noise_bandwidth: 1.0,
            rng_seed: 0,
        }
    }
}

impl PropagationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(Error::invalid("n_steps must be at least 1"));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::invalid(format!(
                "noise_sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        check_bandwidth(self.noise_bandwidth)
    }
}

fn check_bandwidth(bw: f64) -> Result<()> {
    if !(bw > 0.0 && bw <= 1.0) {
        return Err(Error::invalid(format!("noise_bandwidth must be in (0, 1], got {bw}")));
    }
    Ok(())
}

/// Output of a propagation run.
#[derive(Debug, Clone)]
pub struct Propagation {
    pub output: Signal,
    /// Fields at the requested tap distances, in the order given.
    pub taps: Vec<Signal>,
    /// Largest `2·max|q|²·h` seen over all steps.
    pub max_step_phase: f64,
    /// Set when `max_step_phase` exceeded [`MAX_STEP_NONLINEAR_PHASE`].
    pub accuracy_warning: bool,
}

/// FFT plans and filter masks for one grid; reusable across runs.
pub struct Propagator {
    grid: TimeGrid,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    omega2: Vec<f64>,
}

impl std::fmt::Debug for Propagator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Propagator").field("grid", &self.grid).finish()
    }
}

impl Propagator {
    pub fn new(grid: TimeGrid) -> Self {
        let n = grid.len();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let ifft = planner.plan_fft_inverse(n);
        let scratch_len = fft.get_inplace_scratch_len().max(ifft.get_inplace_scratch_len());
        let omega2 = (0..n).map(|k| grid.angular_frequency(k).powi(2)).collect();
        Self {
            grid,
            fft,
            ifft,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            omega2,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn forward(&mut self, buf: &mut [Complex64]) {
        self.fft.process_with_scratch(buf, &mut self.scratch);
    }

    fn inverse(&mut self, buf: &mut [Complex64]) {
        self.ifft.process_with_scratch(buf, &mut self.scratch);
        let inv = 1.0 / buf.len() as f64;
        buf.iter_mut().for_each(|x| *x *= inv);
    }

    /// Adds filtered white noise to a spectrum produced by the unnormalized
    /// forward FFT. Per-sample pre-filter variance `variance` maps to
    /// `N·variance` per retained bin.
    fn add_spectral_noise<R: Rng + ?Sized>(
        &self,
        spectrum: &mut [Complex64],
        variance: f64,
        bandwidth: f64,
        rng: &mut R,
    ) {
        let n = spectrum.len();
        let sd = (n as f64 * variance / 2.0).sqrt();
        for (k, x) in spectrum.iter_mut().enumerate() {
            if retained(k, n, bandwidth) {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                *x += Complex64::new(re * sd, im * sd);
            }
        }
    }

    /// Band-limited circular Gaussian noise on this grid with pre-filter
    /// per-sample variance `variance`.
    pub fn noise<R: Rng + ?Sized>(&mut self, variance: f64, bandwidth: f64, rng: &mut R) -> Result<Signal> {
        check_bandwidth(bandwidth)?;
        if !(variance.is_finite() && variance >= 0.0) {
            return Err(Error::invalid(format!("noise variance must be >= 0, got {variance}")));
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        self.add_spectral_noise(&mut buf, variance, bandwidth, rng);
        self.inverse(&mut buf);
        Ok(Signal::from_parts_unchecked(self.grid, buf))
    }

    /// Propagates `signal` over `z`, recording the field at each tap.
    ///
    /// The nominal step is `z/n_steps`; a step is shortened where needed so
    /// that every tap lands on a step boundary. Noise is injected after each
    /// step with variance proportional to that step's length.
    pub fn propagate<R: Rng + ?Sized>(
        &mut self,
        signal: &Signal,
        z: f64,
        taps: &[f64],
        n_steps: usize,
        noise_sigma: f64,
        noise_bandwidth: f64,
        rng: &mut R,
    ) -> Result<Propagation> {
        if signal.grid() != &self.grid {
            return Err(Error::invalid("signal grid does not match the propagator grid"));
        }
        if !(z.is_finite() && z > 0.0) {
            return Err(Error::invalid(format!(
                "propagation distance must be positive, got {z}"
            )));
        }
        if n_steps == 0 {
            return Err(Error::invalid("n_steps must be at least 1"));
        }
        if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
            return Err(Error::invalid(format!("noise_sigma must be >= 0, got {noise_sigma}")));
        }
        check_bandwidth(noise_bandwidth)?;
        for &t in taps {
            if !(t.is_finite() && t >= 0.0 && t <= z) {
                return Err(Error::invalid(format!("tap {t} is outside [0, {z}]")));
            }
        }

        let h_nominal = z / n_steps as f64;
        let snap = 1e-9 * h_nominal;
        let mut stops: Vec<f64> = taps.iter().copied().chain(std::iter::once(z)).collect();
        stops.sort_by(f64::total_cmp);
        stops.dedup_by(|a, b| (*a - *b).abs() <= snap);

        let dt = self.grid.dt();
        let half_nominal: Vec<Complex64> = self
            .omega2
            .iter()
            .map(|w2| Complex64::from_polar(1.0, w2 * h_nominal / 2.0))
            .collect();

        let mut spectrum = signal.samples().to_vec();
        self.forward(&mut spectrum);
        let mut field = vec![Complex64::new(0.0, 0.0); spectrum.len()];
        let mut recorded: Vec<(f64, Signal)> = Vec::with_capacity(stops.len());
        let mut pos = 0.0;
        let mut max_step_phase: f64 = 0.0;

        // A tap at 0 is the input itself.
        while recorded.len() < stops.len() && stops[recorded.len()] <= snap {
            recorded.push((stops[recorded.len()], signal.clone()));
        }

        for &stop in &stops[recorded.len()..] {
            while stop - pos > snap {
                let h = if stop - pos < h_nominal - snap {
                    stop - pos
                } else {
                    h_nominal
                };
                let irregular = (h - h_nominal).abs() > snap;
                let half_custom: Vec<Complex64>;
                let half = if irregular {
                    half_custom = self
                        .omega2
                        .iter()
                        .map(|w2| Complex64::from_polar(1.0, w2 * h / 2.0))
                        .collect();
                    &half_custom
                } else {
                    &half_nominal
                };
                spectrum.iter_mut().zip(half).for_each(|(x, l)| *x *= l);
                field.copy_from_slice(&spectrum);
                self.inverse(&mut field);
                let mut peak: f64 = 0.0;
                for x in field.iter_mut() {
                    let p = x.norm_sqr();
                    peak = peak.max(p);
                    *x *= Complex64::from_polar(1.0, -2.0 * p * h);
                }
                max_step_phase = max_step_phase.max(2.0 * peak * h);
                spectrum.copy_from_slice(&field);
                self.forward(&mut spectrum);
                spectrum.iter_mut().zip(half).for_each(|(x, l)| *x *= l);
                if noise_sigma > 0.0 {
                    let variance = noise_sigma * noise_sigma * h / dt;
                    self.add_spectral_noise(&mut spectrum, variance, noise_bandwidth, rng);
                }
                pos = if irregular { stop } else { pos + h };
                if !peak.is_finite() {
                    return Err(Error::NumericalBlowup { z: pos });
                }
            }
            pos = stop;
            field.copy_from_slice(&spectrum);
            self.inverse(&mut field);
            if field.iter().any(|x| !(x.re.is_finite() && x.im.is_finite())) {
                return Err(Error::NumericalBlowup { z: pos });
            }
            recorded.push((stop, Signal::from_parts_unchecked(self.grid, field.clone())));
        }

        let output = recorded.last().expect("z is always a stop").1.clone();
        let taps = taps
            .iter()
            .map(|&t| {
                recorded
                    .iter()
                    .find(|(s, _)| (s - t).abs() <= snap)
                    .expect("every tap is a stop")
                    .1
                    .clone()
            })
            .collect();
        Ok(Propagation {
            output,
            taps,
            max_step_phase,
            accuracy_warning: max_step_phase > MAX_STEP_NONLINEAR_PHASE,
        })
    }
}

/// Whether FFT bin `k` of `n` survives a brick-wall filter keeping the
/// lowest `bandwidth` fraction of the band.
pub fn retained(k: usize, n: usize, bandwidth: f64) -> bool {
    if bandwidth >= 1.0 {
        return true;
    }
    let signed = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
    signed.abs() <= bandwidth * n as f64 / 2.0
}

/// Number of FFT bins kept by the noise filter.
pub fn retained_bins(n: usize, bandwidth: f64) -> usize {
    (0..n).filter(|&k| retained(k, n, bandwidth)).count()
}

/// Propagates over `z` with noise drawn from `config.rng_seed`.
pub fn split_step_propagate(signal: &Signal, z: f64, config: &PropagationConfig) -> Result<Propagation> {
    propagate_with_taps(signal, z, &[], config)
}

/// As [`split_step_propagate`], additionally returning the field at each tap
/// distance.
pub fn propagate_with_taps(signal: &Signal, z: f64, taps: &[f64], config: &PropagationConfig) -> Result<Propagation> {
    config.validate()?;
    let mut rng = rng_from_seed(config.rng_seed);
    Propagator::new(*signal.grid()).propagate(
        signal,
        z,
        taps,
        config.n_steps,
        config.noise_sigma,
        config.noise_bandwidth,
        &mut rng,
    )
}
