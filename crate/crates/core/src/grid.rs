use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform sampling of `[t_start, t_end)` with `n_samples` points.
///
/// Sample `k` sits at `t_start + k·Δt` with `Δt = (t_end − t_start)/n_samples`,
/// so the grid is periodic and maps directly onto an FFT.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_start: f64,
    t_end: f64,
    n_samples: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_samples: usize) -> Result<Self> {
        if !(t_start.is_finite() && t_end.is_finite()) {
            return Err(Error::invalid("time window bounds must be finite"));
        }
        if t_end <= t_start {
            return Err(Error::invalid(format!(
                "t_end ({t_end}) must exceed t_start ({t_start})"
            )));
        }
        if n_samples < 2 {
            return Err(Error::invalid("a time grid needs at least 2 samples"));
        }
        Ok(Self {
            t_start,
            t_end,
            n_samples,
        })
    }

    /// `[−half_width, half_width)` with `n_samples` points.
    pub fn symmetric(half_width: f64, n_samples: usize) -> Result<Self> {
        Self::new(-half_width, half_width, n_samples)
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn len(&self) -> usize {
        self.n_samples
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        (self.t_end - self.t_start) / self.n_samples as f64
    }

    pub fn width(&self) -> f64 {
        self.t_end - self.t_start
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.dt()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        let dt = self.dt();
        (0..self.n_samples).map(move |k| self.t_start + k as f64 * dt)
    }

    /// Angular frequency of FFT bin `k` (standard wrap-around ordering).
    pub fn angular_frequency(&self, k: usize) -> f64 {
        let n = self.n_samples as i64;
        let signed = if (k as i64) < (n + 1) / 2 {
            k as i64
        } else {
            k as i64 - n
        };
        2.0 * std::f64::consts::PI * signed as f64 / self.width()
    }
}

/// Sampled normalized complex envelope `q(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    grid: TimeGrid,
    samples: Vec<Complex64>,
}

impl Signal {
    pub fn new(grid: TimeGrid, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::invalid(format!(
                "signal has {} samples but its grid has {}",
                samples.len(),
                grid.len()
            )));
        }
        if let Some(k) = samples.iter().position(|s| !(s.re.is_finite() && s.im.is_finite())) {
            return Err(Error::invalid(format!("non-finite sample at index {k}")));
        }
        Ok(Self { grid, samples })
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self {
            grid,
            samples: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let samples = grid.times().map(f).collect();
        Self::new(grid, samples)
    }

    /// Wraps samples that are already known to be finite and of the right length.
    pub(crate) fn from_parts_unchecked(grid: TimeGrid, samples: Vec<Complex64>) -> Self {
        debug_assert_eq!(samples.len(), grid.len());
        Self { grid, samples }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Trapezoidal estimate of `∫|q|²dt`.
    pub fn energy(&self) -> f64 {
        let n = self.samples.len();
        let sum: f64 = self.samples.iter().map(|s| s.norm_sqr()).sum();
        let ends = 0.5 * (self.samples[0].norm_sqr() + self.samples[n - 1].norm_sqr());
        (sum - ends) * self.grid.dt()
    }

    /// Discrete L² inner product `Σ self·conj(other)·Δt`.
    pub fn inner(&self, other: &Signal) -> Result<Complex64> {
        self.check_same_grid(other)?;
        let dt = self.grid.dt();
        Ok(self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a * b.conj())
            .sum::<Complex64>()
            * dt)
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|s| s.norm()).fold(0.0, f64::max)
    }

    /// Largest sample magnitude at the two window edges.
    pub fn edge_amplitude(&self) -> f64 {
        self.samples[0].norm().max(self.samples[self.samples.len() - 1].norm())
    }

    pub fn add(&self, other: &Signal) -> Result<Signal> {
        self.check_same_grid(other)?;
        let samples = self.samples.iter().zip(&other.samples).map(|(a, b)| a + b).collect();
        Signal::new(self.grid, samples)
    }

    pub fn scale(&self, factor: Complex64) -> Signal {
        Signal::from_parts_unchecked(self.grid, self.samples.iter().map(|s| s * factor).collect())
    }

    /// L∞ distance to another signal on the same grid.
    pub fn max_abs_diff(&self, other: &Signal) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub(crate) fn check_same_grid(&self, other: &Signal) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::invalid("signals live on different time grids"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_bad_bounds() {
        assert!(TimeGrid::new(1.0, 1.0, 10).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 1).is_err());
        assert!(TimeGrid::new(f64::NAN, 1.0, 8).is_err());
        let g = TimeGrid::symmetric(16.0, 2048).unwrap();
        assert_eq!(g.dt(), 32.0 / 2048.0);
        assert_eq!(g.time(0), -16.0);
    }

    #[test]
    fn frequencies_wrap() {
        let g = TimeGrid::new(0.0, 8.0, 8).unwrap();
        let w: Vec<f64> = (0..8).map(|k| g.angular_frequency(k)).collect();
        let unit = 2.0 * std::f64::consts::PI / 8.0;
        assert_eq!(w[1], unit);
        assert_eq!(w[4], -4.0 * unit);
        assert_eq!(w[7], -unit);
    }

    #[test]
    fn signal_validates_samples() {
        let g = TimeGrid::symmetric(1.0, 4).unwrap();
        assert!(Signal::new(g, vec![Complex64::new(0.0, 0.0); 3]).is_err());
        let mut s = vec![Complex64::new(0.0, 0.0); 4];
        s[2] = Complex64::new(f64::INFINITY, 0.0);
        assert!(Signal::new(g, s).is_err());
    }

    #[test]
    fn sech_energy_is_two_a_squared() {
        let g = TimeGrid::symmetric(16.0, 2048).unwrap();
        let q = Signal::from_fn(g, |t| Complex64::new(2.0 / t.cosh(), 0.0)).unwrap();
        assert!((q.energy() - 8.0).abs() < 1e-8);
    }
}
