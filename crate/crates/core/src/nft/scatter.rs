use num_complex::Complex64;

use super::{ScatteringCoefficients, Scheme};
use crate::error::{Error, Result};
use crate::grid::Signal;

const J: Complex64 = Complex64::new(0.0, 1.0);
const RESCALE_EVERY: usize = 32;
const RESCALE_HIGH: f64 = 1e100;
const RESCALE_LOW: f64 = 1e-100;
/// Largest real part accepted before `exp` of a log-coefficient.
const MAX_LOG: f64 = 700.0;

/// Below this |a'| the central difference is indistinguishable from roundoff.
pub const DERIVATIVE_FLOOR: f64 = 1e-8;

/// λ-derivative step `10⁻⁶·(1 + |λ|)`.
pub fn derivative_step(lambda: Complex64) -> f64 {
    1e-6 * (1.0 + lambda.norm())
}

/// Transfer-matrix form of the Zakharov-Shabat problem for one signal.
///
/// Sample `k` is treated as the value of `q` on the cell
/// `[t_k − Δt/2, t_k + Δt/2)`, so the integration runs over
/// `[T₁, T₂] = [t_start − Δt/2, t_end − Δt/2]`. Boundary factors use the
/// scheme's own free propagator so that `q ≡ 0` gives `a = 1, b = 0`
/// exactly for both discretizations.
#[derive(Debug, Clone)]
pub struct ScatteringProblem {
    scheme: Scheme,
    dt: f64,
    t_left: f64,
    /// `q_k·Δt`
    weights: Vec<Complex64>,
    /// Ablowitz-Ladik normalization `1/√(1 + |Q_k|²)`.
    al_norm: Vec<f64>,
    peak_index: usize,
}

/// Vector with an explicit log-magnitude: value = `v·exp(log_scale)`.
#[derive(Debug, Clone, Copy)]
struct Scaled {
    v: [Complex64; 2],
    log_scale: Complex64,
}

impl Scaled {
    fn new(v1: Complex64, v2: Complex64) -> Self {
        Self {
            v: [v1, v2],
            log_scale: Complex64::new(0.0, 0.0),
        }
    }

    #[inline]
    fn rescale(&mut self) {
        let m = self.v[0].l1_norm().max(self.v[1].l1_norm());
        if !(RESCALE_LOW..=RESCALE_HIGH).contains(&m) && m > 0.0 && m.is_finite() {
            self.v[0] /= m;
            self.v[1] /= m;
            self.log_scale += m.ln();
        }
    }
}

impl ScatteringProblem {
    pub fn new(signal: &Signal, scheme: Scheme) -> Self {
        let dt = signal.grid().dt();
        let weights: Vec<Complex64> = signal.samples().iter().map(|q| q * dt).collect();
        let al_norm = match scheme {
            Scheme::AblowitzLadik => weights.iter().map(|w| 1.0 / (1.0 + w.norm_sqr()).sqrt()).collect(),
            Scheme::ForwardDifference => Vec::new(),
        };
        let peak_index = signal
            .samples()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
            .map(|(k, _)| k)
            .unwrap_or(0);
        Self {
            scheme,
            dt,
            t_left: signal.grid().t_start() - 0.5 * dt,
            weights,
            al_norm,
            peak_index,
        }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    fn n(&self) -> usize {
        self.weights.len()
    }

    /// `ln` of the free-propagation factors `(F₁, F₂)` over the whole window.
    fn log_free_factors(&self, lambda: Complex64) -> (Complex64, Complex64) {
        let n = self.n() as f64;
        match self.scheme {
            Scheme::ForwardDifference => (
                n * (1.0 - J * lambda * self.dt).ln(),
                n * (1.0 + J * lambda * self.dt).ln(),
            ),
            Scheme::AblowitzLadik => {
                let x = -J * lambda * self.dt * n;
                (x, -x)
            }
        }
    }

    /// Left-to-right sweep over cells `[0, end)` starting from `(1, 0)`.
    fn sweep_left(&self, lambda: Complex64, end: usize) -> Scaled {
        let mut s = Scaled::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        match self.scheme {
            Scheme::ForwardDifference => {
                let d1 = 1.0 - J * lambda * self.dt;
                let d2 = 1.0 + J * lambda * self.dt;
                for (k, w) in self.weights[..end].iter().enumerate() {
                    let [u1, u2] = s.v;
                    s.v = [d1 * u1 + w * u2, -w.conj() * u1 + d2 * u2];
                    if k % RESCALE_EVERY == RESCALE_EVERY - 1 {
                        s.rescale();
                    }
                }
            }
            Scheme::AblowitzLadik => {
                let z = (-J * lambda * self.dt).exp();
                let zi = 1.0 / z;
                for (k, (w, c)) in self.weights[..end].iter().zip(&self.al_norm).enumerate() {
                    let [u1, u2] = s.v;
                    s.v = [(z * u1 + w * u2) * c, (-w.conj() * u1 + zi * u2) * c];
                    if k % RESCALE_EVERY == RESCALE_EVERY - 1 {
                        s.rescale();
                    }
                }
            }
        }
        s.rescale();
        s
    }

    /// Right-to-left sweep from `(0, 1)` at `T₂` back to the left edge of cell `start`.
    fn sweep_right(&self, lambda: Complex64, start: usize) -> Scaled {
        let mut s = Scaled::new(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0));
        let n = self.n();
        match self.scheme {
            Scheme::ForwardDifference => {
                let d1 = 1.0 - J * lambda * self.dt;
                let d2 = 1.0 + J * lambda * self.dt;
                let base = d1 * d2;
                for (i, k) in (start..n).rev().enumerate() {
                    let w = self.weights[k];
                    let inv_det = 1.0 / (base + w.norm_sqr());
                    let [u1, u2] = s.v;
                    s.v = [(d2 * u1 - w * u2) * inv_det, (w.conj() * u1 + d1 * u2) * inv_det];
                    if i % RESCALE_EVERY == RESCALE_EVERY - 1 {
                        s.rescale();
                    }
                }
            }
            Scheme::AblowitzLadik => {
                let z = (-J * lambda * self.dt).exp();
                let zi = 1.0 / z;
                for (i, k) in (start..n).rev().enumerate() {
                    let w = self.weights[k];
                    let c = self.al_norm[k];
                    let [u1, u2] = s.v;
                    s.v = [(zi * u1 - w * u2) * c, (w.conj() * u1 + z * u2) * c];
                    if i % RESCALE_EVERY == RESCALE_EVERY - 1 {
                        s.rescale();
                    }
                }
            }
        }
        s.rescale();
        s
    }

    fn finish(lambda: Complex64, log_value: Complex64, what: &str) -> Result<Complex64> {
        if !(log_value.re.is_finite() && log_value.im.is_finite()) {
            if log_value.re == f64::NEG_INFINITY {
                return Ok(Complex64::new(0.0, 0.0));
            }
            return Err(Error::Range {
                lambda,
                detail: format!("non-finite log-magnitude for {what}"),
            });
        }
        if log_value.re > MAX_LOG {
            return Err(Error::Range {
                lambda,
                detail: format!("{what} overflows (ln|{what}| = {:.1})", log_value.re),
            });
        }
        Ok(log_value.exp())
    }

    fn check_lambda(lambda: Complex64) -> Result<()> {
        if !(lambda.re.is_finite() && lambda.im.is_finite()) {
            return Err(Error::invalid(format!("spectral parameter {lambda} is not finite")));
        }
        Ok(())
    }

    /// `a(λ)` only; the hot path of the eigenvalue search.
    pub fn a(&self, lambda: Complex64) -> Result<Complex64> {
        Self::check_lambda(lambda)?;
        let s = self.sweep_left(lambda, self.n());
        let (lf1, _) = self.log_free_factors(lambda);
        if s.v[0] == Complex64::new(0.0, 0.0) {
            return Ok(s.v[0]);
        }
        Self::finish(lambda, s.v[0].ln() + s.log_scale - lf1, "a")
    }

    /// `a(λ)` and `b(λ)` from a single left-to-right sweep.
    pub fn coefficients(&self, lambda: Complex64) -> Result<ScatteringCoefficients> {
        Self::check_lambda(lambda)?;
        let s = self.sweep_left(lambda, self.n());
        let (lf1, lf2) = self.log_free_factors(lambda);
        let zero = Complex64::new(0.0, 0.0);
        let a = if s.v[0] == zero {
            zero
        } else {
            Self::finish(lambda, s.v[0].ln() + s.log_scale - lf1, "a")?
        };
        let b = if s.v[1] == zero {
            zero
        } else {
            Self::finish(
                lambda,
                s.v[1].ln() + s.log_scale - 2.0 * J * lambda * self.t_left - lf2,
                "b",
            )?
        };
        Ok(ScatteringCoefficients { lambda, a, b })
    }

    /// Central difference `da/dλ` with step [`derivative_step`].
    pub fn a_derivative_with_step(&self, lambda: Complex64, h: f64) -> Result<Complex64> {
        let ap = self.a(lambda + h)?;
        let am = self.a(lambda - h)?;
        Ok((ap - am) / (2.0 * h))
    }

    pub fn a_derivative(&self, lambda: Complex64) -> Result<Complex64> {
        let d = self.a_derivative_with_step(lambda, derivative_step(lambda))?;
        if !(d.norm() >= DERIVATIVE_FLOOR) {
            return Err(Error::DegenerateRoot {
                lambda,
                magnitude: d.norm(),
            });
        }
        Ok(d)
    }

    /// `b(λ_k)` at a discrete eigenvalue by matching the left and right Jost
    /// solutions at the signal peak.
    ///
    /// At a zero of `a` the left solution is `b` times the right one; reading
    /// the ratio where both are O(1) avoids the exponential contamination that
    /// ruins `v₂(T₂)` once `Im λ·(T₂ − T₁)` is large.
    pub fn b_at_eigenvalue(&self, lambda: Complex64) -> Result<Complex64> {
        Self::check_lambda(lambda)?;
        let m = self.peak_index;
        let left = self.sweep_left(lambda, m);
        let right = self.sweep_right(lambda, m);
        let rr = right.v[0].norm_sqr() + right.v[1].norm_sqr();
        if rr == 0.0 {
            return Err(Error::Range {
                lambda,
                detail: "right Jost solution vanished".into(),
            });
        }
        let lr = left.v[0] * right.v[0].conj() + left.v[1] * right.v[1].conj();
        let ratio = lr / rr;
        if ratio == Complex64::new(0.0, 0.0) {
            return Ok(ratio);
        }
        let (_, lf2) = self.log_free_factors(lambda);
        Self::finish(
            lambda,
            ratio.ln() + left.log_scale - right.log_scale - 2.0 * J * lambda * self.t_left - lf2,
            "b",
        )
    }
}
