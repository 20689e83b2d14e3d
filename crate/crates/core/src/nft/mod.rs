//! Forward nonlinear Fourier transform of sampled signals.
//!
//! The scattering problem `v_t = [[−jλ, q], [−q*, jλ]]·v` is integrated from
//! `v(T₁) = (1, 0)ᵀ·e^{−jλT₁}`; `a(λ) = v₁(T₂)e^{jλT₂}` and
//! `b(λ) = v₂(T₂)e^{−jλT₂}`. Discrete eigenvalues are the zeros of `a` in the
//! upper half plane, with amplitudes `Q^(d) = b/a'`; the continuous amplitude
//! is `Q^(c) = b/a` on the real line.

mod scatter;
mod search;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use scatter::{derivative_step, ScatteringProblem, DERIVATIVE_FLOOR};
pub use search::{
    find_discrete_eigenvalues, ConvergenceReport, DiscreteSpectrum, SearchConfig, SearchOutcome, SeedMode,
};

use crate::error::{Error, Result};
use crate::grid::Signal;

/// Discretization of the transfer recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// `v_{n+1} = (I + Δt·M(λ, q_n))·v_n`
    #[default]
    ForwardDifference,
    /// `v_{n+1} = (1+|Q_n|²)^{-1/2}·[[z, Q_n], [−Q_n*, 1/z]]·v_n`, `z = e^{−jλΔt}`
    AblowitzLadik,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatteringCoefficients {
    pub lambda: Complex64,
    pub a: Complex64,
    pub b: Complex64,
}

fn check_upper(lambda: Complex64) -> Result<()> {
    if lambda.im < 0.0 {
        return Err(Error::invalid(format!(
            "spectral parameter {lambda} lies in the lower half plane"
        )));
    }
    Ok(())
}

pub fn scatter(signal: &Signal, lambda: Complex64, scheme: Scheme) -> Result<ScatteringCoefficients> {
    check_upper(lambda)?;
    ScatteringProblem::new(signal, scheme).coefficients(lambda)
}

pub fn scatter_forward_difference(signal: &Signal, lambda: Complex64) -> Result<ScatteringCoefficients> {
    scatter(signal, lambda, Scheme::ForwardDifference)
}

pub fn scatter_ablowitz_ladik(signal: &Signal, lambda: Complex64) -> Result<ScatteringCoefficients> {
    scatter(signal, lambda, Scheme::AblowitzLadik)
}

/// `da/dλ` by central difference; errors with [`Error::DegenerateRoot`] when
/// the derivative is lost in roundoff.
pub fn a_derivative(signal: &Signal, lambda: Complex64, scheme: Scheme) -> Result<Complex64> {
    check_upper(lambda)?;
    ScatteringProblem::new(signal, scheme).a_derivative(lambda)
}

/// `Q^(d)(λ_k) = b(λ_k)/a'(λ_k)` at a converged root of `a`.
pub fn discrete_amplitude(signal: &Signal, lambda_k: Complex64, scheme: Scheme) -> Result<Complex64> {
    check_upper(lambda_k)?;
    let problem = ScatteringProblem::new(signal, scheme);
    let da = problem.a_derivative(lambda_k)?;
    Ok(problem.b_at_eigenvalue(lambda_k)? / da)
}

/// Smallest `|a(λ)|` for which `b/a` is returned.
pub const CONTINUOUS_A_FLOOR: f64 = 1e-10;

/// `Q^(c)(λ) = b(λ)/a(λ)` for real `λ`.
pub fn continuous_amplitude(signal: &Signal, lambda: f64, scheme: Scheme) -> Result<Complex64> {
    let lambda_c = Complex64::new(lambda, 0.0);
    let c = ScatteringProblem::new(signal, scheme).coefficients(lambda_c)?;
    if c.a.norm() < CONTINUOUS_A_FLOOR {
        return Err(Error::NearSingular {
            lambda: lambda_c,
            magnitude: c.a.norm(),
        });
    }
    Ok(c.b / c.a)
}

#[cfg(test)]
mod tests;
