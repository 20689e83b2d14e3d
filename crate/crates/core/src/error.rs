use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("scattering range error at λ = {lambda}: {detail}")]
    Range { lambda: Complex64, detail: String },

    #[error("degenerate root at λ = {lambda}: |a'(λ)| = {magnitude:e} is below the noise floor")]
    DegenerateRoot { lambda: Complex64, magnitude: f64 },

    #[error("near-singular scattering coefficient: |a(λ)| = {magnitude:e} at λ = {lambda}")]
    NearSingular { lambda: Complex64, magnitude: f64 },

    #[error("ill-conditioned soliton prescription: {0}")]
    IllConditioned(String),

    #[error("projection onto a zero signal is undefined")]
    ZeroSignal,

    #[error("numerical blow-up during propagation at z = {z}")]
    NumericalBlowup { z: f64 },

    #[error("degenerate ensemble: {0}")]
    DegenerateEnsemble(String),

    #[error("covariance matrix is singular (det = {det:e}); Mahalanobis metric unavailable")]
    SingularCovariance { det: f64 },

    #[error("{excluded} of {total} runs excluded (limit {limit:.1}%): {reason}")]
    ExcessExclusions {
        excluded: usize,
        total: usize,
        limit: f64,
        reason: String,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
