//! Numerical toolkit for discrete-eigenvalue noise studies of the focusing
//! nonlinear Schrödinger channel.
//!
//! * [`nft`] solves the Zakharov-Shabat scattering problem on sampled signals
//!   (forward-difference and Ablowitz-Ladik discretizations), finds discrete
//!   eigenvalues and spectral amplitudes.
//! * [`soliton`] synthesizes multi-solitons by Darboux transformation and
//!   evolves spectral data analytically.
//! * [`nlse`] propagates the normalized stochastic NLSE with a symmetric
//!   split-step Fourier scheme and maps physical units.
//! * [`noise`] holds the eigenvalue-perturbation models: segment decoupling,
//!   scaling/residual decomposition and the transceiver noise taxonomy.
//! * [`stats`] provides ensemble statistics and maximum-likelihood decoding.
//!
//! Time is normalized so that `A·sech(t)` has eigenvalues `(A − ½ − k)j`.

pub mod error;
pub mod grid;
pub mod nft;
pub mod nlse;
pub mod noise;
pub mod rng;
pub mod soliton;
pub mod stats;

pub use error::{Error, Result};
pub use grid::{Signal, TimeGrid};
pub use num_complex::Complex64;
