//! Simulation and spectral analysis of matrix-valued processes whose entries
//! solve SDEs driven by fractional Brownian motion.
//!
//! The pipeline runs from exact fractional Gaussian noise
//! ([`fractional_noise`]) through pathwise integration ([`pathwise_sde`]) and
//! matrix assembly ([`ensembles`]) to eigenvalues and distances to limit laws
//! ([`spectra`], [`laws`]) and Stieltjes-transform diagnostics
//! ([`stieltjes`]). [`harness`] wires everything into reproducible runs.

pub mod dump;
pub mod ensembles;
pub mod error;
pub mod fractional_noise;
pub mod harness;
pub mod laws;
pub mod matrix;
pub mod pathwise_sde;
pub mod quadrature;
pub mod rng;
pub mod spectra;
pub mod stieltjes;

pub use error::{Result, SpectralError};
