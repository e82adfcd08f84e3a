//! Numerical experiments on the convergence rate of fractional Schrödinger
//! propagators `e^{it(-Δ)^{a/2}}` for band-limited initial data.

pub mod error;
mod oscillatory;
pub mod cli;
pub mod counterexample;
pub mod maximal;
pub mod propagator;
pub mod scaling;
pub mod spectral;
pub mod sum;

pub use error::{Error, Result};
pub use propagator::{EvolutionParams, FieldSample};
pub use spectral::{FrequencyGrid, SpectralProfile};
