//! Quantum sawtooth map on a simulated register: gate-level compilation,
//! static hardware imperfections, Floquet spectra, level-spacing statistics
//! and eigenstate diagnostics.

pub mod eigenstates;
pub mod error;
pub mod floquet;
pub mod harness;
pub mod imperfections;
pub mod qcore;
pub mod sawtooth;
pub mod seeds;
pub mod spectral;

pub use error::{Error, Result};
