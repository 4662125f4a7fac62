//! Forward and inverse engine for photoassociation loss spectra shaped by two
//! interfering Fano resonances near a magnetic Feshbach resonance.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod constants;
pub mod io;
pub mod model;
pub mod quadrature;
pub mod spectrum;
pub mod trap;

pub use constants::PhysicalConstants;
pub use model::{Complex, DressedAmplitudes, Level, ModelError, ModelParams};
pub use quadrature::{QuadratureConfig, QuadratureScheme};
pub use spectrum::{AxisKind, Spectrum, SpectrumError};
