//! Derived observables and inverse problems.

mod fit;
pub mod lm;
mod lorentzian;
mod shift;

use thiserror::Error;

use crate::constants::PhysicalConstants;
use crate::model::{Level, ModelError, ModelParams};
use crate::spectrum::SpectrumError;

pub use fit::{default_bounds, fit_model, model_rates, Bounds, FitOptions, FitParam, FitResult};
pub use lorentzian::{lorentzian, lorentzian_fit, lorentzian_fit_window, LorentzianFit};
pub use shift::{linear_regression, params_at_intensity, shift_scan, LinearFit, QScaling, ShiftScan, ShiftScanOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("no peak: {0}")]
    NoPeak(String),
    #[error("Lorentzian fit did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("fit did not converge after {} iterations (residual {:e})", best.iterations, best.residual_norm)]
    FitNonConvergence { best: Box<FitResult> },
    #[error("parameter `{param}` has no effect on the residuals")]
    DegenerateJacobian { param: FitParam },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("at intensity index {index}: {source}")]
    AtIntensity {
        index: usize,
        #[source]
        source: Box<AnalysisError>,
    },
}

/// Canonical Fano lineshape (ε + q)²/(ε² + 1).
pub fn canonical_fano(eps: f64, q: f64) -> f64 {
    (eps + q).powi(2) / (eps * eps + 1.0)
}

/// Field of the single-resonance Fano minimum ε = −q_n, evaluated at the
/// representative collision energy k_BT.
pub fn fano_minimum_field(params: &ModelParams, level: Level) -> f64 {
    let e = PhysicalConstants::cesium().thermal_energy_mhz(params.temperature);
    fano_minimum_field_at(params, level, e)
}

/// Field where ε(B) = −q_n at collision energy `collision_e` (MHz).
pub fn fano_minimum_field_at(params: &ModelParams, level: Level, collision_e: f64) -> f64 {
    field_at_reduced_energy(params, -params.q(level), collision_e)
}

/// Field B at which the reduced energy equals `eps` for collision energy
/// `collision_e`.
pub fn field_at_reduced_energy(params: &ModelParams, eps: f64, collision_e: f64) -> f64 {
    params.b0 + (collision_e - 0.5 * eps * params.gamma_f) / params.dmu
}
