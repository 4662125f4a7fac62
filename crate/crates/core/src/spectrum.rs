//! Decay S-matrix, per-energy and thermally averaged loss rates, and sweeps
//! over magnetic field or laser detuning.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::PhysicalConstants;
use crate::model::{self, Complex, DressedAmplitudes, Level, ModelError, ModelParams};
use crate::quadrature::{boltzmann_integral, QuadratureConfig, QuadratureError};

/// |S|² above 1 by more than this is reported as an error.
pub const UNITARITY_ERROR: f64 = 1e-6;
/// |S|² above 1 by more than this is logged.
pub const UNITARITY_WARN: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("|S|^2 = {s_squared} exceeds the unitarity limit")]
    UnitarityViolation { s_squared: f64 },
    #[error("collision energy must be > 0 MHz, got {0}")]
    InvalidEnergy(f64),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),
    #[error("at grid point {index}: {source}")]
    AtGridPoint {
        index: usize,
        #[source]
        source: Box<SpectrumError>,
    },
}

impl SpectrumError {
    /// The underlying error with grid annotations removed.
    pub fn root(&self) -> &SpectrumError {
        match self {
            SpectrumError::AtGridPoint { source, .. } => source.root(),
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AxisKind {
    FieldSweep,
    DetuningSweep,
}

impl AxisKind {
    pub fn unit(self) -> &'static str {
        match self {
            AxisKind::FieldSweep => "G",
            AxisKind::DetuningSweep => "MHz",
        }
    }
}

/// Sampled loss-rate curve. Rates in cm³/s.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub axis_kind: AxisKind,
    pub axis: Vec<f64>,
    pub rates: Vec<f64>,
    pub meta: Option<ModelParams>,
}

impl Spectrum {
    pub fn new(
        axis_kind: AxisKind,
        axis: Vec<f64>,
        rates: Vec<f64>,
        meta: Option<ModelParams>,
    ) -> Result<Self, SpectrumError> {
        if axis.len() != rates.len() {
            return Err(SpectrumError::InvalidSpectrum(format!(
                "axis has {} points, rates {}",
                axis.len(),
                rates.len()
            )));
        }
        check_increasing(&axis)?;
        if let Some(i) = rates.iter().position(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(SpectrumError::InvalidSpectrum(format!("rate {} at index {i} is not finite and >= 0", rates[i])));
        }
        Ok(Self { axis_kind, axis, rates, meta })
    }

    pub fn len(&self) -> usize {
        self.axis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axis.is_empty()
    }

    pub fn argmax(&self) -> Option<usize> {
        argext(&self.rates, |a, b| a > b)
    }

    pub fn argmin(&self) -> Option<usize> {
        argext(&self.rates, |a, b| a < b)
    }

    /// Interior indices that rise from the left and do not fall to the right.
    pub fn local_maxima(&self) -> Vec<usize> {
        (1..self.len().saturating_sub(1))
            .filter(|&i| self.rates[i] > self.rates[i - 1] && self.rates[i] >= self.rates[i + 1])
            .collect()
    }

    pub fn local_minima(&self) -> Vec<usize> {
        (1..self.len().saturating_sub(1))
            .filter(|&i| self.rates[i] < self.rates[i - 1] && self.rates[i] <= self.rates[i + 1])
            .collect()
    }
}

fn argext(v: &[f64], better: impl Fn(f64, f64) -> bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &x) in v.iter().enumerate() {
        if best.is_none_or(|b| better(x, v[b])) {
            best = Some(i);
        }
    }
    best
}

pub(crate) fn check_increasing(axis: &[f64]) -> Result<(), SpectrumError> {
    if axis.is_empty() {
        return Err(SpectrumError::InvalidGrid("grid is empty".into()));
    }
    if let Some(i) = axis.iter().position(|x| !x.is_finite()) {
        return Err(SpectrumError::InvalidGrid(format!("non-finite value at index {i}")));
    }
    if let Some(i) = axis.windows(2).position(|w| w[1] <= w[0]) {
        return Err(SpectrumError::InvalidGrid(format!(
            "not strictly increasing at index {}: {} then {}",
            i + 1,
            axis[i],
            axis[i + 1]
        )));
    }
    Ok(())
}

/// `count` evenly spaced points from `start` to `stop` inclusive.
pub fn uniform_grid(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / (count - 1) as f64;
            (0..count)
                .map(|i| if i == count - 1 { stop } else { start + step * i as f64 })
                .collect()
        }
    }
}

/// Decay-channel S-matrix element S = −2πi Σ V_n,art A_n.
pub fn s_decay(amps: &DressedAmplitudes, params: &ModelParams) -> Result<Complex, SpectrumError> {
    let couplings = model::s_wave_couplings(params);
    let sum: Complex = Level::BOTH.iter().map(|&l| couplings.v_art(l) * amps.a(l)).sum();
    let s = Complex::new(0.0, -2.0 * PI) * sum;
    let s2 = s.norm_sqr();
    if s2 > 1.0 + UNITARITY_ERROR {
        return Err(SpectrumError::UnitarityViolation { s_squared: s2 });
    }
    if s2 > 1.0 + UNITARITY_WARN {
        log::warn!("|S|^2 = {s2} exceeds 1 beyond round-off");
    }
    Ok(s)
}

/// |S_decay|² at collision energy `collision_e` (MHz) and field `b_field` (G).
pub fn decay_probability(collision_e: f64, b_field: f64, params: &ModelParams) -> Result<f64, SpectrumError> {
    let e_c = model::closed_channel_energy(b_field, params);
    let eps = model::reduced_energy(collision_e, e_c, 0.0, params.gamma_f)?;
    let amps = model::dressed_amplitudes(eps, collision_e, params)?;
    Ok(s_decay(&amps, params)?.norm_sqr())
}

/// K_E = (πħ/μk)|S|² in cm³/s.
pub fn loss_rate_at_energy(collision_e: f64, b_field: f64, params: &ModelParams) -> Result<f64, SpectrumError> {
    if !(collision_e > 0.0) {
        return Err(SpectrumError::InvalidEnergy(collision_e));
    }
    let s2 = decay_probability(collision_e, b_field, params)?;
    Ok(PhysicalConstants::cesium().unit_loss_rate(collision_e) * s2)
}

/// Resonant part of the thermal rate for an arbitrary |S(E)|², in cm³/s.
pub fn thermal_rate_from_probability(
    probability: impl FnMut(f64) -> Result<f64, SpectrumError>,
    temperature: f64,
    quad: &QuadratureConfig,
) -> Result<f64, SpectrumError> {
    let constants = PhysicalConstants::cesium();
    let kt = constants.thermal_energy_mhz(temperature);
    let integral = boltzmann_integral(probability, kt, quad)?;
    Ok(constants.boltzmann_prefactor(temperature) * integral)
}

/// Thermally averaged loss rate K_av^res + k_bg at `b_field`.
pub fn thermal_average(b_field: f64, params: &ModelParams, quad: &QuadratureConfig) -> Result<f64, SpectrumError> {
    let resonant =
        thermal_rate_from_probability(|e| decay_probability(e, b_field, params), params.temperature, quad)?;
    Ok(resonant + params.k_bg)
}

/// Slowly-varying approximation k_BT/(hQ_T)|S(E_eval)|² + k_bg.
pub fn approx_thermal(b_field: f64, collision_e_eval: f64, params: &ModelParams) -> Result<f64, SpectrumError> {
    if !(collision_e_eval > 0.0) {
        return Err(SpectrumError::InvalidEnergy(collision_e_eval));
    }
    let s2 = decay_probability(collision_e_eval, b_field, params)?;
    Ok(PhysicalConstants::cesium().constant_s_rate(params.temperature) * s2 + params.k_bg)
}

fn sweep(
    grid: &[f64],
    eval: impl Fn(f64) -> Result<f64, SpectrumError> + Sync,
) -> Result<Vec<f64>, SpectrumError> {
    check_increasing(grid)?;
    let rates: Vec<Result<f64, SpectrumError>> = grid.par_iter().map(|&x| eval(x)).collect();
    rates
        .into_iter()
        .enumerate()
        .map(|(index, r)| r.map_err(|e| SpectrumError::AtGridPoint { index, source: Box::new(e) }))
        .collect()
}

/// Thermal-average spectrum over a field grid with the detunings held at
/// `fixed_detunings`.
pub fn sweep_field(
    b_grid: &[f64],
    fixed_detunings: (f64, f64),
    params: &ModelParams,
    quad: &QuadratureConfig,
) -> Result<Spectrum, SpectrumError> {
    let p = ModelParams { detuning_1: fixed_detunings.0, detuning_2: fixed_detunings.1, ..params.clone() };
    let rates = sweep(b_grid, |b| thermal_average(b, &p, quad))?;
    Spectrum::new(AxisKind::FieldSweep, b_grid.to_vec(), rates, Some(p))
}

/// Thermal-average spectrum over a laser-detuning grid at field `fixed_b`.
///
/// Each grid value offsets both detunings rigidly from those in `params`.
pub fn sweep_detuning(
    delta_grid: &[f64],
    fixed_b: f64,
    params: &ModelParams,
    quad: &QuadratureConfig,
) -> Result<Spectrum, SpectrumError> {
    let rates = sweep(delta_grid, |d| thermal_average(fixed_b, &params.shifted_detunings(d), quad))?;
    Spectrum::new(AxisKind::DetuningSweep, delta_grid.to_vec(), rates, Some(params.clone()))
}
