use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{lorentzian_fit, AnalysisError, LorentzianFit};
use crate::model::{forward_q, Level, ModelParams};
use crate::quadrature::QuadratureConfig;
use crate::spectrum::sweep_detuning;

/// How the Fano q parameters respond to the laser intensity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum QScaling {
    /// q_n held at its configured value.
    #[default]
    Fixed,
    /// q_n rebuilt from the bound-bound Rabi coupling Ω_n and the
    /// continuum-mediated coupling V_n,eff, both quoted at the reference
    /// intensity and scaled as √I.
    Rabi { omega: [f64; 2], v_eff: [f64; 2] },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShiftScanOptions {
    pub q_scaling: QScaling,
    /// Static light shift of each excited level in MHz per W/cm², taken
    /// relative to the reference intensity. It enters the detuning with the
    /// same sign as the Fano level shift, so the resonance moves by +κ per
    /// unit intensity.
    pub light_shift: [f64; 2],
    pub quadrature: QuadratureConfig,
}

impl Default for ShiftScanOptions {
    fn default() -> Self {
        Self { q_scaling: QScaling::Fixed, light_shift: [0.0; 2], quadrature: QuadratureConfig::default() }
    }
}

/// Peak position versus intensity and its linear slope.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftScan {
    pub intensities: Vec<f64>,
    pub peak_positions: Vec<f64>,
    pub slope: f64,
    pub slope_sigma: f64,
    pub fits: Vec<LorentzianFit>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_sigma: f64,
    pub residual_norm: f64,
}

/// Ordinary least-squares line through `(x, y)`.
pub fn linear_regression(x: &[f64], y: &[f64]) -> Result<LinearFit, AnalysisError> {
    let n = x.len();
    if n != y.len() || n < 2 {
        return Err(AnalysisError::InvalidInput("regression needs >= 2 paired points".into()));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(AnalysisError::InvalidInput("regression abscissae are all equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_sigma = if n > 2 { (ssr / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(LinearFit { slope, intercept, slope_sigma, residual_norm: ssr.sqrt() })
}

/// Model parameters at laser intensity `intensity` (W/cm²).
///
/// Stimulated widths scale linearly with intensity.
pub fn params_at_intensity(
    params: &ModelParams,
    intensity: f64,
    options: &ShiftScanOptions,
) -> Result<ModelParams, AnalysisError> {
    let ratio = intensity / params.intensity_ref;
    let mut p = params.clone();
    p.gamma_1 *= ratio;
    p.gamma_2 *= ratio;
    let extra = intensity - params.intensity_ref;
    p.detuning_1 -= options.light_shift[0] * extra;
    p.detuning_2 -= options.light_shift[1] * extra;
    if let QScaling::Rabi { omega, v_eff } = options.q_scaling {
        let root = ratio.sqrt();
        for (k, level) in Level::BOTH.into_iter().enumerate() {
            let g = p.gamma(level);
            if g > 0.0 {
                let q = forward_q(omega[k] * root, v_eff[k] * root, g, p.gamma_f)?;
                match level {
                    Level::One => p.q_1 = q,
                    Level::Two => p.q_2 = q,
                }
            }
        }
    }
    Ok(p)
}

/// Scans the Lorentzian peak of detuning spectra at `fixed_b` over the
/// given intensities and regresses the peak position on intensity.
pub fn shift_scan(
    params: &ModelParams,
    intensities: &[f64],
    fixed_b: f64,
    delta_grid: &[f64],
    options: &ShiftScanOptions,
) -> Result<ShiftScan, AnalysisError> {
    if intensities.len() < 2 {
        return Err(AnalysisError::InvalidInput("need at least two intensities".into()));
    }
    if intensities.iter().any(|&i| !(i > 0.0)) {
        return Err(AnalysisError::InvalidInput("intensities must be positive".into()));
    }
    if intensities.windows(2).any(|w| w[1] <= w[0]) {
        return Err(AnalysisError::InvalidInput("intensities must be strictly increasing".into()));
    }
    let fits: Vec<Result<LorentzianFit, AnalysisError>> = intensities
        .par_iter()
        .map(|&intensity| {
            let p = params_at_intensity(params, intensity, options)?;
            let spec = sweep_detuning(delta_grid, fixed_b, &p, &options.quadrature)?;
            lorentzian_fit(&spec)
        })
        .collect();
    let fits = fits
        .into_iter()
        .enumerate()
        .map(|(index, r)| r.map_err(|e| AnalysisError::AtIntensity { index, source: Box::new(e) }))
        .collect::<Result<Vec<_>, _>>()?;
    let peak_positions: Vec<f64> = fits.iter().map(|f| f.center).collect();
    let line = linear_regression(intensities, &peak_positions)?;
    Ok(ShiftScan {
        intensities: intensities.to_vec(),
        peak_positions,
        slope: line.slope,
        slope_sigma: line.slope_sigma,
        fits,
    })
}
