use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::lm::{levenberg_marquardt, LmConfig, LmError, LmOutcome, Problem};
use super::AnalysisError;
use crate::model::ModelParams;
use crate::quadrature::QuadratureConfig;
use crate::spectrum::{thermal_average, AxisKind, Spectrum, SpectrumError};

/// Model parameters that may be released in a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FitParam {
    #[serde(rename = "q_1")]
    Q1,
    #[serde(rename = "q_2")]
    Q2,
    #[serde(rename = "gamma_1")]
    Gamma1,
    #[serde(rename = "gamma_2")]
    Gamma2,
    #[serde(rename = "k_bg")]
    KBg,
    #[serde(rename = "detuning_1")]
    Detuning1,
    #[serde(rename = "detuning_2")]
    Detuning2,
    #[serde(rename = "dmu")]
    Dmu,
    #[serde(rename = "b0")]
    B0,
}

impl FitParam {
    pub const ALL: [FitParam; 9] = [
        FitParam::Q1,
        FitParam::Q2,
        FitParam::Gamma1,
        FitParam::Gamma2,
        FitParam::KBg,
        FitParam::Detuning1,
        FitParam::Detuning2,
        FitParam::Dmu,
        FitParam::B0,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FitParam::Q1 => "q_1",
            FitParam::Q2 => "q_2",
            FitParam::Gamma1 => "gamma_1",
            FitParam::Gamma2 => "gamma_2",
            FitParam::KBg => "k_bg",
            FitParam::Detuning1 => "detuning_1",
            FitParam::Detuning2 => "detuning_2",
            FitParam::Dmu => "dmu",
            FitParam::B0 => "b0",
        }
    }

    pub fn get(self, p: &ModelParams) -> f64 {
        match self {
            FitParam::Q1 => p.q_1,
            FitParam::Q2 => p.q_2,
            FitParam::Gamma1 => p.gamma_1,
            FitParam::Gamma2 => p.gamma_2,
            FitParam::KBg => p.k_bg,
            FitParam::Detuning1 => p.detuning_1,
            FitParam::Detuning2 => p.detuning_2,
            FitParam::Dmu => p.dmu,
            FitParam::B0 => p.b0,
        }
    }

    pub fn set(self, p: &mut ModelParams, value: f64) {
        let slot = match self {
            FitParam::Q1 => &mut p.q_1,
            FitParam::Q2 => &mut p.q_2,
            FitParam::Gamma1 => &mut p.gamma_1,
            FitParam::Gamma2 => &mut p.gamma_2,
            FitParam::KBg => &mut p.k_bg,
            FitParam::Detuning1 => &mut p.detuning_1,
            FitParam::Detuning2 => &mut p.detuning_2,
            FitParam::Dmu => &mut p.dmu,
            FitParam::B0 => &mut p.b0,
        };
        *slot = value;
    }
}

impl fmt::Display for FitParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub type Bounds = BTreeMap<FitParam, (f64, f64)>;

/// Linewidths and background non-negative, |q| ≤ 10³, everything else free.
pub fn default_bounds(param: FitParam) -> (f64, f64) {
    match param {
        FitParam::Gamma1 | FitParam::Gamma2 | FitParam::KBg => (0.0, f64::INFINITY),
        FitParam::Q1 | FitParam::Q2 => (-1e3, 1e3),
        _ => (f64::NEG_INFINITY, f64::INFINITY),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub quadrature: QuadratureConfig,
    /// Field of a detuning-sweep data set (G).
    pub fixed_b: Option<f64>,
    pub lm: LmConfig,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { quadrature: QuadratureConfig::default(), fixed_b: None, lm: LmConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub names: Vec<FitParam>,
    pub values: Vec<f64>,
    pub sigma: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Residual norm at the start and after each accepted step.
    pub history: Vec<f64>,
    pub params: ModelParams,
}

impl FitResult {
    pub fn value(&self, param: FitParam) -> Option<f64> {
        self.names.iter().position(|&p| p == param).map(|i| self.values[i])
    }
}

/// Forward-model rates on the axis of `data`, evaluated in axis order.
pub fn model_rates(
    kind: AxisKind,
    axis: &[f64],
    fixed_b: Option<f64>,
    params: &ModelParams,
    quad: &QuadratureConfig,
) -> Result<Vec<f64>, SpectrumError> {
    match kind {
        AxisKind::FieldSweep => axis.iter().map(|&b| thermal_average(b, params, quad)).collect(),
        AxisKind::DetuningSweep => {
            let b = fixed_b.ok_or_else(|| SpectrumError::InvalidGrid("detuning data needs a fixed field".into()))?;
            axis.iter().map(|&d| thermal_average(b, &params.shifted_detunings(d), quad)).collect()
        }
    }
}

/// Damped least-squares fit of the free parameters to a measured spectrum.
pub fn fit_model(
    data: &Spectrum,
    initial: &ModelParams,
    free: &[FitParam],
    bounds: &Bounds,
    options: &FitOptions,
) -> Result<FitResult, AnalysisError> {
    initial.validate()?;
    let mut names: Vec<FitParam> = free.to_vec();
    names.sort();
    names.dedup();
    if data.axis_kind == AxisKind::DetuningSweep && options.fixed_b.is_none() {
        return Err(AnalysisError::InvalidInput("detuning data needs a fixed field".into()));
    }

    let residuals = |p: &ModelParams| -> Result<Vec<f64>, SpectrumError> {
        let model = model_rates(data.axis_kind, &data.axis, options.fixed_b, p, &options.quadrature)?;
        Ok(model.iter().zip(&data.rates).map(|(m, d)| m - d).collect())
    };

    if names.is_empty() {
        let r = residuals(initial)?;
        let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        return Ok(FitResult {
            names,
            values: Vec::new(),
            sigma: Vec::new(),
            residual_norm: norm,
            iterations: 0,
            converged: true,
            history: vec![norm],
            params: initial.clone(),
        });
    }

    let x0: Vec<f64> = names.iter().map(|p| p.get(initial)).collect();
    let (lower, upper): (Vec<f64>, Vec<f64>) = names
        .iter()
        .map(|p| bounds.get(p).copied().unwrap_or_else(|| default_bounds(*p)))
        .unzip();
    let data_scale = data.rates.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let scale: Vec<f64> = names
        .iter()
        .map(|p| match p {
            FitParam::KBg => 1e-3 * data_scale,
            FitParam::Dmu | FitParam::B0 => 1e-3,
            _ => 1e-2,
        })
        .collect();

    let unpack = |x: &[f64]| {
        let mut p = initial.clone();
        for (name, &v) in names.iter().zip(x) {
            name.set(&mut p, v);
        }
        p
    };
    let problem = Problem { x0: &x0, lower: &lower, upper: &upper, scale: &scale };
    let finish = |out: LmOutcome| FitResult {
        params: unpack(&out.x),
        names: names.clone(),
        values: out.x,
        sigma: out.sigma,
        residual_norm: out.residual_norm,
        iterations: out.iterations,
        converged: out.converged,
        history: out.history,
    };
    match levenberg_marquardt(|x| residuals(&unpack(x)), &problem, &options.lm) {
        Ok(out) => Ok(finish(out)),
        Err(LmError::NonConvergence(best)) => Err(AnalysisError::FitNonConvergence { best: Box::new(finish(*best)) }),
        Err(LmError::DegenerateJacobian { index }) => Err(AnalysisError::DegenerateJacobian { param: names[index] }),
        Err(LmError::Residual(e)) => Err(e.into()),
    }
}
