//! JSON run configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{Bounds, FitParam, QScaling, ShiftScanOptions};
use crate::model::{ModelError, ModelParams};
use crate::quadrature::QuadratureConfig;
use crate::spectrum::uniform_grid;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: PathBuf, line: usize, column: usize, message: String },
    #[error("invalid value for `{field}`: {reason}")]
    Validation { field: String, reason: String },
}

impl ConfigError {
    fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Validation { field: field.into(), reason: reason.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        uniform_grid(self.start, self.stop, self.count)
    }

    fn validate(&self, field: &str) -> Result<(), ConfigError> {
        if self.count < 2 {
            return Err(ConfigError::validation(format!("{field}.count"), "must be >= 2"));
        }
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(ConfigError::validation(field, "bounds must be finite"));
        }
        if !(self.start < self.stop) {
            return Err(ConfigError::validation(field, "start must be < stop"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    /// Magnetic field grid (G).
    pub field: Option<GridSpec>,
    /// Laser detuning offsets (MHz).
    pub detuning: Option<GridSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub free: Vec<FitParam>,
    #[serde(default)]
    pub bounds: BTreeMap<FitParam, [f64; 2]>,
    /// Starting values overriding the model section.
    #[serde(default)]
    pub initial: BTreeMap<FitParam, f64>,
    #[serde(default)]
    pub max_iterations: Option<usize>,
}

impl FitConfig {
    pub fn bounds(&self) -> Bounds {
        self.bounds.iter().map(|(k, v)| (*k, (v[0], v[1]))).collect()
    }

    pub fn initial_params(&self, model: &ModelParams) -> ModelParams {
        let mut p = model.clone();
        for (name, &v) in &self.initial {
            name.set(&mut p, v);
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftScanConfig {
    /// Laser intensities (W/cm²).
    pub intensities: Vec<f64>,
    #[serde(default)]
    pub q_scaling: QScaling,
    /// Bare light shift per level (MHz per W/cm²).
    #[serde(default)]
    pub light_shift: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayConfig {
    /// Initial density (cm⁻³); alternatively `atom_number` with `effective_volume`.
    #[serde(default)]
    pub n0: Option<f64>,
    #[serde(default)]
    pub atom_number: Option<f64>,
    /// Effective trap volume (cm³).
    #[serde(default)]
    pub effective_volume: Option<f64>,
    /// Rate coefficient (cm³/s); computed from the model at `fixed_b` when absent.
    #[serde(default)]
    pub k_av: Option<f64>,
    pub t_max: f64,
    pub count: usize,
    #[serde(default)]
    pub noise_rel: f64,
}

impl DecayConfig {
    pub fn initial_density(&self) -> f64 {
        match (self.n0, self.atom_number, self.effective_volume) {
            (Some(n0), _, _) => n0,
            (None, Some(n), Some(v)) => n / v,
            _ => f64::NAN,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoConfig {
    /// Input spectrum for `fit`.
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub grids: Grids,
    /// Field for detuning sweeps, shift scans and decay runs (G).
    #[serde(default)]
    pub fixed_b: Option<f64>,
    #[serde(default)]
    pub fit: Option<FitConfig>,
    #[serde(default)]
    pub shift_scan: Option<ShiftScanConfig>,
    #[serde(default)]
    pub decay: Option<DecayConfig>,
    #[serde(default)]
    pub io: IoConfig,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn shift_options(&self) -> ShiftScanOptions {
        let scan = self.shift_scan.clone();
        ShiftScanOptions {
            q_scaling: scan.as_ref().map(|s| s.q_scaling).unwrap_or_default(),
            light_shift: scan.map(|s| s.light_shift).unwrap_or([0.0; 2]),
            quadrature: self.quadrature,
        }
    }

    /// Checks every invariant, naming the offending field.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.model.validate().map_err(|e| match e {
            ModelError::InvalidParameter { field, reason } => {
                ConfigError::validation(format!("model.{field}"), reason)
            }
            other => ConfigError::validation("model", other.to_string()),
        })?;
        self.quadrature
            .validate()
            .map_err(|e| ConfigError::validation("quadrature", e.to_string()))?;
        if let Some(g) = &self.grids.field {
            g.validate("grids.field")?;
        }
        if let Some(g) = &self.grids.detuning {
            g.validate("grids.detuning")?;
        }
        if let Some(b) = self.fixed_b {
            if !b.is_finite() {
                return Err(ConfigError::validation("fixed_b", "must be finite"));
            }
        }
        if let Some(fit) = &self.fit {
            for (name, [lo, hi]) in &fit.bounds {
                if !(lo <= hi) {
                    return Err(ConfigError::validation(format!("fit.bounds.{name}"), "lower bound exceeds upper"));
                }
            }
            for (name, v) in &fit.initial {
                if !v.is_finite() {
                    return Err(ConfigError::validation(format!("fit.initial.{name}"), "must be finite"));
                }
            }
        }
        if let Some(scan) = &self.shift_scan {
            if scan.intensities.len() < 2 {
                return Err(ConfigError::validation("shift_scan.intensities", "need at least two values"));
            }
            if scan.intensities.iter().any(|&i| !(i > 0.0)) {
                return Err(ConfigError::validation("shift_scan.intensities", "must be positive"));
            }
            if scan.intensities.windows(2).any(|w| w[1] <= w[0]) {
                return Err(ConfigError::validation("shift_scan.intensities", "must be strictly increasing"));
            }
        }
        if let Some(decay) = &self.decay {
            let n0 = decay.initial_density();
            if !(n0 > 0.0 && n0.is_finite()) {
                return Err(ConfigError::validation(
                    "decay.n0",
                    "give n0 > 0 or atom_number and effective_volume > 0",
                ));
            }
            if let Some(k) = decay.k_av {
                if !(k >= 0.0 && k.is_finite()) {
                    return Err(ConfigError::validation("decay.k_av", "must be >= 0"));
                }
            }
            if !(decay.t_max > 0.0 && decay.t_max.is_finite()) {
                return Err(ConfigError::validation("decay.t_max", "must be > 0"));
            }
            if decay.count < 3 {
                return Err(ConfigError::validation("decay.count", "must be >= 3"));
            }
            if !(decay.noise_rel >= 0.0 && decay.noise_rel.is_finite()) {
                return Err(ConfigError::validation("decay.noise_rel", "must be >= 0"));
            }
        }
        if let Some(input) = &self.io.input {
            if !input.exists() {
                return Err(ConfigError::validation("io.input", format!("{} does not exist", input.display())));
            }
        }
        Ok(())
    }
}

/// Parses and validates a run configuration. Relative `io` paths resolve
/// against the configuration file's directory.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    let mut config = parse_config(&text).map_err(|e| match e {
        ConfigError::Parse { line, column, message, .. } => {
            ConfigError::Parse { path: path.to_path_buf(), line, column, message }
        }
        other => other,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    for slot in [&mut config.io.input, &mut config.io.output] {
        if let Some(p) = slot.as_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
    config.validate()?;
    Ok(config)
}

/// Parses a configuration without validating it.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        path: PathBuf::new(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}
