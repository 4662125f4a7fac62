//! Dressed-continuum amplitude algebra for two excited molecular levels
//! coupled to one Feshbach closed-channel state, the s-wave ground continuum
//! and a radiative decay channel.
//!
//! All couplings are flat in energy. In that limit every continuum integral
//! collapses onto the Fano factor F_n = (ε + q_n)/(ε + i) and the whole
//! problem reduces to a 2×2 complex linear system for the excited-state
//! amplitudes.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::adaptive_simpson;

pub type Complex = Complex64;

const I: Complex = Complex::new(0.0, 1.0);

/// Smallest |𝒟_n| accepted before an evaluation is treated as a pole.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("singular denominator for level {level}: |D| = {magnitude:e}")]
    SingularDenominator { level: Level, magnitude: f64 },
    #[error("energy {energy} MHz outside coupling domain [{lo}, {hi}]")]
    DomainError { energy: f64, lo: f64, hi: f64 },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ModelError {
    ModelError::InvalidParameter { field, reason: reason.into() }
}

/// Excited molecular level index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Level {
    One,
    Two,
}

impl Level {
    pub const BOTH: [Level; 2] = [Level::One, Level::Two];

    pub fn other(self) -> Level {
        match self {
            Level::One => Level::Two,
            Level::Two => Level::One,
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Level::One => f.write_str("1"),
            Level::Two => f.write_str("2"),
        }
    }
}

fn default_intensity_ref() -> f64 {
    1.0
}

/// Physical inputs of the model.
///
/// Linewidths and detunings in MHz, field in G, `dmu` in MHz/G,
/// temperature in μK, `k_bg` in cm³/s, `intensity_ref` in W/cm².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub gamma_f: f64,
    pub gamma_1: f64,
    pub gamma_2: f64,
    pub gamma_sp_1: f64,
    pub gamma_sp_2: f64,
    pub q_1: f64,
    pub q_2: f64,
    pub detuning_1: f64,
    pub detuning_2: f64,
    pub b0: f64,
    pub dmu: f64,
    pub temperature: f64,
    #[serde(default)]
    pub k_bg: f64,
    #[serde(default = "default_intensity_ref")]
    pub intensity_ref: f64,
}

impl ModelParams {
    pub fn gamma(&self, level: Level) -> f64 {
        match level {
            Level::One => self.gamma_1,
            Level::Two => self.gamma_2,
        }
    }

    pub fn gamma_sp(&self, level: Level) -> f64 {
        match level {
            Level::One => self.gamma_sp_1,
            Level::Two => self.gamma_sp_2,
        }
    }

    pub fn q(&self, level: Level) -> f64 {
        match level {
            Level::One => self.q_1,
            Level::Two => self.q_2,
        }
    }

    pub fn detuning(&self, level: Level) -> f64 {
        match level {
            Level::One => self.detuning_1,
            Level::Two => self.detuning_2,
        }
    }

    /// A level with neither stimulated nor spontaneous width takes no part
    /// in the dynamics.
    pub fn is_switched_off(&self, level: Level) -> bool {
        self.gamma(level) == 0.0 && self.gamma_sp(level) == 0.0
    }

    /// Copy with the second level removed (Γ₂ = γ₂ = 0).
    pub fn single_resonance(&self) -> ModelParams {
        ModelParams { gamma_2: 0.0, gamma_sp_2: 0.0, ..self.clone() }
    }

    /// Copy with both detunings moved rigidly by `offset` MHz.
    pub fn shifted_detunings(&self, offset: f64) -> ModelParams {
        ModelParams {
            detuning_1: self.detuning_1 + offset,
            detuning_2: self.detuning_2 + offset,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("gamma_f", self.gamma_f),
            ("gamma_1", self.gamma_1),
            ("gamma_2", self.gamma_2),
            ("gamma_sp_1", self.gamma_sp_1),
            ("gamma_sp_2", self.gamma_sp_2),
            ("q_1", self.q_1),
            ("q_2", self.q_2),
            ("detuning_1", self.detuning_1),
            ("detuning_2", self.detuning_2),
            ("b0", self.b0),
            ("dmu", self.dmu),
            ("temperature", self.temperature),
            ("k_bg", self.k_bg),
            ("intensity_ref", self.intensity_ref),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(invalid(name, format!("must be finite, got {v}")));
            }
        }
        if self.gamma_f <= 0.0 {
            return Err(invalid("gamma_f", "must be > 0"));
        }
        if self.gamma_1 < 0.0 {
            return Err(invalid("gamma_1", "must be >= 0"));
        }
        if self.gamma_2 < 0.0 {
            return Err(invalid("gamma_2", "must be >= 0"));
        }
        // gamma_sp = 0 is only allowed together with gamma = 0 (level off)
        if self.gamma_sp_1 < 0.0 || (self.gamma_sp_1 == 0.0 && self.gamma_1 > 0.0) {
            return Err(invalid("gamma_sp_1", "must be > 0"));
        }
        if self.gamma_sp_2 < 0.0 || (self.gamma_sp_2 == 0.0 && self.gamma_2 > 0.0) {
            return Err(invalid("gamma_sp_2", "must be > 0"));
        }
        if self.dmu == 0.0 {
            return Err(invalid("dmu", "must be non-zero"));
        }
        if self.temperature <= 0.0 {
            return Err(invalid("temperature", "must be > 0"));
        }
        if self.k_bg < 0.0 {
            return Err(invalid("k_bg", "must be >= 0"));
        }
        if self.intensity_ref <= 0.0 {
            return Err(invalid("intensity_ref", "must be > 0"));
        }
        Ok(())
    }
}

/// Closed-channel energy E_c = δμ (B − B₀) in MHz.
pub fn closed_channel_energy(b_field: f64, params: &ModelParams) -> f64 {
    params.dmu * (b_field - params.b0)
}

/// Field at which the closed-channel energy equals `e_c`.
pub fn field_for_closed_channel_energy(e_c: f64, params: &ModelParams) -> f64 {
    params.b0 + e_c / params.dmu
}

/// Reduced energy ε = (E − E_c − E_c^shift)/(Γ_f/2).
pub fn reduced_energy(
    collision_e: f64,
    e_c: f64,
    e_c_shift: f64,
    gamma_f: f64,
) -> Result<f64, ModelError> {
    if !(gamma_f > 0.0) {
        return Err(invalid("gamma_f", "must be > 0"));
    }
    Ok((collision_e - e_c - e_c_shift) / (0.5 * gamma_f))
}

/// Energy-normalized flat s-wave couplings in √MHz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SWaveCouplings {
    pub v00: f64,
    pub lambda_1: f64,
    pub lambda_2: f64,
    pub v_art_1: f64,
    pub v_art_2: f64,
}

impl SWaveCouplings {
    pub fn lambda(&self, level: Level) -> f64 {
        match level {
            Level::One => self.lambda_1,
            Level::Two => self.lambda_2,
        }
    }

    pub fn v_art(&self, level: Level) -> f64 {
        match level {
            Level::One => self.v_art_1,
            Level::Two => self.v_art_2,
        }
    }
}

fn width_to_coupling(width: f64) -> f64 {
    (width / (2.0 * PI)).sqrt()
}

pub fn s_wave_couplings(params: &ModelParams) -> SWaveCouplings {
    SWaveCouplings {
        v00: width_to_coupling(params.gamma_f),
        lambda_1: width_to_coupling(params.gamma_1),
        lambda_2: width_to_coupling(params.gamma_2),
        v_art_1: width_to_coupling(params.gamma_sp_1),
        v_art_2: width_to_coupling(params.gamma_sp_2),
    }
}

/// Fano factor F = (ε + q)/(ε + i).
pub fn fano_factor(eps: f64, q: f64) -> Complex {
    fano_factor_with(eps, q, I)
}

fn fano_factor_with(eps: f64, q: f64, j: Complex) -> Complex {
    Complex::from(eps + q) / (eps + j)
}

/// Free-bound profile R_n = Λ_n F_n.
pub fn fano_profile_r(eps: f64, level: Level, params: &ModelParams) -> Complex {
    width_to_coupling(params.gamma(level)) * fano_factor(eps, params.q(level))
}

/// π Λ_n V = √(Γ_n Γ_f)/2.
fn free_bound_product(level: Level, params: &ModelParams) -> f64 {
    0.5 * (params.gamma(level) * params.gamma_f).sqrt()
}

/// Complex energy 𝓔_qn = (q_n − i)² Γ_n / (2(ε + i)) in MHz.
pub fn e_q_complex(eps: f64, level: Level, params: &ModelParams) -> Complex {
    e_q_with(eps, level, params, I)
}

fn e_q_with(eps: f64, level: Level, params: &ModelParams, j: Complex) -> Complex {
    let qm = params.q(level) - j;
    qm * qm * params.gamma(level) / (2.0 * (eps + j))
}

/// Interference-modified stimulated width Γ_qn = Γ_n − 2 Im 𝓔_qn.
pub fn stimulated_width(eps: f64, level: Level, params: &ModelParams) -> f64 {
    params.gamma(level) - 2.0 * e_q_complex(eps, level, params).im
}

/// Resonance-induced level shift E_qn^shift = Re 𝓔_qn.
pub fn level_shift(eps: f64, level: Level, params: &ModelParams) -> f64 {
    e_q_complex(eps, level, params).re
}

/// Cross couplings (Q₁₂, Q₂₁) between the excited levels, in MHz.
///
/// Includes the vacuum-induced term from the shared decay channel. The real
/// principal-value part is absorbed into the detunings.
pub fn cross_coupling(eps: f64, params: &ModelParams) -> (Complex, Complex) {
    let q = cross_with(eps, params, I);
    (q, q)
}

fn cross_with(eps: f64, params: &ModelParams, j: Complex) -> Complex {
    let stim = (params.gamma_1 * params.gamma_2).sqrt();
    let spont = (params.gamma_sp_1 * params.gamma_sp_2).sqrt();
    let direct = -j * 0.5 * (stim + spont);
    let via_resonance =
        (params.q_1 - j) * (params.q_2 - j) * stim / (2.0 * (eps + j));
    direct + via_resonance
}

/// Excited and closed-channel amplitudes with their intermediates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DressedAmplitudes {
    pub a_1: Complex,
    pub a_2: Complex,
    pub b_e: Complex,
    pub xi_1: Complex,
    pub xi_2: Complex,
    pub q_12: Complex,
    pub q_21: Complex,
    pub d_1: Complex,
    pub d_2: Complex,
    pub r_1: Complex,
    pub r_2: Complex,
}

impl DressedAmplitudes {
    pub fn a(&self, level: Level) -> Complex {
        match level {
            Level::One => self.a_1,
            Level::Two => self.a_2,
        }
    }
}

/// Solves the coupled amplitude equations at reduced energy `eps` and
/// collision energy `collision_e` (MHz).
pub fn dressed_amplitudes(
    eps: f64,
    collision_e: f64,
    params: &ModelParams,
) -> Result<DressedAmplitudes, ModelError> {
    assemble(eps, collision_e, params, I)
}

/// Same algebra with the imaginary unit replaced by `j` (±i).
pub(crate) fn assemble(
    eps: f64,
    collision_e: f64,
    params: &ModelParams,
    j: Complex,
) -> Result<DressedAmplitudes, ModelError> {
    let xi = |level: Level| {
        collision_e
            + params.detuning(level)
            + j * 0.5 * (params.gamma(level) + params.gamma_sp(level))
            - e_q_with(eps, level, params, j)
    };
    let r = |level: Level| {
        width_to_coupling(params.gamma(level)) * fano_factor_with(eps, params.q(level), j)
    };
    let (xi_1, xi_2) = (xi(Level::One), xi(Level::Two));
    let (r_1, r_2) = (r(Level::One), r(Level::Two));
    let q_12 = cross_with(eps, params, j);
    let q_21 = q_12;

    let zero = Complex::new(0.0, 0.0);
    let off_1 = params.is_switched_off(Level::One);
    let off_2 = params.is_switched_off(Level::Two);
    let check = |level: Level, d: Complex| {
        let magnitude = d.norm();
        if magnitude < DENOMINATOR_FLOOR || !magnitude.is_finite() {
            Err(ModelError::SingularDenominator { level, magnitude })
        } else {
            Ok(d)
        }
    };

    let (d_1, d_2, a_1, a_2) = match (off_1, off_2) {
        (true, true) => (xi_1, xi_2, zero, zero),
        (false, true) => {
            let d_1 = check(Level::One, xi_1)?;
            (d_1, xi_2, r_1 / d_1, zero)
        }
        (true, false) => {
            let d_2 = check(Level::Two, xi_2)?;
            (xi_1, d_2, zero, r_2 / d_2)
        }
        (false, false) => {
            let d_1 = check(Level::One, xi_1 - q_12 * q_21 / xi_2)?;
            let d_2 = check(Level::Two, xi_2 - q_21 * q_12 / xi_1)?;
            let a_1 = (r_1 + q_12 * r_2 / xi_2) / d_1;
            let a_2 = (r_2 + q_21 * r_1 / xi_1) / d_2;
            (d_1, d_2, a_1, a_2)
        }
    };

    let v00 = width_to_coupling(params.gamma_f);
    let feed: Complex = Level::BOTH
        .iter()
        .zip([a_1, a_2])
        .map(|(&level, a)| free_bound_product(level, params) * (params.q(level) - j) * a)
        .sum();
    let b_e = (v00 + feed) / (0.5 * params.gamma_f * (eps + j));

    Ok(DressedAmplitudes { a_1, a_2, b_e, xi_1, xi_2, q_12, q_21, d_1, d_2, r_1, r_2 })
}

/// Fano asymmetry q_n = (Ω_n + V_n,eff)/(√(Γ_n Γ_f)/2).
pub fn forward_q(omega_n: f64, v_eff: f64, gamma_n: f64, gamma_f: f64) -> Result<f64, ModelError> {
    if !(gamma_n > 0.0) {
        return Err(invalid("gamma_n", "must be > 0"));
    }
    if !(gamma_f > 0.0) {
        return Err(invalid("gamma_f", "must be > 0"));
    }
    Ok((omega_n + v_eff) / (0.5 * (gamma_n * gamma_f).sqrt()))
}

/// Real coupling strength as a function of collision energy on a closed
/// interval.
#[derive(Clone)]
pub struct CouplingProfile {
    lo: f64,
    hi: f64,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for CouplingProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CouplingProfile").field("lo", &self.lo).field("hi", &self.hi).finish()
    }
}

impl CouplingProfile {
    pub fn new(lo: f64, hi: f64, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        assert!(lo < hi, "empty coupling domain");
        Self { lo, hi, f: Arc::new(f) }
    }

    pub fn flat(value: f64, lo: f64, hi: f64) -> Self {
        Self::new(lo, hi, move |_| value)
    }

    /// Piecewise-linear interpolation through `(energy, value)` samples.
    pub fn sampled(energies: Vec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(energies.len(), values.len());
        assert!(energies.len() >= 2);
        assert!(energies.windows(2).all(|w| w[0] < w[1]), "energies must increase");
        let (lo, hi) = (energies[0], energies[energies.len() - 1]);
        Self::new(lo, hi, move |e| {
            let k = energies.partition_point(|&x| x <= e).clamp(1, energies.len() - 1);
            let (x0, x1) = (energies[k - 1], energies[k]);
            let t = (e - x0) / (x1 - x0);
            values[k - 1] + t * (values[k] - values[k - 1])
        })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn eval(&self, e: f64) -> f64 {
        (self.f)(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrincipalValueConfig {
    /// Excision half-width as a fraction of the common domain width.
    pub excision: f64,
    /// Absolute tolerance of each adaptive quadrature piece.
    pub tolerance: f64,
}

impl Default for PrincipalValueConfig {
    fn default() -> Self {
        Self { excision: 1e-10, tolerance: 1e-11 }
    }
}

/// 𝒫∫ dE' V(E')Λ(E')/(E − E') over the common domain of both profiles.
pub fn principal_value_coupling(
    v_profile: &CouplingProfile,
    lambda_profile: &CouplingProfile,
    e: f64,
) -> Result<f64, ModelError> {
    principal_value_coupling_with(v_profile, lambda_profile, e, PrincipalValueConfig::default())
}

pub fn principal_value_coupling_with(
    v_profile: &CouplingProfile,
    lambda_profile: &CouplingProfile,
    e: f64,
    config: PrincipalValueConfig,
) -> Result<f64, ModelError> {
    let lo = v_profile.lo.max(lambda_profile.lo);
    let hi = v_profile.hi.min(lambda_profile.hi);
    if !(e > lo && e < hi) {
        return Err(ModelError::DomainError { energy: e, lo, hi });
    }
    let g = |x: f64| v_profile.eval(x) * lambda_profile.eval(x);
    let eta = config.excision * (hi - lo);
    let near = (e - lo).min(hi - e);
    let tol = config.tolerance;
    let depth = 40;

    // Paired arms cancel the 1/s singularity: [g(e−s) − g(e+s)]/s.
    // Below s0 the integrand is −2g'(e) to O(s²); cancellation noise rules out quadrature there.
    let s0 = (1e-4 * (hi - lo)).min(near).max(eta);
    let inner = -(g(e + s0) - g(e - s0)) / s0 * (s0 - eta);
    let paired = if near > s0 {
        adaptive_simpson(|s| (g(e - s) - g(e + s)) / s, s0, near, tol, depth).unwrap_or_else(|v| v)
    } else {
        0.0
    };
    let paired = paired + inner;
    let tail = |a: f64, b: f64| {
        adaptive_simpson(|x| g(x) / (e - x), a, b, tol, depth).unwrap_or_else(|v| v)
    };
    let rest = if e - lo > near {
        tail(lo, e - near)
    } else if hi - e > near {
        tail(e + near, hi)
    } else {
        0.0
    };
    Ok(paired + rest)
}
