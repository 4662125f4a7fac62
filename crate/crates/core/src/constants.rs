//! Physical constants and unit conversions.
//!
//! Energies inside the model are frequencies in MHz (E/h), temperatures are
//! in μK and rate coefficients leave the crate in cm³/s.

/// Planck constant (J s).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant (J s).
pub const HBAR: f64 = PLANCK / (2.0 * std::f64::consts::PI);
/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Unified atomic mass unit (kg).
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// Mass of ¹³³Cs in atomic mass units.
pub const CS133_MASS_U: f64 = 132.905_451_961;
/// Bohr radius (m).
pub const BOHR_RADIUS: f64 = 5.291_772_109_03e-11;

const M3_TO_CM3: f64 = 1e6;
const MHZ_TO_HZ: f64 = 1e6;
const UK_TO_K: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// ħ/k_B (K s)
    pub hbar_over_kb: f64,
    /// k_B/h (Hz/K)
    pub kb_over_h: f64,
    /// Reduced mass of the colliding pair (kg)
    pub reduced_mass: f64,
    /// (m)
    pub bohr_radius: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::cesium()
    }
}

impl PhysicalConstants {
    /// Constants for a ¹³³Cs + ¹³³Cs collision.
    pub fn cesium() -> Self {
        Self {
            hbar_over_kb: HBAR / BOLTZMANN,
            kb_over_h: BOLTZMANN / PLANCK,
            reduced_mass: 0.5 * CS133_MASS_U * ATOMIC_MASS_UNIT,
            bohr_radius: BOHR_RADIUS,
        }
    }

    /// Thermal energy k_B T in MHz for a temperature in μK.
    pub fn thermal_energy_mhz(&self, temperature_uk: f64) -> f64 {
        self.kb_over_h * temperature_uk * UK_TO_K / MHZ_TO_HZ
    }

    /// Converts an energy in MHz (E/h) to joules.
    pub fn mhz_to_joule(&self, e_mhz: f64) -> f64 {
        PLANCK * e_mhz * MHZ_TO_HZ
    }

    /// Relative wavenumber k (1/m) at a collision energy in MHz.
    pub fn wavenumber(&self, e_mhz: f64) -> f64 {
        (2.0 * self.reduced_mass * self.mhz_to_joule(e_mhz)).sqrt() / HBAR
    }

    /// Converts a loss rate K_E = (πħ/μk)|S|² into cm³/s for unit |S|².
    pub fn unit_loss_rate(&self, e_mhz: f64) -> f64 {
        std::f64::consts::PI * HBAR / (self.reduced_mass * self.wavenumber(e_mhz)) * M3_TO_CM3
    }

    /// Translational partition function per volume Q_T = (2πμk_BT/h²)^{3/2} (1/m³).
    pub fn translational_partition(&self, temperature_uk: f64) -> f64 {
        let kt = BOLTZMANN * temperature_uk * UK_TO_K;
        (2.0 * std::f64::consts::PI * self.reduced_mass * kt / (PLANCK * PLANCK)).powf(1.5)
    }

    /// Factor C with K_av = C ∫ dE e^{-E/k_BT} |S(E)|², E in MHz, K_av in cm³/s.
    ///
    /// C = 4π²ħ² / (2πμk_BT)^{3/2} times the MHz→J Jacobian.
    pub fn boltzmann_prefactor(&self, temperature_uk: f64) -> f64 {
        let kt = BOLTZMANN * temperature_uk * UK_TO_K;
        let four_pi2_hbar2 = 4.0 * std::f64::consts::PI.powi(2) * HBAR * HBAR;
        four_pi2_hbar2 / (2.0 * std::f64::consts::PI * self.reduced_mass * kt).powf(1.5)
            * PLANCK
            * MHZ_TO_HZ
            * M3_TO_CM3
    }

    /// k_BT/(hQ_T) in cm³/s.
    pub fn constant_s_rate(&self, temperature_uk: f64) -> f64 {
        let kt = BOLTZMANN * temperature_uk * UK_TO_K;
        kt / (PLANCK * self.translational_partition(temperature_uk)) * M3_TO_CM3
    }
}
