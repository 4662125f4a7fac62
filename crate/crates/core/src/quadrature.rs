//! Quadrature rules for Boltzmann-weighted energy integrals.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature did not reach tolerance {tolerance:e} (estimate {estimate:e})")]
    NonConvergence { estimate: f64, tolerance: f64 },
    #[error("invalid quadrature configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureScheme {
    GaussLaguerre,
    AdaptiveSimpson,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    pub node_count: usize,
    /// Upper integration limit in units of the thermal energy.
    pub energy_cutoff: f64,
    pub scheme: QuadratureScheme,
    /// Relative tolerance.
    pub tolerance: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            node_count: 64,
            energy_cutoff: 40.0,
            scheme: QuadratureScheme::GaussLaguerre,
            tolerance: 1e-8,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<(), QuadratureError> {
        if self.node_count < 8 {
            return Err(QuadratureError::InvalidConfig("node_count must be >= 8".into()));
        }
        if !(self.energy_cutoff >= 5.0) {
            return Err(QuadratureError::InvalidConfig("energy_cutoff must be >= 5".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(QuadratureError::InvalidConfig("tolerance must be > 0".into()));
        }
        Ok(())
    }
}

/// Nodes and weights of the n-point Gauss-Laguerre rule for ∫₀^∞ e^{-x} f(x) dx.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLaguerre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLaguerre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let nf = n as f64;
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let mut z = 0.0_f64;
        for i in 0..n {
            // initial guesses after Stroud & Secrest
            z = match i {
                0 => 3.0 / (1.0 + 2.4 * nf),
                1 => z + 15.0 / (1.0 + 2.5 * nf),
                _ => {
                    let ai = (i - 1) as f64;
                    z + (1.0 + 2.55 * ai) / (1.9 * ai) * (z - nodes[i - 2])
                }
            };
            for _ in 0..100 {
                let (ln, ln1) = laguerre_pair(n, z);
                // L_n'(z) = n (L_n − L_{n−1}) / z
                let dz = ln / (nf * (ln - ln1) / z);
                z -= dz;
                if dz.abs() <= 1e-15 * z.abs() {
                    break;
                }
            }
            let lnp1 = laguerre_next(n, z);
            // w = x / ((n+1)² L_{n+1}(x)²)
            let w = z / ((nf + 1.0).powi(2) * lnp1 * lnp1);
            nodes.push(z);
            weights.push(w);
        }
        Self { nodes, weights }
    }

    /// Shared rule for `n` nodes, built once per process.
    pub fn cached(n: usize) -> Arc<GaussLaguerre> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLaguerre>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut map = cache.lock().expect("quadrature cache poisoned");
        map.entry(n).or_insert_with(|| Arc::new(GaussLaguerre::new(n))).clone()
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// (L_n(x), L_{n−1}(x)) by the three-term recurrence.
fn laguerre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = 0.0;
    for j in 1..=n {
        let jf = j as f64;
        let p2 = p1;
        p1 = p0;
        p0 = ((2.0 * jf - 1.0 - x) * p1 - (jf - 1.0) * p2) / jf;
    }
    (p0, p1)
}

fn laguerre_next(n: usize, x: f64) -> f64 {
    let (ln, ln1) = laguerre_pair(n, x);
    let nf = n as f64;
    ((2.0 * nf + 1.0 - x) * ln - nf * ln1) / (nf + 1.0)
}

/// Adaptive Simpson on [a, b] to absolute tolerance `tol`.
///
/// On failure the error carries the best estimate.
pub fn adaptive_simpson(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: u32,
) -> Result<f64, f64> {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut ok = true;
    let v = simpson_step(&mut f, a, b, fa, fm, fb, whole, tol, max_depth, &mut ok);
    if ok && v.is_finite() {
        Ok(v)
    } else {
        Err(v)
    }
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &mut impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    ok: &mut bool,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    if depth == 0 {
        *ok = false;
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, ok)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, ok)
}

const SIMPSON_DEPTH: u32 = 40;

/// ∫₀^∞ dE e^{−E/scale} f(E) for a fallible integrand.
///
/// The Gauss-Laguerre estimate is accepted when it agrees with a rule of
/// three quarters the order to the configured tolerance; otherwise adaptive
/// Simpson on [0, cutoff·scale] is used.
pub fn boltzmann_integral<E>(
    mut f: impl FnMut(f64) -> Result<f64, E>,
    scale: f64,
    config: &QuadratureConfig,
) -> Result<f64, E>
where
    E: From<QuadratureError>,
{
    config.validate()?;
    let mut first_err: Option<E> = None;
    let mut eval = |e: f64| -> f64 {
        if first_err.is_some() {
            return 0.0;
        }
        match f(e) {
            Ok(v) => v,
            Err(err) => {
                first_err = Some(err);
                0.0
            }
        }
    };

    let simpson = |eval: &mut dyn FnMut(f64) -> f64, reference: f64| {
        let hi = config.energy_cutoff * scale;
        let tol = config.tolerance * reference.abs().max(f64::MIN_POSITIVE);
        adaptive_simpson(|e| (-e / scale).exp() * eval(e), 0.0, hi, tol, SIMPSON_DEPTH).map_err(|estimate| {
            QuadratureError::NonConvergence { estimate, tolerance: config.tolerance }
        })
    };

    let result = match config.scheme {
        QuadratureScheme::GaussLaguerre => {
            let rule = GaussLaguerre::cached(config.node_count);
            let check = GaussLaguerre::cached((3 * config.node_count / 4).max(8));
            let full = scale * rule.integrate(|x| eval(scale * x));
            let low = scale * check.integrate(|x| eval(scale * x));
            if (full - low).abs() <= config.tolerance * full.abs() {
                Ok(full)
            } else {
                simpson(&mut eval, full)
            }
        }
        QuadratureScheme::AdaptiveSimpson => {
            // coarse reference scale for the relative tolerance
            let rough = scale * GaussLaguerre::cached(16).integrate(|x| eval(scale * x));
            simpson(&mut eval, rough)
        }
    };
    if let Some(err) = first_err {
        return Err(err);
    }
    Ok(result?)
}
