//! Two-body trap loss ṅ = −K n².

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrapError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("fitted rate {k_av:e} cm^3/s is negative beyond 2 sigma ({sigma:e})")]
    NegativeRate { k_av: f64, sigma: f64 },
}

/// Density time series. Times in s, densities in cm⁻³.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayTrace {
    pub times: Vec<f64>,
    pub densities: Vec<f64>,
    pub n0: f64,
}

fn check_times(times: &[f64]) -> Result<(), TrapError> {
    if times.first() != Some(&0.0) {
        return Err(TrapError::InvalidInput("times must start at 0".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(TrapError::InvalidInput("times must be strictly increasing".into()));
    }
    Ok(())
}

fn check_start(n0: f64, k_av: f64) -> Result<(), TrapError> {
    if !(n0 > 0.0 && n0.is_finite()) {
        return Err(TrapError::InvalidInput(format!("n0 must be > 0, got {n0}")));
    }
    if !(k_av >= 0.0 && k_av.is_finite()) {
        return Err(TrapError::InvalidInput(format!("k_av must be >= 0, got {k_av}")));
    }
    Ok(())
}

/// Exact solution n(t) = n₀/(1 + K n₀ t).
pub fn integrate_decay(n0: f64, k_av: f64, times: &[f64]) -> Result<DecayTrace, TrapError> {
    check_start(n0, k_av)?;
    check_times(times)?;
    let densities = times.iter().map(|&t| n0 / (1.0 + k_av * n0 * t)).collect();
    Ok(DecayTrace { times: times.to_vec(), densities, n0 })
}

/// Classical RK4 for ṅ = −K(t) n² with `steps` steps up to the last time.
///
/// Steps are graded geometrically on the initial decay time 1/(K(0) n₀);
/// output times are hit exactly.
pub fn integrate_decay_rk4(
    n0: f64,
    k_of_t: impl Fn(f64) -> f64,
    times: &[f64],
    steps: usize,
) -> Result<DecayTrace, TrapError> {
    check_start(n0, k_of_t(0.0))?;
    check_times(times)?;
    if steps == 0 {
        return Err(TrapError::InvalidInput("steps must be > 0".into()));
    }
    let t_max = *times.last().unwrap();
    let rate0 = k_of_t(0.0) * n0;
    let mesh: Vec<f64> = if rate0 > 0.0 {
        let tau = 1.0 / rate0;
        let growth = 1.0 + t_max / tau;
        (0..=steps).map(|i| tau * (growth.powf(i as f64 / steps as f64) - 1.0)).collect()
    } else {
        (0..=steps).map(|i| t_max * i as f64 / steps as f64).collect()
    };

    let f = |t: f64, n: f64| -k_of_t(t) * n * n;
    let mut densities = Vec::with_capacity(times.len());
    densities.push(n0);
    let (mut t, mut n) = (0.0, n0);
    let mut m = 1;
    for &target in &times[1..] {
        while t < target {
            let next = if m < mesh.len() && mesh[m] < target { mesh[m] } else { target };
            if m < mesh.len() && mesh[m] <= next {
                m += 1;
            }
            let h = next - t;
            let k1 = f(t, n);
            let k2 = f(t + 0.5 * h, n + 0.5 * h * k1);
            let k3 = f(t + 0.5 * h, n + 0.5 * h * k2);
            let k4 = f(t + h, n + h * k3);
            n += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t = next;
        }
        densities.push(n);
    }
    Ok(DecayTrace { times: times.to_vec(), densities, n0 })
}

/// Rate from a regression of 1/n on t, with its standard error.
pub fn extract_k(trace: &DecayTrace) -> Result<(f64, f64), TrapError> {
    let n = trace.times.len();
    if n < 3 || trace.densities.len() != n {
        return Err(TrapError::InvalidInput("need at least 3 paired samples".into()));
    }
    if trace.densities.iter().any(|&d| !(d > 0.0)) {
        return Err(TrapError::InvalidInput("densities must be positive".into()));
    }
    let inv: Vec<f64> = trace.densities.iter().map(|d| 1.0 / d).collect();
    let nf = n as f64;
    let mt = trace.times.iter().sum::<f64>() / nf;
    let mu = inv.iter().sum::<f64>() / nf;
    let stt: f64 = trace.times.iter().map(|t| (t - mt).powi(2)).sum();
    let stu: f64 = trace.times.iter().zip(&inv).map(|(t, u)| (t - mt) * (u - mu)).sum();
    let k = stu / stt;
    let intercept = mu - k * mt;
    let ssr: f64 = trace.times.iter().zip(&inv).map(|(t, u)| (u - intercept - k * t).powi(2)).sum();
    let sigma = (ssr / (nf - 2.0) / stt).sqrt();
    if k < 0.0 && -k > 2.0 * sigma {
        return Err(TrapError::NegativeRate { k_av: k, sigma });
    }
    Ok((k, sigma))
}

/// Exact decay with i.i.d. multiplicative Gaussian noise of relative size
/// `noise_rel`.
pub fn synthesize_trace(
    n0: f64,
    k_av: f64,
    times: &[f64],
    noise_rel: f64,
    seed: u64,
) -> Result<DecayTrace, TrapError> {
    if !(noise_rel >= 0.0 && noise_rel.is_finite()) {
        return Err(TrapError::InvalidInput(format!("noise_rel must be >= 0, got {noise_rel}")));
    }
    let mut trace = integrate_decay(n0, k_av, times)?;
    if noise_rel > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise_rel).expect("finite sigma");
        for d in trace.densities.iter_mut() {
            *d *= 1.0 + normal.sample(&mut rng);
        }
    }
    Ok(trace)
}
