use super::lm::{levenberg_marquardt, LmConfig, LmError, Problem};
use super::AnalysisError;
use crate::spectrum::Spectrum;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzianFit {
    pub center: f64,
    pub fwhm: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub residual_norm: f64,
}

/// A·(Γ/2)²/((x − x₀)² + (Γ/2)²) + c
pub fn lorentzian(x: f64, center: f64, fwhm: f64, amplitude: f64, offset: f64) -> f64 {
    let hw2 = 0.25 * fwhm * fwhm;
    amplitude * hw2 / ((x - center).powi(2) + hw2) + offset
}

/// Fits a Lorentzian to the peak holding the global maximum.
///
/// On each side the window extends to the lowest point reached before the
/// rates climb back by a tenth of the peak height.
pub fn lorentzian_fit(spec: &Spectrum) -> Result<LorentzianFit, AnalysisError> {
    let n = spec.len();
    if n < 5 {
        return Err(AnalysisError::NoPeak(format!("{n} points, need at least 5")));
    }
    let top = spec.argmax().expect("non-empty");
    if top == 0 || top == n - 1 {
        return Err(AnalysisError::NoPeak("maximum lies on the boundary".into()));
    }
    let rates = &spec.rates;
    let floor = rates.iter().cloned().fold(f64::INFINITY, f64::min);
    let rise = 0.1 * (rates[top] - floor);
    let left = basin_edge(rates, &mut (0..top).rev(), top, rise);
    let right = basin_edge(rates, &mut (top + 1..n), top, rise);
    fit_range(&spec.axis[left..=right], &rates[left..=right])
}

fn basin_edge(rates: &[f64], walk: &mut dyn Iterator<Item = usize>, top: usize, rise: f64) -> usize {
    let mut lowest = top;
    for i in walk {
        if rates[i] < rates[lowest] {
            lowest = i;
        } else if rates[i] > rates[lowest] + rise {
            break;
        }
    }
    lowest
}

/// Fits a Lorentzian to the points with axis values inside `[lo, hi]`.
pub fn lorentzian_fit_window(spec: &Spectrum, lo: f64, hi: f64) -> Result<LorentzianFit, AnalysisError> {
    let idx: Vec<usize> = (0..spec.len()).filter(|&i| spec.axis[i] >= lo && spec.axis[i] <= hi).collect();
    let (Some(&a), Some(&b)) = (idx.first(), idx.last()) else {
        return Err(AnalysisError::NoPeak("window holds no points".into()));
    };
    let (x, y) = (&spec.axis[a..=b], &spec.rates[a..=b]);
    let top = (0..y.len()).max_by(|&i, &j| y[i].total_cmp(&y[j])).unwrap_or(0);
    if y.len() < 5 || top == 0 || top == y.len() - 1 {
        return Err(AnalysisError::NoPeak("no interior maximum in window".into()));
    }
    fit_range(x, y)
}

fn fit_range(x: &[f64], y: &[f64]) -> Result<LorentzianFit, AnalysisError> {
    if x.len() < 5 {
        return Err(AnalysisError::NoPeak(format!("peak window holds {} points, need at least 5", x.len())));
    }
    let top = (0..y.len()).max_by(|&i, &j| y[i].total_cmp(&y[j])).unwrap();
    let base = y[0].min(y[y.len() - 1]);
    let height = y[top] - base;
    if !(height > 0.0) {
        return Err(AnalysisError::NoPeak("flat spectrum".into()));
    }
    let span = x[x.len() - 1] - x[0];
    let half = base + 0.5 * height;
    let crossing = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev = top;
        for i in range {
            if y[i] < half {
                let t = (y[prev] - half) / (y[prev] - y[i]);
                return Some(x[prev] + t * (x[i] - x[prev]));
            }
            prev = i;
        }
        None
    };
    let lhs = crossing(&mut (0..top).rev());
    let rhs = crossing(&mut (top + 1..x.len()));
    let fwhm0 = match (lhs, rhs) {
        (Some(a), Some(b)) => b - a,
        (Some(a), None) => 2.0 * (x[top] - a),
        (None, Some(b)) => 2.0 * (b - x[top]),
        (None, None) => 0.5 * span,
    };

    // center, fwhm, amplitude, offset
    let x0 = [x[top], fwhm0.max(1e-9 * span), height, base];
    let lower = [x[0], 1e-12 * span, 0.0, f64::NEG_INFINITY];
    let upper = [x[x.len() - 1], f64::INFINITY, f64::INFINITY, f64::INFINITY];
    let scale = [span, span, height, height];
    let problem = Problem { x0: &x0, lower: &lower, upper: &upper, scale: &scale };
    let cfg = LmConfig { max_iterations: 500, ftol: 1e-16, xtol: 1e-13, ..Default::default() };
    let residuals = |p: &[f64]| -> Result<Vec<f64>, ()> {
        Ok(x.iter().zip(y).map(|(&xi, &yi)| lorentzian(xi, p[0], p[1], p[2], p[3]) - yi).collect())
    };
    match levenberg_marquardt(residuals, &problem, &cfg) {
        Ok(out) => Ok(LorentzianFit {
            center: out.x[0],
            fwhm: out.x[1],
            amplitude: out.x[2],
            offset: out.x[3],
            residual_norm: out.residual_norm,
        }),
        Err(LmError::NonConvergence(best)) => Err(AnalysisError::NonConvergence { iterations: best.iterations }),
        Err(LmError::DegenerateJacobian { .. }) => Err(AnalysisError::NoPeak("degenerate peak window".into())),
        Err(LmError::Residual(())) => unreachable!(),
    }
}
