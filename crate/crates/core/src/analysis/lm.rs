//! Bounded Levenberg-Marquardt with a central-difference Jacobian.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmConfig {
    pub max_iterations: usize,
    /// Relative finite-difference step.
    pub fd_step: f64,
    /// Convergence on the scaled step length.
    pub xtol: f64,
    /// Convergence on the relative reduction of the squared residual.
    pub ftol: f64,
    pub initial_lambda: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self { max_iterations: 200, fd_step: 1e-6, xtol: 1e-10, ftol: 1e-15, initial_lambda: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmOutcome {
    pub x: Vec<f64>,
    pub sigma: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Residual norm after the start and after every accepted step.
    pub history: Vec<f64>,
}

#[derive(Debug)]
pub enum LmError<E> {
    /// Column `index` of the Jacobian carries no information.
    DegenerateJacobian { index: usize },
    NonConvergence(Box<LmOutcome>),
    Residual(E),
}

/// A bounded least-squares problem in `n` parameters.
pub struct Problem<'a> {
    pub x0: &'a [f64],
    pub lower: &'a [f64],
    pub upper: &'a [f64],
    /// Typical magnitude of each parameter; sets finite-difference steps
    /// for parameters near zero.
    pub scale: &'a [f64],
}

fn sq_norm(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, &lo), &hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(lo, hi);
    }
}

fn jacobian<E>(
    residuals: &mut impl FnMut(&[f64]) -> Result<Vec<f64>, E>,
    x: &[f64],
    m: usize,
    problem: &Problem,
    cfg: &LmConfig,
) -> Result<DMatrix<f64>, E> {
    let n = x.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut probe = x.to_vec();
    for j in 0..n {
        let h = cfg.fd_step * x[j].abs().max(problem.scale[j]);
        let hi = (x[j] + h).min(problem.upper[j]);
        let lo = (x[j] - h).max(problem.lower[j]);
        probe[j] = hi;
        let rp = residuals(&probe)?;
        probe[j] = lo;
        let rm = residuals(&probe)?;
        probe[j] = x[j];
        for i in 0..m {
            jac[(i, j)] = (rp[i] - rm[i]) / (hi - lo);
        }
    }
    Ok(jac)
}

fn standard_errors(jac: &DMatrix<f64>, cost: f64) -> Vec<f64> {
    let (m, n) = jac.shape();
    let dof = m.saturating_sub(n);
    let s2 = if dof > 0 { cost / dof as f64 } else { 0.0 };
    let jtj = jac.transpose() * jac;
    let cov = match jtj.clone().cholesky() {
        Some(ch) => ch.inverse(),
        None => jtj.pseudo_inverse(1e-300).unwrap_or_else(|_| DMatrix::zeros(n, n)),
    };
    (0..n).map(|j| (cov[(j, j)].max(0.0) * s2).sqrt()).collect()
}

/// Minimizes ‖r(x)‖² subject to `lower ≤ x ≤ upper`.
pub fn levenberg_marquardt<E>(
    mut residuals: impl FnMut(&[f64]) -> Result<Vec<f64>, E>,
    problem: &Problem,
    cfg: &LmConfig,
) -> Result<LmOutcome, LmError<E>> {
    let n = problem.x0.len();
    let mut x = problem.x0.to_vec();
    project(&mut x, problem.lower, problem.upper);
    let mut r = residuals(&x).map_err(LmError::Residual)?;
    let m = r.len();
    let mut cost = sq_norm(&r);
    let mut history = vec![cost.sqrt()];
    let mut lambda = cfg.initial_lambda;

    let outcome = |x: &[f64], jac: &DMatrix<f64>, cost: f64, iterations, converged, history: &[f64]| LmOutcome {
        x: x.to_vec(),
        sigma: standard_errors(jac, cost),
        residual_norm: cost.sqrt(),
        iterations,
        converged,
        history: history.to_vec(),
    };

    let mut jac = jacobian(&mut residuals, &x, m, problem, cfg).map_err(LmError::Residual)?;
    let sensitivity: Vec<f64> = (0..n)
        .map(|j| jac.column(j).norm() * x[j].abs().max(problem.scale[j]))
        .collect();
    let strongest = sensitivity.iter().cloned().fold(0.0, f64::max);
    if let Some(index) = sensitivity.iter().position(|&s| !(s > 1e-12 * strongest) || !s.is_finite()) {
        return Err(LmError::DegenerateJacobian { index });
    }

    // damping follows Nielsen's gain-ratio rule
    let mut growth = 2.0;
    for iteration in 1..=cfg.max_iterations {
        if cost == 0.0 {
            return Ok(outcome(&x, &jac, cost, iteration - 1, true, &history));
        }
        let jtj = jac.transpose() * &jac;
        let rv = DVector::from_column_slice(&r);
        let grad = jac.transpose() * &rv;

        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for j in 0..n {
                a[(j, j)] += lambda * jtj[(j, j)].max(1e-300);
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => {
                    lambda *= growth;
                    growth *= 2.0;
                    continue;
                }
            };
            let mut trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            project(&mut trial, problem.lower, problem.upper);
            let rt = match residuals(&trial) {
                Ok(rt) if rt.iter().all(|v| v.is_finite()) => rt,
                _ => {
                    lambda *= growth;
                    growth *= 2.0;
                    continue;
                }
            };
            let trial_cost = sq_norm(&rt);
            let taken = DVector::from_iterator(n, trial.iter().zip(&x).map(|(t, v)| t - v));
            let predicted = cost - (&rv + &jac * &taken).norm_squared();
            let gain = if predicted > 0.0 { (cost - trial_cost) / predicted } else { -1.0 };
            if trial_cost < cost && gain > 0.0 {
                let moved = (0..n)
                    .map(|j| (trial[j] - x[j]).abs() / x[j].abs().max(problem.scale[j]))
                    .fold(0.0, f64::max);
                let reduction = (cost - trial_cost) / cost;
                x = trial;
                r = rt;
                cost = trial_cost;
                history.push(cost.sqrt());
                lambda = (lambda * (1.0 - (2.0 * gain - 1.0).powi(3)).max(1.0 / 3.0)).max(1e-12);
                growth = 2.0;
                jac = jacobian(&mut residuals, &x, m, problem, cfg).map_err(LmError::Residual)?;
                if moved < cfg.xtol || reduction < cfg.ftol {
                    return Ok(outcome(&x, &jac, cost, iteration, true, &history));
                }
                accepted = true;
                break;
            }
            lambda *= growth;
            growth *= 2.0;
        }
        if !accepted {
            // no descent step exists at working precision
            return Ok(outcome(&x, &jac, cost, iteration, true, &history));
        }
    }
    Err(LmError::NonConvergence(Box::new(outcome(
        &x,
        &jac,
        cost,
        cfg.max_iterations,
        false,
        &history,
    ))))
}
