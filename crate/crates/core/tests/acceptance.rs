//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use dualfano::analysis::{
    canonical_fano, default_bounds, field_at_reduced_energy, fano_minimum_field, fit_model, shift_scan, Bounds,
    FitOptions, FitParam,
};
use dualfano::config::load_config;
use dualfano::model::{self, fano_factor, dressed_amplitudes, Level};
use dualfano::spectrum::{self, sweep_field, thermal_average, thermal_rate_from_probability, uniform_grid, Spectrum};
use dualfano::trap::{extract_k, integrate_decay, integrate_decay_rk4};
use dualfano::{Complex, ModelParams, PhysicalConstants, QuadratureConfig};

const H: f64 = 6.626_070_15e-34;
const KB: f64 = 1.380_649e-23;
const AMU: f64 = 1.660_539_066_60e-27;
const CS_MASS_U: f64 = 132.905_451_961;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn configs_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs"))
}

fn kt_mhz(temperature: f64) -> f64 {
    KB * temperature * 1e-6 / H / 1e6
}

fn random_params(rng: &mut ChaCha8Rng) -> ModelParams {
    ModelParams {
        gamma_f: rng.random_range(0.5..10.0),
        gamma_1: rng.random_range(0.0..30.0),
        gamma_2: rng.random_range(0.0..5.0),
        gamma_sp_1: rng.random_range(1.0..30.0),
        gamma_sp_2: rng.random_range(1.0..30.0),
        q_1: rng.random_range(-25.0..25.0),
        q_2: rng.random_range(-25.0..25.0),
        detuning_1: rng.random_range(-30.0..30.0),
        detuning_2: rng.random_range(-30.0..30.0),
        b0: 47.97,
        dmu: rng.random_range(0.5..2.0),
        temperature: rng.random_range(0.5..10.0),
        k_bg: 0.0,
        intensity_ref: 1.0,
    }
}

fn profile_equivalence() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let eps = -50.0 + 100.0 * i as f64 / 99.0;
        for j in 0..100 {
            let q = -25.0 + 50.0 * j as f64 / 99.0;
            let oracle = (eps + q).powi(2) / (eps * eps + 1.0);
            let f2 = fano_factor(eps, q).norm_sqr();
            worst = worst.max((f2 - oracle).abs() / oracle.max(1.0));
            worst = worst.max((canonical_fano(eps, q) - oracle).abs() / oracle.max(1.0));
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-12 && elapsed < Duration::from_secs(1),
        format!("max deviation {worst:.2e} on 100x100, {:.3} s", elapsed.as_secs_f64()),
    )
}

fn fano_minimum_law() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let sets: Vec<ModelParams> = (0..20)
        .map(|_| ModelParams {
            gamma_f: rng.random_range(4.0..10.0),
            gamma_1: rng.random_range(0.5..30.0),
            gamma_2: 0.0,
            gamma_sp_1: rng.random_range(5.0..30.0),
            gamma_sp_2: 0.0,
            q_1: rng.random_range(-5.0..5.0),
            q_2: 0.0,
            detuning_1: rng.random_range(-20.0..20.0),
            detuning_2: 0.0,
            b0: 47.97,
            dmu: 1.4,
            temperature: rng.random_range(0.5..3.5),
            k_bg: 0.0,
            intensity_ref: 1.0,
        })
        .collect();
    let quad = QuadratureConfig::default();
    let results: Vec<Result<f64, String>> = sets
        .par_iter()
        .map(|p| {
            let kt = kt_mhz(p.temperature);
            let lo = field_at_reduced_energy(p, 60.0, kt);
            let hi = field_at_reduced_energy(p, -30.0, kt);
            let grid = uniform_grid(lo, hi, 10_000);
            let step = grid[1] - grid[0];
            let spec = sweep_field(&grid, (p.detuning_1, p.detuning_2), p, &quad).map_err(|e| e.to_string())?;
            let found = spec.axis[spec.argmin().unwrap()];
            Ok((found - fano_minimum_field(p, Level::One)).abs() / step)
        })
        .collect();
    let elapsed = start.elapsed();
    let mut worst: f64 = 0.0;
    for r in &results {
        match r {
            Ok(steps) => worst = worst.max(*steps),
            Err(e) => return outcome(false, format!("sweep failed: {e}")),
        }
    }
    outcome(
        worst <= 1.0 && elapsed < Duration::from_secs(30),
        format!("worst offset {worst:.2} grid steps over 20 sets, {:.1} s", elapsed.as_secs_f64()),
    )
}

fn unitarity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let p = random_params(&mut rng);
        let eps = rng.random_range(-1e3..1e3);
        let e = rng.random_range(1e-4..10.0) * kt_mhz(p.temperature);
        let amps = match dressed_amplitudes(eps, e, &p) {
            Ok(a) => a,
            Err(err) => return outcome(false, format!("amplitudes failed: {err}")),
        };
        let c = model::s_wave_couplings(&p);
        let s = Complex::new(0.0, -2.0 * std::f64::consts::PI) * (c.v_art_1 * amps.a_1 + c.v_art_2 * amps.a_2);
        worst = worst.max(s.norm_sqr());
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1.0 + 1e-9 && elapsed < Duration::from_secs(10),
        format!("max |S|^2 = {worst:.12} over 10^4 points, {:.2} s", elapsed.as_secs_f64()),
    )
}

fn quadrature_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cases: Vec<(ModelParams, f64)> = (0..20)
        .map(|_| {
            let mut p = random_params(&mut rng);
            p.gamma_f = rng.random_range(1.0..10.0);
            p.temperature = rng.random_range(0.5..3.5);
            p.k_bg = rng.random_range(0.0..1e-12);
            let kt = kt_mhz(p.temperature);
            let b = field_at_reduced_energy(&p, rng.random_range(-5.0..5.0), kt);
            (p, b)
        })
        .collect();
    let quad = QuadratureConfig::default();
    let constants = PhysicalConstants::cesium();
    let mut worst: f64 = 0.0;
    for (p, b) in &cases {
        let got = match thermal_average(*b, p, &quad) {
            Ok(v) => v,
            Err(e) => return outcome(false, format!("thermal_average failed: {e}")),
        };
        let kt = kt_mhz(p.temperature);
        let n = 1_000_000;
        let top = 40.0 * kt;
        let h = top / n as f64;
        let sum: f64 = (0..n)
            .into_par_iter()
            .map(|i| {
                let e = (i as f64 + 0.5) * h;
                (-e / kt).exp() * spectrum::decay_probability(e, *b, p).unwrap()
            })
            .sum();
        let riemann = constants.boltzmann_prefactor(p.temperature) * sum * h + p.k_bg;
        worst = worst.max((got / riemann - 1.0).abs());
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-6 && elapsed < Duration::from_secs(60),
        format!("max relative deviation {worst:.2e} over 20 sets, {:.1} s", elapsed.as_secs_f64()),
    )
}

fn approximation_identity() -> Outcome {
    let quad = QuadratureConfig::default();
    let mu = 0.5 * CS_MASS_U * AMU;
    let mut worst: f64 = 0.0;
    for temperature in [0.5, 1.0, 3.5, 10.0] {
        for s2 in [1e-3, 0.25, 1.0] {
            let got = thermal_rate_from_probability(|_| Ok(s2), temperature, &quad).unwrap();
            let kt = KB * temperature * 1e-6;
            let q_t = (2.0 * std::f64::consts::PI * mu * kt / (H * H)).powf(1.5);
            let want = kt / (H * q_t) * s2 * 1e6;
            worst = worst.max((got / want - 1.0).abs());
        }
    }
    outcome(worst <= 1e-10, format!("max relative deviation {worst:.2e}"))
}

/// Normalized left-right imbalance of the area above the window floor,
/// within five reduced-energy half-widths of the global maximum.
fn peak_imbalance(spec: &Spectrum, params: &ModelParams) -> f64 {
    let m = spec.argmax().unwrap();
    let center = spec.axis[m];
    let half = 5.0 * 0.5 * params.gamma_f / params.dmu.abs();
    let idx: Vec<usize> = (0..spec.len()).filter(|&i| (spec.axis[i] - center).abs() <= half).collect();
    let floor = idx.iter().map(|&i| spec.rates[i]).fold(f64::INFINITY, f64::min);
    let (mut left, mut right) = (0.0, 0.0);
    for w in idx.windows(2) {
        let area = 0.5 * (spec.rates[w[0]] + spec.rates[w[1]] - 2.0 * floor) * (spec.axis[w[1]] - spec.axis[w[0]]);
        if spec.axis[w[1]] <= center {
            left += area;
        } else {
            right += area;
        }
    }
    (left - right).abs() / (left + right)
}

fn config_sweep(name: &str) -> Result<(ModelParams, Spectrum), String> {
    let cfg = load_config(&configs_dir().join(name)).map_err(|e| e.to_string())?;
    let grid = cfg.grids.field.ok_or("config has no field grid")?.points();
    let p = cfg.model;
    let spec = sweep_field(&grid, (p.detuning_1, p.detuning_2), &p, &cfg.quadrature).map_err(|e| e.to_string())?;
    Ok((p, spec))
}

fn two_peak_structure() -> Outcome {
    let run = || -> Result<Outcome, String> {
        let (pa, a) = config_sweep("fig2a.json")?;
        let (pc, c) = config_sweep("fig3.json")?;
        let maxima = a.local_maxima().len();
        let minima = a.local_minima().len();
        let (ia, ic) = (peak_imbalance(&a, &pa), peak_imbalance(&c, &pc));
        let structure = maxima == 2 && minima >= 1;
        let asymmetry = ic < ia;
        Ok(outcome(
            structure && asymmetry,
            format!(
                "fig2a: {maxima} maxima, {minima} interior minima on {} points (want 2 and >= 1); \
                 imbalance fig2a {ia:.3} vs fig3 {ic:.3} (want fig3 smaller)",
                a.len()
            ),
        ))
    };
    run().unwrap_or_else(|e| outcome(false, e))
}

fn shift_slope_dispersion() -> Outcome {
    let run = || -> Result<Outcome, String> {
        let cfg = load_config(&configs_dir().join("fig4.json")).map_err(|e| e.to_string())?;
        let fields = cfg.grids.field.ok_or("no field grid")?.points();
        let deltas = cfg.grids.detuning.ok_or("no detuning grid")?.points();
        let scan = cfg.shift_scan.clone().ok_or("no shift_scan section")?;
        let options = cfg.shift_options();
        let slopes = fields
            .par_iter()
            .map(|&b| shift_scan(&cfg.model, &scan.intensities, b, &deltas, &options).map(|s| s.slope))
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| e.to_string())?;
        let changes: Vec<usize> = (1..slopes.len()).filter(|&i| slopes[i - 1] * slopes[i] < 0.0).collect();
        let (first, last) = (slopes[0], slopes[slopes.len() - 1]);
        let b_min = fano_minimum_field(&cfg.model, Level::One);
        let where_ = changes
            .iter()
            .map(|&i| format!("{:.2}-{:.2} G", fields[i - 1], fields[i]))
            .collect::<Vec<_>>()
            .join(", ");
        Ok(outcome(
            !changes.is_empty() && first < 0.0 && last < 0.0,
            format!(
                "sign changes at [{where_}] (Fano minimum {b_min:.2} G); far-field slopes {first:.3} and {last:.3} MHz/(W/cm^2)"
            ),
        ))
    };
    run().unwrap_or_else(|e| outcome(false, e))
}

fn fit_round_trip() -> Outcome {
    let start = Instant::now();
    let free = [FitParam::Q1, FitParam::Q2, FitParam::Gamma1, FitParam::Gamma2, FitParam::KBg];
    let cases: Vec<u64> = (0..50).collect();
    let results: Vec<Result<f64, String>> = cases
        .par_iter()
        .map(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(800 + seed);
            let sign = |rng: &mut ChaCha8Rng| if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let truth = ModelParams {
                gamma_f: rng.random_range(4.0..8.0),
                gamma_1: rng.random_range(4.0..15.0),
                gamma_2: rng.random_range(0.05..0.5),
                gamma_sp_1: 17.0,
                gamma_sp_2: 17.0,
                q_1: sign(&mut rng) * rng.random_range(0.5..3.0),
                q_2: rng.random_range(5.0..25.0),
                detuning_1: 0.0,
                detuning_2: rng.random_range(2.0..8.0),
                b0: 47.97,
                dmu: 1.4,
                temperature: 3.5,
                k_bg: rng.random_range(1e-12..5e-12),
                intensity_ref: 1.0,
            };
            let quad = QuadratureConfig::default();
            let kt = kt_mhz(truth.temperature);
            let grid = uniform_grid(
                field_at_reduced_energy(&truth, 40.0, kt),
                field_at_reduced_energy(&truth, -20.0, kt),
                200,
            );
            let data = sweep_field(&grid, (truth.detuning_1, truth.detuning_2), &truth, &quad)
                .map_err(|e| e.to_string())?;
            let mut start = truth.clone();
            for name in free {
                name.set(&mut start, name.get(&truth) * (1.0 + 0.2 * sign(&mut rng)));
            }
            let bounds: Bounds = free.iter().map(|&n| (n, default_bounds(n))).collect();
            let fit = fit_model(&data, &start, &free, &bounds, &FitOptions::default()).map_err(|e| e.to_string())?;
            Ok(free
                .iter()
                .map(|&n| (fit.value(n).unwrap() / n.get(&truth) - 1.0).abs())
                .fold(0.0, f64::max))
        })
        .collect();
    let elapsed = start.elapsed();
    let mut recovered = 0;
    let mut worst: f64 = 0.0;
    let mut first_error = None;
    for r in results {
        match r {
            Ok(dev) => {
                worst = worst.max(dev);
                if dev <= 1e-4 {
                    recovered += 1;
                }
            }
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    let mut detail = format!(
        "{recovered}/50 cases within 1e-4, worst relative deviation {worst:.2e}, {:.1} s",
        elapsed.as_secs_f64()
    );
    if let Some(e) = first_error {
        detail += &format!("; first error: {e}");
    }
    outcome(recovered == 50 && elapsed < Duration::from_secs(300), detail)
}

fn decay_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut worst_k, mut worst_rk4): (f64, f64) = (0.0, 0.0);
    for _ in 0..50 {
        let n0 = 10f64.powf(rng.random_range(9.0..12.0));
        let k = 10f64.powf(rng.random_range(-13.0..-9.0));
        let span = rng.random_range(0.1..100.0) / (k * n0);
        let count = rng.random_range(5..200);
        let times: Vec<f64> = (0..count).map(|i| span * i as f64 / (count - 1) as f64).collect();
        let trace = integrate_decay(n0, k, &times).unwrap();
        let (got, _) = extract_k(&trace).unwrap();
        worst_k = worst_k.max((got / k - 1.0).abs());
        let rk4 = integrate_decay_rk4(n0, |_| k, &times, 1000).unwrap();
        for (a, b) in rk4.densities.iter().zip(&trace.densities) {
            worst_rk4 = worst_rk4.max((a / b - 1.0).abs());
        }
    }
    outcome(
        worst_k <= 1e-10 && worst_rk4 <= 1e-8,
        format!("extract_k worst {worst_k:.2e}, RK4 worst {worst_rk4:.2e} over 50 cases"),
    )
}

fn linear_solve_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let i = Complex::new(0.0, 1.0);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let p = random_params(&mut rng);
        let eps = rng.random_range(-50.0..50.0);
        let e = rng.random_range(0.01..5.0);
        let amps = dressed_amplitudes(eps, e, &p).unwrap();

        let gammas = [p.gamma_1, p.gamma_2];
        let sps = [p.gamma_sp_1, p.gamma_sp_2];
        let qs = [p.q_1, p.q_2];
        let deltas = [p.detuning_1, p.detuning_2];
        let r: Vec<Complex> = (0..2)
            .map(|n| (gammas[n] / (2.0 * std::f64::consts::PI)).sqrt() * (eps + qs[n]) / (eps + i))
            .collect();
        let xi: Vec<Complex> = (0..2)
            .map(|n| {
                e + deltas[n] + i * 0.5 * (gammas[n] + sps[n]) - (qs[n] - i).powi(2) * gammas[n] / (2.0 * (eps + i))
            })
            .collect();
        let root = (p.gamma_1 * p.gamma_2).sqrt();
        let q = -i * 0.5 * (root + (p.gamma_sp_1 * p.gamma_sp_2).sqrt())
            + (qs[0] - i) * (qs[1] - i) * root / (2.0 * (eps + i));
        let m = Matrix2::new(xi[0], -q, -q, xi[1]);
        let rhs = Vector2::new(r[0], r[1]);
        let sol = m.lu().solve(&rhs).expect("nonsingular");
        let diff = ((sol[0] - amps.a_1).norm_sqr() + (sol[1] - amps.a_2).norm_sqr()).sqrt();
        let size = (sol[0].norm_sqr() + sol[1].norm_sqr()).sqrt();
        worst = worst.max(diff / size);
    }
    outcome(worst <= 1e-12, format!("max relative deviation {worst:.2e} over 100 points"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("canonical profile equivalence", profile_equivalence),
        ("Fano-minimum law", fano_minimum_law),
        ("unitarity", unitarity),
        ("quadrature oracle", quadrature_oracle),
        ("approximation identity", approximation_identity),
        ("two-peak structure", two_peak_structure),
        ("shift-slope dispersion", shift_slope_dispersion),
        ("fit round trip", fit_round_trip),
        ("decay round trip", decay_round_trip),
        ("linear-solve oracle", linear_solve_oracle),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(run).unwrap_or_else(|_| outcome(false, "panicked"));
        let tag = if result.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {tag} {name}: {}", k + 1, result.detail);
        if !result.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
