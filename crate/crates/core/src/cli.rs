//! Command-line surface.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::analysis::{self, AnalysisError, FitOptions};
use crate::config::{load_config, ConfigError, GridSpec, RunConfig};
use crate::io::{self, IoError};
use crate::model::Level;
use crate::spectrum::{self, Spectrum, SpectrumError};
use crate::trap::{self, TrapError};

pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;
pub const EXIT_FIT: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "dualfano", version, about = "Dual Fano photoassociation loss spectra")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// JSON run configuration
    #[arg(long)]
    pub config: PathBuf,
    /// Output file (overrides io.output)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Random seed (overrides seed)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Gauss-Laguerre node count (overrides quadrature.node_count)
    #[arg(long)]
    pub quad_nodes: Option<usize>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct FieldGrid {
    #[arg(long)]
    pub b_start: Option<f64>,
    #[arg(long)]
    pub b_stop: Option<f64>,
    #[arg(long)]
    pub b_count: Option<usize>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct DetuningGrid {
    #[arg(long)]
    pub delta_start: Option<f64>,
    #[arg(long)]
    pub delta_stop: Option<f64>,
    #[arg(long)]
    pub delta_count: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Thermal loss-rate spectrum versus magnetic field
    SweepB {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: FieldGrid,
    },
    /// Thermal loss-rate spectrum versus laser detuning
    SweepDelta {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: DetuningGrid,
    },
    /// Fit model parameters to a spectrum
    Fit {
        #[command(flatten)]
        common: Common,
        /// Spectrum CSV (overrides io.input)
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Intensity slope of the peak position versus field
    ShiftScan {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        field: FieldGrid,
        #[command(flatten)]
        grid: DetuningGrid,
    },
    /// Simulate and analyse a two-body decay trace
    Decay {
        #[command(flatten)]
        common: Common,
    },
    /// Field of the single-resonance Fano minima
    FanoMin {
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::SweepB { common, .. }
            | Command::SweepDelta { common, .. }
            | Command::Fit { common, .. }
            | Command::ShiftScan { common, .. }
            | Command::Decay { common }
            | Command::FanoMin { common } => common,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error(transparent)]
    Trap(#[from] TrapError),
    #[error(transparent)]
    Analysis(AnalysisError),
    #[error("{0}")]
    FitNonConvergence(String),
    #[error(transparent)]
    Io(#[from] IoError),
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::FitNonConvergence { .. } => CliError::FitNonConvergence(e.to_string()),
            other => CliError::Analysis(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => EXIT_CONFIG,
            CliError::Spectrum(_) | CliError::Trap(_) | CliError::Analysis(_) => EXIT_NUMERIC,
            CliError::FitNonConvergence(_) => EXIT_FIT,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

fn resolve_grid(
    base: Option<GridSpec>,
    start: Option<f64>,
    stop: Option<f64>,
    count: Option<usize>,
    what: &str,
) -> Result<Vec<f64>, CliError> {
    let spec = match (base, start, stop, count) {
        (Some(b), s, e, c) => GridSpec { start: s.unwrap_or(b.start), stop: e.unwrap_or(b.stop), count: c.unwrap_or(b.count) },
        (None, Some(s), Some(e), Some(c)) => GridSpec { start: s, stop: e, count: c },
        _ => return Err(CliError::Usage(format!("no {what} grid: set grids in the config or pass all three flags"))),
    };
    if spec.count < 2 || !(spec.start < spec.stop) {
        return Err(CliError::Usage(format!("{what} grid needs start < stop and count >= 2")));
    }
    Ok(spec.points())
}

fn field_grid(config: &RunConfig, g: &FieldGrid) -> Result<Vec<f64>, CliError> {
    resolve_grid(config.grids.field, g.b_start, g.b_stop, g.b_count, "field")
}

fn detuning_grid(config: &RunConfig, g: &DetuningGrid) -> Result<Vec<f64>, CliError> {
    resolve_grid(config.grids.detuning, g.delta_start, g.delta_stop, g.delta_count, "detuning")
}

fn fixed_b(config: &RunConfig) -> Result<f64, CliError> {
    config.fixed_b.ok_or_else(|| CliError::Usage("config needs `fixed_b`".into()))
}

fn list(values: impl IntoIterator<Item = f64>) -> String {
    let items: Vec<String> = values.into_iter().map(|v| format!("{v:.4}")).collect();
    format!("[{}]", items.join(", "))
}

fn spectrum_summary(spec: &Spectrum) -> String {
    let unit = spec.axis_kind.unit();
    let maxima = spec.local_maxima();
    let minima = spec.local_minima();
    format!(
        "{} maxima at {} {unit}; {} minima at {} {unit}",
        maxima.len(),
        list(maxima.iter().map(|&i| spec.axis[i])),
        minima.len(),
        list(minima.iter().map(|&i| spec.axis[i])),
    )
}

#[derive(Serialize)]
struct FitReport<'a> {
    names: Vec<&'a str>,
    values: &'a [f64],
    sigma: &'a [f64],
    residual_norm: f64,
    iterations: usize,
    converged: bool,
}

fn output_path(common: &Common, config: &RunConfig) -> Option<PathBuf> {
    common.out.clone().or_else(|| config.io.output.clone())
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(p) = path {
        io::write_atomic(p, bytes)?;
    }
    Ok(())
}

/// Runs one command and returns its summary line.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    let common = cli.command.common();
    let mut config = load_config(&common.config)?;
    if let Some(n) = common.quad_nodes {
        config.quadrature.node_count = n;
        config.quadrature.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    let out = output_path(common, &config);
    let out = out.as_deref();
    let quad = config.quadrature;
    let model = config.model.clone();

    match &cli.command {
        Command::SweepB { grid, .. } => {
            let b = field_grid(&config, grid)?;
            let spec = spectrum::sweep_field(&b, (model.detuning_1, model.detuning_2), &model, &quad)?;
            write_output(out, &io::spectrum_to_csv(&spec)?)?;
            Ok(spectrum_summary(&spec))
        }
        Command::SweepDelta { grid, .. } => {
            let d = detuning_grid(&config, grid)?;
            let spec = spectrum::sweep_detuning(&d, fixed_b(&config)?, &model, &quad)?;
            write_output(out, &io::spectrum_to_csv(&spec)?)?;
            Ok(spectrum_summary(&spec))
        }
        Command::Fit { data, .. } => {
            let path = data
                .clone()
                .or_else(|| config.io.input.clone())
                .ok_or_else(|| CliError::Usage("no input spectrum: set io.input or pass --data".into()))?;
            let spec = io::read_spectrum_csv(&path)?;
            let fit = config.fit.clone().ok_or_else(|| CliError::Usage("config needs a `fit` section".into()))?;
            let initial = fit.initial_params(&model);
            let mut options = FitOptions { quadrature: quad, fixed_b: config.fixed_b, ..Default::default() };
            if let Some(n) = fit.max_iterations {
                options.lm.max_iterations = n;
            }
            let result = analysis::fit_model(&spec, &initial, &fit.free, &fit.bounds(), &options)?;
            let report = FitReport {
                names: result.names.iter().map(|p| p.name()).collect(),
                values: &result.values,
                sigma: &result.sigma,
                residual_norm: result.residual_norm,
                iterations: result.iterations,
                converged: result.converged,
            };
            let mut json = serde_json::to_vec_pretty(&report).expect("serializable report");
            json.push(b'\n');
            write_output(out, &json)?;
            let pairs: Vec<String> =
                result.names.iter().zip(&result.values).map(|(n, v)| format!("{n} = {v:.6e}")).collect();
            Ok(format!(
                "converged = {}, iterations = {}, residual = {:.3e}; {}",
                result.converged,
                result.iterations,
                result.residual_norm,
                pairs.join(", ")
            ))
        }
        Command::ShiftScan { field, grid, .. } => {
            let scan = config
                .shift_scan
                .clone()
                .ok_or_else(|| CliError::Usage("config needs a `shift_scan` section".into()))?;
            let deltas = detuning_grid(&config, grid)?;
            let fields = match (config.grids.field, field.b_start, field.b_stop, field.b_count) {
                (None, None, None, None) => vec![fixed_b(&config)?],
                _ => field_grid(&config, field)?,
            };
            let options = config.shift_options();
            let mut rows = Vec::with_capacity(fields.len());
            for &b in &fields {
                let s = analysis::shift_scan(&model, &scan.intensities, b, &deltas, &options)?;
                rows.push(vec![b, s.slope, s.slope_sigma]);
            }
            let bytes = io::table_to_csv(&["b_G", "slope_MHz_cm2_W", "slope_sigma_MHz_cm2_W"], rows.clone())?;
            write_output(out, &bytes)?;
            let slopes: Vec<f64> = rows.iter().map(|r| r[1]).collect();
            let changes = slopes.windows(2).filter(|w| w[0] * w[1] < 0.0).count();
            if slopes.len() == 1 {
                Ok(format!("slope = {:.6e} MHz/(W/cm^2) at B = {:.4} G", slopes[0], fields[0]))
            } else {
                Ok(format!(
                    "slope from {:.4e} to {:.4e} MHz/(W/cm^2) over {} fields; {changes} sign changes",
                    slopes.iter().cloned().fold(f64::INFINITY, f64::min),
                    slopes.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                    fields.len(),
                ))
            }
        }
        Command::Decay { .. } => {
            let decay = config.decay.clone().ok_or_else(|| CliError::Usage("config needs a `decay` section".into()))?;
            let k_av = match decay.k_av {
                Some(k) => k,
                None => spectrum::thermal_average(fixed_b(&config)?, &model, &quad)?,
            };
            let times = spectrum::uniform_grid(0.0, decay.t_max, decay.count);
            let trace = trap::synthesize_trace(decay.initial_density(), k_av, &times, decay.noise_rel, config.seed)?;
            let (k, sigma) = trap::extract_k(&trace)?;
            write_output(out, &io::trace_to_csv(&trace)?)?;
            Ok(format!("K_av input = {k_av:.6e} cm^3/s, extracted = {k:.6e} +/- {sigma:.2e} cm^3/s"))
        }
        Command::FanoMin { .. } => {
            let mut rows = Vec::new();
            let mut parts = Vec::new();
            for (k, level) in Level::BOTH.into_iter().enumerate() {
                if model.gamma(level) > 0.0 {
                    let b = analysis::fano_minimum_field(&model, level);
                    rows.push(vec![(k + 1) as f64, model.q(level), b]);
                    parts.push(format!("level {level}: B = {b:.6} G"));
                }
            }
            write_output(out, &io::table_to_csv(&["level", "q", "b_G"], rows)?)?;
            Ok(format!("Fano minimum {}", parts.join("; ")))
        }
    }
}

struct StderrLogger;

impl log::Log for StderrLogger {
    fn enabled(&self, metadata: &log::Metadata) -> bool {
        metadata.level() <= log::Level::Warn
    }

    fn log(&self, record: &log::Record) {
        if self.enabled(record.metadata()) {
            eprintln!("{}: {}", record.level(), record.args());
        }
    }

    fn flush(&self) {}
}

static LOGGER: StderrLogger = StderrLogger;

/// Parses `argv`, runs the command and returns the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    if log::set_logger(&LOGGER).is_ok() {
        log::set_max_level(log::LevelFilter::Warn);
    }
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
