//! CSV schemas for spectra and decay traces, and atomic file output.
//!
//! Spectra: `axis_G,K_av_cm3_s` or `axis_MHz,K_av_cm3_s`.
//! Traces: `t_s,n_cm3`.
//! Numbers are written in scientific notation with 17 significant digits.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::spectrum::{AxisKind, Spectrum};
use crate::trap::DecayTrace;

pub const RATE_COLUMN: &str = "K_av_cm3_s";
pub const TRACE_COLUMNS: [&str; 2] = ["t_s", "n_cm3"];

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("schema error: {0}")]
    SchemaError(String),
    #[error("axis not strictly increasing at row {row}")]
    MonotonicityError { row: usize },
    #[error("row {row}: {message}")]
    Value { row: usize, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.display().to_string(), source }
}

/// Scientific notation with 17 significant digits.
pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn axis_column(kind: AxisKind) -> String {
    format!("axis_{}", kind.unit())
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// followed by a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| IoError::Io { path: path.display().to_string(), source: e.error })?;
    Ok(())
}

/// Renders a numeric table with a header row.
pub fn table_to_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<Vec<u8>, IoError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|&v| format_number(v)))?;
    }
    w.into_inner().map_err(|e| IoError::Io {
        path: String::from("<buffer>"),
        source: std::io::Error::other(e.to_string()),
    })
}

pub fn spectrum_to_csv(spec: &Spectrum) -> Result<Vec<u8>, IoError> {
    let axis = axis_column(spec.axis_kind);
    table_to_csv(&[axis.as_str(), RATE_COLUMN], spec.axis.iter().zip(&spec.rates).map(|(a, r)| vec![*a, *r]))
}

pub fn write_spectrum_csv(spec: &Spectrum, path: &Path) -> Result<(), IoError> {
    write_atomic(path, &spectrum_to_csv(spec)?)
}

fn read_table<T>(
    text: &[u8],
    expected: usize,
    check: impl FnOnce(&[String]) -> Result<T, IoError>,
) -> Result<(T, Vec<Vec<f64>>), IoError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(text);
    let header: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let checked = check(&header)?;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        if rec.len() != expected {
            return Err(IoError::SchemaError(format!("row {row} has {} fields, expected {expected}", rec.len())));
        }
        let values = rec
            .iter()
            .map(|s| {
                s.trim().parse::<f64>().map_err(|e| IoError::Value { row, message: format!("`{s}`: {e}") })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(values);
    }
    Ok((checked, rows))
}

fn check_header(header: &[String], expected: &[&str]) -> Result<(), IoError> {
    if let Some(extra) = header.get(expected.len()) {
        return Err(IoError::SchemaError(format!("unexpected column `{extra}`")));
    }
    for (i, want) in expected.iter().enumerate() {
        match header.get(i) {
            None => return Err(IoError::SchemaError(format!("missing column `{want}`"))),
            Some(got) if got != want => {
                return Err(IoError::SchemaError(format!("column {} is `{got}`, expected `{want}`", i + 1)))
            }
            _ => {}
        }
    }
    Ok(())
}

pub fn spectrum_from_csv(text: &[u8]) -> Result<Spectrum, IoError> {
    let (kind, rows) = read_table(text, 2, |header| {
        let kind = match header.first().map(String::as_str) {
            Some(c) if c == axis_column(AxisKind::FieldSweep) => AxisKind::FieldSweep,
            Some(c) if c == axis_column(AxisKind::DetuningSweep) => AxisKind::DetuningSweep,
            Some(c) => {
                return Err(IoError::SchemaError(format!(
                    "unexpected column `{c}`, expected `axis_G` or `axis_MHz`"
                )))
            }
            None => return Err(IoError::SchemaError("empty header".into())),
        };
        check_header(header, &[axis_column(kind).as_str(), RATE_COLUMN])?;
        Ok(kind)
    })?;
    let axis: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let rates: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    if axis.is_empty() {
        return Err(IoError::SchemaError("no data rows".into()));
    }
    if let Some(i) = axis.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(IoError::MonotonicityError { row: i + 2 });
    }
    if let Some(i) = rates.iter().position(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(IoError::Value { row: i + 1, message: "rate must be finite and >= 0".into() });
    }
    Spectrum::new(kind, axis, rates, None).map_err(|e| IoError::SchemaError(e.to_string()))
}

pub fn read_spectrum_csv(path: &Path) -> Result<Spectrum, IoError> {
    spectrum_from_csv(&std::fs::read(path).map_err(io_err(path))?)
}

pub fn trace_to_csv(trace: &DecayTrace) -> Result<Vec<u8>, IoError> {
    table_to_csv(&TRACE_COLUMNS, trace.times.iter().zip(&trace.densities).map(|(t, n)| vec![*t, *n]))
}

pub fn write_trace_csv(trace: &DecayTrace, path: &Path) -> Result<(), IoError> {
    write_atomic(path, &trace_to_csv(trace)?)
}

pub fn trace_from_csv(text: &[u8]) -> Result<DecayTrace, IoError> {
    let ((), rows) = read_table(text, 2, |header| check_header(header, &TRACE_COLUMNS))?;
    let times: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let densities: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    if times.is_empty() {
        return Err(IoError::SchemaError("no data rows".into()));
    }
    if let Some(i) = times.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(IoError::MonotonicityError { row: i + 2 });
    }
    let n0 = densities[0];
    Ok(DecayTrace { times, densities, n0 })
}

pub fn read_trace_csv(path: &Path) -> Result<DecayTrace, IoError> {
    trace_from_csv(&std::fs::read(path).map_err(io_err(path))?)
}
