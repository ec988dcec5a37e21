//! CSV and number formatting. Every output file has a header row, one record
//! per line, a trailing newline, and reals fixed at six significant digits so
//! reruns are byte-comparable.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::CliError;

/// Formats a real to six significant digits in plain decimal notation.
pub fn fmt_real(x: f64) -> String {
    if x == 0.0 {
        return "0.000000".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).clamp(0, 17) as usize;
    format!("{x:.decimals$}")
}

pub struct CsvWriter {
    inner: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &str) -> Result<Self, CliError> {
        let file = File::create(path)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
        let mut writer = CsvWriter { inner: BufWriter::new(file) };
        writer.row(header)?;
        Ok(writer)
    }

    pub fn row(&mut self, line: &str) -> Result<(), CliError> {
        writeln!(self.inner, "{line}").map_err(CliError::from)
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.inner.flush().map_err(CliError::from)
    }
}

/// Evenly spaced grid from `min` to `max` inclusive. A single step collapses
/// to `min`.
pub fn linspace(min: f64, max: f64, steps: usize) -> Vec<f64> {
    if steps <= 1 {
        return vec![min];
    }
    let stride = (max - min) / (steps - 1) as f64;
    (0..steps).map(|i| min + i as f64 * stride).collect()
}
