//! CSV and JSON input/output.
//!
//! Numeric tables travel as plain comma-separated values; models and run
//! configurations as JSON. Floats are printed with 17 significant digits so
//! written matrices read back bit-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::CliError;

/// 17 significant digits: enough to round-trip any f64 exactly.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Reads an observations matrix: rows are observations, columns variables.
/// A single non-numeric first row is treated as a header and skipped; ragged
/// rows are rejected with their 1-based row number.
pub fn read_observations(path: &Path) -> Result<Array2<f64>, CliError> {
    let raw = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    let mut header_skipped = false;
    for (idx, line) in raw.lines().enumerate() {
        let row_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parsed: std::result::Result<Vec<f64>, _> =
            fields.iter().map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(values) => {
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(CliError::Data(format!(
                        "{}: non-finite value on row {row_no}",
                        path.display()
                    )));
                }
                match width {
                    None => width = Some(values.len()),
                    Some(w) if w != values.len() => {
                        return Err(CliError::Data(format!(
                            "{}: ragged row {row_no} has {} fields, expected {w}",
                            path.display(),
                            values.len()
                        )));
                    }
                    _ => {}
                }
                rows.push(values);
            }
            Err(_) => {
                if rows.is_empty() && !header_skipped {
                    header_skipped = true;
                    continue;
                }
                return Err(CliError::Data(format!(
                    "{}: non-numeric value on row {row_no}",
                    path.display()
                )));
            }
        }
    }
    let width = width.ok_or_else(|| {
        CliError::Data(format!("{}: no numeric rows found", path.display()))
    })?;
    if width == 0 {
        return Err(CliError::Data(format!("{}: rows are empty", path.display())));
    }
    let n = rows.len();
    let mut out = Array2::zeros((n, width));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            out[[i, j]] = v;
        }
    }
    Ok(out)
}

/// Reads a single-column CSV of class ids (a non-numeric header row is
/// skipped).
pub fn read_labels(path: &Path) -> Result<Vec<usize>, CliError> {
    let raw = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut labels = Vec::new();
    let mut header_skipped = false;
    for (idx, line) in raw.lines().enumerate() {
        let row_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        match trimmed.parse::<usize>() {
            Ok(v) => labels.push(v),
            Err(_) => {
                if labels.is_empty() && !header_skipped {
                    header_skipped = true;
                    continue;
                }
                return Err(CliError::Data(format!(
                    "{}: row {row_no} is not a nonnegative integer label",
                    path.display()
                )));
            }
        }
    }
    if labels.is_empty() {
        return Err(CliError::Data(format!("{}: no labels found", path.display())));
    }
    Ok(labels)
}

/// Writes a matrix as plain CSV, one row per line.
pub fn write_matrix_csv(path: &Path, matrix: &Array2<f64>) -> Result<(), CliError> {
    let mut out = String::new();
    for row in matrix.outer_iter() {
        let line: Vec<String> = row.iter().map(|&v| fmt_float(v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    write_text(path, &out)
}

/// One row of the long-format experiment table.
pub struct LongRow {
    pub scenario: String,
    pub trial: usize,
    pub method: String,
    pub metric: String,
    pub value: f64,
}

/// Writes the long-format experiment CSV: `scenario,trial,method,metric,value`.
pub fn write_long_csv(path: &Path, rows: &[LongRow]) -> Result<(), CliError> {
    let mut out = String::from("scenario,trial,method,metric,value\n");
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            row.scenario,
            row.trial,
            row.method,
            row.metric,
            fmt_float(row.value)
        );
    }
    write_text(path, &out)
}

pub fn write_text(path: &Path, content: &str) -> Result<(), CliError> {
    fs::write(path, content)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

/// Writes the resolved run configuration next to the output file so the run
/// can be reproduced exactly.
pub fn write_sidecar(output: &Path, config: &serde_json::Value) -> Result<(), CliError> {
    let mut sidecar = output.as_os_str().to_owned();
    sidecar.push(".config.json");
    let text = format!("{:#}\n", config);
    fs::write(&sidecar, text).map_err(|e| {
        CliError::Data(format!(
            "cannot write sidecar {}: {e}",
            Path::new(&sidecar).display()
        ))
    })
}

/// Serializes a fitted per-class Gaussian model to the documented JSON
/// schema, with reals at 17 significant digits.
pub fn model_json(
    classes: &[cernn_core::applications::GaussianClass],
    seed: u64,
) -> String {
    let p = classes.first().map(|c| c.mean().len()).unwrap_or(0);
    let mut out = String::from("{\n  \"classes\": [\n");
    for (k, class) in classes.iter().enumerate() {
        let mean: Vec<String> = class.mean().iter().map(|&v| fmt_float(v)).collect();
        let cov: Vec<String> = class
            .covariance()
            .matrix()
            .as_array()
            .iter()
            .map(|&v| fmt_float(v))
            .collect();
        let params = match class.covariance().params() {
            cernn_core::MethodParams::Cernn { lambda, alpha, .. } => format!(
                "\"lambda\": {}, \"alpha\": {}",
                fmt_float(*lambda),
                fmt_float(*alpha)
            ),
            cernn_core::MethodParams::Linear { gamma, .. } => {
                format!("\"gamma\": {}", fmt_float(*gamma))
            }
            _ => "\"lambda\": null, \"alpha\": null".to_string(),
        };
        let _ = write!(
            out,
            "    {{\"prior\": {}, \"mean\": [{}], \"covariance\": [{}], {}}}",
            fmt_float(class.prior()),
            mean.join(", "),
            cov.join(", "),
            params
        );
        out.push_str(if k + 1 < classes.len() { ",\n" } else { "\n" });
    }
    let _ = write!(
        out,
        "  ],\n  \"meta\": {{\"p\": {p}, \"c\": {}, \"seed\": {seed}}}\n}}\n",
        classes.len()
    );
    out
}
