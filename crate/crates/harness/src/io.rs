//! Plain CSV matrix files: comma-separated decimal floats, one row per
//! line, no header. Written at 17 significant digits so a write/read
//! round trip is bit-exact.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{HarnessError, Result};

/// Formats a float with 17 significant digits (lossless for f64).
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let text = fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_matrix(&text, &path.display().to_string())
}

pub fn parse_matrix(text: &str, path: &str) -> Result<Array2<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for token in line.split(',') {
            let token = token.trim();
            let value: f64 = token.parse().map_err(|_| HarnessError::Parse {
                path: path.to_string(),
                line: line_no,
                message: format!("not a number: {token:?}"),
            })?;
            if !value.is_finite() {
                return Err(HarnessError::Parse {
                    path: path.to_string(),
                    line: line_no,
                    message: format!("non-finite entry: {token:?}"),
                });
            }
            row.push(value);
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(HarnessError::Parse {
                    path: path.to_string(),
                    line: line_no,
                    message: format!("ragged row: {} entries, expected {w}", row.len()),
                });
            }
            _ => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(HarnessError::Parse {
            path: path.to_string(),
            line: 0,
            message: "empty file".into(),
        });
    }
    let (r, c) = (rows.len(), width.unwrap());
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(Array2::from_shape_vec((r, c), flat).expect("rectangular by construction"))
}

pub fn write_matrix(path: &Path, m: &Array2<f64>) -> Result<()> {
    if let Some(bad) = m.iter().find(|v| !v.is_finite()) {
        return Err(HarnessError::Invalid(format!(
            "refusing to write non-finite entry {bad}"
        )));
    }
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format_f64(m[[i, j]])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}
