//! Observation matrices: standardization and CSV round trips.
//!
//! A dataset is an `n x d` matrix with one sample per row. CSV files carry a
//! header row, comma delimiters, `.` decimal separators, and UTF-8 text.
//! Floats are written with 17 significant digits so values round-trip exactly
//! and repeated runs produce byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use thiserror::Error;

/// `n x d` observation matrix, rows are samples, columns are variables.
pub type DataMatrix = Array2<f64>;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}, data row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        path: String,
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("{path}, data row {row}, column {column}: cannot parse {value:?} as a number")]
    BadNumber {
        path: String,
        row: usize,
        column: usize,
        value: String,
    },
    #[error("{path}, data row {row}, column {column}: non-finite value")]
    NonFinite {
        path: String,
        row: usize,
        column: usize,
    },
    #[error("{path}: no data rows")]
    Empty { path: String },
    #[error("column {column} is constant; cannot standardize")]
    ConstantColumn { column: usize },
}

/// Per-column affine transform recorded when a matrix is standardized.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl Standardization {
    /// Maps a raw row into standardized coordinates.
    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.sds))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }
}

/// Rescales every column to mean 0 and variance 1 (population convention).
///
/// Fails on a constant column; the reported index is 0-based.
pub fn standardize(x: &DataMatrix) -> Result<(DataMatrix, Standardization), DataError> {
    let n = x.nrows() as f64;
    let mut out = x.clone();
    let mut means = Vec::with_capacity(x.ncols());
    let mut sds = Vec::with_capacity(x.ncols());
    for (c, mut col) in out.columns_mut().into_iter().enumerate() {
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        if sd == 0.0 || !sd.is_finite() {
            return Err(DataError::ConstantColumn { column: c });
        }
        col.mapv_inplace(|v| (v - mean) / sd);
        means.push(mean);
        sds.push(sd);
    }
    Ok((out, Standardization { means, sds }))
}

/// Reads a headed numeric CSV into a matrix.
///
/// Every parse failure names the data row (1-based, header excluded) and
/// column where it occurred.
pub fn read_matrix_csv(path: &Path) -> Result<(DataMatrix, Vec<String>), DataError> {
    let p = path.display().to_string();
    let file = File::open(path).map_err(|source| DataError::Io {
        path: p.clone(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|source| DataError::Csv {
            path: p.clone(),
            source,
        })?
        .iter()
        .map(str::to_owned)
        .collect();
    let d = header.len();
    let mut values: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|source| DataError::Csv {
            path: p.clone(),
            source,
        })?;
        if record.len() != d {
            return Err(DataError::RaggedRow {
                path: p.clone(),
                row,
                expected: d,
                found: record.len(),
            });
        }
        for (column, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| DataError::BadNumber {
                path: p.clone(),
                row,
                column: column + 1,
                value: field.to_owned(),
            })?;
            if !v.is_finite() {
                return Err(DataError::NonFinite {
                    path: p.clone(),
                    row,
                    column: column + 1,
                });
            }
            values.push(v);
        }
        n += 1;
    }
    if n == 0 {
        return Err(DataError::Empty { path: p });
    }
    let matrix = Array2::from_shape_vec((n, d), values)
        .expect("row-major buffer matches the counted shape");
    Ok((matrix, header))
}

/// Formats a float with 17 significant digits, enough to round-trip `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a matrix as headed CSV with round-trip float precision.
pub fn write_matrix_csv(
    path: &Path,
    matrix: &DataMatrix,
    header: &[String],
) -> Result<(), DataError> {
    assert_eq!(matrix.ncols(), header.len(), "header width mismatch");
    let p = path.display().to_string();
    let file = File::create(path).map_err(|source| DataError::Io {
        path: p.clone(),
        source,
    })?;
    let mut out = BufWriter::new(file);
    let write_err = |source| DataError::Io {
        path: p.clone(),
        source,
    };
    writeln!(out, "{}", header.join(",")).map_err(write_err)?;
    for row in matrix.rows() {
        let line: Vec<String> = row.iter().map(|v| format_float(*v)).collect();
        writeln!(out, "{}", line.join(",")).map_err(|source| DataError::Io {
            path: p.clone(),
            source,
        })?;
    }
    out.flush().map_err(|source| DataError::Io { path: p, source })
}

/// Column names `X1..Xd` used by generated datasets.
pub fn default_header(d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("X{i}")).collect()
}
