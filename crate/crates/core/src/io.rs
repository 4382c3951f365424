//! CSV ingestion and export.
//!
//! Files hold one observation per row. Matrices are transposed on load so
//! that observations become columns.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{EasError, Result};
use crate::matstat::DenseMatrix;
use crate::model::Dataset;

/// Read a numeric CSV as an `rows × cols` matrix, rows being file records.
pub fn read_csv_matrix(path: &Path, header: bool) -> Result<DenseMatrix> {
    let shown = path.display().to_string();
    let file = File::open(path).map_err(|e| EasError::Io(format!("{shown}: {e}")))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            EasError::Parse {
                path: shown.clone(),
                line,
                message: e.to_string(),
            }
        })?;
        let line = record.position().map_or(rows + 1, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(EasError::Parse {
                    path: shown,
                    line,
                    message: format!("expected {c} fields, found {}", record.len()),
                })
            }
            _ => {}
        }
        for field in record.iter() {
            let v: f64 = field.parse().map_err(|_| EasError::Parse {
                path: shown.clone(),
                line,
                message: format!("`{field}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(EasError::Parse {
                    path: shown.clone(),
                    line,
                    message: format!("non-finite value `{field}`"),
                });
            }
            values.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| EasError::Parse {
        path: shown,
        line: 0,
        message: "no data rows".into(),
    })?;
    Ok(DenseMatrix::from_row_slice(rows, cols, &values))
}

/// Write `m` with one record per row; `{}` formatting round-trips every `f64`.
pub fn write_csv_matrix(path: &Path, m: &DenseMatrix) -> Result<()> {
    let mut out = std::io::BufWriter::new(File::create(path)?);
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Load `Y` (`n × q`) and `X` (`n × p`) files into a column-observation dataset.
pub fn load_dataset(y_path: &Path, x_path: &Path, header: bool) -> Result<Dataset> {
    let y = read_csv_matrix(y_path, header)?;
    let x = read_csv_matrix(x_path, header)?;
    if y.nrows() != x.nrows() {
        return Err(EasError::DimensionMismatch(format!(
            "{} has {} rows but {} has {}",
            y_path.display(),
            y.nrows(),
            x_path.display(),
            x.nrows()
        )));
    }
    Dataset::new(y.transpose(), x.transpose())
}

/// Write a dataset as `Y` and `X` files with observations in rows.
pub fn save_dataset(data: &Dataset, y_path: &Path, x_path: &Path) -> Result<()> {
    write_csv_matrix(y_path, &data.y().transpose())?;
    write_csv_matrix(x_path, &data.x().transpose())
}

/// Proposal weights from a file holding a single row or a single column.
pub fn read_weights(path: &Path, header: bool) -> Result<Vec<f64>> {
    let m = read_csv_matrix(path, header)?;
    if m.nrows() != 1 && m.ncols() != 1 {
        return Err(EasError::Parse {
            path: path.display().to_string(),
            line: 0,
            message: "weights must be one row or one column".into(),
        });
    }
    Ok(m.iter().copied().collect())
}
