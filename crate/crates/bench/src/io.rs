//! CSV and JSON file formats.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{BenchError, Result};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn data_err(path: &Path, message: impl Into<String>) -> BenchError {
    BenchError::Data {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn csv_err(path: &Path, e: csv::Error) -> BenchError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => BenchError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => data_err(path, format!("{other:?}")),
    }
}

/// Numeric rows of a CSV file with a header row.
pub fn read_numeric_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let row = record
            .iter()
            .enumerate()
            .map(|(j, field)| {
                field.parse::<f64>().map_err(|_| {
                    data_err(path, format!("row {}, column {}: `{}` is not a number", i + 1, j + 1, field))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Logistic regression data: predictor columns followed by a 0/1 outcome
/// column.
pub fn read_logistic_csv(path: &Path) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let (header, rows) = read_numeric_csv(path)?;
    if header.len() < 2 {
        return Err(data_err(path, "need at least one predictor and an outcome column"));
    }
    if rows.is_empty() {
        return Err(data_err(path, "no observations"));
    }
    let mut raw = Vec::with_capacity(rows.len());
    let mut outcomes = Vec::with_capacity(rows.len());
    for mut row in rows {
        outcomes.push(row.pop().expect("non-empty row"));
        raw.push(row);
    }
    Ok((raw, outcomes))
}

/// Closing values, one per row, in a single column.
pub fn read_closes_csv(path: &Path) -> Result<Vec<f64>> {
    let (header, rows) = read_numeric_csv(path)?;
    if header.len() != 1 {
        return Err(data_err(path, "expected a single column of closing values"));
    }
    Ok(rows.into_iter().map(|r| r[0]).collect())
}

/// Serializes `rows` with a header derived from the row type.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for row in rows {
        writer.serialize(row).map_err(|e| csv_err(path, e))?;
    }
    writer.flush().map_err(io_err(path))
}

/// Header plus numeric rows, for tables whose width depends on the target.
pub fn write_table(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    writer.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        writer.write_record(row).map_err(|e| csv_err(path, e))?;
    }
    writer.flush().map_err(io_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    let mut f = File::create(path).map_err(io_err(path))?;
    f.write_all(text.as_bytes()).map_err(io_err(path))?;
    f.write_all(b"\n").map_err(io_err(path))
}

pub fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_csv_splits_outcome() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::write(&p, "a,b,y\n1,2,0\n3, 4 ,1\n").unwrap();
        let (raw, y) = read_logistic_csv(&p).unwrap();
        assert_eq!(raw, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(y, vec![0.0, 1.0]);
    }

    #[test]
    fn malformed_rows_are_data_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::write(&p, "a,y\n1,x\n").unwrap();
        let e = read_logistic_csv(&p).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        std::fs::write(&p, "a,y\n1,0\n2\n").unwrap();
        assert!(read_logistic_csv(&p).is_err());
        std::fs::write(&p, "close,extra\n1,2\n").unwrap();
        assert!(read_closes_csv(&p).is_err());
        let missing = dir.path().join("none.csv");
        assert!(matches!(read_closes_csv(&missing), Err(BenchError::Io { .. })));
    }
}
