//! CSV input and output.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use lotus_core::dataset::{encode_with_names, Encoded, RawTable};
use lotus_core::Matrix;

use crate::error::{csv_err, io_err, Error, Result};

/// A CSV file split into features and an optional label column.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub id: String,
    pub encoded: Encoded,
    pub labels: Option<Vec<i64>>,
}

/// File stem, used as the dataset id.
pub fn dataset_id(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_owned)
        .ok_or_else(|| Error::Format {
            path: path.into(),
            message: "cannot derive a dataset id from the file name".into(),
        })
}

fn read_records(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err(path))?;
    let header: Vec<String> = reader.headers().map_err(csv_err(path))?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        rows.push(rec.map_err(csv_err(path))?.iter().map(str::to_owned).collect());
    }
    Ok((header, rows))
}

/// Integer labels are kept; any other values are numbered in order of
/// first appearance.
fn parse_labels(values: Vec<String>) -> Vec<i64> {
    if let Ok(ints) = values.iter().map(|v| v.parse::<i64>()).collect::<Result<Vec<_>, _>>() {
        return ints;
    }
    let mut codes = BTreeMap::new();
    values
        .into_iter()
        .map(|v| {
            let next = codes.len() as i64;
            *codes.entry(v).or_insert(next)
        })
        .collect()
}

/// Reads a CSV with a header row and encodes every column except
/// `label_column`, which is returned separately when present.
pub fn read_dataset(path: &Path, label_column: &str) -> Result<LoadedDataset> {
    let id = dataset_id(path)?;
    let (mut header, mut rows) = read_records(path)?;
    let labels = header.iter().position(|h| h == label_column).map(|j| {
        header.remove(j);
        parse_labels(rows.iter_mut().map(|r| r.remove(j)).collect())
    });
    let table = RawTable::from_strings(header, rows, id.clone())?;
    let encoded = encode_with_names(&table).map_err(|e| lotus_core::Error::Dataset {
        id: id.clone(),
        source: Box::new(e),
    })?;
    Ok(LoadedDataset { id, encoded, labels })
}

/// Every `*.csv` in `dir`, sorted by file name.
pub fn csv_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    out.sort();
    Ok(out)
}

/// Writes a matrix with a header row; values use the shortest decimal form
/// that parses back to the same `f64`.
pub fn write_matrix(path: &Path, m: &Matrix, names: Option<&[String]>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let header: Vec<String> = match names {
        Some(n) => n.to_vec(),
        None => (0..m.cols()).map(|j| format!("c{j}")).collect(),
    };
    w.write_record(&header).map_err(csv_err(path))?;
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads a headed, all-numeric CSV.
pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let (header, rows) = read_records(path)?;
    let bad = |message: String| Error::Format {
        path: path.into(),
        message,
    };
    if rows.is_empty() || header.is_empty() {
        return Err(bad("no data rows".into()));
    }
    let d = header.len();
    let mut data = Vec::with_capacity(rows.len() * d);
    for (i, row) in rows.iter().enumerate() {
        for cell in row {
            let v: f64 = cell
                .parse()
                .map_err(|_| bad(format!("line {}: {cell:?} is not a number", i + 2)))?;
            data.push(v);
        }
    }
    Ok(Matrix::from_vec(rows.len(), d, data))
}
