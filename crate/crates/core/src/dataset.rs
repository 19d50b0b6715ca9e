//! Raw tables, their numeric encoding, and seeded row subsampling.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    /// Numeric with at least one missing cell.
    MissingCapable,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Number(f64),
    Text(String),
    Missing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    columns: Vec<Column>,
    rows: Vec<Vec<Cell>>,
    source_id: String,
}

/// Empty strings and a literal `NA` count as missing.
pub fn is_missing_token(s: &str) -> bool {
    let t = s.trim();
    t.is_empty() || t == "NA"
}

impl RawTable {
    /// Builds a table from raw string cells, inferring each column's kind.
    ///
    /// A column is numeric when every non-missing cell parses as a finite
    /// float, categorical otherwise.
    pub fn from_strings(
        names: Vec<String>,
        rows: Vec<Vec<String>>,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        let width = names.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != width) {
            return Err(Error::DimensionMismatch(format!(
                "row {} has {} fields, expected {}",
                bad,
                rows[bad].len(),
                width
            )));
        }
        let mut kinds = Vec::with_capacity(width);
        for j in 0..width {
            let mut numeric = true;
            let mut missing = false;
            for r in &rows {
                let s = &r[j];
                if is_missing_token(s) {
                    missing = true;
                } else if !s.trim().parse::<f64>().is_ok_and(f64::is_finite) {
                    numeric = false;
                }
            }
            kinds.push(match (numeric, missing) {
                (false, _) => ColumnKind::Categorical,
                (true, true) => ColumnKind::MissingCapable,
                (true, false) => ColumnKind::Numeric,
            });
        }
        let cells = rows
            .into_iter()
            .map(|r| {
                r.into_iter()
                    .zip(&kinds)
                    .map(|(s, kind)| {
                        if is_missing_token(&s) {
                            Cell::Missing
                        } else if *kind == ColumnKind::Categorical {
                            Cell::Text(s.trim().to_string())
                        } else {
                            Cell::Number(s.trim().parse().unwrap_or(f64::NAN))
                        }
                    })
                    .collect()
            })
            .collect();
        let columns = names
            .into_iter()
            .zip(kinds)
            .map(|(name, kind)| Column { name, kind })
            .collect();
        Ok(RawTable {
            columns,
            rows: cells,
            source_id: source_id.into(),
        })
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }
}

/// An encoded dataset: finite entries, at least two rows and one column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericMatrix {
    data: Matrix,
    source_id: String,
}

impl NumericMatrix {
    pub fn new(data: Matrix, source_id: impl Into<String>) -> Result<Self> {
        if data.rows() < 2 {
            return Err(Error::DegenerateInput(format!(
                "need at least 2 rows, got {}",
                data.rows()
            )));
        }
        if data.cols() < 1 {
            return Err(Error::DegenerateInput("need at least 1 column".into()));
        }
        if !data.is_finite() {
            return Err(Error::DegenerateInput("matrix has non-finite entries".into()));
        }
        Ok(NumericMatrix {
            data,
            source_id: source_id.into(),
        })
    }

    pub fn data(&self) -> &Matrix {
        &self.data
    }

    pub fn into_data(self) -> Matrix {
        self.data
    }

    pub fn n(&self) -> usize {
        self.data.rows()
    }

    pub fn d(&self) -> usize {
        self.data.cols()
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn with_source_id(mut self, id: impl Into<String>) -> Self {
        self.source_id = id.into();
        self
    }
}

/// Encoded matrix plus the name of every surviving output column.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    pub matrix: NumericMatrix,
    pub column_names: Vec<String>,
}

/// One-hot encodes categoricals (first-appearance order), imputes missing
/// numerics with the column median, drops constant columns and standardizes
/// the rest to zero mean and unit population variance.
///
/// Missing cells of a categorical column form their own `NA` category.
pub fn encode(t: &RawTable) -> Result<NumericMatrix> {
    encode_with_names(t).map(|e| e.matrix)
}

pub fn encode_with_names(t: &RawTable) -> Result<Encoded> {
    let n = t.n_rows();
    if n == 0 || t.columns.is_empty() {
        return Err(Error::DegenerateInput(format!("table {} is empty", t.source_id)));
    }
    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    for (j, col) in t.columns.iter().enumerate() {
        match col.kind {
            ColumnKind::Categorical => {
                let mut order: Vec<String> = Vec::new();
                let mut codes: BTreeMap<String, usize> = BTreeMap::new();
                let row_codes: Vec<usize> = t
                    .rows
                    .iter()
                    .map(|r| {
                        let key = match &r[j] {
                            Cell::Text(s) => s.clone(),
                            Cell::Number(x) => format!("{x}"),
                            Cell::Missing => String::from("NA"),
                        };
                        *codes.entry(key.clone()).or_insert_with(|| {
                            order.push(key);
                            order.len() - 1
                        })
                    })
                    .collect();
                for (code, level) in order.iter().enumerate() {
                    let values = row_codes
                        .iter()
                        .map(|&c| if c == code { 1.0 } else { 0.0 })
                        .collect();
                    columns.push((format!("{}={}", col.name, level), values));
                }
            }
            ColumnKind::Numeric | ColumnKind::MissingCapable => {
                let mut present: Vec<f64> = t
                    .rows
                    .iter()
                    .filter_map(|r| match r[j] {
                        Cell::Number(x) => Some(x),
                        _ => None,
                    })
                    .collect();
                if present.is_empty() {
                    // all-missing columns carry nothing
                    continue;
                }
                let fill = math::median(&mut present);
                let values = t
                    .rows
                    .iter()
                    .map(|r| match r[j] {
                        Cell::Number(x) => x,
                        _ => fill,
                    })
                    .collect();
                columns.push((col.name.clone(), values));
            }
        }
    }

    columns.retain(|(_, v)| v.iter().any(|&x| x != v[0]));
    if columns.is_empty() {
        return Err(Error::DegenerateInput(format!(
            "every column of {} is constant",
            t.source_id
        )));
    }

    for (_, v) in columns.iter_mut() {
        standardize(v);
    }
    let d = columns.len();
    let data = Matrix::from_fn(n, d, |i, j| columns[j].1[i]);
    let matrix = NumericMatrix::new(data, t.source_id.clone())?;
    Ok(Encoded {
        matrix,
        column_names: columns.into_iter().map(|(name, _)| name).collect(),
    })
}

fn standardize(v: &mut [f64]) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let sd = math::sqrt(var);
    for x in v.iter_mut() {
        *x = (*x - mean) / sd;
    }
}

/// Re-encodes an already numeric matrix (constant-column removal and
/// standardization), used for synthetic data and pre-encoded CSVs.
pub fn standardize_matrix(m: &Matrix, source_id: &str) -> Result<NumericMatrix> {
    let keep: Vec<usize> = (0..m.cols())
        .filter(|&j| {
            let first = m[(0, j)];
            (0..m.rows()).any(|i| m[(i, j)] != first)
        })
        .collect();
    if keep.is_empty() || m.rows() == 0 {
        return Err(Error::DegenerateInput(format!(
            "every column of {source_id} is constant"
        )));
    }
    let mut cols: Vec<Vec<f64>> = keep.iter().map(|&j| m.column(j)).collect();
    for c in cols.iter_mut() {
        standardize(c);
    }
    NumericMatrix::new(Matrix::from_fn(m.rows(), cols.len(), |i, j| cols[j][i]), source_id)
}

/// Seeded uniform row sample without replacement; identity when `n <= cap`.
/// Selected rows keep their original relative order.
pub fn subsample(m: &NumericMatrix, cap: usize, seed: u64) -> NumericMatrix {
    subsample_indices(m.n(), cap, seed).map_or_else(
        || m.clone(),
        |idx| NumericMatrix {
            data: m.data.select_rows(&idx),
            source_id: m.source_id.clone(),
        },
    )
}

/// Row indices chosen by [`subsample`], or `None` for the identity branch.
pub fn subsample_indices(n: usize, cap: usize, seed: u64) -> Option<Vec<usize>> {
    let cap = cap.max(2);
    if n <= cap {
        return None;
    }
    let mut rng = rng::rng(seed);
    let mut idx = index::sample(&mut rng, n, cap).into_vec();
    idx.sort_unstable();
    Some(idx)
}
