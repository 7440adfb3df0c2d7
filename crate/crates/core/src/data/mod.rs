//! Tabular datasets: validation, CSV ingestion, seeded splits.

mod csv_io;
pub mod loaders;

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use self::csv_io::{load_csv, read_csv, save_csv, write_csv, CsvOptions, EncodingTable};
use crate::graph::NodeKind;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: expected {expected} fields, found {found}")]
    Ragged {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: value `{value}` in column `{column}` has no entry in the encoding table")]
    UnmappedCategory {
        line: u64,
        column: String,
        value: String,
    },
    #[error("line {line}: cannot parse `{value}` in column `{column}` as a number")]
    Parse {
        line: u64,
        column: String,
        value: String,
    },
    #[error("non-finite value in column `{column}` at row {row}")]
    NonFinite { column: String, row: usize },
    #[error("binary column `{column}` holds {value} at row {row}")]
    NotBinary {
        column: String,
        row: usize,
        value: f64,
    },
    #[error("row {row} has {found} values, expected {expected}")]
    Shape {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("column `{0}` not found")]
    MissingColumn(String),
    #[error("split fraction must lie strictly between 0 and 1, got {0}")]
    BadFraction(f64),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub kind: NodeKind,
}

impl Column {
    pub fn new(name: impl Into<String>, kind: NodeKind) -> Self {
        Self {
            name: name.into(),
            kind,
        }
    }
}

/// Rectangular, finite, row-major table. Binary columns hold only 0 and 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T = f64> {
    columns: Vec<Column>,
    index: HashMap<String, usize>,
    rows: Vec<Vec<T>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(columns: Vec<Column>, rows: Vec<Vec<T>>) -> Result<Self, DataError> {
        let mut index = HashMap::with_capacity(columns.len());
        for (i, c) in columns.iter().enumerate() {
            if index.insert(c.name.clone(), i).is_some() {
                return Err(DataError::DuplicateColumn(c.name.clone()));
            }
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(DataError::Shape {
                    row: r,
                    expected: columns.len(),
                    found: row.len(),
                });
            }
            for (c, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(DataError::NonFinite {
                        column: columns[c].name.clone(),
                        row: r,
                    });
                }
                if columns[c].kind == NodeKind::Binary && v != T::zero() && v != T::one() {
                    return Err(DataError::NotBinary {
                        column: columns[c].name.clone(),
                        row: r,
                        value: v.as_f64(),
                    });
                }
            }
        }
        Ok(Self {
            columns,
            index,
            rows,
        })
    }

    /// Builds a dataset from named columns of equal length.
    pub fn from_columns(columns: Vec<(Column, Vec<T>)>) -> Result<Self, DataError> {
        let n = columns.first().map_or(0, |(_, v)| v.len());
        let mut rows = vec![Vec::with_capacity(columns.len()); n];
        for (_, values) in &columns {
            if values.len() != n {
                return Err(DataError::Shape {
                    row: values.len().min(n),
                    expected: n,
                    found: values.len(),
                });
            }
            for (row, &v) in rows.iter_mut().zip(values) {
                row.push(v);
            }
        }
        Self::new(columns.into_iter().map(|(c, _)| c).collect(), rows)
    }

    /// Marks every column whose values are all 0 or 1 as binary.
    pub fn with_inferred_kinds(mut self) -> Self {
        for (c, col) in self.columns.iter_mut().enumerate() {
            let binary = !self.rows.is_empty()
                && self.rows.iter().all(|r| r[c] == T::zero() || r[c] == T::one());
            col.kind = if binary {
                NodeKind::Binary
            } else {
                NodeKind::Continuous
            };
        }
        self
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.rows[i]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn kind(&self, name: &str) -> Option<NodeKind> {
        self.column_index(name).map(|i| self.columns[i].kind)
    }

    pub fn column(&self, name: &str) -> Option<Vec<T>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn require_column(&self, name: &str) -> Result<usize, DataError> {
        self.column_index(name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        Self {
            columns: self.columns.clone(),
            index: self.index.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Keeps only the named columns, in the given order.
    pub fn select_columns(&self, names: &[&str]) -> Result<Self, DataError> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| self.require_column(n))
            .collect::<Result<_, _>>()?;
        let columns = idx.iter().map(|&i| self.columns[i].clone()).collect();
        let rows = self
            .rows
            .iter()
            .map(|r| idx.iter().map(|&i| r[i]).collect())
            .collect();
        Self::new(columns, rows)
    }

    pub fn drop_column(&self, name: &str) -> Result<Self, DataError> {
        self.require_column(name)?;
        let keep: Vec<&str> = self.names().into_iter().filter(|&n| n != name).collect();
        self.select_columns(&keep)
    }

    pub fn cast<U: Scalar>(&self) -> Dataset<U> {
        Dataset {
            columns: self.columns.clone(),
            index: self.index.clone(),
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|&v| U::of(v.as_f64())).collect())
                .collect(),
        }
    }
}

/// Seeded shuffle split into `floor(n * fraction)` training rows and the rest.
pub fn split<T: Scalar>(
    data: &Dataset<T>,
    fraction: f64,
    seed: u64,
) -> Result<(Dataset<T>, Dataset<T>), DataError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(DataError::BadFraction(fraction));
    }
    let mut idx: Vec<usize> = (0..data.n_rows()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = (data.n_rows() as f64 * fraction).floor() as usize;
    Ok((data.select_rows(&idx[..cut]), data.select_rows(&idx[cut..])))
}
