//! Column-major predictor matrix shared by the tree learners.
//!
//! Missing values are stored as `NaN`. Categorical columns hold integer
//! level codes (as `f64`) indexing into the column's level dictionary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical { levels: Vec<String> },
}

impl ColumnKind {
    pub fn is_categorical(&self) -> bool {
        matches!(self, ColumnKind::Categorical { .. })
    }

    pub fn n_levels(&self) -> usize {
        match self {
            ColumnKind::Numeric => 0,
            ColumnKind::Categorical { levels } => levels.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

impl ColumnSpec {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Numeric,
        }
    }

    pub fn categorical(name: impl Into<String>, levels: Vec<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Categorical { levels },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    n_rows: usize,
    columns: Vec<ColumnSpec>,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from column vectors. All columns must have equal length.
    pub fn from_columns(columns: Vec<ColumnSpec>, values: Vec<Vec<f64>>) -> Result<Self> {
        if columns.len() != values.len() {
            return Err(Error::invalid(format!(
                "{} column specs but {} value columns",
                columns.len(),
                values.len()
            )));
        }
        let n_rows = values.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * columns.len());
        for (spec, col) in columns.iter().zip(&values) {
            if col.len() != n_rows {
                return Err(Error::invalid(format!(
                    "column {} has {} rows, expected {}",
                    spec.name,
                    col.len(),
                    n_rows
                )));
            }
            if let ColumnKind::Categorical { levels } = &spec.kind {
                if let Some(bad) = col
                    .iter()
                    .find(|v| !v.is_nan() && (v.fract() != 0.0 || **v < 0.0 || **v as usize >= levels.len()))
                {
                    return Err(Error::invalid(format!(
                        "column {} has invalid level code {}",
                        spec.name, bad
                    )));
                }
            }
            data.extend_from_slice(col);
        }
        Ok(Self { n_rows, columns, data })
    }

    /// All-numeric matrix from row vectors; handy for tests and benchmarks.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        let mut cols = vec![Vec::with_capacity(rows.len()); p];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::invalid(format!(
                    "row {i} has {} values, expected {p}",
                    row.len()
                )));
            }
            for (c, v) in cols.iter_mut().zip(row) {
                c.push(*v);
            }
        }
        let specs = (0..p).map(|j| ColumnSpec::numeric(format!("x{}", j + 1))).collect();
        Self::from_columns(specs, cols)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.n_rows..(j + 1) * self.n_rows]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.n_rows + i]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.n_cols()).map(|j| self.get(i, j)).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Row subset in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.n_cols());
        for j in 0..self.n_cols() {
            let col = self.column(j);
            data.extend(rows.iter().map(|&i| col[i]));
        }
        Self {
            n_rows: rows.len(),
            columns: self.columns.clone(),
            data,
        }
    }

    /// Appends rows given as full-width vectors.
    pub fn with_rows(columns: Vec<ColumnSpec>, rows: &[Vec<f64>]) -> Result<Self> {
        let p = columns.len();
        let mut cols = vec![Vec::with_capacity(rows.len()); p];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::SchemaMismatch(format!(
                    "row {i} has {} values, schema has {p}",
                    row.len()
                )));
            }
            for (c, v) in cols.iter_mut().zip(row) {
                c.push(*v);
            }
        }
        Self::from_columns(columns, cols)
    }

    /// Fails unless `other` has the same column names and kinds, naming the
    /// first offending column.
    pub fn check_schema(&self, other: &[ColumnSpec]) -> Result<()> {
        if self.columns.len() != other.len() {
            return Err(Error::SchemaMismatch(format!(
                "expected {} columns, found {}",
                other.len(),
                self.columns.len()
            )));
        }
        for (mine, theirs) in self.columns.iter().zip(other) {
            if mine != theirs {
                return Err(Error::SchemaMismatch(format!(
                    "column `{}` does not match expected column `{}`",
                    mine.name, theirs.name
                )));
            }
        }
        Ok(())
    }
}
