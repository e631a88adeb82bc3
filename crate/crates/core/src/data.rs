//! Dataset containers and the CSV wire format for binary data.
//!
//! Binary CSV format: header row `Y1,...,Yp`, data rows of literal `0`/`1`,
//! comma-separated, newline-terminated, UTF-8.

use crate::error::{Error, Result};

/// An n x p matrix of real observations, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousDataset {
    n: usize,
    p: usize,
    values: Vec<f64>,
}

impl ContinuousDataset {
    pub fn new(n: usize, p: usize, values: Vec<f64>) -> Result<Self> {
        if n < 2 || p < 2 {
            return Err(Error::InvalidInput(format!(
                "continuous dataset needs n >= 2 and p >= 2, got {n} x {p}"
            )));
        }
        if values.len() != n * p {
            return Err(Error::InvalidInput(format!(
                "expected {} values, got {}",
                n * p,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite value in dataset".into()));
        }
        Ok(ContinuousDataset { n, p, values })
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.p + j]
    }
}

/// An n x p matrix of {0, 1} responses, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryDataset {
    n: usize,
    p: usize,
    values: Vec<u8>,
    names: Vec<String>,
}

impl BinaryDataset {
    pub fn new(n: usize, p: usize, values: Vec<u8>) -> Result<Self> {
        let names = (1..=p).map(|j| format!("Y{j}")).collect();
        Self::with_names(n, p, values, names)
    }

    pub fn with_names(n: usize, p: usize, values: Vec<u8>, names: Vec<String>) -> Result<Self> {
        if values.len() != n * p {
            return Err(Error::InvalidInput(format!(
                "expected {} cells, got {}",
                n * p,
                values.len()
            )));
        }
        if names.len() != p {
            return Err(Error::InvalidInput(format!(
                "expected {p} column names, got {}",
                names.len()
            )));
        }
        if let Some(bad) = values.iter().find(|&&v| v > 1) {
            return Err(Error::InvalidInput(format!("cell value {bad} is not 0/1")));
        }
        Ok(BinaryDataset { n, p, values, names })
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        self.p
    }

    pub fn column_names(&self) -> &[String] {
        &self.names
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.values[i * self.p + j]
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    /// Proportion of ones in column j.
    pub fn column_mean(&self, j: usize) -> f64 {
        let ones: usize = (0..self.n).map(|i| self.get(i, j) as usize).sum();
        ones as f64 / self.n as f64
    }

    /// Dataset with the rows at `indices` (with repetition allowed).
    pub fn select_rows(&self, indices: &[usize]) -> BinaryDataset {
        let mut values = Vec::with_capacity(indices.len() * self.p);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        BinaryDataset {
            n: indices.len(),
            p: self.p,
            values,
            names: self.names.clone(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.n * (2 * self.p) + 8 * self.p);
        out.push_str(&self.names.join(","));
        out.push('\n');
        for i in 0..self.n {
            for j in 0..self.p {
                if j > 0 {
                    out.push(',');
                }
                out.push(if self.get(i, j) == 1 { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }

    /// Parse the CSV wire format. Cells must be literal `0` or `1`; the first
    /// violation is reported with its 1-based row and column.
    pub fn from_csv(text: &str) -> std::result::Result<Self, CsvError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(CsvError::Empty)?;
        let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        if names.is_empty() || names.iter().any(|n| n.is_empty()) {
            return Err(CsvError::BadHeader(header.to_string()));
        }
        let p = names.len();
        let mut values = Vec::new();
        let mut n = 0usize;
        for (line_idx, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != p {
                return Err(CsvError::BadRowLength {
                    row: line_idx + 1,
                    got: cells.len(),
                    expected: p,
                });
            }
            for (col_idx, cell) in cells.iter().enumerate() {
                match cell.trim() {
                    "0" => values.push(0u8),
                    "1" => values.push(1u8),
                    other => {
                        return Err(CsvError::BadCell {
                            row: line_idx + 1,
                            col: col_idx + 1,
                            value: other.to_string(),
                        })
                    }
                }
            }
            n += 1;
        }
        if n == 0 {
            return Err(CsvError::NoRows);
        }
        BinaryDataset::with_names(n, p, values, names).map_err(|e| CsvError::Invalid(e.to_string()))
    }
}

/// CSV parse failures, carrying the coordinates of the first violation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CsvError {
    #[error("empty file")]
    Empty,
    #[error("no data rows")]
    NoRows,
    #[error("malformed header: {0:?}")]
    BadHeader(String),
    #[error("row {row}: {got} cells, expected {expected}")]
    BadRowLength { row: usize, got: usize, expected: usize },
    #[error("row {row}, column {col}: cell {value:?} is not a literal 0 or 1")]
    BadCell { row: usize, col: usize, value: String },
    #[error("{0}")]
    Invalid(String),
}
