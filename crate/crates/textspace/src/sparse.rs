use ndarray::Array2;

use crate::error::{Error, Result};

/// Row-major sparse matrix with sorted column indices per row.
///
/// Holds document-term counts and their weighted variants. Values are f64 so
/// the same type carries raw counts and tf-idf weights; models that need
/// integer counts validate on entry.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseMatrix {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        SparseMatrix {
            n_rows,
            n_cols,
            rows: vec![Vec::new(); n_rows],
        }
    }

    /// Builds from (row, col, value) triplets. Duplicate (row, col) entries sum.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut m = SparseMatrix::new(n_rows, n_cols);
        for (r, c, v) in triplets {
            if r >= n_rows || c >= n_cols {
                return Err(Error::dim(format!(
                    "entry ({r}, {c}) outside {n_rows}x{n_cols} matrix"
                )));
            }
            if v != 0.0 {
                m.rows[r].push((c, v));
            }
        }
        for row in &mut m.rows {
            row.sort_by_key(|&(c, _)| c);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for &(c, v) in row.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == c => last.1 += v,
                    _ => merged.push((c, v)),
                }
            }
            merged.retain(|&(_, v)| v != 0.0);
            *row = merged;
        }
        Ok(m)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn row(&self, r: usize) -> &[(usize, f64)] {
        &self.rows[r]
    }

    pub fn iter_row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.rows[r].iter().copied()
    }

    /// All stored entries as (row, col, value), row-major.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(r, row)| row.iter().map(move |&(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.rows[r]
            .binary_search_by_key(&c, |&(col, _)| col)
            .map(|i| self.rows[r][i].1)
            .unwrap_or(0.0)
    }

    pub fn row_sum(&self, r: usize) -> f64 {
        self.rows[r].iter().map(|&(_, v)| v).sum()
    }

    /// Per-column sum over all rows.
    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n_cols];
        for row in &self.rows {
            for &(c, v) in row {
                sums[c] += v;
            }
        }
        sums
    }

    /// Number of rows with a nonzero entry in each column.
    pub fn doc_frequencies(&self) -> Vec<usize> {
        let mut df = vec![0usize; self.n_cols];
        for row in &self.rows {
            for &(c, _) in row {
                df[c] += 1;
            }
        }
        df
    }

    pub fn is_row_empty(&self, r: usize) -> bool {
        self.rows[r].is_empty()
    }

    /// Applies `f(row, col, value)` to every stored entry in place, dropping
    /// entries mapped to zero.
    pub fn map_entries(&mut self, mut f: impl FnMut(usize, usize, f64) -> f64) {
        for (r, row) in self.rows.iter_mut().enumerate() {
            for entry in row.iter_mut() {
                entry.1 = f(r, entry.0, entry.1);
            }
            row.retain(|&(_, v)| v != 0.0);
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.n_rows, self.n_cols));
        for (r, c, v) in self.iter() {
            a[[r, c]] = v;
        }
        a
    }
}
