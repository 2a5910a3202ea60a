//! Compressed sparse row matrices.

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// CSR matrix with strictly increasing column indices inside each row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Validates the CSR invariants.
    pub fn new(
        rows: usize,
        cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != rows + 1 || row_offsets[0] != 0 {
            return Err(Error::Data(format!(
                "row_offsets must have length {} and start at 0",
                rows + 1
            )));
        }
        if *row_offsets.last().unwrap() != col_indices.len() || col_indices.len() != values.len() {
            return Err(Error::Data("CSR array lengths disagree".into()));
        }
        for i in 0..rows {
            let (s, e) = (row_offsets[i], row_offsets[i + 1]);
            if e < s {
                return Err(Error::Data(format!("row_offsets decrease at row {i}")));
            }
            let cols_i = &col_indices[s..e];
            if cols_i.iter().any(|&c| c >= cols) {
                return Err(Error::Data(format!("column index out of range in row {i}")));
            }
            if cols_i.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Data(format!(
                    "columns not strictly increasing in row {i}"
                )));
            }
        }
        Ok(Self {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut per_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); rows];
        for &(i, j, v) in triplets {
            if i >= rows || j >= cols {
                return Err(Error::Data(format!(
                    "triplet ({i},{j}) outside {rows}x{cols}"
                )));
            }
            per_row[i].push((j, v));
        }
        let mut row_offsets = Vec::with_capacity(rows + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for mut entries in per_row {
            entries.sort_by_key(|&(j, _)| j);
            for (j, v) in entries {
                if col_indices.len() > *row_offsets.last().unwrap()
                    && *col_indices.last().unwrap() == j
                {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Self::new(rows, cols, row_offsets, col_indices, values)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_offsets: vec![0; rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[s..e], &self.values[s..e])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(move |(&j, &x)| (i, j, x))
        })
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).1.iter().sum()).collect()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn to_dense(&self) -> Tensor {
        let mut t = Tensor::zeros(self.rows, self.cols);
        for (i, j, v) in self.iter() {
            t.set(i, j, v);
        }
        t
    }

    pub fn transpose(&self) -> SparseMatrix {
        let trip: Vec<_> = self.iter().map(|(i, j, v)| (j, i, v)).collect();
        SparseMatrix::from_triplets(self.cols, self.rows, &trip)
            .expect("transpose of valid CSR is valid")
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && self
                .iter()
                .all(|(i, j, v)| self.get(j, i) == v && self.row(j).0.binary_search(&i).is_ok())
    }

    /// Same sparsity pattern, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::shape(
                "with_values",
                format!("{} values for nnz {}", values.len(), self.nnz()),
            ));
        }
        Ok(Self {
            values,
            ..self.clone()
        })
    }

    /// Dense product `self · h`.
    pub fn spmm(&self, h: &Tensor) -> Result<Tensor> {
        if self.cols != h.rows() {
            return Err(Error::shape(
                "spmm",
                format!("{}x{} x {:?}", self.rows, self.cols, h.shape()),
            ));
        }
        let d = h.cols();
        let mut out = Tensor::zeros(self.rows, d);
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            let out_row = out.row_mut(i);
            for (&j, &a) in cols.iter().zip(vals) {
                for (o, x) in out_row.iter_mut().zip(h.row(j)) {
                    *o += a * x;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · g`, used by the backward pass of [`SparseMatrix::spmm`].
    pub fn spmm_t(&self, g: &Tensor) -> Result<Tensor> {
        if self.rows != g.rows() {
            return Err(Error::shape(
                "spmm_t",
                format!("{}x{}ᵀ x {:?}", self.rows, self.cols, g.shape()),
            ));
        }
        let d = g.cols();
        let mut out = Tensor::zeros(self.cols, d);
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for (&j, &a) in cols.iter().zip(vals) {
                for (o, x) in out.row_mut(j).iter_mut().zip(g.row(i)) {
                    *o += a * x;
                }
            }
        }
        Ok(out)
    }

    /// Block-diagonal stacking.
    pub fn block_diag(blocks: &[&SparseMatrix]) -> SparseMatrix {
        let rows: usize = blocks.iter().map(|b| b.rows).sum();
        let cols: usize = blocks.iter().map(|b| b.cols).sum();
        let mut row_offsets = Vec::with_capacity(rows + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        let mut col_shift = 0;
        for b in blocks {
            for i in 0..b.rows {
                let (c, v) = b.row(i);
                col_indices.extend(c.iter().map(|&j| j + col_shift));
                values.extend_from_slice(v);
                row_offsets.push(col_indices.len());
            }
            col_shift += b.cols;
        }
        SparseMatrix {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
        }
    }
}
