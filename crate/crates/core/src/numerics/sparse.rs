use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::scalar::Scalar;

/// Compressed sparse row matrix used as a constant left operand.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix<T> {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> SparseMatrix<T> {
    /// Builds from per-row `(column, value)` lists. Entries within a row
    /// are kept in the given order, which fixes the summation order.
    pub fn from_row_lists(cols: usize, rows: Vec<Vec<(usize, T)>>) -> Result<Self> {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for (r, row) in rows.iter().enumerate() {
            for (c, v) in row {
                if *c >= cols {
                    return Err(Error::InvalidArgument(format!(
                        "sparse entry ({r}, {c}) outside {cols} columns"
                    )));
                }
                indices.push(*c);
                values.push(v.clone());
            }
            indptr.push(indices.len());
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_entries(&self, r: usize) -> impl Iterator<Item = (usize, &T)> {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(&self.values[span])
    }

    pub fn to_dense(&self) -> Matrix<T> {
        let mut out = Matrix::<T>::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for (c, v) in self.row_entries(r) {
                let cur = out.get(r, c).clone();
                out.set(r, c, cur + v.clone());
            }
        }
        out
    }

    /// `self · x`.
    pub fn mul_dense(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        if self.cols != x.rows() {
            return Err(Error::Shape {
                op: "sparse_matmul",
                left: self.shape(),
                right: x.shape(),
            });
        }
        let d = x.cols();
        let mut out = Matrix::<T>::zeros(self.rows, d);
        for r in 0..self.rows {
            let span = self.indptr[r]..self.indptr[r + 1];
            let dst = out.row_mut(r);
            for (c, v) in self.indices[span.clone()].iter().zip(&self.values[span]) {
                for (o, xv) in dst.iter_mut().zip(x.row(*c)) {
                    *o = o.clone() + v.clone() * xv.clone();
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · g`, accumulated into `acc`.
    pub fn mul_transpose_into(&self, g: &Matrix<T>, acc: &mut Matrix<T>) -> Result<()> {
        if self.rows != g.rows() || acc.shape() != (self.cols, g.cols()) {
            return Err(Error::Shape {
                op: "sparse_matmul_t",
                left: self.shape(),
                right: g.shape(),
            });
        }
        for r in 0..self.rows {
            let src = g.row(r);
            for (c, v) in self.row_entries(r) {
                for (a, gv) in acc.row_mut(c).iter_mut().zip(src) {
                    *a = a.clone() + v.clone() * gv.clone();
                }
            }
        }
        Ok(())
    }
}
