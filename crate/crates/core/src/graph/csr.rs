use rayon::prelude::*;

use super::embedding::EmbeddingMatrix;

/// Square sparse matrix in compressed-row form with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(column, value)` lists; each row is sorted here.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut indptr = Vec::with_capacity(n + 1);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                debug_assert!(c < n);
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Self {
            n,
            indptr,
            indices,
            values,
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    #[inline]
    pub fn row(&self, j: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[j], self.indptr[j + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn get(&self, j: usize, l: usize) -> f64 {
        let (cols, vals) = self.row(j);
        match cols.binary_search(&l) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    pub fn row_sum(&self, j: usize) -> f64 {
        self.row(j).1.iter().sum()
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for j in 0..self.n {
            let (cols, vals) = self.row(j);
            for (&c, &v) in cols.iter().zip(vals) {
                m[(j, c)] = v;
            }
        }
        m
    }

    /// `out = x · A` for a symmetric `A`: column `j` of the result is
    /// `Σ_l A[j,l] x_l`.
    pub fn right_multiply(&self, x: &EmbeddingMatrix, out: &mut EmbeddingMatrix) {
        let d = x.dim();
        debug_assert_eq!(x.num_nodes(), self.n);
        debug_assert!(out.same_shape(x));
        if d == 0 {
            return;
        }
        let src = x.as_slice();
        out.as_mut_slice().par_chunks_mut(d).enumerate().for_each(|(j, dst)| {
            dst.iter_mut().for_each(|v| *v = 0.0);
            let (cols, vals) = self.row(j);
            for (&l, &a) in cols.iter().zip(vals) {
                let xl = &src[l * d..(l + 1) * d];
                for (o, s) in dst.iter_mut().zip(xl) {
                    *o += a * s;
                }
            }
        });
    }

    /// Same as [`right_multiply`](Self::right_multiply) but only computes
    /// columns listed in `nodes`; other columns of `out` are left untouched.
    pub fn right_multiply_on(&self, x: &EmbeddingMatrix, out: &mut EmbeddingMatrix, nodes: &[usize]) {
        let d = x.dim();
        let src = x.as_slice();
        for &j in nodes {
            let dst = out.column_mut(j);
            dst.iter_mut().for_each(|v| *v = 0.0);
            let (cols, vals) = self.row(j);
            for (&l, &a) in cols.iter().zip(vals) {
                let xl = &src[l * d..(l + 1) * d];
                for (o, s) in dst.iter_mut().zip(xl) {
                    *o += a * s;
                }
            }
        }
    }

    /// Dense-vector product `y = A v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|j| {
                let (cols, vals) = self.row(j);
                cols.iter().zip(vals).map(|(&l, &a)| a * v[l]).sum()
            })
            .collect()
    }
}
