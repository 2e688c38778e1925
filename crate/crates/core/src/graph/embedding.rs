use crate::error::{Error, Result};

/// Dense `d × (M+N)` embedding matrix stored node-major: the `d` entries of a
/// node's column are contiguous. Users occupy columns `0..M`, items `M..M+N`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    num_nodes: usize,
    data: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn zeros(dim: usize, num_nodes: usize) -> Self {
        Self {
            dim,
            num_nodes,
            data: vec![0.0; dim * num_nodes],
        }
    }

    pub fn filled(dim: usize, num_nodes: usize, value: f64) -> Self {
        Self {
            dim,
            num_nodes,
            data: vec![value; dim * num_nodes],
        }
    }

    /// Wraps node-major data (`data[node * dim + k]`).
    pub fn from_node_major(dim: usize, num_nodes: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * num_nodes {
            return Err(Error::Dimension(format!(
                "expected {} entries for {dim}x{num_nodes}, got {}",
                dim * num_nodes,
                data.len()
            )));
        }
        Ok(Self { dim, num_nodes, data })
    }

    /// Builds a matrix from one vector per node.
    pub fn from_columns(dim: usize, columns: &[Vec<f64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(dim * columns.len());
        for (j, col) in columns.iter().enumerate() {
            if col.len() != dim {
                return Err(Error::Dimension(format!(
                    "column {j} has length {}, expected {dim}",
                    col.len()
                )));
            }
            data.extend_from_slice(col);
        }
        Ok(Self {
            dim,
            num_nodes: columns.len(),
            data,
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    #[inline]
    pub fn column(&self, node: usize) -> &[f64] {
        &self.data[node * self.dim..(node + 1) * self.dim]
    }

    #[inline]
    pub fn column_mut(&mut self, node: usize) -> &mut [f64] {
        &mut self.data[node * self.dim..(node + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.dim == other.dim && self.num_nodes == other.num_nodes
    }

    pub fn ensure_same_shape(&self, other: &Self, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "{what}: {}x{} vs {}x{}",
                self.dim, self.num_nodes, other.dim, other.num_nodes
            )))
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn iter_columns(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim.max(1)).take(self.num_nodes)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
