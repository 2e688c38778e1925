//! User–item bipartite graph, its symmetrically normalized adjacency, and
//! the linear convolution `Ē = E·G` for LightGCN, SGCN and APPNP.
//!
//! Nodes are ordered users first (`0..M`) then items (`M..M+N`). `G` is only
//! ever materialized by [`materialize_g`], which exists for test oracles.

mod csr;
mod embedding;
mod propagation;

pub use csr::CsrMatrix;
pub use embedding::{dot, EmbeddingMatrix};
pub use propagation::{
    materialize_g, node_final_embedding, propagate, PropagationSpec, Propagator, Scheme, DEFAULT_DENSE_CAP,
};

use crate::data::InteractionDataset;
use crate::error::{Error, Result};

/// Bipartite interaction graph: one edge per observed `(user, item)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionGraph {
    num_users: usize,
    num_items: usize,
    /// Sorted, deduplicated `(user, item)` pairs.
    edges: Vec<(usize, usize)>,
    degrees: Vec<usize>,
}

impl InteractionGraph {
    pub fn from_pairs<I>(num_users: usize, num_items: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut edges = Vec::new();
        for (u, i) in pairs {
            if u >= num_users {
                return Err(Error::IndexOutOfRange {
                    what: "users",
                    index: u,
                    len: num_users,
                });
            }
            if i >= num_items {
                return Err(Error::IndexOutOfRange {
                    what: "items",
                    index: i,
                    len: num_items,
                });
            }
            edges.push((u, i));
        }
        edges.sort_unstable();
        edges.dedup();
        let mut degrees = vec![0; num_users + num_items];
        for &(u, i) in &edges {
            degrees[u] += 1;
            degrees[num_users + i] += 1;
        }
        Ok(Self {
            num_users,
            num_items,
            edges,
            degrees,
        })
    }

    /// Builds the graph from every record of `dataset`.
    pub fn build(dataset: &InteractionDataset) -> Result<Self> {
        for (n, r) in dataset.records.iter().enumerate() {
            if r.user >= dataset.num_users || r.item >= dataset.num_items {
                return Err(Error::Data(format!(
                    "record #{n} (user {}, item {}) outside {}x{}",
                    r.user, r.item, dataset.num_users, dataset.num_items
                )));
            }
        }
        Self::from_pairs(
            dataset.num_users,
            dataset.num_items,
            dataset.records.iter().map(|r| (r.user, r.item)),
        )
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn num_nodes(&self) -> usize {
        self.num_users + self.num_items
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    #[inline]
    pub fn item_node(&self, item: usize) -> usize {
        self.num_users + item
    }

    /// `Ã = D^{-1/2} A D^{-1/2}`, with `1/√0 := 0` for isolated nodes.
    pub fn normalize_adjacency(&self) -> NormalizedAdjacency {
        let n = self.num_nodes();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(u, i) in &self.edges {
            let (a, b) = (u, self.num_users + i);
            let w = 1.0 / ((self.degrees[a] * self.degrees[b]) as f64).sqrt();
            rows[a].push((b, w));
            rows[b].push((a, w));
        }
        NormalizedAdjacency {
            num_users: self.num_users,
            degrees: self.degrees.clone(),
            matrix: CsrMatrix::from_rows(rows),
        }
    }
}

/// The symmetric normalized adjacency `Ã` together with the degrees it was
/// built from.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    num_users: usize,
    degrees: Vec<usize>,
    matrix: CsrMatrix,
}

impl NormalizedAdjacency {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn num_nodes(&self) -> usize {
        self.matrix.n()
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.matrix.n() - self.num_users
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    /// `(D+I)^{-1/2} (A+I) (D+I)^{-1/2}`, the SGCN propagation matrix.
    pub fn self_loop_normalized(&self) -> CsrMatrix {
        let n = self.num_nodes();
        let rows = (0..n)
            .map(|j| {
                let (cols, _) = self.matrix.row(j);
                let dj = (self.degrees[j] + 1) as f64;
                let mut row: Vec<(usize, f64)> = cols
                    .iter()
                    .map(|&l| (l, 1.0 / (dj * (self.degrees[l] + 1) as f64).sqrt()))
                    .collect();
                row.push((j, 1.0 / dj));
                row
            })
            .collect();
        CsrMatrix::from_rows(rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge_graph() {
        let g = InteractionGraph::from_pairs(1, 1, [(0, 0)]).unwrap();
        assert_eq!(g.edges(), &[(0, 0)]);
        assert_eq!(g.degrees(), &[1, 1]);
        let a = g.normalize_adjacency();
        assert_eq!(a.matrix().get(0, 1), 1.0);
        assert_eq!(a.matrix().get(1, 0), 1.0);
        assert_eq!(a.matrix().get(0, 0), 0.0);
    }

    #[test]
    fn empty_graph_has_zero_degrees() {
        let g = InteractionGraph::from_pairs(3, 2, []).unwrap();
        assert!(g.edges().is_empty());
        assert!(g.degrees().iter().all(|&d| d == 0));
        assert_eq!(g.normalize_adjacency().matrix().nnz(), 0);
    }

    #[test]
    fn shared_item_weights() {
        let g = InteractionGraph::from_pairs(2, 1, [(0, 0), (1, 0)]).unwrap();
        let a = g.normalize_adjacency();
        let w = 1.0 / 2f64.sqrt();
        assert!((a.matrix().get(0, 2) - w).abs() < 1e-15);
        assert!((a.matrix().get(1, 2) - w).abs() < 1e-15);
        assert!((a.matrix().get(2, 0) - w).abs() < 1e-15);
    }

    #[test]
    fn isolated_node_row_is_zero() {
        let g = InteractionGraph::from_pairs(2, 2, [(0, 0)]).unwrap();
        let a = g.normalize_adjacency();
        for node in [1usize, 3] {
            assert_eq!(a.matrix().row(node).0.len(), 0);
            for j in 0..4 {
                assert_eq!(a.matrix().get(j, node), 0.0);
            }
        }
    }

    #[test]
    fn duplicates_collapse() {
        let g = InteractionGraph::from_pairs(1, 2, [(0, 1), (0, 1), (0, 0)]).unwrap();
        assert_eq!(g.edges().len(), 2);
        assert_eq!(g.degrees(), &[2, 1, 1]);
    }

    #[test]
    fn out_of_range_rejected() {
        let err = InteractionGraph::from_pairs(1, 1, [(0, 3)]).unwrap_err();
        assert!(matches!(err, Error::IndexOutOfRange { index: 3, .. }));
    }

    #[test]
    fn sgcn_matrix_on_single_edge() {
        let g = InteractionGraph::from_pairs(1, 1, [(0, 0)]).unwrap();
        let s = g.normalize_adjacency().self_loop_normalized();
        for j in 0..2 {
            for l in 0..2 {
                assert!((s.get(j, l) - 0.5).abs() < 1e-15);
            }
        }
    }
}
