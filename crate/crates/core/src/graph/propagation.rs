use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::csr::CsrMatrix;
use super::embedding::EmbeddingMatrix;
use super::NormalizedAdjacency;
use crate::error::{Error, Result};

/// Largest node count [`materialize_g`] accepts by default.
pub const DEFAULT_DENSE_CAP: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Lightgcn,
    Sgcn,
    Appnp,
}

impl Scheme {
    pub fn tag(self) -> u8 {
        match self {
            Scheme::Lightgcn => 0,
            Scheme::Sgcn => 1,
            Scheme::Appnp => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Scheme::Lightgcn),
            1 => Some(Scheme::Sgcn),
            2 => Some(Scheme::Appnp),
            _ => None,
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Lightgcn => "lightgcn",
            Scheme::Sgcn => "sgcn",
            Scheme::Appnp => "appnp",
        })
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lightgcn" => Ok(Scheme::Lightgcn),
            "sgcn" => Ok(Scheme::Sgcn),
            "appnp" => Ok(Scheme::Appnp),
            other => Err(Error::Config(format!("unknown propagation scheme `{other}`"))),
        }
    }
}

/// Defines the convolutional coefficient matrix `G`.
///
/// * `lightgcn`: `G = Σ_k α_k Ã^k`
/// * `appnp`: `G = Σ_k β(1-β)^k Ã^k`
/// * `sgcn`: `G = S^K` with `S = (D+I)^{-1/2}(A+I)(D+I)^{-1/2}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationSpec {
    pub scheme: Scheme,
    pub depth: usize,
    /// `α_0..α_K`; only read for `lightgcn`.
    pub layer_weights: Vec<f64>,
    /// `β`; only read for `appnp`.
    pub teleport: f64,
}

impl PropagationSpec {
    /// LightGCN with uniform weights `α_k = 1/(K+1)`.
    pub fn lightgcn(depth: usize) -> Self {
        let w = 1.0 / (depth + 1) as f64;
        Self {
            scheme: Scheme::Lightgcn,
            depth,
            layer_weights: vec![w; depth + 1],
            teleport: 1.0,
        }
    }

    pub fn lightgcn_weighted(layer_weights: Vec<f64>) -> Result<Self> {
        if layer_weights.is_empty() {
            return Err(Error::Config("layer_weights must hold α_0..α_K".into()));
        }
        let spec = Self {
            scheme: Scheme::Lightgcn,
            depth: layer_weights.len() - 1,
            layer_weights,
            teleport: 1.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn sgcn(depth: usize) -> Self {
        Self {
            scheme: Scheme::Sgcn,
            depth,
            layer_weights: Vec::new(),
            teleport: 1.0,
        }
    }

    pub fn appnp(depth: usize, teleport: f64) -> Self {
        Self {
            scheme: Scheme::Appnp,
            depth,
            layer_weights: Vec::new(),
            teleport,
        }
    }

    /// Builds a spec for `scheme` with its default parameters.
    pub fn with_defaults(scheme: Scheme, depth: usize, teleport: f64) -> Self {
        match scheme {
            Scheme::Lightgcn => Self::lightgcn(depth),
            Scheme::Sgcn => Self::sgcn(depth),
            Scheme::Appnp => Self::appnp(depth, teleport),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.scheme {
            Scheme::Lightgcn => {
                if self.layer_weights.len() != self.depth + 1 {
                    return Err(Error::Config(format!(
                        "lightgcn depth {} needs {} layer weights, got {}",
                        self.depth,
                        self.depth + 1,
                        self.layer_weights.len()
                    )));
                }
                if self.layer_weights.iter().any(|&a| !(a >= 0.0) || !a.is_finite()) {
                    return Err(Error::Config("layer weights must be finite and ≥ 0".into()));
                }
            }
            Scheme::Appnp => {
                if !(self.teleport > 0.0 && self.teleport <= 1.0) {
                    return Err(Error::Config(format!(
                        "teleport β must lie in (0, 1], got {}",
                        self.teleport
                    )));
                }
            }
            Scheme::Sgcn => {}
        }
        Ok(())
    }

    /// Coefficients `c_k` such that `G = Σ_k c_k P^k` with `P` the scheme's
    /// propagation matrix.
    pub fn coefficients(&self) -> Vec<f64> {
        match self.scheme {
            Scheme::Lightgcn => self.layer_weights.clone(),
            Scheme::Appnp => {
                let b = self.teleport;
                (0..=self.depth).map(|k| b * (1.0 - b).powi(k as i32)).collect()
            }
            Scheme::Sgcn => {
                let mut c = vec![0.0; self.depth + 1];
                c[self.depth] = 1.0;
                c
            }
        }
    }
}

/// Applies `X ↦ X·G` as `K` sparse products, never forming `G`.
#[derive(Debug, Clone)]
pub struct Propagator {
    operator: CsrMatrix,
    coefficients: Vec<f64>,
    num_users: usize,
}

impl Propagator {
    pub fn new(adjacency: &NormalizedAdjacency, spec: &PropagationSpec) -> Result<Self> {
        spec.validate()?;
        let operator = match spec.scheme {
            Scheme::Sgcn => adjacency.self_loop_normalized(),
            Scheme::Lightgcn | Scheme::Appnp => adjacency.matrix().clone(),
        };
        Ok(Self {
            operator,
            coefficients: spec.coefficients(),
            num_users: adjacency.num_users(),
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.operator.n()
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn depth(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn operator(&self) -> &CsrMatrix {
        &self.operator
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    fn check(&self, x: &EmbeddingMatrix) -> Result<()> {
        if x.num_nodes() != self.num_nodes() {
            return Err(Error::Dimension(format!(
                "embedding has {} columns, graph has {} nodes",
                x.num_nodes(),
                self.num_nodes()
            )));
        }
        Ok(())
    }

    /// Full `X·G`.
    pub fn propagate(&self, x: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
        self.check(x)?;
        let mut acc = x.clone();
        acc.scale(self.coefficients[0]);
        if self.depth() == 0 {
            return Ok(acc);
        }
        let mut cur = EmbeddingMatrix::zeros(x.dim(), x.num_nodes());
        let mut next = EmbeddingMatrix::zeros(x.dim(), x.num_nodes());
        self.operator.right_multiply(x, &mut cur);
        acc.axpy(self.coefficients[1], &cur);
        for &c in &self.coefficients[2..] {
            self.operator.right_multiply(&cur, &mut next);
            acc.axpy(c, &next);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(acc)
    }

    /// Node sets `N_0 = seeds`, `N_h = N_{h-1} ∪ nbrs(N_{h-1})` for
    /// `h = 0..=K`, each sorted ascending.
    pub fn hop_sets(&self, seeds: &[usize]) -> Vec<Vec<usize>> {
        let n = self.num_nodes();
        let mut mark = vec![false; n];
        let mut current: Vec<usize> = Vec::new();
        for &s in seeds {
            if !mark[s] {
                mark[s] = true;
                current.push(s);
            }
        }
        current.sort_unstable();
        let mut sets = vec![current.clone()];
        for _ in 0..self.depth() {
            let mut grown = current.clone();
            for &j in &current {
                for &l in self.operator.row(j).0 {
                    if !mark[l] {
                        mark[l] = true;
                        grown.push(l);
                    }
                }
            }
            grown.sort_unstable();
            sets.push(grown.clone());
            current = grown;
        }
        sets
    }

    /// Columns of `X·G` restricted to `targets`. The returned matrix agrees
    /// with [`propagate`](Self::propagate) on those columns; others are zero
    /// or hold intermediate values and must not be read.
    pub fn propagate_to(&self, x: &EmbeddingMatrix, targets: &[usize]) -> Result<EmbeddingMatrix> {
        self.check(x)?;
        let k = self.depth();
        let sets = self.hop_sets(targets);
        if k == 0 || sets[k].len() * 2 > self.num_nodes() {
            return self.propagate(x);
        }
        let (d, n) = (x.dim(), x.num_nodes());
        let mut acc = EmbeddingMatrix::zeros(d, n);
        for &j in &sets[0] {
            for (a, v) in acc.column_mut(j).iter_mut().zip(x.column(j)) {
                *a = self.coefficients[0] * v;
            }
        }
        let mut cur = EmbeddingMatrix::zeros(d, n);
        let mut next = EmbeddingMatrix::zeros(d, n);
        // E^(h) is needed on N_{K-h}, whose neighbours lie in N_{K-h+1}.
        self.operator.right_multiply_on(x, &mut cur, &sets[k - 1]);
        add_on(&mut acc, self.coefficients[1], &cur, &sets[0]);
        for h in 2..=k {
            self.operator.right_multiply_on(&cur, &mut next, &sets[k - h]);
            add_on(&mut acc, self.coefficients[h], &next, &sets[0]);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(acc)
    }

    /// Exact `X·G` for an `X` whose columns vanish outside `support`.
    pub fn propagate_from(&self, x: &EmbeddingMatrix, support: &[usize]) -> Result<EmbeddingMatrix> {
        self.check(x)?;
        let k = self.depth();
        let sets = self.hop_sets(support);
        if k == 0 || sets[k].len() * 2 > self.num_nodes() {
            return self.propagate(x);
        }
        let (d, n) = (x.dim(), x.num_nodes());
        let mut acc = EmbeddingMatrix::zeros(d, n);
        add_on(&mut acc, self.coefficients[0], x, &sets[0]);
        let mut cur = EmbeddingMatrix::zeros(d, n);
        let mut next = EmbeddingMatrix::zeros(d, n);
        self.operator.right_multiply_on(x, &mut cur, &sets[1]);
        add_on(&mut acc, self.coefficients[1], &cur, &sets[1]);
        for h in 2..=k {
            self.operator.right_multiply_on(&cur, &mut next, &sets[h]);
            add_on(&mut acc, self.coefficients[h], &next, &sets[h]);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(acc)
    }

    /// Column `g_node` of `G` as a dense vector.
    pub fn g_column(&self, node: usize) -> Result<Vec<f64>> {
        let n = self.num_nodes();
        if node >= n {
            return Err(Error::IndexOutOfRange {
                what: "nodes",
                index: node,
                len: n,
            });
        }
        let mut v = vec![0.0; n];
        v[node] = 1.0;
        let mut g: Vec<f64> = v.iter().map(|x| x * self.coefficients[0]).collect();
        for &c in &self.coefficients[1..] {
            v = self.operator.mul_vec(&v);
            if c != 0.0 {
                for (gi, vi) in g.iter_mut().zip(&v) {
                    *gi += c * vi;
                }
            }
        }
        Ok(g)
    }
}

fn add_on(acc: &mut EmbeddingMatrix, c: f64, src: &EmbeddingMatrix, nodes: &[usize]) {
    if c == 0.0 {
        return;
    }
    for &j in nodes {
        for (a, v) in acc.column_mut(j).iter_mut().zip(src.column(j)) {
            *a += c * v;
        }
    }
}

/// `Ē = E0·G`.
pub fn propagate(
    e0: &EmbeddingMatrix,
    adjacency: &NormalizedAdjacency,
    spec: &PropagationSpec,
) -> Result<EmbeddingMatrix> {
    Propagator::new(adjacency, spec)?.propagate(e0)
}

/// Dense `G`; refuses graphs with more than `cap` nodes.
pub fn materialize_g(adjacency: &NormalizedAdjacency, spec: &PropagationSpec, cap: usize) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let n = adjacency.num_nodes();
    if n > cap {
        return Err(Error::Config(format!("dense G requested for {n} nodes, cap is {cap}")));
    }
    let op = match spec.scheme {
        Scheme::Sgcn => adjacency.self_loop_normalized().to_dense(),
        _ => adjacency.matrix().to_dense(),
    };
    let coeffs = spec.coefficients();
    let mut power = DMatrix::<f64>::identity(n, n);
    let mut g = &power * coeffs[0];
    for &c in &coeffs[1..] {
        power = &power * &op;
        g += &power * c;
    }
    Ok(g)
}

/// `Φ·g_node`, the final embedding of one node.
pub fn node_final_embedding(phi: &EmbeddingMatrix, propagator: &Propagator, node: usize) -> Result<Vec<f64>> {
    if phi.num_nodes() != propagator.num_nodes() {
        return Err(Error::Dimension(format!(
            "embedding has {} columns, graph has {} nodes",
            phi.num_nodes(),
            propagator.num_nodes()
        )));
    }
    let g = propagator.g_column(node)?;
    let mut out = vec![0.0; phi.dim()];
    for (l, &w) in g.iter().enumerate() {
        if w != 0.0 {
            for (o, v) in out.iter_mut().zip(phi.column(l)) {
                *o += w * v;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::InteractionGraph;

    fn single_edge() -> NormalizedAdjacency {
        InteractionGraph::from_pairs(1, 1, [(0, 0)])
            .unwrap()
            .normalize_adjacency()
    }

    #[test]
    fn depth_zero_is_identity() {
        let adj = single_edge();
        let e = EmbeddingMatrix::from_columns(2, &[vec![1.0, 2.0], vec![-3.0, 0.5]]).unwrap();
        let out = propagate(&e, &adj, &PropagationSpec::lightgcn(0)).unwrap();
        assert_eq!(out, e);
    }

    #[test]
    fn single_edge_averages_endpoints() {
        let adj = single_edge();
        let e = EmbeddingMatrix::from_columns(1, &[vec![2.0], vec![0.0]]).unwrap();
        let out = propagate(&e, &adj, &PropagationSpec::lightgcn(1)).unwrap();
        assert_eq!(out.column(0), &[1.0]);
        assert_eq!(out.column(1), &[1.0]);
    }

    #[test]
    fn dense_g_small_cases() {
        let adj = single_edge();
        let g = materialize_g(&adj, &PropagationSpec::lightgcn(1), DEFAULT_DENSE_CAP).unwrap();
        assert!(g.iter().all(|&v| (v - 0.5).abs() < 1e-15));
        let g = materialize_g(&adj, &PropagationSpec::appnp(0, 1.0), DEFAULT_DENSE_CAP).unwrap();
        assert_eq!(g, DMatrix::identity(2, 2));
        let g = materialize_g(&adj, &PropagationSpec::sgcn(1), DEFAULT_DENSE_CAP).unwrap();
        assert!(g.iter().all(|&v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn dense_cap_enforced() {
        let adj = single_edge();
        let err = materialize_g(&adj, &PropagationSpec::lightgcn(1), 1).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn final_embedding_of_single_edge() {
        let adj = single_edge();
        let p = Propagator::new(&adj, &PropagationSpec::lightgcn(1)).unwrap();
        let phi = EmbeddingMatrix::from_columns(2, &[vec![1.0, 3.0], vec![3.0, -1.0]]).unwrap();
        assert_eq!(node_final_embedding(&phi, &p, 1).unwrap(), vec![2.0, 1.0]);
        let p0 = Propagator::new(&adj, &PropagationSpec::lightgcn(0)).unwrap();
        assert_eq!(node_final_embedding(&phi, &p0, 0).unwrap(), vec![1.0, 3.0]);
        assert!(node_final_embedding(&phi, &p0, 2).is_err());
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(PropagationSpec::appnp(2, 0.0).validate().is_err());
        assert!(PropagationSpec::appnp(2, 1.5).validate().is_err());
        assert!(PropagationSpec::lightgcn_weighted(vec![0.5, -0.1]).is_err());
        let mut s = PropagationSpec::lightgcn(2);
        s.layer_weights.pop();
        assert!(s.validate().is_err());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let adj = single_edge();
        let e = EmbeddingMatrix::zeros(2, 3);
        assert!(propagate(&e, &adj, &PropagationSpec::lightgcn(1)).is_err());
    }
}
