//! Aggregation matrices derived from a graph's edges.
//!
//! All builders take the canonical undirected edge list and return CSR
//! matrices over the symmetric expansion, so they work both for [`Graph`]
//! values and for discrepancy graphs that carry bare edge lists.

use std::sync::Arc;

use crate::graph::Graph;
use crate::nn::SparseMatrix;

/// Symmetrically normalized adjacency with self-loops,
/// `D̂^{-1/2} (A + I) D̂^{-1/2}` with `D̂ = D + I` — the GCN propagation
/// matrix. Symmetric, so it is its own transpose.
pub fn normalized_adjacency(n: usize, edges: &[(u32, u32)]) -> SparseMatrix {
    let deg = degrees(n, edges);
    let inv_sqrt: Vec<f64> = deg.iter().map(|&d| 1.0 / ((d + 1) as f64).sqrt()).collect();
    let mut triplets = Vec::with_capacity(2 * edges.len() + n);
    for u in 0..n {
        triplets.push((u as u32, u as u32, inv_sqrt[u] * inv_sqrt[u]));
    }
    for &(u, v) in edges {
        let w = inv_sqrt[u as usize] * inv_sqrt[v as usize];
        triplets.push((u, v, w));
        triplets.push((v, u, w));
    }
    SparseMatrix::from_triplets(n, n, triplets)
}

/// Row-normalized adjacency without self-loops, `D^{-1} A`: multiplying
/// features by it yields each node's neighbor mean. Rows of isolated nodes
/// are empty (their mean is the zero vector).
pub fn mean_adjacency(n: usize, edges: &[(u32, u32)]) -> SparseMatrix {
    let deg = degrees(n, edges);
    let mut triplets = Vec::with_capacity(2 * edges.len());
    for &(u, v) in edges {
        triplets.push((u, v, 1.0 / deg[u as usize] as f64));
        triplets.push((v, u, 1.0 / deg[v as usize] as f64));
    }
    SparseMatrix::from_triplets(n, n, triplets)
}

/// Sum aggregation with a weighted self term, `A + (1+ε)·I`.
pub fn sum_self_adjacency(n: usize, edges: &[(u32, u32)], eps: f64) -> SparseMatrix {
    let mut triplets = Vec::with_capacity(2 * edges.len() + n);
    for u in 0..n {
        triplets.push((u as u32, u as u32, 1.0 + eps));
    }
    for &(u, v) in edges {
        triplets.push((u, v, 1.0));
        triplets.push((v, u, 1.0));
    }
    SparseMatrix::from_triplets(n, n, triplets)
}

/// Neighborhood pattern including self (unit values); row `u` lists the
/// nodes `u` attends over.
pub fn self_neighborhoods(n: usize, edges: &[(u32, u32)]) -> SparseMatrix {
    sum_self_adjacency(n, edges, 0.0)
}

fn degrees(n: usize, edges: &[(u32, u32)]) -> Vec<usize> {
    let mut deg = vec![0usize; n];
    for &(u, v) in edges {
        deg[u as usize] += 1;
        deg[v as usize] += 1;
    }
    deg
}

/// A graph's features plus whatever aggregation matrices one architecture
/// needs, computed once so a training loop does not rebuild them per epoch.
pub struct PreparedGraph {
    pub features: crate::nn::Tensor2,
    /// GCN propagation matrix (symmetric).
    pub sym: Option<Arc<SparseMatrix>>,
    /// SAGE neighbor-mean matrix and its transpose for backward.
    pub mean: Option<(Arc<SparseMatrix>, Arc<SparseMatrix>)>,
    /// GIN sum aggregation `A + I` (symmetric).
    pub sum_self: Option<Arc<SparseMatrix>>,
    /// GAT attention neighborhoods.
    pub nbrs: Option<Arc<SparseMatrix>>,
}

impl PreparedGraph {
    pub fn new(g: &Graph, arch: super::Arch) -> Self {
        use super::Arch::*;
        let n = g.num_nodes();
        let edges = g.edges();
        PreparedGraph {
            features: g.features().clone(),
            sym: (arch == Gcn).then(|| Arc::new(normalized_adjacency(n, edges))),
            mean: (arch == Sage).then(|| {
                let m = mean_adjacency(n, edges);
                let mt = m.transpose();
                (Arc::new(m), Arc::new(mt))
            }),
            sum_self: (arch == Gin).then(|| Arc::new(sum_self_adjacency(n, edges, 0.0))),
            nbrs: (arch == Gat).then(|| Arc::new(self_neighborhoods(n, edges))),
        }
    }
}
