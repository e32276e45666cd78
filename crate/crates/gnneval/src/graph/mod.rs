//! Undirected attributed graphs with optional node labels.
//!
//! A [`Graph`] is immutable after construction. Edges are canonical: each
//! undirected edge is stored once as `(min, max)` in lexicographic order, and
//! a CSR adjacency holds the symmetric expansion for traversal. Node features
//! are quantized to 9 significant decimal digits on construction — exactly
//! the precision of the `gtxt` text format — so saving and reloading a graph
//! reproduces it bit for bit.

pub mod io;
pub mod sbm;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::Tensor2;

pub const UNLABELED: i64 = -1;

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    features: Tensor2,
    labels: Vec<i64>,
    num_classes: usize,
    /// Canonical undirected edge list: `(min, max)`, lexicographically sorted.
    edges: Vec<(u32, u32)>,
    /// CSR offsets/neighbors over the symmetric expansion of `edges`.
    csr_offsets: Vec<usize>,
    csr_neighbors: Vec<u32>,
}

impl Graph {
    /// Builds a graph, canonicalizing the edge list.
    ///
    /// Rejects self-loops, duplicate undirected edges, endpoints out of
    /// range, labels outside `{-1} ∪ [0, num_classes)`, and non-finite
    /// features. Edge pairs may arrive in either orientation.
    pub fn new(
        features: Tensor2,
        labels: Vec<i64>,
        num_classes: usize,
        edges: Vec<(u32, u32)>,
    ) -> Result<Graph> {
        let n = features.rows();
        if n == 0 {
            return Err(Error::invalid("graph must have at least one node"));
        }
        if features.cols() == 0 {
            return Err(Error::invalid("graph must have at least one feature dimension"));
        }
        if num_classes == 0 {
            return Err(Error::invalid("graph must declare at least one class"));
        }
        if labels.len() != n {
            return Err(Error::invalid(format!(
                "{} labels for {} nodes",
                labels.len(),
                n
            )));
        }
        for (u, &y) in labels.iter().enumerate() {
            if y != UNLABELED && !(0..num_classes as i64).contains(&y) {
                return Err(Error::invalid(format!(
                    "node {u}: label {y} outside [0, {num_classes})"
                )));
            }
        }
        if !features.is_finite() {
            return Err(Error::invalid("non-finite feature value"));
        }
        let features = features.map(io::quantize_sig9);

        let mut canonical = Vec::with_capacity(edges.len());
        for (u, v) in edges {
            if u == v {
                return Err(Error::invalid(format!("self-loop at node {u}")));
            }
            if u as usize >= n || v as usize >= n {
                return Err(Error::invalid(format!(
                    "edge ({u}, {v}) references a node outside [0, {n})"
                )));
            }
            canonical.push((u.min(v), u.max(v)));
        }
        canonical.sort_unstable();
        for w in canonical.windows(2) {
            if w[0] == w[1] {
                return Err(Error::invalid(format!(
                    "duplicate undirected edge ({}, {})",
                    w[0].0, w[0].1
                )));
            }
        }

        let (csr_offsets, csr_neighbors) = build_csr(n, &canonical);
        Ok(Graph {
            features,
            labels,
            num_classes,
            edges: canonical,
            csr_offsets,
            csr_neighbors,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.features.rows()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &Tensor2 {
        &self.features
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn neighbors(&self, u: usize) -> &[u32] {
        &self.csr_neighbors[self.csr_offsets[u]..self.csr_offsets[u + 1]]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.csr_offsets[u + 1] - self.csr_offsets[u]
    }

    /// True when every node carries a real label.
    pub fn fully_labeled(&self) -> bool {
        self.labels.iter().all(|&y| y != UNLABELED)
    }

    /// Copy with every label replaced by the unlabeled sentinel. Used to
    /// enforce that estimation paths cannot read target labels.
    pub fn strip_labels(&self) -> Graph {
        let mut g = self.clone();
        g.labels = vec![UNLABELED; g.num_nodes()];
        g
    }

    /// Subgraph induced by `ids` (strictly ascending node ids).
    ///
    /// Node `ids[i]` becomes node `i`; feature and label rows are copied
    /// unchanged, and exactly the edges with both endpoints in `ids` survive.
    pub fn induced_subgraph(&self, ids: &[u32]) -> Result<Graph> {
        if ids.is_empty() {
            return Err(Error::invalid("induced subgraph needs at least one node"));
        }
        let n = self.num_nodes() as u32;
        for w in ids.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::invalid("subgraph ids must be strictly ascending"));
            }
        }
        if *ids.last().unwrap() >= n {
            return Err(Error::invalid(format!(
                "subgraph id {} outside [0, {n})",
                ids.last().unwrap()
            )));
        }
        let mut remap = vec![u32::MAX; self.num_nodes()];
        for (new, &old) in ids.iter().enumerate() {
            remap[old as usize] = new as u32;
        }
        let features = self
            .features
            .select_rows(&ids.iter().map(|&i| i as usize).collect::<Vec<_>>());
        let labels = ids.iter().map(|&i| self.labels[i as usize]).collect();
        let edges = self
            .edges
            .iter()
            .filter(|(u, v)| remap[*u as usize] != u32::MAX && remap[*v as usize] != u32::MAX)
            .map(|&(u, v)| (remap[u as usize], remap[v as usize]))
            .collect();
        Graph::new(features, labels, self.num_classes, edges)
    }

    /// Content identifier: SHA-256 of the canonical text serialization,
    /// truncated to 16 hex characters. Stable across runs and platforms.
    pub fn content_id(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(io::to_gtxt_string(self).as_bytes());
        let digest = hasher.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn build_csr(n: usize, edges: &[(u32, u32)]) -> (Vec<usize>, Vec<u32>) {
    let mut offsets = vec![0usize; n + 1];
    for &(u, v) in edges {
        offsets[u as usize + 1] += 1;
        offsets[v as usize + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let mut cursor = offsets.clone();
    let mut neighbors = vec![0u32; edges.len() * 2];
    for &(u, v) in edges {
        neighbors[cursor[u as usize]] = v;
        cursor[u as usize] += 1;
        neighbors[cursor[v as usize]] = u;
        cursor[v as usize] += 1;
    }
    // Canonical edge order already emits each node's neighbors in ascending
    // order for the `u` side; the `v` side needs a sort.
    for u in 0..n {
        neighbors[offsets[u]..offsets[u + 1]].sort_unstable();
    }
    (offsets, neighbors)
}

/// Train/val/test node-id partition. Each list is strictly ascending and the
/// lists are pairwise disjoint; none is required to be nonempty until a
/// consumer (training, threshold fitting) says otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<u32>,
    pub val: Vec<u32>,
    pub test: Vec<u32>,
}

impl Split {
    pub fn new(train: Vec<u32>, val: Vec<u32>, test: Vec<u32>) -> Result<Split> {
        let split = Split { train, val, test };
        split.validate()?;
        Ok(split)
    }

    fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for (name, ids) in [
            ("train", &self.train),
            ("val", &self.val),
            ("test", &self.test),
        ] {
            for w in ids.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::invalid(format!(
                        "{name} ids must be strictly ascending"
                    )));
                }
            }
            for &id in ids {
                if !seen.insert(id) {
                    return Err(Error::invalid(format!(
                        "node {id} appears in more than one split section"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Checks every id against a graph's node count.
    pub fn check_against(&self, g: &Graph) -> Result<()> {
        let n = g.num_nodes() as u32;
        for ids in [&self.train, &self.val, &self.test] {
            if let Some(&id) = ids.iter().find(|&&id| id >= n) {
                return Err(Error::invalid(format!(
                    "split id {id} outside graph with {n} nodes"
                )));
            }
        }
        Ok(())
    }

    /// Seeded random partition by fractions; `f_train + f_val` must stay
    /// within 1, the remainder becomes the test set.
    pub fn random(n: usize, f_train: f64, f_val: f64, rng: &mut crate::rng::Rng) -> Result<Split> {
        if !(0.0..=1.0).contains(&f_train) || !(0.0..=1.0).contains(&f_val) || f_train + f_val > 1.0
        {
            return Err(Error::invalid(format!(
                "bad split fractions train={f_train} val={f_val}"
            )));
        }
        let mut ids: Vec<u32> = (0..n as u32).collect();
        rng.shuffle(&mut ids);
        let n_train = (f_train * n as f64).round() as usize;
        let n_val = ((f_val * n as f64).round() as usize).min(n - n_train);
        let mut train = ids[..n_train].to_vec();
        let mut val = ids[n_train..n_train + n_val].to_vec();
        let mut test = ids[n_train + n_val..].to_vec();
        train.sort_unstable();
        val.sort_unstable();
        test.sort_unstable();
        Split::new(train, val, test)
    }
}

/// Fraction of positions where predictions match labels.
///
/// Labels must all be real (no unlabeled sentinel); the result is exactly
/// `k/n` for the integer match count `k`.
pub fn accuracy(predictions: &[i64], labels: &[i64]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} predictions vs {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::invalid("accuracy of an empty set"));
    }
    if let Some(pos) = labels.iter().position(|&y| y == UNLABELED) {
        return Err(Error::invalid(format!("node {pos} is unlabeled")));
    }
    let hits = predictions
        .iter()
        .zip(labels)
        .filter(|(p, y)| p == y)
        .count();
    Ok(hits as f64 / labels.len() as f64)
}
