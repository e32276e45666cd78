//! Meta-graph synthesis.
//!
//! The estimator never sees real shifted graphs during training, so it learns
//! from simulated ones: the seed subgraph (the held-out validation ∪ test
//! nodes) is perturbed by a pool of four operators — edge dropping, random-walk
//! subgraph sampling, attribute masking, and node feature mixing — to produce a
//! set of labeled meta-graphs spanning a range of distribution shifts.
//!
//! Every operator takes an exact count contract: given ratio `p` it affects
//! exactly `round(p·count)` items, so tests can assert counts rather than
//! distributions.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{io as graph_io, Graph, Split};
use crate::rng::Rng;

/// Restart probability of the random walk used by [`subgraph_sample`].
pub const WALK_RESTART: f64 = 0.15;

/// The four perturbation operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AugmentOp {
    EdgeDrop,
    Subgraph,
    AttrMask,
    NodeMix,
}

impl AugmentOp {
    pub const ALL: [AugmentOp; 4] = [
        AugmentOp::EdgeDrop,
        AugmentOp::Subgraph,
        AugmentOp::AttrMask,
        AugmentOp::NodeMix,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            AugmentOp::EdgeDrop => "edge-drop",
            AugmentOp::Subgraph => "subgraph",
            AugmentOp::AttrMask => "attr-mask",
            AugmentOp::NodeMix => "node-mix",
        }
    }

    pub fn parse(s: &str) -> Result<AugmentOp> {
        AugmentOp::ALL
            .into_iter()
            .find(|o| o.tag() == s)
            .ok_or_else(|| Error::invalid(format!("unknown augmentation '{s}'")))
    }
}

impl std::fmt::Display for AugmentOp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Controls how the meta-graph set is sampled.
#[derive(Debug, Clone)]
pub struct AugmentConfig {
    /// Categorical weights over [`AugmentOp::ALL`]; need not sum to 1.
    pub weights: [f64; 4],
    /// Per-operator ratio range `[lo, hi] ⊂ (0,1)`; the ratio is drawn
    /// uniformly from the operator's range.
    pub p_ranges: [(f64, f64); 4],
    /// Number of meta-graphs to generate.
    pub k: usize,
    pub seed: u64,
    /// Operators applied in sequence per meta-graph.
    pub chain_length: usize,
}

impl AugmentConfig {
    /// Uniform operator weights and wide `[0.1, 0.9]` ratio ranges: the
    /// default favors diversity of simulated shifts.
    pub fn new(k: usize, seed: u64) -> Self {
        AugmentConfig {
            weights: [1.0; 4],
            p_ranges: [(0.1, 0.9); 4],
            k,
            seed,
            chain_length: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("meta-graph count must be positive"));
        }
        if self.chain_length == 0 {
            return Err(Error::invalid("chain length must be positive"));
        }
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("operator weights must be finite and nonnegative"));
        }
        if self.weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::invalid("at least one operator weight must be positive"));
        }
        for (op, &(lo, hi)) in AugmentOp::ALL.iter().zip(&self.p_ranges) {
            if !(0.0 < lo && lo <= hi && hi < 1.0) {
                return Err(Error::invalid(format!(
                    "{op} ratio range [{lo}, {hi}] must satisfy 0 < lo <= hi < 1"
                )));
            }
        }
        Ok(())
    }
}

/// How one meta-graph was produced: which operators ran, with which sampled
/// ratios, from which configured seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub index: usize,
    pub ops: Vec<AugmentOp>,
    pub ps: Vec<f64>,
    pub seed: u64,
}

/// A perturbed copy of the seed subgraph, fully labeled.
#[derive(Debug, Clone)]
pub struct MetaGraph {
    pub graph: Graph,
    pub provenance: Provenance,
}

/// Extracts the subgraph the meta-set grows from: the validation and test
/// nodes, which the classifier never fit, with their labels retained.
pub fn seed_subgraph(g: &Graph, split: &Split) -> Result<Graph> {
    split.check_against(g)?;
    let mut ids: Vec<u32> = split.val.iter().chain(&split.test).copied().collect();
    ids.sort_unstable();
    if ids.is_empty() {
        return Err(Error::invalid("val ∪ test is empty; nothing to build meta-graphs from"));
    }
    g.induced_subgraph(&ids)
}

/// Removes exactly `round(p·M)` undirected edges, chosen uniformly without
/// replacement. Nodes, features, and labels are untouched.
pub fn edge_drop(g: &Graph, p: f64, rng: &mut Rng) -> Result<Graph> {
    check_ratio(p)?;
    let m = g.num_edges();
    let n_drop = (p * m as f64).round() as usize;
    if n_drop == 0 {
        return Ok(g.clone());
    }
    let mut dropped = vec![false; m];
    for i in rng.sample_distinct(m, n_drop) {
        dropped[i] = true;
    }
    let kept: Vec<(u32, u32)> = g
        .edges()
        .iter()
        .enumerate()
        .filter(|(i, _)| !dropped[*i])
        .map(|(_, e)| *e)
        .collect();
    Graph::new(
        g.features().clone(),
        g.labels().to_vec(),
        g.num_classes(),
        kept,
    )
}

/// Keeps exactly `round((1−p)·N)` nodes gathered by a random walk with
/// restart from a uniform start node, topping up with uniform unvisited nodes
/// if the walk stalls (disconnected or too-small component). Returns the
/// induced subgraph.
pub fn subgraph_sample(g: &Graph, p: f64, rng: &mut Rng) -> Result<Graph> {
    check_ratio(p)?;
    let n = g.num_nodes();
    let target = ((1.0 - p) * n as f64).round() as usize;
    if target == 0 {
        return Err(Error::invalid(format!(
            "subgraph ratio {p} on {n} nodes keeps zero nodes"
        )));
    }

    let start = rng.index(n);
    let mut visited = vec![false; n];
    let mut kept: Vec<u32> = Vec::with_capacity(target);
    visited[start] = true;
    kept.push(start as u32);
    let mut current = start;
    // A stalled walk (stuck in a small component) stops growing `kept`; cap
    // total steps rather than trying to detect the component boundary.
    let budget = 20 * n.max(target);
    let mut steps = 0;
    while kept.len() < target && steps < budget {
        steps += 1;
        let nbrs = g.neighbors(current);
        if nbrs.is_empty() || rng.next_f64() < WALK_RESTART {
            current = start;
            continue;
        }
        current = nbrs[rng.index(nbrs.len())] as usize;
        if !visited[current] {
            visited[current] = true;
            kept.push(current as u32);
        }
    }
    if kept.len() < target {
        let unvisited: Vec<usize> = (0..n).filter(|&u| !visited[u]).collect();
        for i in rng.sample_distinct(unvisited.len(), target - kept.len()) {
            kept.push(unvisited[i] as u32);
        }
    }
    kept.sort_unstable();
    g.induced_subgraph(&kept)
}

/// Zeroes the entire feature rows of exactly `round(p·N)` uniformly chosen
/// nodes. Structure and labels are untouched.
pub fn attr_mask(g: &Graph, p: f64, rng: &mut Rng) -> Result<Graph> {
    check_ratio(p)?;
    let n = g.num_nodes();
    let n_mask = (p * n as f64).round() as usize;
    let mut features = g.features().clone();
    for u in rng.sample_distinct(n, n_mask) {
        for v in features.row_mut(u) {
            *v = 0.0;
        }
    }
    Graph::new(features, g.labels().to_vec(), g.num_classes(), g.edges().to_vec())
}

/// Feature-level mixing: for exactly `round(p·N)` uniformly chosen nodes `u`,
/// picks a uniform partner `v ≠ u` and replaces `x_u` with
/// `λ·x_u + (1−λ)·x_v`, `λ ~ U[0.5, 1)`. Since `λ ≥ 0.5` keeps `u` dominant,
/// `u`'s label is retained. Partners always contribute their *original*
/// features, so the result does not depend on mixing order.
pub fn node_mix(g: &Graph, p: f64, rng: &mut Rng) -> Result<Graph> {
    check_ratio(p)?;
    let n = g.num_nodes();
    if n < 2 {
        return Err(Error::invalid("node mixing needs at least two nodes"));
    }
    let n_mix = (p * n as f64).round() as usize;
    let original = g.features();
    let mut features = original.clone();
    for u in rng.sample_distinct(n, n_mix) {
        let mut v = rng.index(n - 1);
        if v >= u {
            v += 1;
        }
        let lambda = rng.uniform(0.5, 1.0);
        let partner: Vec<f64> = original.row(v).to_vec();
        for (xu, xv) in features.row_mut(u).iter_mut().zip(partner) {
            *xu = lambda * *xu + (1.0 - lambda) * xv;
        }
    }
    Graph::new(features, g.labels().to_vec(), g.num_classes(), g.edges().to_vec())
}

fn check_ratio(p: f64) -> Result<()> {
    if !(p.is_finite() && 0.0 < p && p < 1.0) {
        return Err(Error::invalid(format!("ratio {p} must lie strictly in (0, 1)")));
    }
    Ok(())
}

fn apply_op(g: &Graph, op: AugmentOp, p: f64, rng: &mut Rng) -> Result<Graph> {
    match op {
        AugmentOp::EdgeDrop => edge_drop(g, p, rng),
        AugmentOp::Subgraph => subgraph_sample(g, p, rng),
        AugmentOp::AttrMask => attr_mask(g, p, rng),
        AugmentOp::NodeMix => node_mix(g, p, rng),
    }
}

/// Generates the meta-graph set: `cfg.k` independent perturbations of
/// `seedg`, each built on its own rng stream derived from `cfg.seed` and the
/// graph index, so the set is reproducible and order-independent.
pub fn build_meta_set(seedg: &Graph, cfg: &AugmentConfig) -> Result<Vec<MetaGraph>> {
    cfg.validate()?;
    if !seedg.fully_labeled() {
        return Err(Error::invalid("the seed subgraph must be fully labeled"));
    }
    (0..cfg.k)
        .map(|i| {
            let mut rng = Rng::new(cfg.seed).derive(i as u64);
            let mut ops = Vec::with_capacity(cfg.chain_length);
            let mut ps = Vec::with_capacity(cfg.chain_length);
            let mut graph = seedg.clone();
            for _ in 0..cfg.chain_length {
                let which = rng.weighted(&cfg.weights);
                let op = AugmentOp::ALL[which];
                let (lo, hi) = cfg.p_ranges[which];
                let p = rng.uniform(lo, hi);
                graph = apply_op(&graph, op, p, &mut rng)
                    .map_err(|e| Error::invalid(format!("meta-graph {i}: {e}")))?;
                ops.push(op);
                ps.push(p);
            }
            Ok(MetaGraph {
                graph,
                provenance: Provenance { index: i, ops, ps, seed: cfg.seed },
            })
        })
        .collect()
}

/// One provenance line per meta-graph:
/// `<i> <ops,comma-sep> <ps,comma-sep> <seed> <N_i> <M_i>`.
pub fn meta_manifest(metas: &[MetaGraph]) -> String {
    let mut out = String::from("#meta-set v1\n");
    for m in metas {
        let ops: Vec<String> = m.provenance.ops.iter().map(|o| o.to_string()).collect();
        let ps: Vec<String> = m.provenance.ps.iter().map(|p| format!("{p:?}")).collect();
        let _ = writeln!(
            out,
            "{} {} {} {} {} {}",
            m.provenance.index,
            ops.join(","),
            ps.join(","),
            m.provenance.seed,
            m.graph.num_nodes(),
            m.graph.num_edges(),
        );
    }
    out
}

/// Writes `meta_{i}.gtxt` per graph plus `meta_manifest.txt` into `dir`.
pub fn save_meta_set(metas: &[MetaGraph], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for m in metas {
        let path = dir.join(format!("meta_{}.gtxt", m.provenance.index));
        graph_io::save_graph(&m.graph, &path)?;
    }
    let manifest = dir.join("meta_manifest.txt");
    std::fs::write(&manifest, meta_manifest(metas)).map_err(|e| Error::io(&manifest, e))
}
