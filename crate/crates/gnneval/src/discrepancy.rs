//! Discrepancy graphs: the bridge between a frozen classifier and the
//! accuracy estimator.
//!
//! A discrepancy graph keeps a meta-graph's structure but replaces its node
//! features with similarity profiles: row `u` holds the cosine similarity
//! between the classifier's embedding of meta-node `u` and its embedding of
//! every training-graph node. Labeled variants carry the classifier's true
//! accuracy on the underlying meta-graph; inference-time variants (built from
//! an unseen target graph) carry no label at all.
//!
//! Column order is the training graph's node order and must be identical
//! across every discrepancy graph consumed by one estimator, so the
//! classifier's training-graph embeddings are computed once per
//! [`DiscContext`] and reused.

use std::fmt::Write as _;
use std::path::Path;

use crate::augment::MetaGraph;
use crate::error::{Error, Result};
use crate::graph::{accuracy, Graph};
use crate::nn::Tensor2;
use crate::zoo::TrainedModel;

/// A similarity-attributed graph, optionally labeled with the classifier's
/// accuracy on the graph it was derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscGraph {
    /// `M×N` cosine similarities; rows are this graph's nodes, columns the
    /// training graph's nodes.
    pub attrs: Tensor2,
    /// Undirected edges over the `M` rows, canonical `(min,max)` sorted.
    pub edges: Vec<(u32, u32)>,
    /// The bound classifier's accuracy on the source meta-graph, in `[0,1]`;
    /// absent for inference-time graphs.
    pub label: Option<f64>,
    /// Where this graph came from: `meta:<index>` or `target:<graph-id>`.
    pub provenance: String,
    /// Identity of the classifier whose embeddings produced `attrs`.
    pub model_id: String,
    /// Identity of the training graph defining the column order.
    pub train_graph_id: String,
}

impl DiscGraph {
    pub fn num_nodes(&self) -> usize {
        self.attrs.rows()
    }

    /// Width of `attrs` — the training graph's node count.
    pub fn train_node_count(&self) -> usize {
        self.attrs.cols()
    }

    /// Applies a node reordering: `perm[new] = old`. Rows of `attrs` and both
    /// edge endpoints move together, which leaves every graph-level quantity
    /// (and any permutation-invariant estimate) unchanged.
    pub fn permuted(&self, perm: &[usize]) -> DiscGraph {
        assert_eq!(perm.len(), self.num_nodes());
        let mut inverse = vec![0u32; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new as u32;
        }
        let attrs = Tensor2::from_rows(&perm.iter().map(|&old| self.attrs.row(old).to_vec()).collect::<Vec<_>>());
        let mut edges: Vec<(u32, u32)> = self
            .edges
            .iter()
            .map(|&(a, b)| {
                let (x, y) = (inverse[a as usize], inverse[b as usize]);
                (x.min(y), x.max(y))
            })
            .collect();
        edges.sort_unstable();
        DiscGraph { attrs, edges, ..self.clone() }
    }
}

/// Row-wise cosine similarity between two embedding matrices, clamped to
/// `[-1, 1]`. A zero-norm row (degenerate embedding) has its norm replaced by
/// `1e-12` — its similarities all become 0 — and is reported via a warning.
pub fn disc_attrs(z_meta: &Tensor2, z_train: &Tensor2) -> Result<Tensor2> {
    if z_meta.cols() != z_train.cols() {
        return Err(Error::invalid(format!(
            "embedding dims differ: {} vs {}",
            z_meta.cols(),
            z_train.cols()
        )));
    }
    let norms = |z: &Tensor2, side: &str| -> Vec<f64> {
        (0..z.rows())
            .map(|r| {
                let n = z.row(r).iter().map(|x| x * x).sum::<f64>().sqrt();
                if n == 0.0 {
                    log::warn!("zero-norm {side} embedding row {r}; treating norm as 1e-12");
                    1e-12
                } else {
                    n
                }
            })
            .collect()
    };
    let nm = norms(z_meta, "meta");
    let nt = norms(z_train, "train");
    let mut out = z_meta.matmul_nt(z_train);
    for u in 0..out.rows() {
        let row = out.row_mut(u);
        for (v, x) in row.iter_mut().enumerate() {
            *x = (*x / (nm[u] * nt[v])).clamp(-1.0, 1.0);
        }
    }
    Ok(out)
}

/// The classifier's accuracy on a fully labeled meta-graph — the exact
/// fraction of correct predictions.
pub fn label_meta(model: &TrainedModel, mg: &MetaGraph) -> Result<f64> {
    if !mg.graph.fully_labeled() {
        return Err(Error::invalid(format!(
            "meta-graph {} has unlabeled nodes",
            mg.provenance.index
        )));
    }
    let (_, predictions) = model.embed_and_predict(&mg.graph)?;
    accuracy(&predictions, mg.graph.labels())
}

/// Caches the classifier's training-graph embeddings so every discrepancy
/// graph built for one (classifier, training graph) pair shares the exact
/// same column profile.
pub struct DiscContext<'a> {
    model: &'a TrainedModel,
    z_train: Tensor2,
    model_id: String,
    train_graph_id: String,
}

impl<'a> DiscContext<'a> {
    pub fn new(model: &'a TrainedModel, train_graph: &Graph) -> Result<Self> {
        if model.source_graph_id != train_graph.content_id() {
            return Err(Error::invalid(format!(
                "model was trained on graph {}, not {}",
                model.source_graph_id,
                train_graph.content_id()
            )));
        }
        let (z_train, _) = model.embed_and_predict(train_graph)?;
        Ok(DiscContext {
            model,
            z_train,
            model_id: model.model_id(),
            train_graph_id: train_graph.content_id(),
        })
    }

    pub fn train_node_count(&self) -> usize {
        self.z_train.rows()
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn train_graph_id(&self) -> &str {
        &self.train_graph_id
    }

    /// Embeddings of the training graph, one row per node — also the source
    /// of distribution-gap features for regression baselines.
    pub fn z_train(&self) -> &Tensor2 {
        &self.z_train
    }

    /// Labeled discrepancy graph for one meta-graph: cosine attrs, the
    /// meta-graph's own adjacency, and the classifier's accuracy as label.
    pub fn build_discgraph(&self, mg: &MetaGraph) -> Result<DiscGraph> {
        if !mg.graph.fully_labeled() {
            return Err(Error::invalid(format!(
                "meta-graph {} has unlabeled nodes",
                mg.provenance.index
            )));
        }
        let (z_meta, predictions) = self.model.embed_and_predict(&mg.graph)?;
        let attrs = disc_attrs(&z_meta, &self.z_train)?;
        let label = accuracy(&predictions, mg.graph.labels())?;
        Ok(DiscGraph {
            attrs,
            edges: mg.graph.edges().to_vec(),
            label: Some(label),
            provenance: format!("meta:{}", mg.provenance.index),
            model_id: self.model_id.clone(),
            train_graph_id: self.train_graph_id.clone(),
        })
    }

    /// Unlabeled discrepancy graph for an unseen target graph. Target labels
    /// are never read — only features and structure enter the embeddings.
    pub fn build_inference_discgraph(&self, target: &Graph) -> Result<DiscGraph> {
        let (z_target, _) = self.model.embed_and_predict(target)?;
        let attrs = disc_attrs(&z_target, &self.z_train)?;
        Ok(DiscGraph {
            attrs,
            edges: target.edges().to_vec(),
            label: None,
            provenance: format!("target:{}", target.content_id()),
            model_id: self.model_id.clone(),
            train_graph_id: self.train_graph_id.clone(),
        })
    }
}

const HEADER: &str = "#disc v1";

/// Canonical serialization:
///
/// ```text
/// #disc v1
/// bound: <model-id> <train-graph-id>
/// prov: meta:3
/// <M> <N> <label or NA>
/// M rows of N space-separated similarities
/// M' edge lines "src dst"
/// ```
pub fn to_disc_string(d: &DiscGraph) -> String {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    let _ = writeln!(out, "bound: {} {}", d.model_id, d.train_graph_id);
    let _ = writeln!(out, "prov: {}", d.provenance);
    match d.label {
        Some(y) => {
            let _ = writeln!(out, "{} {} {y:?}", d.num_nodes(), d.train_node_count());
        }
        None => {
            let _ = writeln!(out, "{} {} NA", d.num_nodes(), d.train_node_count());
        }
    }
    for r in 0..d.attrs.rows() {
        for (j, v) in d.attrs.row(r).iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{v:?}");
        }
        out.push('\n');
    }
    for &(a, b) in &d.edges {
        let _ = writeln!(out, "{a} {b}");
    }
    out
}

pub fn save_discgraph(d: &DiscGraph, path: &Path) -> Result<()> {
    std::fs::write(path, to_disc_string(d)).map_err(|e| Error::io(path, e))
}

pub fn load_discgraph(path: &Path) -> Result<DiscGraph> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_discgraph(&text, &path.display().to_string())
}

pub fn parse_discgraph(text: &str, path: &str) -> Result<DiscGraph> {
    let fail = |line: usize, msg: String| Error::parse(path, line, msg);
    let mut lines = text.lines().enumerate();
    let mut next_line = |expect: &str, at: usize| {
        lines
            .next()
            .ok_or_else(|| fail(at, format!("missing {expect}")))
    };

    let (_, header) = next_line("header", 1)?;
    if header != HEADER {
        return Err(fail(1, format!("expected '{HEADER}', found '{header}'")));
    }

    let (_, bound) = next_line("binding line", 2)?;
    let bound = bound
        .strip_prefix("bound: ")
        .ok_or_else(|| fail(2, "expected 'bound: <model-id> <train-graph-id>'".into()))?;
    let mut it = bound.split_ascii_whitespace();
    let (model_id, train_graph_id) = match (it.next(), it.next(), it.next()) {
        (Some(m), Some(t), None) => (m.to_string(), t.to_string()),
        _ => return Err(fail(2, "binding line needs exactly two ids".into())),
    };

    let (_, prov) = next_line("provenance line", 3)?;
    let provenance = prov
        .strip_prefix("prov: ")
        .ok_or_else(|| fail(3, "expected 'prov: <origin>'".into()))?
        .to_string();
    if provenance.is_empty() || provenance.contains(' ') {
        return Err(fail(3, "provenance must be one nonempty token".into()));
    }

    let (_, counts) = next_line("size line", 4)?;
    let parts: Vec<&str> = counts.split_ascii_whitespace().collect();
    if parts.len() != 3 {
        return Err(fail(4, format!("expected '<M> <N> <label|NA>', found '{counts}'")));
    }
    let m: usize = parts[0]
        .parse()
        .map_err(|_| fail(4, "bad node count".into()))?;
    let n: usize = parts[1]
        .parse()
        .map_err(|_| fail(4, "bad column count".into()))?;
    if m == 0 || n == 0 {
        return Err(fail(4, "node and column counts must be positive".into()));
    }
    let label = if parts[2] == "NA" {
        None
    } else {
        let y: f64 = parts[2]
            .parse()
            .map_err(|_| fail(4, format!("bad label '{}'", parts[2])))?;
        if !(0.0..=1.0).contains(&y) {
            return Err(fail(4, format!("label {y} outside [0,1]")));
        }
        Some(y)
    };

    let mut data = Vec::with_capacity(m * n);
    for r in 0..m {
        let (idx, row) = next_line("attribute row", 5 + r)?;
        let lineno = idx + 1;
        let mut count = 0usize;
        for tok in row.split_ascii_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| fail(lineno, format!("bad value '{tok}'")))?;
            if !(-1.0..=1.0).contains(&v) {
                return Err(fail(lineno, format!("similarity {v} outside [-1,1]")));
            }
            data.push(v);
            count += 1;
        }
        if count != n {
            return Err(fail(lineno, format!("row {r}: expected {n} values, found {count}")));
        }
    }
    let attrs = Tensor2::from_vec(m, n, data);

    let mut edges = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let parts: Vec<&str> = line.split_ascii_whitespace().collect();
        if parts.len() != 2 {
            return Err(fail(lineno, format!("expected 'src dst', found '{line}'")));
        }
        let a: u32 = parts[0]
            .parse()
            .map_err(|_| fail(lineno, "bad edge endpoint".into()))?;
        let b: u32 = parts[1]
            .parse()
            .map_err(|_| fail(lineno, "bad edge endpoint".into()))?;
        if a >= b {
            return Err(fail(lineno, format!("edge {a}-{b} must satisfy src < dst")));
        }
        if b as usize >= m {
            return Err(fail(lineno, format!("edge {a}-{b} references node >= {m}")));
        }
        if let Some(&last) = edges.last() {
            if last >= (a, b) {
                return Err(fail(lineno, "edges must be sorted and unique".into()));
            }
        }
        edges.push((a, b));
    }

    Ok(DiscGraph {
        attrs,
        edges,
        label,
        provenance,
        model_id,
        train_graph_id,
    })
}

/// Label summary plus one `<index> <file> <label|NA>` line per graph.
pub fn disc_manifest(discs: &[DiscGraph]) -> String {
    let mut out = String::from("#disc-set v1\n");
    if let Some(d) = discs.first() {
        let _ = writeln!(out, "bound: {} {}", d.model_id, d.train_graph_id);
    }
    let _ = writeln!(out, "count {}", discs.len());
    let labels: Vec<f64> = discs.iter().filter_map(|d| d.label).collect();
    if labels.is_empty() {
        out.push_str("labels NA\n");
    } else {
        let min = labels.iter().copied().fold(f64::INFINITY, f64::min);
        let max = labels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = labels.iter().sum::<f64>() / labels.len() as f64;
        let _ = writeln!(out, "labels min {min:?} mean {mean:?} max {max:?}");
    }
    for (i, d) in discs.iter().enumerate() {
        match d.label {
            Some(y) => {
                let _ = writeln!(out, "{i} disc_{i}.disc {y:?}");
            }
            None => {
                let _ = writeln!(out, "{i} disc_{i}.disc NA");
            }
        }
    }
    out
}

/// Writes `disc_{i}.disc` per graph plus `disc_manifest.txt` into `dir`.
pub fn save_disc_set(discs: &[DiscGraph], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, d) in discs.iter().enumerate() {
        save_discgraph(d, &dir.join(format!("disc_{i}.disc")))?;
    }
    let manifest = dir.join("disc_manifest.txt");
    std::fs::write(&manifest, disc_manifest(discs)).map_err(|e| Error::io(&manifest, e))
}

/// Reads a set saved by [`save_disc_set`], enforcing a uniform binding.
pub fn load_disc_set(dir: &Path) -> Result<Vec<DiscGraph>> {
    let manifest_path = dir.join("disc_manifest.txt");
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let path_str = manifest_path.display().to_string();
    let count_line = text
        .lines()
        .find(|l| l.starts_with("count "))
        .ok_or_else(|| Error::parse(&path_str, 0, "missing count line"))?;
    let count: usize = count_line["count ".len()..]
        .parse()
        .map_err(|_| Error::parse(&path_str, 0, "bad count"))?;
    let mut discs = Vec::with_capacity(count);
    for i in 0..count {
        let d = load_discgraph(&dir.join(format!("disc_{i}.disc")))?;
        if let Some(first) = discs.first() {
            let first: &DiscGraph = first;
            if d.model_id != first.model_id || d.train_graph_id != first.train_graph_id {
                return Err(Error::invalid(format!(
                    "disc_{i}.disc is bound to a different (model, graph) pair than the rest of the set"
                )));
            }
        }
        discs.push(d);
    }
    Ok(discs)
}
