//! Node-classifier zoo: five small architectures sharing one training loop.
//!
//! Every model is two graph layers (or dense layers for the MLP) with ReLU in
//! between: `in → hidden → embed`, where the second layer's output is the
//! node embedding `Z`, followed by a dense `embed → classes` head whose
//! logits feed a softmax. Training is full-graph Adam on the train split's
//! cross-entropy with early stopping on validation accuracy; the snapshot
//! with the best validation accuracy (earliest on ties) is what gets frozen.

pub mod adjacency;
mod checkpoint;
mod model;
mod train;

use std::collections::BTreeMap;

pub use adjacency::{normalized_adjacency, PreparedGraph};
pub use checkpoint::{load_model, save_model, to_checkpoint_string};
pub use model::{forward, init_params, store_from_values};
pub use train::{train_classifier, TrainReport};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::nn::Tensor2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arch {
    Gcn,
    Sage,
    Gat,
    Gin,
    Mlp,
}

impl Arch {
    pub const ALL: [Arch; 5] = [Arch::Gcn, Arch::Sage, Arch::Gat, Arch::Gin, Arch::Mlp];

    pub fn tag(self) -> &'static str {
        match self {
            Arch::Gcn => "gcn",
            Arch::Sage => "sage",
            Arch::Gat => "gat",
            Arch::Gin => "gin",
            Arch::Mlp => "mlp",
        }
    }

    pub fn parse(s: &str) -> Result<Arch> {
        Arch::ALL
            .into_iter()
            .find(|a| a.tag() == s)
            .ok_or_else(|| Error::invalid(format!("unknown architecture '{s}'")))
    }

    /// Per-architecture default learning rate.
    pub fn default_lr(self) -> f64 {
        match self {
            Arch::Gcn | Arch::Gin => 0.01,
            Arch::Sage | Arch::Gat => 0.005,
            Arch::Mlp => 0.001,
        }
    }

    /// Per-architecture default weight decay.
    pub fn default_weight_decay(self) -> f64 {
        match self {
            Arch::Gcn | Arch::Mlp => 1e-5,
            Arch::Sage | Arch::Gat | Arch::Gin => 1e-6,
        }
    }
}

impl std::fmt::Display for Arch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub arch: Arch,
    pub in_dim: usize,
    pub hidden_dim: usize,
    pub embed_dim: usize,
    pub num_classes: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl ModelConfig {
    /// Defaults: hidden 128, embedding 16, 200 epochs with patience 20, and
    /// the architecture's learning rate / weight decay.
    pub fn new(arch: Arch, in_dim: usize, num_classes: usize, seed: u64) -> Self {
        ModelConfig {
            arch,
            in_dim,
            hidden_dim: 128,
            embed_dim: 16,
            num_classes,
            lr: arch.default_lr(),
            weight_decay: arch.default_weight_decay(),
            max_epochs: 200,
            patience: 20,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_dim == 0 || self.hidden_dim == 0 || self.embed_dim == 0 {
            return Err(Error::invalid("model dimensions must be positive"));
        }
        if self.num_classes < 2 {
            return Err(Error::invalid("classification needs at least two classes"));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) || !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::invalid(format!(
                "bad optimizer settings lr={} wd={}",
                self.lr, self.weight_decay
            )));
        }
        Ok(())
    }
}

/// A frozen classifier: configuration, final parameter values, and the
/// identity of the graph it was trained on.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub config: ModelConfig,
    pub params: BTreeMap<String, Tensor2>,
    pub source_graph_id: String,
    pub val_accuracy: f64,
    pub epochs_run: usize,
}

/// Full inference output on one graph.
pub struct Inference {
    /// Pre-head node embeddings, `N × embed_dim`.
    pub z: Tensor2,
    /// Classification logits, `N × num_classes`.
    pub logits: Tensor2,
    /// Arg-max predictions (ties broken toward the lower class index).
    pub predictions: Vec<i64>,
}

impl TrainedModel {
    /// Runs the frozen model on a graph. Pure: identical inputs give
    /// bit-identical outputs, and labels on `g` are never read.
    pub fn infer(&self, g: &Graph) -> Result<Inference> {
        if g.feature_dim() != self.config.in_dim {
            return Err(Error::invalid(format!(
                "graph has {} feature dims, model expects {}",
                g.feature_dim(),
                self.config.in_dim
            )));
        }
        if g.num_classes() != self.config.num_classes {
            return Err(Error::invalid(format!(
                "graph declares {} classes, model expects {}",
                g.num_classes(),
                self.config.num_classes
            )));
        }
        let store = model::store_from_values(&self.params);
        let prepared = PreparedGraph::new(g, self.config.arch);
        let mut tape = crate::nn::Tape::new();
        let (z_id, logits_id) = model::forward(&self.config, &store, &mut tape, &prepared);
        let z = tape.value(z_id).clone();
        let logits = tape.value(logits_id).clone();
        let predictions = argmax_rows(&logits);
        Ok(Inference {
            z,
            logits,
            predictions,
        })
    }

    /// Node embeddings and predictions (the common case of [`infer`]).
    pub fn embed_and_predict(&self, g: &Graph) -> Result<(Tensor2, Vec<i64>)> {
        let inf = self.infer(g)?;
        Ok((inf.z, inf.predictions))
    }

    /// Content identity: hash of the canonical checkpoint serialization.
    pub fn model_id(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        hasher.update(to_checkpoint_string(self).as_bytes());
        let digest = hasher.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub(crate) fn argmax_rows(logits: &Tensor2) -> Vec<i64> {
    (0..logits.rows())
        .map(|r| {
            let row = logits.row(r);
            let mut best = 0usize;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best as i64
        })
        .collect()
}
