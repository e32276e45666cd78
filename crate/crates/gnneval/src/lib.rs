//! Accuracy estimation for node-classification GNNs on unseen, unlabeled graphs.
//!
//! The pipeline trains small node classifiers on an observed graph, freezes
//! them, and then estimates how well each frozen classifier will do on a new
//! graph that has no labels:
//!
//! 1. [`graph`] — graph container, text serialization, splits, and a
//!    stochastic-block-model generator for synthetic data.
//! 2. [`nn`] — a small dense/sparse f64 numeric core with tape-based reverse
//!    mode over a fixed layer set, Adam, and finite-difference gradient checks.
//! 3. [`zoo`] — the classifier architectures (GCN, GraphSAGE, GAT, GIN, MLP),
//!    their training loop, and checkpointing.
//! 4. [`augment`] — graph augmentation operators (edge drop, subgraph
//!    sampling, attribute masking, node mixup) used to synthesize a set of
//!    meta-graphs from the observed graph.
//! 5. [`discrepancy`] — turns each meta-graph into a discrepancy graph: node
//!    attributes are cosine similarities between the frozen model's embeddings
//!    of the meta-graph and of the training graph, labeled with the model's
//!    true accuracy on the meta-graph.
//! 6. [`evaluator`] — a two-layer GCN regressor trained on labeled
//!    discrepancy graphs; applied to an unlabeled target graph it outputs an
//!    accuracy estimate in (0, 1).
//! 7. [`baselines`] — confidence-threshold baselines (ATC variants with
//!    optional temperature calibration, fixed-threshold counting) and a
//!    distribution-distance regression baseline.
//! 8. [`cli`] — the `gnneval` command-line harness tying the stages together
//!    through on-disk artifacts.

pub mod augment;
pub mod baselines;
pub mod cli;
pub mod discrepancy;
pub mod error;
pub mod evaluator;
mod fsio;
pub mod graph;
pub mod nn;
pub mod rng;
pub mod zoo;

pub use error::{Error, Result};
