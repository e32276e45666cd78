//! Parameter layout and forward pass for each architecture.
//!
//! Layer contracts:
//! - GCN: `Â·X·W + b` with `Â` the normalized adjacency; bias added after
//!   aggregation.
//! - SAGE: `concat(X, neighbor-mean(X))·W`, no bias.
//! - GAT: single-head attention over each node's neighborhood (self
//!   included), logits `LeakyReLU(0.2)`, no bias.
//! - GIN: `MLP((1+ε)·x_u + Σ_{v∈N(u)} x_v)` with ε = 0 and a two-layer
//!   internal MLP whose hidden width equals the layer's output width.
//! - MLP: plain dense layers; the adjacency is never touched.
//!
//! ReLU sits between the two layers only — the second layer's output is the
//! embedding `Z` consumed raw by the classification head.

use std::collections::BTreeMap;

use super::adjacency::PreparedGraph;
use super::{Arch, ModelConfig};
use crate::nn::{NodeId, ParamStore, Tape, Tensor2};
use crate::rng::Rng;

pub const GAT_LEAKY_SLOPE: f64 = 0.2;

/// Creates all parameters for `cfg` in a fixed, documented order so the
/// initialization stream is reproducible: layer 1 then layer 2 then head;
/// weights before attention vectors before biases within a layer.
pub fn init_params(cfg: &ModelConfig, rng: &mut Rng) -> ParamStore {
    let mut store = ParamStore::new();
    let (d_in, d_hidden, d_embed, c) = (cfg.in_dim, cfg.hidden_dim, cfg.embed_dim, cfg.num_classes);
    match cfg.arch {
        Arch::Gcn => {
            store.insert_glorot("conv1.w", d_in, d_hidden, rng);
            store.insert_zeros("conv1.b", 1, d_hidden);
            store.insert_glorot("conv2.w", d_hidden, d_embed, rng);
            store.insert_zeros("conv2.b", 1, d_embed);
        }
        Arch::Sage => {
            store.insert_glorot("conv1.w", 2 * d_in, d_hidden, rng);
            store.insert_glorot("conv2.w", 2 * d_hidden, d_embed, rng);
        }
        Arch::Gat => {
            store.insert_glorot("conv1.w", d_in, d_hidden, rng);
            store.insert_glorot("conv1.a_src", d_hidden, 1, rng);
            store.insert_glorot("conv1.a_dst", d_hidden, 1, rng);
            store.insert_glorot("conv2.w", d_hidden, d_embed, rng);
            store.insert_glorot("conv2.a_src", d_embed, 1, rng);
            store.insert_glorot("conv2.a_dst", d_embed, 1, rng);
        }
        Arch::Gin => {
            store.insert_glorot("conv1.mlp1.w", d_in, d_hidden, rng);
            store.insert_zeros("conv1.mlp1.b", 1, d_hidden);
            store.insert_glorot("conv1.mlp2.w", d_hidden, d_hidden, rng);
            store.insert_zeros("conv1.mlp2.b", 1, d_hidden);
            store.insert_glorot("conv2.mlp1.w", d_hidden, d_embed, rng);
            store.insert_zeros("conv2.mlp1.b", 1, d_embed);
            store.insert_glorot("conv2.mlp2.w", d_embed, d_embed, rng);
            store.insert_zeros("conv2.mlp2.b", 1, d_embed);
        }
        Arch::Mlp => {
            store.insert_glorot("l1.w", d_in, d_hidden, rng);
            store.insert_zeros("l1.b", 1, d_hidden);
            store.insert_glorot("l2.w", d_hidden, d_embed, rng);
            store.insert_zeros("l2.b", 1, d_embed);
        }
    }
    store.insert_glorot("head.w", d_embed, c, rng);
    store.insert_zeros("head.b", 1, c);
    store
}

/// Rebuilds a parameter store from frozen values (fresh optimizer state).
pub fn store_from_values(values: &BTreeMap<String, Tensor2>) -> ParamStore {
    let mut store = ParamStore::new();
    for (name, value) in values {
        store.insert(name, value.clone());
    }
    store
}

/// Builds the forward graph on `tape`; returns the embedding node `Z` and the
/// head logits node.
pub fn forward(
    cfg: &ModelConfig,
    store: &ParamStore,
    tape: &mut Tape,
    g: &PreparedGraph,
) -> (NodeId, NodeId) {
    let x = tape.input(g.features.clone());
    let z = match cfg.arch {
        Arch::Gcn => {
            let sym = g.sym.as_ref().expect("GCN needs the normalized adjacency");
            let h = gcn_conv(tape, store, "conv1", x, sym);
            let h = tape.relu(h);
            gcn_conv(tape, store, "conv2", h, sym)
        }
        Arch::Sage => {
            let (mean, mean_t) = g.mean.as_ref().expect("SAGE needs the mean adjacency");
            let h = sage_conv(tape, store, "conv1", x, mean, mean_t);
            let h = tape.relu(h);
            sage_conv(tape, store, "conv2", h, mean, mean_t)
        }
        Arch::Gat => {
            let nbrs = g.nbrs.as_ref().expect("GAT needs attention neighborhoods");
            let h = gat_conv(tape, store, "conv1", x, nbrs);
            let h = tape.relu(h);
            gat_conv(tape, store, "conv2", h, nbrs)
        }
        Arch::Gin => {
            let agg = g.sum_self.as_ref().expect("GIN needs the sum aggregation");
            let h = gin_conv(tape, store, "conv1", x, agg);
            let h = tape.relu(h);
            gin_conv(tape, store, "conv2", h, agg)
        }
        Arch::Mlp => {
            let w1 = tape.param(store, "l1.w");
            let b1 = tape.param(store, "l1.b");
            let h = tape.dense(x, w1, Some(b1));
            let h = tape.relu(h);
            let w2 = tape.param(store, "l2.w");
            let b2 = tape.param(store, "l2.b");
            tape.dense(h, w2, Some(b2))
        }
    };
    let hw = tape.param(store, "head.w");
    let hb = tape.param(store, "head.b");
    let logits = tape.dense(z, hw, Some(hb));
    (z, logits)
}

fn gcn_conv(
    tape: &mut Tape,
    store: &ParamStore,
    prefix: &str,
    x: NodeId,
    sym: &std::sync::Arc<crate::nn::SparseMatrix>,
) -> NodeId {
    let w = tape.param(store, &format!("{prefix}.w"));
    let b = tape.param(store, &format!("{prefix}.b"));
    let xw = tape.dense(x, w, None);
    let agg = tape.spmm(sym, sym.clone(), xw);
    tape.add_row_bias(agg, b)
}

fn sage_conv(
    tape: &mut Tape,
    store: &ParamStore,
    prefix: &str,
    x: NodeId,
    mean: &std::sync::Arc<crate::nn::SparseMatrix>,
    mean_t: &std::sync::Arc<crate::nn::SparseMatrix>,
) -> NodeId {
    let mx = tape.spmm(mean, mean_t.clone(), x);
    let cat = tape.concat_cols(x, mx);
    let w = tape.param(store, &format!("{prefix}.w"));
    tape.dense(cat, w, None)
}

fn gat_conv(
    tape: &mut Tape,
    store: &ParamStore,
    prefix: &str,
    x: NodeId,
    nbrs: &std::sync::Arc<crate::nn::SparseMatrix>,
) -> NodeId {
    let w = tape.param(store, &format!("{prefix}.w"));
    let a_src = tape.param(store, &format!("{prefix}.a_src"));
    let a_dst = tape.param(store, &format!("{prefix}.a_dst"));
    let h = tape.dense(x, w, None);
    tape.attention(h, a_src, a_dst, nbrs.clone(), GAT_LEAKY_SLOPE)
}

fn gin_conv(
    tape: &mut Tape,
    store: &ParamStore,
    prefix: &str,
    x: NodeId,
    agg: &std::sync::Arc<crate::nn::SparseMatrix>,
) -> NodeId {
    let summed = tape.spmm(agg, agg.clone(), x);
    let w1 = tape.param(store, &format!("{prefix}.mlp1.w"));
    let b1 = tape.param(store, &format!("{prefix}.mlp1.b"));
    let h = tape.dense(summed, w1, Some(b1));
    let h = tape.relu(h);
    let w2 = tape.param(store, &format!("{prefix}.mlp2.w"));
    let b2 = tape.param(store, &format!("{prefix}.mlp2.b"));
    tape.dense(h, w2, Some(b2))
}
