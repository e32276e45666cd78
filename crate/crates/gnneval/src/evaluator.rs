//! The accuracy estimator: a graph regressor trained on labeled discrepancy
//! graphs.
//!
//! Architecture: GCN conv (N → hidden) → ReLU → GCN conv (hidden → hidden) →
//! mean pooling over nodes → dense (hidden → 1) → sigmoid. The sigmoid keeps
//! every estimate inside (0,1), the range accuracy labels live in, and mean
//! pooling makes estimates invariant to node reorderings.
//!
//! Training is full-batch: one forward per discrepancy graph per epoch, MSE
//! against the accuracy labels, Adam updates. A held-out fraction of the
//! graphs monitors validation MSE and the best snapshot is kept
//! (`val_fraction: 0` disables monitoring and returns the final parameters).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::discrepancy::DiscGraph;
use crate::error::{Error, Result};
use crate::nn::{sigmoid, sigmoid_mse, GradMap, NodeId, ParamStore, SparseMatrix, Tape, Tensor2};
use crate::rng::Rng;
use crate::zoo::normalized_adjacency;

#[derive(Debug, Clone)]
pub struct EvaluatorConfig {
    /// Width of every discrepancy-graph attribute matrix: the training
    /// graph's node count.
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Fraction of the discrepancy set held out to monitor validation MSE;
    /// 0 trains on everything and keeps the final parameters.
    pub val_fraction: f64,
}

impl EvaluatorConfig {
    pub fn new(input_dim: usize, seed: u64) -> Self {
        EvaluatorConfig {
            input_dim,
            hidden_dim: 128,
            lr: 1e-3,
            weight_decay: 0.0,
            epochs: 300,
            seed,
            val_fraction: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::invalid("estimator dimensions must be positive"));
        }
        if !(self.lr.is_finite() && self.lr > 0.0)
            || !(self.weight_decay.is_finite() && self.weight_decay >= 0.0)
        {
            return Err(Error::invalid(format!(
                "bad optimizer settings lr={} wd={}",
                self.lr, self.weight_decay
            )));
        }
        if !(0.0..0.5).contains(&self.val_fraction) {
            return Err(Error::invalid(format!(
                "val fraction {} must lie in [0, 0.5)",
                self.val_fraction
            )));
        }
        Ok(())
    }
}

/// A frozen estimator, bound to the (classifier, training graph) pair whose
/// discrepancy graphs it was trained on. Estimates for graphs bound to any
/// other pair are refused — their attribute columns would mean something else.
#[derive(Debug, Clone)]
pub struct TrainedEvaluator {
    pub config: EvaluatorConfig,
    pub params: BTreeMap<String, Tensor2>,
    pub model_id: String,
    pub train_graph_id: String,
}

/// Per-epoch training history.
#[derive(Debug, Clone)]
pub struct EvaluatorReport {
    pub train_mse: Vec<f64>,
    pub val_mse: Vec<f64>,
    pub best_epoch: usize,
    pub best_val_mse: f64,
}

fn init_params(cfg: &EvaluatorConfig, rng: &mut Rng) -> ParamStore {
    let mut store = ParamStore::new();
    store.insert_glorot("conv1.w", cfg.input_dim, cfg.hidden_dim, rng);
    store.insert_zeros("conv1.b", 1, cfg.hidden_dim);
    store.insert_glorot("conv2.w", cfg.hidden_dim, cfg.hidden_dim, rng);
    store.insert_zeros("conv2.b", 1, cfg.hidden_dim);
    store.insert_glorot("head.w", cfg.hidden_dim, 1, rng);
    store.insert_zeros("head.b", 1, 1);
    store
}

/// One discrepancy graph ready for repeated forward passes.
struct PreparedDisc {
    attrs: Tensor2,
    sym: Arc<SparseMatrix>,
    label: f64,
}

fn prepare(d: &DiscGraph, label_required: bool) -> Result<PreparedDisc> {
    let label = match (d.label, label_required) {
        (Some(y), _) => y,
        (None, false) => f64::NAN,
        (None, true) => {
            return Err(Error::invalid(format!(
                "discrepancy graph '{}' is unlabeled",
                d.provenance
            )))
        }
    };
    Ok(PreparedDisc {
        attrs: d.attrs.clone(),
        sym: Arc::new(normalized_adjacency(d.num_nodes(), &d.edges)),
        label,
    })
}

/// Builds the forward graph for one prepared disc; returns the raw
/// (pre-sigmoid) 1×1 output node.
fn forward(store: &ParamStore, tape: &mut Tape, d: &PreparedDisc) -> NodeId {
    let x = tape.input(d.attrs.clone());
    let w1 = tape.param(store, "conv1.w");
    let b1 = tape.param(store, "conv1.b");
    let xw = tape.dense(x, w1, None);
    let agg = tape.spmm(&d.sym, d.sym.clone(), xw);
    let h = tape.add_row_bias(agg, b1);
    let h = tape.relu(h);

    let w2 = tape.param(store, "conv2.w");
    let b2 = tape.param(store, "conv2.b");
    let hw = tape.dense(h, w2, None);
    let agg2 = tape.spmm(&d.sym, d.sym.clone(), hw);
    let h2 = tape.add_row_bias(agg2, b2);

    let pooled = tape.mean_pool(h2);
    let wh = tape.param(store, "head.w");
    let bh = tape.param(store, "head.b");
    tape.dense(pooled, wh, Some(bh))
}

fn raw_output(store: &ParamStore, d: &PreparedDisc) -> f64 {
    let mut tape = Tape::new();
    let out = forward(store, &mut tape, d);
    tape.value(out).get(0, 0)
}

fn mse_over(store: &ParamStore, ds: &[&PreparedDisc]) -> f64 {
    let total: f64 = ds
        .iter()
        .map(|d| {
            let p = sigmoid(raw_output(store, d));
            (p - d.label) * (p - d.label)
        })
        .sum();
    total / ds.len() as f64
}

fn merge_grads(into: &mut GradMap, from: GradMap) {
    for (name, g) in from {
        match into.get_mut(&name) {
            Some(acc) => acc.add_assign(&g),
            None => {
                into.insert(name, g);
            }
        }
    }
}

/// Trains the estimator on labeled discrepancy graphs. Deterministic given
/// the config; every graph must carry the same binding pair.
pub fn train_evaluator(
    discs: &[DiscGraph],
    cfg: &EvaluatorConfig,
) -> Result<(TrainedEvaluator, EvaluatorReport)> {
    cfg.validate()?;
    if discs.len() < 2 {
        return Err(Error::invalid("estimator training needs at least two discrepancy graphs"));
    }
    let (model_id, train_graph_id) = (&discs[0].model_id, &discs[0].train_graph_id);
    for d in discs {
        if d.attrs.cols() != cfg.input_dim {
            return Err(Error::invalid(format!(
                "discrepancy graph '{}' has width {}, config says {}",
                d.provenance,
                d.attrs.cols(),
                cfg.input_dim
            )));
        }
        if &d.model_id != model_id || &d.train_graph_id != train_graph_id {
            return Err(Error::invalid(format!(
                "discrepancy graph '{}' is bound to a different (model, graph) pair",
                d.provenance
            )));
        }
    }
    let prepared: Vec<PreparedDisc> = discs
        .iter()
        .map(|d| prepare(d, true))
        .collect::<Result<_>>()?;

    // Two independent streams: one for the held-out choice, one for init.
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let n_val = (cfg.val_fraction * prepared.len() as f64).round() as usize;
    if n_val > 0 {
        Rng::new(cfg.seed).derive(1).shuffle(&mut order);
    }
    let (val_idx, train_idx) = order.split_at(n_val);
    let train_set: Vec<&PreparedDisc> = train_idx.iter().map(|&i| &prepared[i]).collect();
    let val_set: Vec<&PreparedDisc> = val_idx.iter().map(|&i| &prepared[i]).collect();
    if train_set.is_empty() {
        return Err(Error::invalid("val fraction leaves no training graphs"));
    }

    let mut store = init_params(cfg, &mut Rng::new(cfg.seed).derive(0));
    let mut best_params = store.snapshot();
    let mut best_val = if val_set.is_empty() {
        f64::INFINITY
    } else {
        mse_over(&store, &val_set)
    };
    let mut best_epoch = 0usize;
    let mut report = EvaluatorReport {
        train_mse: Vec::new(),
        val_mse: Vec::new(),
        best_epoch: 0,
        best_val_mse: best_val,
    };

    let labels: Vec<f64> = train_set.iter().map(|d| d.label).collect();
    for epoch in 1..=cfg.epochs {
        // Forward every training graph on its own tape, join the raw outputs
        // into one column for the shared loss head, then push each scalar
        // seed back through its tape and sum the per-graph gradients.
        let mut tapes = Vec::with_capacity(train_set.len());
        let mut raws = Vec::with_capacity(train_set.len());
        for d in &train_set {
            let mut tape = Tape::new();
            let out = forward(&store, &mut tape, d);
            raws.push(tape.value(out).get(0, 0));
            tapes.push((tape, out));
        }
        let raw_col = Tensor2::from_vec(raws.len(), 1, raws);
        let (loss, seed_grads) = sigmoid_mse(&raw_col, &labels);
        if !loss.is_finite() {
            return Err(Error::numeric(format!(
                "estimator training diverged at epoch {epoch} (loss {loss})"
            )));
        }
        let mut grads = GradMap::new();
        for (i, (tape, out)) in tapes.iter().enumerate() {
            let seed = Tensor2::from_vec(1, 1, vec![seed_grads.get(i, 0)]);
            merge_grads(&mut grads, tape.backward(*out, seed));
        }
        store.adam_step(&grads, cfg.lr, cfg.weight_decay);
        if !store.all_finite() {
            return Err(Error::numeric(format!(
                "estimator parameters became non-finite at epoch {epoch}"
            )));
        }

        report.train_mse.push(loss);
        if !val_set.is_empty() {
            let v = mse_over(&store, &val_set);
            report.val_mse.push(v);
            if v < best_val {
                best_val = v;
                best_params = store.snapshot();
                best_epoch = epoch;
            }
        }
    }
    if val_set.is_empty() {
        best_params = store.snapshot();
        best_epoch = cfg.epochs;
        best_val = f64::NAN;
    }

    report.best_epoch = best_epoch;
    report.best_val_mse = best_val;
    Ok((
        TrainedEvaluator {
            config: cfg.clone(),
            params: best_params,
            model_id: model_id.clone(),
            train_graph_id: train_graph_id.clone(),
        },
        report,
    ))
}

/// Estimated accuracy for one discrepancy graph, strictly inside (0,1).
pub fn estimate_accuracy(ev: &TrainedEvaluator, d: &DiscGraph) -> Result<f64> {
    if d.attrs.cols() != ev.config.input_dim {
        return Err(Error::invalid(format!(
            "discrepancy graph '{}' has width {}, estimator expects {}",
            d.provenance,
            d.attrs.cols(),
            ev.config.input_dim
        )));
    }
    if d.model_id != ev.model_id || d.train_graph_id != ev.train_graph_id {
        return Err(Error::invalid(format!(
            "discrepancy graph '{}' is bound to ({}, {}), estimator to ({}, {})",
            d.provenance, d.model_id, d.train_graph_id, ev.model_id, ev.train_graph_id
        )));
    }
    let store = crate::zoo::store_from_values(&ev.params);
    let prepared = prepare(d, false)?;
    Ok(sigmoid(raw_output(&store, &prepared)))
}

const HEADER: &str = "#gnneval v1";

/// Canonical serialization: header, binding line, config line, parameter
/// blocks — the same block layout as classifier checkpoints.
pub fn to_evaluator_string(ev: &TrainedEvaluator) -> String {
    let c = &ev.config;
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    let _ = writeln!(
        out,
        "bound: {} {} {}",
        ev.model_id, ev.train_graph_id, c.input_dim
    );
    let _ = writeln!(
        out,
        "hidden_dim={} lr={:?} weight_decay={:?} epochs={} seed={} val_fraction={:?}",
        c.hidden_dim, c.lr, c.weight_decay, c.epochs, c.seed, c.val_fraction
    );
    for (name, value) in &ev.params {
        let _ = writeln!(out, "param {} {} {}", name, value.rows(), value.cols());
        for r in 0..value.rows() {
            for (j, v) in value.row(r).iter().enumerate() {
                if j > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{v:?}");
            }
            out.push('\n');
        }
    }
    out
}

pub fn save_evaluator(ev: &TrainedEvaluator, path: &Path) -> Result<()> {
    crate::fsio::write_text(path, &to_evaluator_string(ev))
}

pub fn load_evaluator(path: &Path) -> Result<TrainedEvaluator> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_evaluator(&text, &path.display().to_string())
}

pub fn parse_evaluator(text: &str, path: &str) -> Result<TrainedEvaluator> {
    let fail = |line: usize, msg: String| Error::parse(path, line, msg);
    let mut lines = text.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| fail(1, "empty checkpoint".into()))?;
    if header != HEADER {
        return Err(fail(1, format!("expected '{HEADER}', found '{header}'")));
    }

    let (_, bound) = lines
        .next()
        .ok_or_else(|| fail(2, "missing binding line".into()))?;
    let bound = bound
        .strip_prefix("bound: ")
        .ok_or_else(|| fail(2, "expected 'bound: <model-id> <train-graph-id> <N>'".into()))?;
    let parts: Vec<&str> = bound.split_ascii_whitespace().collect();
    if parts.len() != 3 {
        return Err(fail(2, "binding line needs model id, graph id, and width".into()));
    }
    let model_id = parts[0].to_string();
    let train_graph_id = parts[1].to_string();
    let input_dim: usize = parts[2]
        .parse()
        .map_err(|_| fail(2, "bad input width".into()))?;

    let (_, config_line) = lines
        .next()
        .ok_or_else(|| fail(3, "missing config line".into()))?;
    let mut kv = BTreeMap::new();
    for field in config_line.split_ascii_whitespace() {
        let (k, v) = field
            .split_once('=')
            .ok_or_else(|| fail(3, format!("expected key=value, found '{field}'")))?;
        if kv.insert(k, v).is_some() {
            return Err(fail(3, format!("duplicate config key '{k}'")));
        }
    }
    let take = |k: &str| -> Result<&str> {
        kv.get(k)
            .copied()
            .ok_or_else(|| fail(3, format!("missing config key '{k}'")))
    };
    let config = EvaluatorConfig {
        input_dim,
        hidden_dim: take("hidden_dim")?
            .parse()
            .map_err(|_| fail(3, "bad integer for 'hidden_dim'".into()))?,
        lr: take("lr")?
            .parse()
            .map_err(|_| fail(3, "bad float for 'lr'".into()))?,
        weight_decay: take("weight_decay")?
            .parse()
            .map_err(|_| fail(3, "bad float for 'weight_decay'".into()))?,
        epochs: take("epochs")?
            .parse()
            .map_err(|_| fail(3, "bad integer for 'epochs'".into()))?,
        seed: take("seed")?
            .parse()
            .map_err(|_| fail(3, "bad integer for 'seed'".into()))?,
        val_fraction: take("val_fraction")?
            .parse()
            .map_err(|_| fail(3, "bad float for 'val_fraction'".into()))?,
    };
    config.validate()?;

    let mut params: BTreeMap<String, Tensor2> = BTreeMap::new();
    while let Some((idx, line)) = lines.next() {
        let lineno = idx + 1;
        let parts: Vec<&str> = line.split_ascii_whitespace().collect();
        if parts.len() != 4 || parts[0] != "param" {
            return Err(fail(lineno, format!("expected 'param <name> <rows> <cols>', found '{line}'")));
        }
        let name = parts[1];
        let rows: usize = parts[2]
            .parse()
            .map_err(|_| fail(lineno, "bad row count".into()))?;
        let cols: usize = parts[3]
            .parse()
            .map_err(|_| fail(lineno, "bad column count".into()))?;
        if rows == 0 || cols == 0 {
            return Err(fail(lineno, format!("parameter '{name}' has an empty shape")));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let (ridx, row_line) = lines.next().ok_or_else(|| {
                fail(lineno, format!("parameter '{name}' truncated at row {r}"))
            })?;
            let rno = ridx + 1;
            let mut count = 0usize;
            for tok in row_line.split_ascii_whitespace() {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| fail(rno, format!("bad float '{tok}'")))?;
                if !v.is_finite() {
                    return Err(fail(rno, format!("non-finite value '{tok}'")));
                }
                data.push(v);
                count += 1;
            }
            if count != cols {
                return Err(fail(rno, format!("expected {cols} values, found {count}")));
            }
        }
        if params.insert(name.to_string(), Tensor2::from_vec(rows, cols, data)).is_some() {
            return Err(fail(lineno, format!("duplicate parameter '{name}'")));
        }
    }

    let expected = init_params(&config, &mut Rng::new(0)).snapshot();
    if params.len() != expected.len() {
        return Err(fail(
            0,
            format!("expected {} parameters, found {}", expected.len(), params.len()),
        ));
    }
    for (name, tpl) in &expected {
        match params.get(name) {
            None => return Err(fail(0, format!("missing parameter '{name}'"))),
            Some(t) if t.shape() != tpl.shape() => {
                return Err(fail(
                    0,
                    format!(
                        "parameter '{name}' has shape {:?}, expected {:?}",
                        t.shape(),
                        tpl.shape()
                    ),
                ))
            }
            _ => {}
        }
    }

    Ok(TrainedEvaluator {
        config,
        params,
        model_id,
        train_graph_id,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Synthetic labeled discrepancy graphs with controllable labels: random
    /// similarities in [-1,1], a sparse random graph, shared binding ids.
    fn synthetic_discs(k: usize, width: usize, seed: u64) -> Vec<DiscGraph> {
        let mut rng = Rng::new(seed);
        (0..k)
            .map(|i| {
                let m = 8 + rng.index(10);
                let attrs = Tensor2::from_vec(
                    m,
                    width,
                    (0..m * width).map(|_| rng.uniform(-1.0, 1.0)).collect(),
                );
                let mut edges = Vec::new();
                for a in 0..m as u32 {
                    for b in (a + 1)..m as u32 {
                        if rng.next_f64() < 0.2 {
                            edges.push((a, b));
                        }
                    }
                }
                DiscGraph {
                    attrs,
                    edges,
                    label: Some(0.1 + 0.8 * rng.next_f64()),
                    provenance: format!("meta:{i}"),
                    model_id: "m0123456789abcdef".into(),
                    train_graph_id: "g0123456789abcdef".into(),
                }
            })
            .collect()
    }

    fn quick_config(width: usize) -> EvaluatorConfig {
        let mut cfg = EvaluatorConfig::new(width, 0);
        cfg.hidden_dim = 32;
        cfg.lr = 0.01;
        cfg.epochs = 200;
        cfg.val_fraction = 0.0;
        cfg
    }

    #[test]
    fn constant_labels_are_fit_almost_exactly() {
        let mut discs = synthetic_discs(12, 20, 0);
        for d in &mut discs {
            d.label = Some(0.7);
        }
        let mut cfg = quick_config(20);
        cfg.epochs = 400;
        let (ev, report) = train_evaluator(&discs, &cfg).unwrap();
        assert!(
            *report.train_mse.last().unwrap() < 1e-4,
            "final train MSE {}",
            report.train_mse.last().unwrap()
        );
        for d in &discs {
            let est = estimate_accuracy(&ev, d).unwrap();
            assert!((est - 0.7).abs() < 0.05, "estimate {est}");
        }
    }

    #[test]
    fn overfits_fifty_distinct_labels() {
        let discs = synthetic_discs(50, 30, 1);
        let mut cfg = quick_config(30);
        cfg.epochs = 500;
        let (_, report) = train_evaluator(&discs, &cfg).unwrap();
        let final_mse = *report.train_mse.last().unwrap();
        assert!(final_mse < 1e-3, "train MSE {final_mse} after 500 epochs");
    }

    #[test]
    fn training_is_deterministic() {
        let discs = synthetic_discs(10, 15, 2);
        let mut cfg = quick_config(15);
        cfg.epochs = 30;
        cfg.val_fraction = 0.2;
        let (a, ra) = train_evaluator(&discs, &cfg).unwrap();
        let (b, rb) = train_evaluator(&discs, &cfg).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(ra.train_mse, rb.train_mse);
        assert_eq!(ra.best_epoch, rb.best_epoch);
    }

    #[test]
    fn best_snapshot_never_beats_initial_on_val() {
        let discs = synthetic_discs(20, 12, 3);
        let mut cfg = quick_config(12);
        cfg.epochs = 50;
        cfg.val_fraction = 0.2;
        let (_, report) = train_evaluator(&discs, &cfg).unwrap();
        // Monotone snapshot rule: recorded best val MSE is the running min.
        let min_seen = report
            .val_mse
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        assert!(report.best_val_mse <= min_seen + 1e-15);
    }

    #[test]
    fn estimates_stay_inside_unit_interval_and_are_pure() {
        let discs = synthetic_discs(8, 10, 4);
        let mut cfg = quick_config(10);
        cfg.epochs = 20;
        let (ev, _) = train_evaluator(&discs, &cfg).unwrap();
        for d in &discs {
            let a = estimate_accuracy(&ev, d).unwrap();
            let b = estimate_accuracy(&ev, d).unwrap();
            assert!(a > 0.0 && a < 1.0);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn permuting_nodes_does_not_move_the_estimate() {
        let discs = synthetic_discs(6, 14, 5);
        let mut cfg = quick_config(14);
        cfg.epochs = 40;
        let (ev, _) = train_evaluator(&discs, &cfg).unwrap();
        for (i, d) in discs.iter().enumerate() {
            let n = d.num_nodes();
            let mut perm: Vec<usize> = (0..n).collect();
            Rng::new(100 + i as u64).shuffle(&mut perm);
            let est = estimate_accuracy(&ev, d).unwrap();
            let est_p = estimate_accuracy(&ev, &d.permuted(&perm)).unwrap();
            assert!(
                (est - est_p).abs() < 1e-9,
                "graph {i}: {est} vs {est_p} after permutation"
            );
        }
    }

    #[test]
    fn binding_and_width_mismatches_are_refused() {
        let discs = synthetic_discs(6, 10, 6);
        let mut cfg = quick_config(10);
        cfg.epochs = 5;
        let (ev, _) = train_evaluator(&discs, &cfg).unwrap();

        let mut foreign = discs[0].clone();
        foreign.model_id = "other-model-id".into();
        assert!(estimate_accuracy(&ev, &foreign).is_err());

        let mut wrong_width = discs[0].clone();
        wrong_width.attrs = Tensor2::zeros(discs[0].num_nodes(), 11);
        assert!(estimate_accuracy(&ev, &wrong_width).is_err());

        // Mixed bindings in one training set are refused too.
        let mut mixed = discs.clone();
        mixed[3].train_graph_id = "other-graph".into();
        assert!(train_evaluator(&mixed, &cfg).is_err());

        // Unlabeled graph in the training set.
        let mut unlabeled = discs.clone();
        unlabeled[2].label = None;
        assert!(train_evaluator(&unlabeled, &cfg).is_err());
    }

    #[test]
    fn checkpoint_round_trip_reproduces_estimates_exactly() {
        let discs = synthetic_discs(8, 12, 7);
        let mut cfg = quick_config(12);
        cfg.epochs = 25;
        cfg.val_fraction = 0.2;
        let (ev, _) = train_evaluator(&discs, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("eval.ckpt");
        save_evaluator(&ev, &path).unwrap();
        let loaded = load_evaluator(&path).unwrap();
        assert_eq!(ev.params, loaded.params);
        assert_eq!(ev.model_id, loaded.model_id);
        assert_eq!(ev.train_graph_id, loaded.train_graph_id);
        assert_eq!(to_evaluator_string(&ev), to_evaluator_string(&loaded));
        for d in &discs {
            assert_eq!(
                estimate_accuracy(&ev, d).unwrap(),
                estimate_accuracy(&loaded, d).unwrap()
            );
        }
    }

    #[test]
    fn corrupt_checkpoints_are_rejected() {
        let discs = synthetic_discs(4, 8, 8);
        let mut cfg = quick_config(8);
        cfg.epochs = 3;
        let (ev, _) = train_evaluator(&discs, &cfg).unwrap();
        let good = to_evaluator_string(&ev);

        let err = parse_evaluator(&good.replacen("#gnneval v1", "#gnnckpt v1", 1), "x")
            .unwrap_err()
            .to_string();
        assert!(err.starts_with("x:1:"), "{err}");

        // Missing binding line.
        let no_bound: String = good
            .lines()
            .filter(|l| !l.starts_with("bound: "))
            .map(|l| format!("{l}\n"))
            .collect();
        assert!(parse_evaluator(&no_bound, "x").is_err());

        // Corrupted value with a located error.
        let bad = good.replacen("param conv1.b 1 32", "param conv1.b 1 99", 1);
        assert!(parse_evaluator(&bad, "x").is_err());
    }
}
