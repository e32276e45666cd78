//! Full-graph training loop with early stopping.

use super::adjacency::PreparedGraph;
use super::{model, ModelConfig, TrainedModel};
use crate::error::{Error, Result};
use crate::graph::{Graph, Split, UNLABELED};
use crate::nn::{softmax_ce, Tape};
use crate::rng::Rng;

/// Per-epoch history of one training run.
///
/// `train_loss[e]` and `val_accuracy[e]` describe epoch `e+1`: the loss is
/// computed on the parameters entering the epoch, the accuracy on the
/// parameters leaving it. `best_epoch` is 0 when the initial snapshot was
/// never improved on.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
}

/// Trains a classifier on the train split, early-stopping on validation
/// accuracy (strict improvement, `cfg.patience` epochs of grace, ties keep
/// the earliest snapshot). Deterministic for a fixed config and seed.
pub fn train_classifier(
    g: &Graph,
    split: &Split,
    cfg: &ModelConfig,
) -> Result<(TrainedModel, TrainReport)> {
    cfg.validate()?;
    split.check_against(g)?;
    if split.train.is_empty() || split.val.is_empty() {
        return Err(Error::invalid("training requires nonempty train and val splits"));
    }
    if g.feature_dim() != cfg.in_dim {
        return Err(Error::invalid(format!(
            "graph has {} feature dims, config says {}",
            g.feature_dim(),
            cfg.in_dim
        )));
    }
    if g.num_classes() != cfg.num_classes {
        return Err(Error::invalid(format!(
            "graph declares {} classes, config says {}",
            g.num_classes(),
            cfg.num_classes
        )));
    }
    for &id in split.train.iter().chain(&split.val) {
        if g.labels()[id as usize] == UNLABELED {
            return Err(Error::invalid(format!(
                "node {id} is in train/val but has no label"
            )));
        }
    }

    let train_ids: Vec<usize> = split.train.iter().map(|&i| i as usize).collect();
    let val_ids: Vec<usize> = split.val.iter().map(|&i| i as usize).collect();
    let val_labels: Vec<i64> = val_ids.iter().map(|&i| g.labels()[i]).collect();
    let prepared = PreparedGraph::new(g, cfg.arch);

    let mut rng = Rng::new(cfg.seed);
    let mut store = model::init_params(cfg, &mut rng);

    let val_accuracy_of = |store: &crate::nn::ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let (_, logits) = model::forward(cfg, store, &mut tape, &prepared);
        let preds = super::argmax_rows(tape.value(logits));
        let val_preds: Vec<i64> = val_ids.iter().map(|&i| preds[i]).collect();
        crate::graph::accuracy(&val_preds, &val_labels)
    };

    let mut best_params = store.snapshot();
    let mut best_val = val_accuracy_of(&store)?;
    let mut best_epoch = 0usize;
    let mut epochs_without_improvement = 0usize;
    let mut report = TrainReport {
        train_loss: Vec::new(),
        val_accuracy: Vec::new(),
        best_epoch: 0,
        best_val_accuracy: best_val,
    };

    for epoch in 1..=cfg.max_epochs {
        let mut tape = Tape::new();
        let (_, logits) = model::forward(cfg, &store, &mut tape, &prepared);
        let (loss, seed) = softmax_ce(tape.value(logits), g.labels(), &train_ids);
        if !loss.is_finite() {
            return Err(Error::numeric(format!(
                "{} training diverged at epoch {epoch} (loss {loss})",
                cfg.arch
            )));
        }
        let grads = tape.backward(logits, seed);
        store.adam_step(&grads, cfg.lr, cfg.weight_decay);
        if !store.all_finite() {
            return Err(Error::numeric(format!(
                "{} parameters became non-finite at epoch {epoch}",
                cfg.arch
            )));
        }

        let val_acc = val_accuracy_of(&store)?;
        report.train_loss.push(loss);
        report.val_accuracy.push(val_acc);

        if val_acc > best_val {
            best_val = val_acc;
            best_params = store.snapshot();
            best_epoch = epoch;
            epochs_without_improvement = 0;
        } else {
            epochs_without_improvement += 1;
            if epochs_without_improvement >= cfg.patience {
                break;
            }
        }
    }

    report.best_epoch = best_epoch;
    report.best_val_accuracy = best_val;
    let epochs_run = report.train_loss.len();
    Ok((
        TrainedModel {
            config: cfg.clone(),
            params: best_params,
            source_graph_id: g.content_id(),
            val_accuracy: best_val,
            epochs_run,
        },
        report,
    ))
}
