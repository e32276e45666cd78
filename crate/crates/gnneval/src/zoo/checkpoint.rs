//! Classifier checkpoints: a plain-text format that round-trips exactly.
//!
//! ```text
//! #gnnckpt v1
//! arch=gcn in_dim=4 hidden_dim=128 ... val_accuracy=0.975 epochs_run=57
//! param conv1.w 4 128
//! <128 space-separated values>  (4 such lines)
//! param conv1.b 1 128
//! ...
//! ```
//!
//! Values are written with Rust's shortest-round-trip float formatting, so
//! `load(save(m))` reproduces every parameter bit for bit and the model's
//! content hash is stable across save/load cycles.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{model, Arch, ModelConfig, TrainedModel};
use crate::error::{Error, Result};
use crate::nn::Tensor2;
use crate::rng::Rng;

const HEADER: &str = "#gnnckpt v1";

/// Canonical serialization; hashing this string yields the model id.
pub fn to_checkpoint_string(m: &TrainedModel) -> String {
    let c = &m.config;
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    let _ = writeln!(
        out,
        "arch={} in_dim={} hidden_dim={} embed_dim={} num_classes={} seed={} lr={:?} \
         weight_decay={:?} max_epochs={} patience={} source_graph={} val_accuracy={:?} epochs_run={}",
        c.arch.tag(),
        c.in_dim,
        c.hidden_dim,
        c.embed_dim,
        c.num_classes,
        c.seed,
        c.lr,
        c.weight_decay,
        c.max_epochs,
        c.patience,
        m.source_graph_id,
        m.val_accuracy,
        m.epochs_run,
    );
    for (name, value) in &m.params {
        let _ = writeln!(out, "param {} {} {}", name, value.rows(), value.cols());
        for r in 0..value.rows() {
            let row = value.row(r);
            for (j, v) in row.iter().enumerate() {
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

pub fn save_model(m: &TrainedModel, path: &Path) -> Result<()> {
    crate::fsio::write_text(path, &to_checkpoint_string(m))
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_checkpoint(&text, &path.display().to_string())
}

pub fn parse_checkpoint(text: &str, path: &str) -> Result<TrainedModel> {
    let fail = |line: usize, msg: String| Error::parse(path, line, msg);
    let mut lines = text.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| fail(1, "empty checkpoint".into()))?;
    if header != HEADER {
        return Err(fail(1, format!("expected '{HEADER}', found '{header}'")));
    }

    let (_, config_line) = lines
        .next()
        .ok_or_else(|| fail(2, "missing config line".into()))?;
    let mut kv = BTreeMap::new();
    for field in config_line.split_ascii_whitespace() {
        let (k, v) = field
            .split_once('=')
            .ok_or_else(|| fail(2, format!("expected key=value, found '{field}'")))?;
        if kv.insert(k, v).is_some() {
            return Err(fail(2, format!("duplicate config key '{k}'")));
        }
    }
    let take = |k: &str| -> Result<&str> {
        kv.get(k)
            .copied()
            .ok_or_else(|| fail(2, format!("missing config key '{k}'")))
    };
    let usize_of = |k: &str| -> Result<usize> {
        take(k)?
            .parse()
            .map_err(|_| fail(2, format!("bad integer for '{k}'")))
    };
    let f64_of = |k: &str| -> Result<f64> {
        let v: f64 = take(k)?
            .parse()
            .map_err(|_| fail(2, format!("bad float for '{k}'")))?;
        if !v.is_finite() {
            return Err(fail(2, format!("non-finite value for '{k}'")));
        }
        Ok(v)
    };

    let config = ModelConfig {
        arch: Arch::parse(take("arch")?)?,
        in_dim: usize_of("in_dim")?,
        hidden_dim: usize_of("hidden_dim")?,
        embed_dim: usize_of("embed_dim")?,
        num_classes: usize_of("num_classes")?,
        seed: take("seed")?
            .parse()
            .map_err(|_| fail(2, "bad integer for 'seed'".into()))?,
        lr: f64_of("lr")?,
        weight_decay: f64_of("weight_decay")?,
        max_epochs: usize_of("max_epochs")?,
        patience: usize_of("patience")?,
    };
    config.validate()?;
    let source_graph_id = take("source_graph")?.to_string();
    let val_accuracy = f64_of("val_accuracy")?;
    let epochs_run = usize_of("epochs_run")?;
    let known = [
        "arch", "in_dim", "hidden_dim", "embed_dim", "num_classes", "seed", "lr",
        "weight_decay", "max_epochs", "patience", "source_graph", "val_accuracy", "epochs_run",
    ];
    for k in kv.keys() {
        if !known.contains(k) {
            return Err(fail(2, format!("unknown config key '{k}'")));
        }
    }

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

    // The stored tensors must exactly match the layout this architecture
    // creates, so a loaded model is always runnable.
    let expected = model::init_params(&config, &mut Rng::new(0)).snapshot();
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

    Ok(TrainedModel {
        config,
        params,
        source_graph_id,
        val_accuracy,
        epochs_run,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::sbm::{generate_sbm, SbmBlock, SbmConfig};
    use crate::graph::Split;
    use crate::zoo::train_classifier;

    fn tiny_model(arch: Arch) -> TrainedModel {
        let cfg = SbmConfig {
            blocks: vec![
                SbmBlock { size: 15, label: 0 },
                SbmBlock { size: 15, label: 1 },
            ],
            p_in: 0.3,
            p_out: 0.05,
            means: vec![vec![1.0, -1.0], vec![-1.0, 1.0]],
            noise: 0.5,
            num_classes: 2,
        };
        let mut rng = Rng::new(42);
        let g = generate_sbm(&cfg, &mut rng).unwrap();
        let split = Split::random(g.num_nodes(), 0.6, 0.2, &mut rng).unwrap();
        let mut mc = ModelConfig::new(arch, 2, 2, 0);
        mc.hidden_dim = 8;
        mc.embed_dim = 4;
        mc.max_epochs = 5;
        train_classifier(&g, &split, &mc).unwrap().0
    }

    #[test]
    fn save_load_round_trip_is_exact_for_every_arch() {
        let dir = tempfile::tempdir().unwrap();
        for arch in Arch::ALL {
            let m = tiny_model(arch);
            let path = dir.path().join(format!("{arch}.ckpt"));
            save_model(&m, &path).unwrap();
            let loaded = load_model(&path).unwrap();
            assert_eq!(m.params, loaded.params, "{arch}");
            assert_eq!(m.source_graph_id, loaded.source_graph_id);
            assert_eq!(m.epochs_run, loaded.epochs_run);
            assert_eq!(m.val_accuracy, loaded.val_accuracy);
            assert_eq!(m.model_id(), loaded.model_id(), "{arch}");
            // Saving the loaded model reproduces the file byte for byte.
            assert_eq!(to_checkpoint_string(&m), to_checkpoint_string(&loaded));
        }
    }

    #[test]
    fn shortest_float_formatting_survives_awkward_values() {
        let mut m = tiny_model(Arch::Mlp);
        // Plant values whose decimal expansions are maximally awkward.
        let w = m.params.get_mut("l1.w").unwrap();
        w.set(0, 0, 0.1 + 0.2);
        w.set(0, 1, f64::MIN_POSITIVE);
        w.set(1, 0, 1.0 / 3.0);
        w.set(1, 1, -1e-300);
        let text = to_checkpoint_string(&m);
        let back = parse_checkpoint(&text, "mem").unwrap();
        assert_eq!(m.params, back.params);
    }

    #[test]
    fn corrupt_files_are_rejected_with_line_numbers() {
        let m = tiny_model(Arch::Gcn);
        let good = to_checkpoint_string(&m);

        let bad_header = good.replacen("#gnnckpt v1", "#gnnckpt v2", 1);
        let err = parse_checkpoint(&bad_header, "x").unwrap_err().to_string();
        assert!(err.starts_with("x:1:"), "{err}");

        let bad_key = good.replacen("arch=gcn", "arch=gcn arch=gcn", 1);
        let err = parse_checkpoint(&bad_key, "x").unwrap_err().to_string();
        assert!(err.starts_with("x:2:"), "{err}");

        let bad_value = good.replacen("param conv1.w", "param conv1.w extra", 1);
        assert!(parse_checkpoint(&bad_value, "x").is_err());

        // Dropping the last line truncates the final parameter.
        let truncated = good[..good.trim_end().rfind('\n').unwrap() + 1].to_string();
        assert!(parse_checkpoint(&truncated, "x").is_err());
    }

    #[test]
    fn wrong_shape_for_architecture_is_rejected() {
        let m = tiny_model(Arch::Gcn);
        let text = to_checkpoint_string(&m);
        // Claim the checkpoint is a SAGE model: GCN's parameter set has the
        // wrong names for that layout.
        let lied = text.replacen("arch=gcn", "arch=sage", 1);
        assert!(parse_checkpoint(&lied, "x").is_err());
    }

    #[test]
    fn loaded_model_runs_inference_identically() {
        let cfg = SbmConfig {
            blocks: vec![
                SbmBlock { size: 10, label: 0 },
                SbmBlock { size: 10, label: 1 },
            ],
            p_in: 0.4,
            p_out: 0.1,
            means: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            noise: 0.3,
            num_classes: 2,
        };
        let mut rng = Rng::new(7);
        let g = generate_sbm(&cfg, &mut rng).unwrap();
        let m = tiny_model(Arch::Gat);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_model(&m, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        let a = m.infer(&g).unwrap();
        let b = loaded.infer(&g).unwrap();
        assert_eq!(a.z, b.z);
        assert_eq!(a.predictions, b.predictions);
    }
}
