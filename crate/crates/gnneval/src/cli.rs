//! Command-line pipeline: generate synthetic benchmark graphs, train the
//! classifier zoo, synthesize discrepancy graphs, train the accuracy
//! estimator, and score everything against label-free baselines.
//!
//! Each subcommand runs one stage and communicates with the others purely
//! through plain-text artifacts in the output directory, so stages are
//! resumable and composable. Identical configurations produce byte-identical
//! result files: artifacts carry no timestamps and no absolute paths.
//!
//! Exit codes: 0 on success, 2 for configuration/input errors, 3 for numeric
//! failures (divergence, non-finite values).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::augment::{self, AugmentConfig};
use crate::baselines::{
    atc_estimate, atc_fit_threshold, autoeval_g_estimate, autoeval_g_fit, mmd, mmd_rbf,
    temperature_calibrate, threshold_estimate, AutoEvalGModel, MmdKernel, ScoreKind, ScoredLogits,
};
use crate::discrepancy::{load_disc_set, load_discgraph, save_disc_set, DiscContext};
use crate::error::{Error, Result};
use crate::evaluator::{estimate_accuracy, load_evaluator, save_evaluator, EvaluatorConfig};
use crate::graph::io::{load_graph, load_split, save_graph, save_split};
use crate::graph::sbm::{generate_sbm, SbmBlock, SbmConfig};
use crate::graph::{accuracy, Graph, Split};
use crate::rng::Rng;
use crate::zoo::{load_model, save_model, train_classifier, Arch, ModelConfig, TrainedModel};

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

/// Every tunable of the pipeline, populated from a flat `key = value` config
/// file plus command-line overrides. All defaults are materialized into the
/// run manifest so artifacts are self-describing.
#[derive(Debug, Clone)]
pub struct RunConfig {
    // Paths.
    pub source_graph: Option<PathBuf>,
    pub split: Option<PathBuf>,
    pub out: PathBuf,
    // Global.
    pub seed: u64,
    pub threads: usize,
    // Synthetic benchmark generation.
    pub sbm_nodes: usize,
    pub sbm_classes: usize,
    pub sbm_feature_dim: usize,
    pub sbm_p_in: f64,
    pub sbm_p_out: f64,
    pub sbm_mean_scale: f64,
    pub sbm_noise: f64,
    pub split_train: f64,
    pub split_val: f64,
    // Classifier zoo.
    pub archs: Vec<Arch>,
    pub seeds: Vec<u64>,
    pub hidden_dim: usize,
    pub embed_dim: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub lr: Option<f64>,
    pub weight_decay: Option<f64>,
    // Meta-graph augmentation.
    pub k: usize,
    pub chain_length: usize,
    pub augment_weights: [f64; 4],
    pub p_lo: [f64; 4],
    pub p_hi: [f64; 4],
    // Accuracy estimator.
    pub eval_hidden_dim: usize,
    pub eval_lr: f64,
    pub eval_weight_decay: f64,
    pub eval_epochs: usize,
    pub eval_val_fraction: f64,
    // Baselines.
    pub atc_scores: Vec<ScoreKind>,
    pub atc_calibrated: bool,
    pub taus: Vec<f64>,
    pub autoeval: bool,
    pub mmd_kernel: MmdKernel,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            source_graph: None,
            split: None,
            out: PathBuf::from("runs"),
            seed: 0,
            threads: 1,
            sbm_nodes: 600,
            sbm_classes: 3,
            sbm_feature_dim: 8,
            sbm_p_in: 0.05,
            sbm_p_out: 0.005,
            sbm_mean_scale: 1.0,
            sbm_noise: 1.0,
            split_train: 0.6,
            split_val: 0.2,
            archs: vec![Arch::Gcn],
            seeds: vec![0, 1, 2, 3, 4],
            hidden_dim: 128,
            embed_dim: 16,
            max_epochs: 200,
            patience: 20,
            lr: None,
            weight_decay: None,
            k: 400,
            chain_length: 1,
            augment_weights: [1.0; 4],
            p_lo: [0.1; 4],
            p_hi: [0.9; 4],
            eval_hidden_dim: 128,
            eval_lr: 1e-3,
            eval_weight_decay: 0.0,
            eval_epochs: 300,
            eval_val_fraction: 0.1,
            atc_scores: vec![ScoreKind::MaxConfidence, ScoreKind::NegEntropy],
            atc_calibrated: true,
            taus: vec![0.7, 0.8, 0.9],
            autoeval: true,
            mmd_kernel: MmdKernel::Linear,
        }
    }
}

fn parse_scalar<T: std::str::FromStr>(path: &Path, line: usize, key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::parse(path, line, format!("bad value '{v}' for {key}")))
}

fn parse_bool(path: &Path, line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::parse(path, line, format!("{key} must be true or false, got '{v}'"))),
    }
}

/// Parses `1` or `4` comma-separated floats into a per-operator quadruple
/// (a single value broadcasts to all four operators).
fn parse_quad(path: &Path, line: usize, key: &str, v: &str) -> Result<[f64; 4]> {
    let parts: Vec<f64> = v
        .split(',')
        .map(|p| parse_scalar(path, line, key, p.trim()))
        .collect::<Result<_>>()?;
    match parts.len() {
        1 => Ok([parts[0]; 4]),
        4 => Ok([parts[0], parts[1], parts[2], parts[3]]),
        n => Err(Error::parse(path, line, format!("{key} needs 1 or 4 values, got {n}"))),
    }
}

/// Parses a flat `key = value` config file. Empty lines and `#` comments are
/// skipped; unknown or duplicated keys are errors.
pub fn parse_run_config(text: &str, path: &Path) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut seen = std::collections::BTreeSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let stripped = raw.trim();
        if stripped.is_empty() || stripped.starts_with('#') {
            continue;
        }
        let (key, value) = stripped
            .split_once('=')
            .ok_or_else(|| Error::parse(path, line, format!("expected key = value, got '{stripped}'")))?;
        let (key, v) = (key.trim(), value.trim());
        if !seen.insert(key.to_string()) {
            return Err(Error::parse(path, line, format!("duplicate key '{key}'")));
        }
        match key {
            "source_graph" => cfg.source_graph = Some(PathBuf::from(v)),
            "split" => cfg.split = Some(PathBuf::from(v)),
            "out" => cfg.out = PathBuf::from(v),
            "seed" => cfg.seed = parse_scalar(path, line, key, v)?,
            "threads" => cfg.threads = parse_scalar(path, line, key, v)?,
            "sbm_nodes" => cfg.sbm_nodes = parse_scalar(path, line, key, v)?,
            "sbm_classes" => cfg.sbm_classes = parse_scalar(path, line, key, v)?,
            "sbm_feature_dim" => cfg.sbm_feature_dim = parse_scalar(path, line, key, v)?,
            "sbm_p_in" => cfg.sbm_p_in = parse_scalar(path, line, key, v)?,
            "sbm_p_out" => cfg.sbm_p_out = parse_scalar(path, line, key, v)?,
            "sbm_mean_scale" => cfg.sbm_mean_scale = parse_scalar(path, line, key, v)?,
            "sbm_noise" => cfg.sbm_noise = parse_scalar(path, line, key, v)?,
            "split_train" => cfg.split_train = parse_scalar(path, line, key, v)?,
            "split_val" => cfg.split_val = parse_scalar(path, line, key, v)?,
            "archs" => {
                cfg.archs = v
                    .split(',')
                    .map(|a| Arch::parse(a.trim()).map_err(|e| Error::parse(path, line, e.to_string())))
                    .collect::<Result<_>>()?;
            }
            "seeds" => {
                cfg.seeds = v
                    .split(',')
                    .map(|s| parse_scalar(path, line, key, s.trim()))
                    .collect::<Result<_>>()?;
            }
            "hidden_dim" => cfg.hidden_dim = parse_scalar(path, line, key, v)?,
            "embed_dim" => cfg.embed_dim = parse_scalar(path, line, key, v)?,
            "max_epochs" => cfg.max_epochs = parse_scalar(path, line, key, v)?,
            "patience" => cfg.patience = parse_scalar(path, line, key, v)?,
            "lr" => cfg.lr = Some(parse_scalar(path, line, key, v)?),
            "weight_decay" => cfg.weight_decay = Some(parse_scalar(path, line, key, v)?),
            "k" => cfg.k = parse_scalar(path, line, key, v)?,
            "chain_length" => cfg.chain_length = parse_scalar(path, line, key, v)?,
            "augment_weights" => cfg.augment_weights = parse_quad(path, line, key, v)?,
            "p_lo" => cfg.p_lo = parse_quad(path, line, key, v)?,
            "p_hi" => cfg.p_hi = parse_quad(path, line, key, v)?,
            "eval_hidden_dim" => cfg.eval_hidden_dim = parse_scalar(path, line, key, v)?,
            "eval_lr" => cfg.eval_lr = parse_scalar(path, line, key, v)?,
            "eval_weight_decay" => cfg.eval_weight_decay = parse_scalar(path, line, key, v)?,
            "eval_epochs" => cfg.eval_epochs = parse_scalar(path, line, key, v)?,
            "eval_val_fraction" => cfg.eval_val_fraction = parse_scalar(path, line, key, v)?,
            "atc_scores" => {
                cfg.atc_scores = v
                    .split(',')
                    .map(|s| ScoreKind::parse(s.trim()).map_err(|e| Error::parse(path, line, e.to_string())))
                    .collect::<Result<_>>()?;
            }
            "atc_calibrated" => cfg.atc_calibrated = parse_bool(path, line, key, v)?,
            "taus" => {
                cfg.taus = v
                    .split(',')
                    .map(|s| parse_scalar(path, line, key, s.trim()))
                    .collect::<Result<_>>()?;
            }
            "autoeval" => cfg.autoeval = parse_bool(path, line, key, v)?,
            "mmd_kernel" => {
                cfg.mmd_kernel = match v {
                    "linear" => MmdKernel::Linear,
                    "rbf" => MmdKernel::Rbf,
                    _ => return Err(Error::parse(path, line, format!("unknown mmd_kernel '{v}'"))),
                };
            }
            _ => return Err(Error::parse(path, line, format!("unknown config key '{key}'"))),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.threads == 0 {
            return Err(Error::invalid("threads must be at least 1"));
        }
        if self.seeds.is_empty() || self.archs.is_empty() {
            return Err(Error::invalid("need at least one architecture and one seed"));
        }
        if self.taus.iter().any(|&t| !(t.is_finite() && 0.0 < t && t < 1.0)) {
            return Err(Error::invalid("every tau must lie in (0,1)"));
        }
        Ok(())
    }

    fn require_source(&self) -> Result<&Path> {
        let p = self
            .source_graph
            .as_deref()
            .ok_or_else(|| Error::invalid("config key 'source_graph' is required for this command"))?;
        if !p.exists() {
            return Err(Error::invalid(format!("source graph '{}' does not exist", p.display())));
        }
        Ok(p)
    }

    fn require_split(&self) -> Result<&Path> {
        let p = self
            .split
            .as_deref()
            .ok_or_else(|| Error::invalid("config key 'split' is required for this command"))?;
        if !p.exists() {
            return Err(Error::invalid(format!("split file '{}' does not exist", p.display())));
        }
        Ok(p)
    }

    fn augment_config(&self) -> AugmentConfig {
        let mut a = AugmentConfig::new(self.k, self.seed);
        a.weights = self.augment_weights;
        a.p_ranges = [
            (self.p_lo[0], self.p_hi[0]),
            (self.p_lo[1], self.p_hi[1]),
            (self.p_lo[2], self.p_hi[2]),
            (self.p_lo[3], self.p_hi[3]),
        ];
        a.chain_length = self.chain_length;
        a
    }

    fn model_config(&self, arch: Arch, in_dim: usize, classes: usize, seed: u64) -> ModelConfig {
        let mut m = ModelConfig::new(arch, in_dim, classes, seed);
        m.hidden_dim = self.hidden_dim;
        m.embed_dim = self.embed_dim;
        m.max_epochs = self.max_epochs;
        m.patience = self.patience;
        if let Some(lr) = self.lr {
            m.lr = lr;
        }
        if let Some(wd) = self.weight_decay {
            m.weight_decay = wd;
        }
        m
    }

    fn evaluator_config(&self, input_dim: usize) -> EvaluatorConfig {
        let mut e = EvaluatorConfig::new(input_dim, self.seed);
        e.hidden_dim = self.eval_hidden_dim;
        e.lr = self.eval_lr;
        e.weight_decay = self.eval_weight_decay;
        e.epochs = self.eval_epochs;
        e.val_fraction = self.eval_val_fraction;
        e
    }
}

/// Serializes the fully materialized configuration (defaults included) so
/// every run directory is self-describing.
pub fn manifest_string(cfg: &RunConfig) -> String {
    let path_or = |p: &Option<PathBuf>| -> String {
        p.as_ref().map_or("unset".to_string(), |p| p.display().to_string())
    };
    let join_f64 = |xs: &[f64]| xs.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",");
    let mut s = String::from("#run v1\n");
    let _ = writeln!(s, "source_graph = {}", path_or(&cfg.source_graph));
    let _ = writeln!(s, "split = {}", path_or(&cfg.split));
    let _ = writeln!(s, "out = {}", cfg.out.display());
    let _ = writeln!(s, "seed = {}", cfg.seed);
    let _ = writeln!(s, "threads = {}", cfg.threads);
    let _ = writeln!(s, "sbm_nodes = {}", cfg.sbm_nodes);
    let _ = writeln!(s, "sbm_classes = {}", cfg.sbm_classes);
    let _ = writeln!(s, "sbm_feature_dim = {}", cfg.sbm_feature_dim);
    let _ = writeln!(s, "sbm_p_in = {:?}", cfg.sbm_p_in);
    let _ = writeln!(s, "sbm_p_out = {:?}", cfg.sbm_p_out);
    let _ = writeln!(s, "sbm_mean_scale = {:?}", cfg.sbm_mean_scale);
    let _ = writeln!(s, "sbm_noise = {:?}", cfg.sbm_noise);
    let _ = writeln!(s, "split_train = {:?}", cfg.split_train);
    let _ = writeln!(s, "split_val = {:?}", cfg.split_val);
    let _ = writeln!(s, "archs = {}", cfg.archs.iter().map(|a| a.tag()).collect::<Vec<_>>().join(","));
    let _ = writeln!(s, "seeds = {}", cfg.seeds.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","));
    let _ = writeln!(s, "hidden_dim = {}", cfg.hidden_dim);
    let _ = writeln!(s, "embed_dim = {}", cfg.embed_dim);
    let _ = writeln!(s, "max_epochs = {}", cfg.max_epochs);
    let _ = writeln!(s, "patience = {}", cfg.patience);
    let _ = writeln!(s, "lr = {}", cfg.lr.map_or("arch-default".to_string(), |v| format!("{v:?}")));
    let _ = writeln!(
        s,
        "weight_decay = {}",
        cfg.weight_decay.map_or("arch-default".to_string(), |v| format!("{v:?}"))
    );
    let _ = writeln!(s, "k = {}", cfg.k);
    let _ = writeln!(s, "chain_length = {}", cfg.chain_length);
    let _ = writeln!(s, "augment_weights = {}", join_f64(&cfg.augment_weights));
    let _ = writeln!(s, "p_lo = {}", join_f64(&cfg.p_lo));
    let _ = writeln!(s, "p_hi = {}", join_f64(&cfg.p_hi));
    let _ = writeln!(s, "eval_hidden_dim = {}", cfg.eval_hidden_dim);
    let _ = writeln!(s, "eval_lr = {:?}", cfg.eval_lr);
    let _ = writeln!(s, "eval_weight_decay = {:?}", cfg.eval_weight_decay);
    let _ = writeln!(s, "eval_epochs = {}", cfg.eval_epochs);
    let _ = writeln!(s, "eval_val_fraction = {:?}", cfg.eval_val_fraction);
    let _ = writeln!(s, "atc_scores = {}", cfg.atc_scores.iter().map(|k| k.tag()).collect::<Vec<_>>().join(","));
    let _ = writeln!(s, "atc_calibrated = {}", cfg.atc_calibrated);
    let _ = writeln!(s, "taus = {}", join_f64(&cfg.taus));
    let _ = writeln!(s, "autoeval = {}", cfg.autoeval);
    let _ = writeln!(s, "mmd_kernel = {}", cfg.mmd_kernel.tag());
    s
}

// ---------------------------------------------------------------------------
// Small filesystem helpers
// ---------------------------------------------------------------------------

fn fs_read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn fs_write(path: &Path, content: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, content).map_err(|e| Error::io(path, e))
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "unnamed".to_string(), |s| s.to_string_lossy().into_owned())
}

fn write_manifest(cfg: &RunConfig) -> Result<()> {
    fs_write(&cfg.out.join("run_manifest.txt"), &manifest_string(cfg))
}

// ---------------------------------------------------------------------------
// Result rows and MAE aggregation
// ---------------------------------------------------------------------------

pub const RESULTS_HEADER: &str = "method,arch,seed,source,target,estimate,truth,abs_error";

/// One estimate: which method produced it, for which frozen classifier
/// (architecture + training seed), from which source onto which target.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: String,
    pub arch: String,
    pub seed: u64,
    pub source: String,
    pub target: String,
    pub estimate: f64,
    pub truth: Option<f64>,
}

impl ResultRow {
    pub fn csv_line(&self) -> String {
        let (truth, abs_err) = match self.truth {
            Some(t) => (format!("{t:?}"), format!("{:?}", (self.estimate - t).abs())),
            None => ("NA".to_string(), "NA".to_string()),
        };
        format!(
            "{},{},{},{},{},{:?},{},{}",
            self.method, self.arch, self.seed, self.source, self.target, self.estimate, truth, abs_err
        )
    }
}

/// Merges rows into `<out>/results.csv`, creating it (with header) on first
/// use. A row with the same (method, arch, seed, source, target) key replaces
/// the stored one in place, so re-running a stage rewrites its own rows
/// instead of appending duplicates.
pub fn append_results(out: &Path, rows: &[ResultRow]) -> Result<()> {
    let path = out.join("results.csv");
    let mut stored =
        if path.exists() { parse_results(&fs_read(&path)?, &path)? } else { Vec::new() };
    for r in rows {
        let key = (&r.method, &r.arch, r.seed, &r.source, &r.target);
        match stored
            .iter_mut()
            .find(|s| (&s.method, &s.arch, s.seed, &s.source, &s.target) == key)
        {
            Some(slot) => *slot = r.clone(),
            None => stored.push(r.clone()),
        }
    }
    let mut text = format!("{RESULTS_HEADER}\n");
    for r in &stored {
        text.push_str(&r.csv_line());
        text.push('\n');
    }
    fs_write(&path, &text)
}

/// Parses a results CSV produced by [`append_results`].
pub fn parse_results(text: &str, path: &Path) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == RESULTS_HEADER => {}
        _ => return Err(Error::parse(path, 1, format!("expected header '{RESULTS_HEADER}'"))),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(Error::parse(path, idx + 1, format!("expected 8 fields, got {}", f.len())));
        }
        let estimate: f64 = f[5]
            .parse()
            .map_err(|_| Error::parse(path, idx + 1, format!("bad estimate '{}'", f[5])))?;
        let truth = if f[6] == "NA" {
            None
        } else {
            Some(
                f[6].parse()
                    .map_err(|_| Error::parse(path, idx + 1, format!("bad truth '{}'", f[6])))?,
            )
        };
        let seed: u64 = f[2]
            .parse()
            .map_err(|_| Error::parse(path, idx + 1, format!("bad seed '{}'", f[2])))?;
        rows.push(ResultRow {
            method: f[0].to_string(),
            arch: f[1].to_string(),
            seed,
            source: f[3].to_string(),
            target: f[4].to_string(),
            estimate,
            truth,
        });
    }
    Ok(rows)
}

/// Mean absolute error per (method, architecture), in percentage points.
#[derive(Debug, Clone)]
pub struct MaeTable {
    pub archs: Vec<String>,
    /// `(method, per-arch MAE, average over the arch cells)`; a cell is
    /// `None` when any contributing row lacks ground truth.
    pub rows: Vec<(String, Vec<Option<f64>>, Option<f64>)>,
}

fn method_rank(m: &str) -> (u8, String) {
    let class = match m {
        "gnneval" => 0,
        _ if m.starts_with("atc-") => 1,
        _ if m.starts_with("thr-") => 2,
        "autoeval-g" => 3,
        _ => 4,
    };
    (class, m.to_string())
}

fn arch_rank(a: &str) -> (usize, String) {
    let pos = Arch::ALL.iter().position(|x| x.tag() == a).unwrap_or(Arch::ALL.len());
    (pos, a.to_string())
}

/// Aggregates result rows into the MAE table: each cell averages
/// `|estimate − truth| · 100` over every row of that (method, arch) pair;
/// cells touching any truth-less row are `None`.
pub fn aggregate_mae(rows: &[ResultRow]) -> MaeTable {
    let mut archs: Vec<String> = rows.iter().map(|r| r.arch.clone()).collect();
    archs.sort_by_key(|a| arch_rank(a));
    archs.dedup();
    let mut methods: Vec<String> = rows.iter().map(|r| r.method.clone()).collect();
    methods.sort_by_key(|m| method_rank(m));
    methods.dedup();

    let mut table = Vec::new();
    for m in &methods {
        let mut cells = Vec::new();
        for a in &archs {
            let group: Vec<&ResultRow> =
                rows.iter().filter(|r| &r.method == m && &r.arch == a).collect();
            let cell = if group.is_empty() || group.iter().any(|r| r.truth.is_none()) {
                None
            } else {
                let total: f64 = group
                    .iter()
                    .map(|r| (r.estimate - r.truth.unwrap()).abs() * 100.0)
                    .sum();
                Some(total / group.len() as f64)
            };
            cells.push(cell);
        }
        let present: Vec<f64> = cells.iter().flatten().copied().collect();
        let avg = if present.is_empty() {
            None
        } else {
            Some(present.iter().sum::<f64>() / present.len() as f64)
        };
        table.push((m.clone(), cells, avg));
    }
    MaeTable { archs, rows: table }
}

fn cell_text(c: &Option<f64>) -> String {
    c.map_or("NA".to_string(), |v| format!("{v:.2}"))
}

/// Fixed-width text table (percentage points, two decimals).
pub fn render_mae_txt(t: &MaeTable) -> String {
    let mut headers = vec!["method".to_string()];
    headers.extend(t.archs.iter().cloned());
    headers.push("Avg.".to_string());
    let mut grid: Vec<Vec<String>> = vec![headers];
    for (m, cells, avg) in &t.rows {
        let mut row = vec![m.clone()];
        row.extend(cells.iter().map(cell_text));
        row.push(cell_text(avg));
        grid.push(row);
    }
    let cols = grid[0].len();
    let widths: Vec<usize> = (0..cols)
        .map(|c| grid.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut s = String::new();
    for row in &grid {
        let mut parts = Vec::new();
        for (c, v) in row.iter().enumerate() {
            if c == 0 {
                parts.push(format!("{v:<width$}", width = widths[0]));
            } else {
                parts.push(format!("{v:>width$}", width = widths[c]));
            }
        }
        s.push_str(parts.join("  ").trim_end());
        s.push('\n');
    }
    s
}

/// Machine-readable variant of the same table.
pub fn render_mae_csv(t: &MaeTable) -> String {
    let mut s = String::from("method");
    for a in &t.archs {
        let _ = write!(s, ",{a}");
    }
    s.push_str(",Avg.\n");
    for (m, cells, avg) in &t.rows {
        let _ = write!(s, "{m}");
        for c in cells {
            let _ = write!(s, ",{}", cell_text(c));
        }
        let _ = writeln!(s, ",{}", cell_text(avg));
    }
    s
}

// ---------------------------------------------------------------------------
// Subcommand implementations
// ---------------------------------------------------------------------------

fn class_means(classes: usize, dim: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..classes)
        .map(|c| (0..dim).map(|j| if j % classes == c { scale } else { 0.0 }).collect())
        .collect()
}

fn sbm_config(cfg: &RunConfig) -> SbmConfig {
    let base = cfg.sbm_nodes / cfg.sbm_classes;
    let extra = cfg.sbm_nodes % cfg.sbm_classes;
    SbmConfig {
        blocks: (0..cfg.sbm_classes)
            .map(|c| SbmBlock { size: base + usize::from(c < extra), label: c })
            .collect(),
        p_in: cfg.sbm_p_in,
        p_out: cfg.sbm_p_out,
        means: class_means(cfg.sbm_classes, cfg.sbm_feature_dim, cfg.sbm_mean_scale),
        noise: cfg.sbm_noise,
        num_classes: cfg.sbm_classes,
    }
}

/// Generates a synthetic benchmark graph plus a random split and writes both
/// into the output directory as `graph.gtxt` / `split.txt`.
pub fn cmd_gen_sbm(cfg: &RunConfig) -> Result<()> {
    write_manifest(cfg)?;
    let mut rng = Rng::new(cfg.seed);
    let g = generate_sbm(&sbm_config(cfg), &mut rng)?;
    let split = Split::random(g.num_nodes(), cfg.split_train, cfg.split_val, &mut rng)?;
    let graph_path = cfg.out.join("graph.gtxt");
    let split_path = cfg.out.join("split.txt");
    save_graph(&g, &graph_path)?;
    save_split(&split, &split_path)?;
    println!(
        "generated graph {} ({} nodes, {} edges, {} classes) -> {}",
        g.content_id(),
        g.num_nodes(),
        g.num_edges(),
        g.num_classes(),
        graph_path.display()
    );
    println!(
        "split train/val/test = {}/{}/{} -> {}",
        split.train.len(),
        split.val.len(),
        split.test.len(),
        split_path.display()
    );
    Ok(())
}

/// Trains one classifier per (architecture, seed) cell. A failing cell is
/// recorded in the manifest and does not abort the others; the command only
/// errors if every cell fails.
pub fn cmd_train_gnn(cfg: &RunConfig) -> Result<()> {
    write_manifest(cfg)?;
    let g = load_graph(cfg.require_source()?)?;
    let split = load_split(cfg.require_split()?)?;
    split.check_against(&g)?;

    let cells: Vec<(Arch, u64)> = cfg
        .archs
        .iter()
        .flat_map(|&a| cfg.seeds.iter().map(move |&s| (a, s)))
        .collect();
    let outcomes: Vec<_> = cells
        .par_iter()
        .map(|&(arch, seed)| {
            let mcfg = cfg.model_config(arch, g.feature_dim(), g.num_classes(), seed);
            (arch, seed, train_classifier(&g, &split, &mcfg))
        })
        .collect();

    let dir = cfg.out.join("checkpoints");
    let mut manifest = String::from("#zoo v1\n");
    let mut first_error = None;
    let mut succeeded = 0usize;
    for (arch, seed, outcome) in outcomes {
        match outcome {
            Ok((model, report)) => {
                let name = format!("{}_s{}.ckpt", arch.tag(), seed);
                save_model(&model, &dir.join(&name))?;
                let _ = writeln!(
                    manifest,
                    "{} {} ok val_accuracy={:?} epochs_run={} model={} file={}",
                    arch.tag(),
                    seed,
                    report.best_val_accuracy,
                    model.epochs_run,
                    model.model_id(),
                    name
                );
                println!(
                    "trained {} seed {}: val accuracy {:.4} in {} epochs",
                    arch.tag(),
                    seed,
                    report.best_val_accuracy,
                    model.epochs_run
                );
                succeeded += 1;
            }
            Err(e) => {
                let _ = writeln!(manifest, "{} {} error {}", arch.tag(), seed, e);
                eprintln!("cell {} seed {} failed: {e}", arch.tag(), seed);
                if first_error.is_none() {
                    first_error = Some(e);
                }
            }
        }
    }
    fs_write(&dir.join("zoo_manifest.txt"), &manifest)?;
    if succeeded == 0 {
        return Err(first_error.unwrap_or_else(|| Error::invalid("no cells to train")));
    }
    Ok(())
}

/// Builds the discrepancy-graph training set for one frozen classifier and
/// writes it (plus the augmentation provenance manifest) under
/// `<out>/discgraphs/<checkpoint-stem>/`.
pub fn cmd_build_discgraphs(cfg: &RunConfig, checkpoint: &Path) -> Result<()> {
    write_manifest(cfg)?;
    let model = load_model(checkpoint)?;
    let g = load_graph(cfg.require_source()?)?;
    let split = load_split(cfg.require_split()?)?;
    split.check_against(&g)?;

    let seedg = augment::seed_subgraph(&g, &split)?;
    let metas = augment::build_meta_set(&seedg, &cfg.augment_config())?;
    let ctx = DiscContext::new(&model, &g)?;
    let discs = metas
        .par_iter()
        .map(|mg| ctx.build_discgraph(mg))
        .collect::<Result<Vec<_>>>()?;

    let dir = cfg.out.join("discgraphs").join(stem(checkpoint));
    save_disc_set(&discs, &dir)?;
    fs_write(&dir.join("meta_manifest.txt"), &augment::meta_manifest(&metas))?;

    let labels: Vec<f64> = discs.iter().filter_map(|d| d.label).collect();
    let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for &l in &labels {
        lo = lo.min(l);
        hi = hi.max(l);
        sum += l;
    }
    println!(
        "built {} discrepancy graphs from seed subgraph of {} nodes; labels min/mean/max = {:.4}/{:.4}/{:.4} -> {}",
        discs.len(),
        seedg.num_nodes(),
        lo,
        sum / labels.len() as f64,
        hi,
        dir.display()
    );
    Ok(())
}

/// Trains the accuracy estimator on a stored discrepancy-graph set and saves
/// its checkpoint under `<out>/evaluators/`.
pub fn cmd_train_evaluator(cfg: &RunConfig, discs_dir: &Path) -> Result<()> {
    write_manifest(cfg)?;
    let discs = load_disc_set(discs_dir)?;
    let width = discs[0].attrs.cols();
    let ecfg = cfg.evaluator_config(width);
    let (ev, report) = crate::evaluator::train_evaluator(&discs, &ecfg)?;

    let name = stem(discs_dir);
    let path = cfg.out.join("evaluators").join(format!("{name}.eval"));
    save_evaluator(&ev, &path)?;

    let final_train = report.train_mse.last().copied().unwrap_or(f64::NAN);
    let mut summary = String::from("#eval-train v1\n");
    let _ = writeln!(summary, "discs = {}", discs.len());
    let _ = writeln!(summary, "epochs = {}", report.train_mse.len());
    let _ = writeln!(summary, "final_train_mse = {final_train:?}");
    let _ = writeln!(summary, "best_epoch = {}", report.best_epoch);
    let _ = writeln!(summary, "best_val_mse = {:?}", report.best_val_mse);
    fs_write(&cfg.out.join("evaluators").join(format!("{name}_train.txt")), &summary)?;
    println!(
        "trained evaluator on {} discrepancy graphs: final train MSE {final_train:.6} -> {}",
        discs.len(),
        path.display()
    );
    Ok(())
}

/// True accuracy of the frozen classifier on a labeled target graph.
/// Inference runs on a label-stripped copy; labels are touched only for the
/// final comparison.
fn truth_accuracy(model: &TrainedModel, labeled: &Graph) -> Result<f64> {
    if !labeled.fully_labeled() {
        return Err(Error::invalid(
            "target graph has unlabeled nodes; ground truth cannot be computed",
        ));
    }
    let (_, preds) = model.embed_and_predict(&labeled.strip_labels())?;
    accuracy(&preds, labeled.labels())
}

/// Estimates the frozen classifier's accuracy on each target graph with the
/// trained evaluator and appends one `gnneval` row per target to
/// `<out>/results.csv`. Target labels stay unread unless `with_truth` asks
/// for the ground-truth column.
pub fn cmd_estimate(
    cfg: &RunConfig,
    checkpoint: &Path,
    evaluator: &Path,
    targets: &[PathBuf],
    with_truth: bool,
) -> Result<()> {
    write_manifest(cfg)?;
    if targets.is_empty() {
        return Err(Error::invalid("at least one --target is required"));
    }
    let model = load_model(checkpoint)?;
    let g = load_graph(cfg.require_source()?)?;
    let ev = load_evaluator(evaluator)?;
    let ctx = DiscContext::new(&model, &g)?;

    let source = stem(cfg.require_source()?);
    let mut rows = Vec::new();
    for t in targets {
        let labeled = load_graph(t)?;
        let unlabeled = labeled.strip_labels();
        let disc = ctx.build_inference_discgraph(&unlabeled)?;
        let estimate = estimate_accuracy(&ev, &disc)?;
        let truth = if with_truth { Some(truth_accuracy(&model, &labeled)?) } else { None };
        println!(
            "estimate {} on {}: {:.4}{}",
            model.config.arch.tag(),
            stem(t),
            estimate,
            truth.map_or(String::new(), |tr| format!(" (truth {tr:.4})"))
        );
        rows.push(ResultRow {
            method: "gnneval".to_string(),
            arch: model.config.arch.tag().to_string(),
            seed: model.config.seed,
            source: source.clone(),
            target: stem(t),
            estimate,
            truth,
        });
    }
    append_results(&cfg.out, &rows)
}

/// Runs every enabled baseline estimator for one frozen classifier on each
/// target graph, appending rows to the same results CSV as [`cmd_estimate`].
pub fn cmd_baseline(
    cfg: &RunConfig,
    checkpoint: &Path,
    targets: &[PathBuf],
    with_truth: bool,
) -> Result<()> {
    write_manifest(cfg)?;
    if targets.is_empty() {
        return Err(Error::invalid("at least one --target is required"));
    }
    let model = load_model(checkpoint)?;
    let g = load_graph(cfg.require_source()?)?;
    let split = load_split(cfg.require_split()?)?;
    split.check_against(&g)?;
    let ctx = DiscContext::new(&model, &g)?;

    // Validation-set logits and labels for threshold fitting / calibration.
    let inf = model.infer(&g)?;
    let mut val_logits = Vec::new();
    let mut val_labels = Vec::new();
    for &id in &split.val {
        let r = id as usize;
        let label = g.labels()[r];
        if label < 0 {
            return Err(Error::invalid(format!("validation node {r} is unlabeled")));
        }
        val_logits.push(inf.logits.row(r).to_vec());
        val_labels.push(label);
    }
    if val_logits.is_empty() {
        return Err(Error::invalid("the split has no validation nodes"));
    }
    let val = ScoredLogits::new(crate::nn::Tensor2::from_rows(&val_logits), Some(val_labels))?;

    // Fit every enabled method once.
    let mut raw_thresholds = Vec::new();
    for &kind in &cfg.atc_scores {
        raw_thresholds.push((kind, atc_fit_threshold(&val, kind)?));
    }
    let calibration = if cfg.atc_calibrated && !cfg.atc_scores.is_empty() {
        let temperature = temperature_calibrate(&val)?;
        let scaled_val = val.scaled(temperature);
        let mut ths = Vec::new();
        for &kind in &cfg.atc_scores {
            ths.push((kind, atc_fit_threshold(&scaled_val, kind)?));
        }
        println!("calibration temperature = {temperature:?}");
        Some((temperature, ths))
    } else {
        None
    };
    let regression = if cfg.autoeval {
        Some(fit_autoeval(cfg, &model, &g, &split, &ctx)?)
    } else {
        None
    };

    let mmd_fn = |a: &crate::nn::Tensor2, b: &crate::nn::Tensor2| match cfg.mmd_kernel {
        MmdKernel::Linear => mmd(a, b),
        MmdKernel::Rbf => mmd_rbf(a, b),
    };

    let source = stem(cfg.require_source()?);
    let mut rows = Vec::new();
    for t in targets {
        let labeled = load_graph(t)?;
        let unlabeled = labeled.strip_labels();
        let target_inf = model.infer(&unlabeled)?;
        let target = ScoredLogits::new(target_inf.logits.clone(), None)?;
        let truth = if with_truth { Some(truth_accuracy(&model, &labeled)?) } else { None };

        let mut push = |method: String, estimate: f64| {
            rows.push(ResultRow {
                method,
                arch: model.config.arch.tag().to_string(),
                seed: model.config.seed,
                source: source.clone(),
                target: stem(t),
                estimate,
                truth,
            });
        };

        for (kind, th) in &raw_thresholds {
            push(format!("atc-{kind}"), atc_estimate(&target, th, *kind)?);
        }
        if let Some((temperature, ths)) = &calibration {
            let scaled_target = target.scaled(*temperature);
            for (kind, th) in ths {
                push(format!("atc-{kind}-cal"), atc_estimate(&scaled_target, th, *kind)?);
            }
        }
        for &tau in &cfg.taus {
            push(format!("thr-{tau}"), threshold_estimate(&target, tau)?);
        }
        if let Some(reg) = &regression {
            let feature = mmd_fn(ctx.z_train(), &target_inf.z)?;
            push("autoeval-g".to_string(), autoeval_g_estimate(reg, feature));
        }
    }
    for r in &rows {
        println!("{} on {}: {:.4}", r.method, r.target, r.estimate);
    }
    append_results(&cfg.out, &rows)
}

/// Fits the regression baseline: one (embedding-gap, accuracy) point per
/// meta-graph, embedding gap measured against the training-graph embeddings.
fn fit_autoeval(
    cfg: &RunConfig,
    model: &TrainedModel,
    g: &Graph,
    split: &Split,
    ctx: &DiscContext,
) -> Result<AutoEvalGModel> {
    let seedg = augment::seed_subgraph(g, split)?;
    let metas = augment::build_meta_set(&seedg, &cfg.augment_config())?;
    let points = metas
        .par_iter()
        .map(|mg| {
            let (z_meta, _) = model.embed_and_predict(&mg.graph)?;
            let feature = match cfg.mmd_kernel {
                MmdKernel::Linear => mmd(ctx.z_train(), &z_meta)?,
                MmdKernel::Rbf => mmd_rbf(ctx.z_train(), &z_meta)?,
            };
            let label = crate::discrepancy::label_meta(model, mg)?;
            Ok((feature, label))
        })
        .collect::<Result<Vec<_>>>()?;
    let features: Vec<f64> = points.iter().map(|p| p.0).collect();
    let labels: Vec<f64> = points.iter().map(|p| p.1).collect();
    autoeval_g_fit(&features, &labels, cfg.mmd_kernel)
}

/// Aggregates `<out>/results.csv` into the MAE table (text + CSV); an
/// optional discrepancy-graph file is dumped as a plain numeric CSV for
/// heatmap rendering.
pub fn cmd_report(cfg: &RunConfig, heatmap: Option<&Path>) -> Result<()> {
    write_manifest(cfg)?;
    let csv_path = cfg.out.join("results.csv");
    let rows = parse_results(&fs_read(&csv_path)?, &csv_path)?;
    if rows.is_empty() {
        return Err(Error::invalid(format!("no result rows in {}", csv_path.display())));
    }
    let table = aggregate_mae(&rows);
    let txt = render_mae_txt(&table);
    fs_write(&cfg.out.join("report.txt"), &txt)?;
    fs_write(&cfg.out.join("mae.csv"), &render_mae_csv(&table))?;
    print!("{txt}");

    if let Some(p) = heatmap {
        let d = load_discgraph(p)?;
        let mut s = String::new();
        for r in 0..d.attrs.rows() {
            let line: Vec<String> = d.attrs.row(r).iter().map(|v| format!("{v:?}")).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        let out = cfg.out.join(format!("heatmap_{}.csv", stem(p)));
        fs_write(&out, &s)?;
        println!("wrote {} x {} similarity matrix -> {}", d.attrs.rows(), d.attrs.cols(), out.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Argument parsing and dispatch
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
struct CommonArgs {
    /// Flat key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config's global seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (1 = fully sequential).
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Parser)]
#[command(name = "gnneval", version, about = "Accuracy estimation for node classifiers on unlabeled graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic block-model benchmark graph and split.
    GenSbm {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Train one classifier per (architecture, seed) cell.
    TrainGnn {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Synthesize the discrepancy-graph training set for one checkpoint.
    BuildDiscgraphs {
        #[command(flatten)]
        common: CommonArgs,
        /// Frozen classifier checkpoint.
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Train the accuracy estimator on a stored discrepancy-graph set.
    TrainEvaluator {
        #[command(flatten)]
        common: CommonArgs,
        /// Directory produced by build-discgraphs.
        #[arg(long)]
        discs: PathBuf,
    },
    /// Estimate accuracy on unlabeled target graphs.
    Estimate {
        #[command(flatten)]
        common: CommonArgs,
        /// Frozen classifier checkpoint.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Trained evaluator checkpoint.
        #[arg(long)]
        evaluator: PathBuf,
        /// Target graph files (repeatable, comma-separable).
        #[arg(long, value_delimiter = ',')]
        target: Vec<PathBuf>,
        /// Also read target labels to fill the ground-truth column.
        #[arg(long)]
        with_truth: bool,
    },
    /// Run label-free baseline estimators on target graphs.
    Baseline {
        #[command(flatten)]
        common: CommonArgs,
        /// Frozen classifier checkpoint.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Target graph files (repeatable, comma-separable).
        #[arg(long, value_delimiter = ',')]
        target: Vec<PathBuf>,
        /// Also read target labels to fill the ground-truth column.
        #[arg(long)]
        with_truth: bool,
    },
    /// Aggregate results.csv into the MAE table.
    Report {
        #[command(flatten)]
        common: CommonArgs,
        /// Discrepancy-graph file to dump as a heatmap CSV.
        #[arg(long)]
        heatmap: Option<PathBuf>,
    },
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::GenSbm { common }
            | Command::TrainGnn { common }
            | Command::BuildDiscgraphs { common, .. }
            | Command::TrainEvaluator { common, .. }
            | Command::Estimate { common, .. }
            | Command::Baseline { common, .. }
            | Command::Report { common, .. } => common,
        }
    }
}

/// Resolves the effective configuration: file (if given), then flag
/// overrides.
fn load_run_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => parse_run_config(&fs_read(p)?, p),
        None => Ok(RunConfig::default()),
    }?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = common.threads {
        cfg.threads = threads;
    }
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cmd: &Command, cfg: &RunConfig) -> Result<()> {
    match cmd {
        Command::GenSbm { .. } => cmd_gen_sbm(cfg),
        Command::TrainGnn { .. } => cmd_train_gnn(cfg),
        Command::BuildDiscgraphs { checkpoint, .. } => cmd_build_discgraphs(cfg, checkpoint),
        Command::TrainEvaluator { discs, .. } => cmd_train_evaluator(cfg, discs),
        Command::Estimate { checkpoint, evaluator, target, with_truth, .. } => {
            cmd_estimate(cfg, checkpoint, evaluator, target, *with_truth)
        }
        Command::Baseline { checkpoint, target, with_truth, .. } => {
            cmd_baseline(cfg, checkpoint, target, *with_truth)
        }
        Command::Report { heatmap, .. } => cmd_report(cfg, heatmap.as_deref()),
    }
}

/// Full CLI entry point; returns the process exit code (0 success, 2 config
/// or input error, 3 numeric failure).
pub fn run<I>(args: I) -> i32
where
    I: IntoIterator<Item = String>,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match load_run_config(cli.command.common()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    match pool.install(|| dispatch(&cli.command, &cfg)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Numeric(_) => 3,
                _ => 2,
            }
        }
    }
}
