//! Label-free accuracy estimation baselines.
//!
//! Three families, all driven by the frozen classifier's logits:
//!
//! - **Confidence thresholding (ATC)**: fit a score threshold on the labeled
//!   validation set so the below-threshold fraction matches the validation
//!   error rate, then report the fraction of target nodes scoring at or above
//!   it. Scores are either the maximum softmax probability or the negative
//!   entropy of the softmax row; both may be temperature-calibrated first.
//! - **Fixed-τ thresholding**: the fraction of target nodes whose maximum
//!   softmax probability exceeds a user-chosen τ.
//! - **Regression on an embedding gap**: squared linear-kernel MMD between
//!   training-graph and meta-graph embeddings as the feature of a 1-D linear
//!   regression onto accuracy labels.

use crate::error::{Error, Result};
use crate::nn::{softmax_rows, Tensor2};

/// Per-node confidence score functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreKind {
    /// Maximum softmax probability.
    MaxConfidence,
    /// Negative entropy `Σ p ln p` (0·ln 0 := 0); higher means more peaked.
    NegEntropy,
}

impl ScoreKind {
    pub fn tag(self) -> &'static str {
        match self {
            ScoreKind::MaxConfidence => "mc",
            ScoreKind::NegEntropy => "ne",
        }
    }

    pub fn parse(s: &str) -> Result<ScoreKind> {
        match s {
            "mc" => Ok(ScoreKind::MaxConfidence),
            "ne" => Ok(ScoreKind::NegEntropy),
            _ => Err(Error::invalid(format!("unknown score kind '{s}'"))),
        }
    }
}

impl std::fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// A batch of classifier logits, optionally with ground-truth labels (needed
/// for threshold fitting and calibration, never for target-side estimation).
#[derive(Debug, Clone)]
pub struct ScoredLogits {
    pub logits: Tensor2,
    pub labels: Option<Vec<i64>>,
}

impl ScoredLogits {
    pub fn new(logits: Tensor2, labels: Option<Vec<i64>>) -> Result<Self> {
        if logits.rows() == 0 || logits.cols() < 2 {
            return Err(Error::invalid("logits need at least one row and two classes"));
        }
        if !logits.is_finite() {
            return Err(Error::numeric("non-finite logits".to_string()));
        }
        if let Some(ls) = &labels {
            if ls.len() != logits.rows() {
                return Err(Error::invalid(format!(
                    "{} labels for {} logit rows",
                    ls.len(),
                    logits.rows()
                )));
            }
            let c = logits.cols() as i64;
            if ls.iter().any(|&l| l < 0 || l >= c) {
                return Err(Error::invalid("label outside class range"));
            }
        }
        Ok(ScoredLogits { logits, labels })
    }

    pub fn len(&self) -> usize {
        self.logits.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.logits.rows() == 0
    }

    /// Per-row confidence scores of the softmax distribution.
    pub fn scores(&self, kind: ScoreKind) -> Vec<f64> {
        let probs = softmax_rows(&self.logits);
        (0..probs.rows())
            .map(|r| {
                let row = probs.row(r);
                match kind {
                    ScoreKind::MaxConfidence => row.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    ScoreKind::NegEntropy => row
                        .iter()
                        .map(|&p| if p > 0.0 { p * p.ln() } else { 0.0 })
                        .sum(),
                }
            })
            .collect()
    }

    /// The same logits divided by a temperature.
    pub fn scaled(&self, temperature: f64) -> ScoredLogits {
        ScoredLogits {
            logits: self.logits.scale(1.0 / temperature),
            labels: self.labels.clone(),
        }
    }

    /// Fraction of rows whose arg-max prediction misses the label.
    fn error_rate(&self) -> Result<f64> {
        let labels = self
            .labels
            .as_ref()
            .ok_or_else(|| Error::invalid("labels required"))?;
        let preds = crate::zoo::argmax_rows(&self.logits);
        let errors = preds.iter().zip(labels).filter(|(p, l)| p != l).count();
        Ok(errors as f64 / self.logits.rows() as f64)
    }
}

/// A fitted confidence threshold, tied to the score function it was fit with.
#[derive(Debug, Clone, Copy)]
pub struct AtcThreshold {
    pub t: f64,
    pub kind: ScoreKind,
}

/// Fits the threshold on labeled validation scores: with `k` validation
/// errors, `t` is the `k`-th smallest score (`+∞` when everything is wrong),
/// so the strictly-below-`t` fraction matches the validation error rate as
/// closely as the empirical score distribution allows.
pub fn atc_fit_threshold(val: &ScoredLogits, kind: ScoreKind) -> Result<AtcThreshold> {
    if val.is_empty() {
        return Err(Error::invalid("cannot fit a threshold on an empty validation set"));
    }
    let n = val.len();
    let k = (val.error_rate()? * n as f64).round() as usize;
    let mut scores = val.scores(kind);
    scores.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let t = if k < n { scores[k] } else { f64::INFINITY };
    Ok(AtcThreshold { t, kind })
}

/// Estimated accuracy: the exact fraction of target scores at or above the
/// fitted threshold. The score kind must match the one the threshold was fit
/// with.
pub fn atc_estimate(target: &ScoredLogits, th: &AtcThreshold, kind: ScoreKind) -> Result<f64> {
    if kind != th.kind {
        return Err(Error::invalid(format!(
            "threshold was fit with score '{}', estimation requested '{}'",
            th.kind, kind
        )));
    }
    if target.is_empty() {
        return Err(Error::invalid("empty target set"));
    }
    let hits = target.scores(kind).iter().filter(|&&s| s >= th.t).count();
    Ok(hits as f64 / target.len() as f64)
}

/// The standard calibration grid: 200 log-spaced temperatures on [0.05, 10].
pub fn temperature_grid() -> Vec<f64> {
    let (lo, hi, n) = (0.05f64, 10.0f64, 200usize);
    (0..n)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Mean negative log-likelihood of the labels under `softmax(logits / T)`.
pub fn nll(val: &ScoredLogits, temperature: f64) -> Result<f64> {
    let labels = val
        .labels
        .as_ref()
        .ok_or_else(|| Error::invalid("labels required for calibration"))?;
    let probs = softmax_rows(&val.scaled(temperature).logits);
    let total: f64 = (0..probs.rows())
        .map(|r| -probs.get(r, labels[r] as usize).max(1e-300).ln())
        .sum();
    Ok(total / probs.rows() as f64)
}

/// Picks the grid temperature minimizing validation NLL; ties keep the
/// smallest temperature.
pub fn temperature_calibrate_on_grid(val: &ScoredLogits, grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::invalid("empty temperature grid"));
    }
    let mut best = (f64::INFINITY, grid[0]);
    for &t in grid {
        let v = nll(val, t)?;
        if v < best.0 {
            best = (v, t);
        }
    }
    Ok(best.1)
}

/// Temperature scaling on the standard grid.
pub fn temperature_calibrate(val: &ScoredLogits) -> Result<f64> {
    temperature_calibrate_on_grid(val, &temperature_grid())
}

/// Fraction of target rows whose maximum softmax probability strictly
/// exceeds `tau`.
pub fn threshold_estimate(target: &ScoredLogits, tau: f64) -> Result<f64> {
    if !(tau.is_finite() && 0.0 < tau && tau < 1.0) {
        return Err(Error::invalid(format!("threshold {tau} must lie in (0,1)")));
    }
    if target.is_empty() {
        return Err(Error::invalid("empty target set"));
    }
    let hits = target
        .scores(ScoreKind::MaxConfidence)
        .iter()
        .filter(|&&s| s > tau)
        .count();
    Ok(hits as f64 / target.len() as f64)
}

/// Squared linear-kernel MMD: the squared distance between the two samples'
/// mean embeddings. Nonnegative, symmetric, zero iff the means coincide.
pub fn mmd(za: &Tensor2, zb: &Tensor2) -> Result<f64> {
    if za.cols() != zb.cols() {
        return Err(Error::invalid(format!(
            "embedding dims differ: {} vs {}",
            za.cols(),
            zb.cols()
        )));
    }
    if za.rows() == 0 || zb.rows() == 0 {
        return Err(Error::invalid("empty sample"));
    }
    let mean = |z: &Tensor2| -> Vec<f64> {
        let mut m = vec![0.0; z.cols()];
        for r in 0..z.rows() {
            for (j, v) in z.row(r).iter().enumerate() {
                m[j] += v;
            }
        }
        for v in &mut m {
            *v /= z.rows() as f64;
        }
        m
    };
    let (ma, mb) = (mean(za), mean(zb));
    Ok(ma.iter().zip(&mb).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// Gaussian-kernel MMD (biased V-statistic) with the median-pairwise-distance
/// bandwidth heuristic computed on the pooled sample.
pub fn mmd_rbf(za: &Tensor2, zb: &Tensor2) -> Result<f64> {
    if za.cols() != zb.cols() {
        return Err(Error::invalid(format!(
            "embedding dims differ: {} vs {}",
            za.cols(),
            zb.cols()
        )));
    }
    if za.rows() == 0 || zb.rows() == 0 {
        return Err(Error::invalid("empty sample"));
    }
    let sq_dist = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    };
    let pooled: Vec<&[f64]> = (0..za.rows())
        .map(|r| za.row(r))
        .chain((0..zb.rows()).map(|r| zb.row(r)))
        .collect();
    let mut dists = Vec::new();
    for i in 0..pooled.len() {
        for j in (i + 1)..pooled.len() {
            let d = sq_dist(pooled[i], pooled[j]);
            if d > 0.0 {
                dists.push(d);
            }
        }
    }
    if dists.is_empty() {
        return Ok(0.0); // all points identical
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median_sq = dists[dists.len() / 2];
    let gamma = 1.0 / (2.0 * median_sq);
    let kernel_mean = |xs: &Tensor2, ys: &Tensor2| -> f64 {
        let mut total = 0.0;
        for i in 0..xs.rows() {
            for j in 0..ys.rows() {
                total += (-gamma * sq_dist(xs.row(i), ys.row(j))).exp();
            }
        }
        total / (xs.rows() * ys.rows()) as f64
    };
    let v = kernel_mean(za, za) + kernel_mean(zb, zb) - 2.0 * kernel_mean(za, zb);
    Ok(v.max(0.0))
}

/// Which MMD variant produced a regression feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmdKernel {
    Linear,
    Rbf,
}

impl MmdKernel {
    pub fn tag(self) -> &'static str {
        match self {
            MmdKernel::Linear => "linear",
            MmdKernel::Rbf => "rbf",
        }
    }
}

/// 1-D linear regression of accuracy on a distribution-gap feature.
#[derive(Debug, Clone)]
pub struct AutoEvalGModel {
    pub w1: f64,
    pub w0: f64,
    pub kernel: MmdKernel,
}

/// Closed-form least squares. Degenerate (zero-variance) features are
/// rejected — the slope would be undefined.
pub fn autoeval_g_fit(features: &[f64], labels: &[f64], kernel: MmdKernel) -> Result<AutoEvalGModel> {
    if features.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} features vs {} labels",
            features.len(),
            labels.len()
        )));
    }
    if features.len() < 2 {
        return Err(Error::invalid("regression needs at least two points"));
    }
    let n = features.len() as f64;
    let mx = features.iter().sum::<f64>() / n;
    let my = labels.iter().sum::<f64>() / n;
    let sxx: f64 = features.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("features have zero variance; cannot fit a slope"));
    }
    let sxy: f64 = features
        .iter()
        .zip(labels)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum();
    let w1 = sxy / sxx;
    let w0 = my - w1 * mx;
    if !(w1.is_finite() && w0.is_finite()) {
        return Err(Error::numeric(format!("regression produced w1={w1} w0={w0}")));
    }
    Ok(AutoEvalGModel { w1, w0, kernel })
}

/// Regression prediction, clamped to [0,1] for reporting as an accuracy.
pub fn autoeval_g_estimate(m: &AutoEvalGModel, feature: f64) -> f64 {
    (m.w1 * feature + m.w0).clamp(0.0, 1.0)
}
