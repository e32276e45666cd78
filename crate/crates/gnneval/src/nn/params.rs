//! Named parameters with per-parameter Adam state.
//!
//! Parameters live in a `BTreeMap`, so every iteration over the store is in
//! name order — one of several places where a fixed order keeps training
//! bit-reproducible.

use std::collections::BTreeMap;

use super::tensor::Tensor2;
use crate::rng::Rng;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Gradients keyed by parameter name; parameters a backward pass never
/// touched are simply absent and read as zero.
pub type GradMap = BTreeMap<String, Tensor2>;

#[derive(Debug, Clone)]
struct ParamEntry {
    value: Tensor2,
    m: Tensor2,
    v: Tensor2,
    step: u64,
}

#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    entries: BTreeMap<String, ParamEntry>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: Tensor2) {
        assert!(
            !self.entries.contains_key(name),
            "parameter {name} already defined"
        );
        let (r, c) = value.shape();
        self.entries.insert(
            name.to_string(),
            ParamEntry {
                value,
                m: Tensor2::zeros(r, c),
                v: Tensor2::zeros(r, c),
                step: 0,
            },
        );
    }

    /// Glorot-uniform initialization: `U[-a, a]` with
    /// `a = sqrt(6 / (fan_in + fan_out))`, fan sizes taken from the shape.
    pub fn insert_glorot(&mut self, name: &str, rows: usize, cols: usize, rng: &mut Rng) {
        let a = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.uniform(-a, a)).collect();
        self.insert(name, Tensor2::from_vec(rows, cols, data));
    }

    pub fn insert_zeros(&mut self, name: &str, rows: usize, cols: usize) {
        self.insert(name, Tensor2::zeros(rows, cols));
    }

    pub fn get(&self, name: &str) -> &Tensor2 {
        &self
            .entries
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
            .value
    }

    pub fn set(&mut self, name: &str, value: Tensor2) {
        let entry = self
            .entries
            .get_mut(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"));
        assert_eq!(entry.value.shape(), value.shape());
        entry.value = value;
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn value_count(&self) -> usize {
        self.entries
            .values()
            .map(|e| e.value.data().len())
            .sum()
    }

    /// Copy of all parameter values (no optimizer state).
    pub fn snapshot(&self) -> BTreeMap<String, Tensor2> {
        self.entries
            .iter()
            .map(|(k, e)| (k.clone(), e.value.clone()))
            .collect()
    }

    /// Restores values from a snapshot; optimizer state is left as is.
    pub fn restore(&mut self, snapshot: &BTreeMap<String, Tensor2>) {
        for (name, value) in snapshot {
            self.set(name, value.clone());
        }
    }

    pub fn all_finite(&self) -> bool {
        self.entries.values().all(|e| e.value.is_finite())
    }

    /// One Adam update over every parameter in the store.
    ///
    /// Weight decay is decoupled and applied before the Adam delta
    /// (`p ← p − lr·wd·p`); moments use the standard bias correction.
    /// Parameters missing from `grads` see a zero gradient: their moments
    /// still decay and their step counter still advances.
    pub fn adam_step(&mut self, grads: &GradMap, lr: f64, wd: f64) {
        for (name, entry) in self.entries.iter_mut() {
            let zero;
            let g = match grads.get(name) {
                Some(g) => {
                    assert_eq!(g.shape(), entry.value.shape(), "gradient shape for {name}");
                    g
                }
                None => {
                    zero = Tensor2::zeros(entry.value.rows(), entry.value.cols());
                    &zero
                }
            };
            entry.step += 1;
            let t = entry.step;
            let bc1 = 1.0 - ADAM_BETA1.powi(t as i32);
            let bc2 = 1.0 - ADAM_BETA2.powi(t as i32);
            let p = entry.value.data_mut();
            let m = entry.m.data_mut();
            let v = entry.v.data_mut();
            for i in 0..p.len() {
                let gi = g.data()[i];
                p[i] -= lr * wd * p[i];
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * gi;
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
            }
        }
    }
}
