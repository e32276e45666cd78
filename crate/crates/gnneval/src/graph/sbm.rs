//! Stochastic-block-model generator for synthetic benchmark graphs.
//!
//! Nodes come in blocks; each block carries a class label. Edges appear
//! independently with probability `p_in` inside a block and `p_out` across
//! blocks. Features are class-conditional Gaussians: node `u` draws
//! `mean[label(u)] + noise · N(0, I)`.

use super::Graph;
use crate::error::{Error, Result};
use crate::nn::Tensor2;
use crate::rng::Rng;

#[derive(Debug, Clone)]
pub struct SbmBlock {
    pub size: usize,
    pub label: usize,
}

#[derive(Debug, Clone)]
pub struct SbmConfig {
    pub blocks: Vec<SbmBlock>,
    pub p_in: f64,
    pub p_out: f64,
    /// Per-class feature means; all rows must share one dimension.
    pub means: Vec<Vec<f64>>,
    /// Isotropic feature noise (standard deviation).
    pub noise: f64,
    pub num_classes: usize,
}

pub fn generate_sbm(cfg: &SbmConfig, rng: &mut Rng) -> Result<Graph> {
    if cfg.blocks.is_empty() || cfg.blocks.iter().any(|b| b.size == 0) {
        return Err(Error::invalid("every block needs at least one node"));
    }
    for p in [cfg.p_in, cfg.p_out] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("edge probability {p} outside [0, 1]")));
        }
    }
    if cfg.means.len() != cfg.num_classes {
        return Err(Error::invalid(format!(
            "{} mean vectors for {} classes",
            cfg.means.len(),
            cfg.num_classes
        )));
    }
    let d = cfg.means.first().map_or(0, Vec::len);
    if d == 0 || cfg.means.iter().any(|m| m.len() != d) {
        return Err(Error::invalid("class means must share one nonzero dimension"));
    }
    if cfg.noise < 0.0 || !cfg.noise.is_finite() {
        return Err(Error::invalid(format!("bad noise level {}", cfg.noise)));
    }
    for b in &cfg.blocks {
        if b.label >= cfg.num_classes {
            return Err(Error::invalid(format!(
                "block label {} outside [0, {})",
                b.label, cfg.num_classes
            )));
        }
    }

    let n: usize = cfg.blocks.iter().map(|b| b.size).sum();
    let mut block_of = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for (bi, b) in cfg.blocks.iter().enumerate() {
        for _ in 0..b.size {
            block_of.push(bi);
            labels.push(b.label as i64);
        }
    }

    // Features first, then edges, each in node order: the draw sequence is
    // part of the determinism contract.
    let mut features = Tensor2::zeros(n, d);
    for u in 0..n {
        let mean = &cfg.means[labels[u] as usize];
        for k in 0..d {
            features.set(u, k, mean[k] + cfg.noise * rng.normal());
        }
    }

    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if block_of[u] == block_of[v] { cfg.p_in } else { cfg.p_out };
            if rng.next_f64() < p {
                edges.push((u as u32, v as u32));
            }
        }
    }

    Graph::new(features, labels, cfg.num_classes, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(p_in: f64, p_out: f64) -> SbmConfig {
        SbmConfig {
            blocks: vec![SbmBlock { size: 3, label: 0 }, SbmBlock { size: 3, label: 1 }],
            p_in,
            p_out,
            means: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            noise: 0.5,
            num_classes: 2,
        }
    }

    #[test]
    fn extreme_probabilities_give_two_triangles() {
        let mut rng = Rng::new(0);
        let g = generate_sbm(&base(1.0, 0.0), &mut rng).unwrap();
        assert_eq!(g.num_edges(), 6);
        assert_eq!(g.edges(), &[(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)]);
    }

    #[test]
    fn zero_probabilities_give_edgeless_graph() {
        let mut rng = Rng::new(0);
        let g = generate_sbm(&base(0.0, 0.0), &mut rng).unwrap();
        assert_eq!(g.num_edges(), 0);
        assert_eq!(g.num_nodes(), 6);
    }

    #[test]
    fn edge_count_within_four_sigma_of_binomial_mean() {
        let cfg = SbmConfig {
            blocks: vec![SbmBlock { size: 100, label: 0 }, SbmBlock { size: 100, label: 1 }],
            p_in: 0.1,
            p_out: 0.01,
            means: vec![vec![1.0], vec![-1.0]],
            noise: 1.0,
            num_classes: 2,
        };
        let mut rng = Rng::new(42);
        let g = generate_sbm(&cfg, &mut rng).unwrap();
        // Within-block pairs: 2·C(100,2) = 9900 at 0.1; cross: 10000 at 0.01.
        let mean = 9900.0 * 0.1 + 10000.0 * 0.01;
        let var: f64 = 9900.0 * 0.1 * 0.9 + 10000.0 * 0.01 * 0.99;
        let dev = (g.num_edges() as f64 - mean).abs();
        assert!(dev <= 4.0 * var.sqrt(), "count {} vs mean {mean}", g.num_edges());
    }

    #[test]
    fn same_seed_same_graph() {
        let cfg = base(0.4, 0.1);
        let a = generate_sbm(&cfg, &mut Rng::new(7)).unwrap();
        let b = generate_sbm(&cfg, &mut Rng::new(7)).unwrap();
        assert_eq!(a, b);
        let c = generate_sbm(&cfg, &mut Rng::new(8)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn features_follow_class_means() {
        let mut cfg = base(0.0, 0.0);
        cfg.noise = 0.0;
        let g = generate_sbm(&cfg, &mut Rng::new(1)).unwrap();
        assert_eq!(g.features().row(0), &[1.0, 0.0]);
        assert_eq!(g.features().row(5), &[0.0, 1.0]);
    }

    #[test]
    fn config_validation() {
        let mut cfg = base(0.5, 0.5);
        cfg.p_in = 1.5;
        assert!(generate_sbm(&cfg, &mut Rng::new(0)).is_err());
        let mut cfg = base(0.5, 0.5);
        cfg.means.pop();
        assert!(generate_sbm(&cfg, &mut Rng::new(0)).is_err());
        let mut cfg = base(0.5, 0.5);
        cfg.blocks[1].label = 7;
        assert!(generate_sbm(&cfg, &mut Rng::new(0)).is_err());
    }
}
