//! Centered random forest.
//!
//! Each tree partitions `[0, 1]^d` with `⌈log₂ k_n⌉` rounds of splits; every
//! node picks a feature uniformly at random and splits its cell at the
//! midpoint. The partition never looks at the data, so every leaf has
//! volume exactly `2^{-⌈log₂ k_n⌉}`. A tree predicts the mean response in
//! the query's leaf (0 for an empty leaf) and the forest averages its trees.

use rand::Rng;

use crate::data::Covariates;
use crate::error::{Error, Result};
use crate::rng;

/// Depths beyond this would allocate more leaves than is sensible.
pub const MAX_DEPTH: u32 = 24;

/// Number of split rounds for leaf parameter `k_n`.
pub fn depth_for(k_n: usize) -> u32 {
    if k_n <= 1 {
        0
    } else {
        usize::BITS - (k_n - 1).leading_zeros()
    }
}

#[derive(Debug, Clone)]
struct Tree {
    /// Split feature per internal node, heap-indexed from the root.
    features: Vec<u8>,
    /// Mean response per leaf; `0` when the leaf is empty.
    leaf_means: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct CenteredForest {
    d: usize,
    depth: u32,
    k_n: usize,
    trees: Vec<Tree>,
}

fn leaf_of(features: &[u8], depth: u32, d: usize, q: &[f64], lo: &mut [f64], hi: &mut [f64]) -> usize {
    lo.fill(0.0);
    hi.fill(1.0);
    let mut node = 0usize;
    for _ in 0..depth {
        let j = features[node] as usize;
        debug_assert!(j < d);
        let mid = 0.5 * (lo[j] + hi[j]);
        if q[j] < mid {
            hi[j] = mid;
            node = 2 * node + 1;
        } else {
            lo[j] = mid;
            node = 2 * node + 2;
        }
    }
    node - ((1usize << depth) - 1)
}

pub fn fit_centered_forest(
    x: &Covariates,
    response: &[f64],
    k_n: usize,
    n_trees: usize,
    seed: u64,
) -> Result<CenteredForest> {
    let n = x.len();
    if response.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: response.len() });
    }
    if k_n < 1 {
        return Err(Error::invalid("k_n must be at least 1"));
    }
    if n_trees < 1 {
        return Err(Error::invalid("n_trees must be at least 1"));
    }
    let d = x.dim();
    if d > u8::MAX as usize {
        return Err(Error::Unsupported(format!("centered forest supports d <= 255, got {d}")));
    }
    let depth = depth_for(k_n);
    if depth > MAX_DEPTH {
        return Err(Error::invalid(format!("k_n = {k_n} needs more than {MAX_DEPTH} split rounds")));
    }
    let internal = (1usize << depth) - 1;
    let leaves = 1usize << depth;
    let mut lo = vec![0.0; d];
    let mut hi = vec![1.0; d];
    let trees = (0..n_trees)
        .map(|t| {
            let mut r = rng::stream(seed, &[rng::label("centered-forest"), t as u64]);
            let features: Vec<u8> = (0..internal).map(|_| r.random_range(0..d) as u8).collect();
            let mut sums = vec![0.0; leaves];
            let mut counts = vec![0u32; leaves];
            for (row, &y) in x.rows().zip(response) {
                let leaf = leaf_of(&features, depth, d, row, &mut lo, &mut hi);
                sums[leaf] += y;
                counts[leaf] += 1;
            }
            let leaf_means = sums
                .iter()
                .zip(&counts)
                .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
                .collect();
            Tree { features, leaf_means }
        })
        .collect();
    Ok(CenteredForest { d, depth, k_n, trees })
}

impl CenteredForest {
    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn k_n(&self) -> usize {
        self.k_n
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Leaf volume `2^{-depth}`.
    pub fn leaf_volume(&self) -> f64 {
        0.5f64.powi(self.depth as i32)
    }

    /// Leaf index of `q` in tree `t`.
    pub fn leaf_index(&self, t: usize, q: &[f64]) -> usize {
        let mut lo = vec![0.0; self.d];
        let mut hi = vec![1.0; self.d];
        leaf_of(&self.trees[t].features, self.depth, self.d, q, &mut lo, &mut hi)
    }

    /// Split features of tree `t` in heap order.
    pub fn tree_features(&self, t: usize) -> &[u8] {
        &self.trees[t].features
    }

    pub fn predict(&self, q: &[f64]) -> f64 {
        let mut lo = vec![0.0; self.d];
        let mut hi = vec![1.0; self.d];
        let s: f64 = self
            .trees
            .iter()
            .map(|t| t.leaf_means[leaf_of(&t.features, self.depth, self.d, q, &mut lo, &mut hi)])
            .sum();
        s / self.trees.len() as f64
    }
}
