//! k-nearest-neighbour regression.

use crate::data::Covariates;
use crate::error::{Error, Result};
use crate::nuisance::neighbors::NeighborIndex;
use crate::stats::KahanSum;

#[derive(Debug, Clone)]
pub struct KnnRegressor {
    index: NeighborIndex,
    response: Vec<f64>,
    k: usize,
}

pub fn fit_knn(x: &Covariates, response: &[f64], k: usize) -> Result<KnnRegressor> {
    let n = x.len();
    if response.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: response.len() });
    }
    if k < 1 || k > n {
        return Err(Error::invalid(format!("k must lie in 1..={n}, got {k}")));
    }
    Ok(KnnRegressor { index: NeighborIndex::new(x), response: response.to_vec(), k })
}

impl KnnRegressor {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_train(&self) -> usize {
        self.response.len()
    }

    pub fn predict(&self, q: &[f64]) -> f64 {
        let nb = self.index.knn(q, self.k);
        let s: KahanSum = nb.iter().map(|n| self.response[n.index]).collect();
        s.value() / nb.len() as f64
    }

    /// Predictions at `q` for every `k` in `1..=kmax` from one search.
    pub fn predict_prefix(&self, q: &[f64], kmax: usize) -> Vec<f64> {
        let nb = self.index.knn(q, kmax);
        let mut s = KahanSum::new();
        nb.iter()
            .enumerate()
            .map(|(j, n)| {
                s.add(self.response[n.index]);
                s.value() / (j + 1) as f64
            })
            .collect()
    }
}
