//! Seed derivation for simulation replicates.
//!
//! The dataset seed depends only on `(master, cell, sim)`, so every estimator
//! in a cell sees the same data; the fit seed adds the estimator id.

use serde::{Deserialize, Serialize};

use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DerivedSeeds {
    pub dataset: u64,
    pub fit: u64,
}

pub fn dataset_seed(sim_index: usize, cell_id: &str, master_seed: u64) -> u64 {
    rng::derive_seed(master_seed, &[rng::label("dataset"), rng::label(cell_id), sim_index as u64])
}

pub fn seed_for(sim_index: usize, estimator_id: &str, cell_id: &str, master_seed: u64) -> DerivedSeeds {
    let dataset = dataset_seed(sim_index, cell_id, master_seed);
    DerivedSeeds { dataset, fit: rng::derive_seed(dataset, &[rng::label("fit"), rng::label(estimator_id)]) }
}
