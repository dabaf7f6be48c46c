pub mod cli;
pub mod data;
pub mod diagnostics;
pub mod datagen;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod inference;
pub mod kernels;
pub mod nuisance;
pub mod quadrature;
pub mod rng;
pub mod stats;
