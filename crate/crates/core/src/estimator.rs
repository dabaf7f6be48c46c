//! ECC estimators built from the un-centred influence function
//! `φ(Z) = (A − π(X)) (Y − μ(X))`.
//!
//! * DCDR: `μ̂` and `π̂` on separate folds, `φ̂` averaged on a third.
//! * SCDR: both nuisances on one training fold.
//! * Plug-in: `mean A (Y − μ̂(X))`, i.e. DCDR with `π̂ ≡ 0`.
//!
//! [`cycle_folds_average`] rotates the roles of a fixed three-fold partition
//! so that every observation is used for estimation exactly once.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::inference::{wald_interval, Standardization};
use crate::nuisance::{self, FitContext, FittedRegressor, NuisanceSpec, TuningRecord};
use crate::rng;
use crate::stats;

/// Disjoint folds for `μ̂`, `π̂` and the influence-function average.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThreeFoldSplit {
    pub fold_mu: Vec<usize>,
    pub fold_pi: Vec<usize>,
    pub fold_phi: Vec<usize>,
}

/// Training fold and estimation fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoFoldSplit {
    pub train: Vec<usize>,
    pub estimate: Vec<usize>,
}

fn chunk_sizes(n: usize) -> [usize; 3] {
    let base = n / 3;
    let extra = n % 3;
    [base + usize::from(extra > 0), base + usize::from(extra > 1), base]
}

impl ThreeFoldSplit {
    /// Consecutive blocks of sizes differing by at most one.
    pub fn contiguous(n: usize) -> Result<Self> {
        Self::from_order((0..n).collect())
    }

    /// Uniformly random assignment with equal sizes.
    pub fn random(n: usize, seed: u64) -> Result<Self> {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng::stream(seed, &[rng::label("three-fold-split")]));
        Self::from_order(order)
    }

    fn from_order(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        if n < 3 {
            return Err(Error::invalid(format!("need at least 3 observations for three folds, got {n}")));
        }
        let [a, b, _] = chunk_sizes(n);
        let mut s = Self {
            fold_mu: order[..a].to_vec(),
            fold_pi: order[a..a + b].to_vec(),
            fold_phi: order[a + b..].to_vec(),
        };
        s.fold_mu.sort_unstable();
        s.fold_pi.sort_unstable();
        s.fold_phi.sort_unstable();
        Ok(s)
    }

    pub fn folds(&self) -> [&[usize]; 3] {
        [&self.fold_mu, &self.fold_pi, &self.fold_phi]
    }

    /// Rotation `r` of the roles: fold `P[(r + 2) % 3]` becomes the
    /// estimation fold, with `P = [fold_mu, fold_pi, fold_phi]`.
    pub fn rotation(&self, r: usize) -> Self {
        let p = [&self.fold_mu, &self.fold_pi, &self.fold_phi];
        Self {
            fold_mu: p[r % 3].clone(),
            fold_pi: p[(r + 1) % 3].clone(),
            fold_phi: p[(r + 2) % 3].clone(),
        }
    }

    /// SCDR view of the split: `fold_mu` trains both nuisances and
    /// `fold_phi` estimates; `fold_pi` is unused.
    pub fn discard_pi_fold(&self) -> TwoFoldSplit {
        TwoFoldSplit { train: self.fold_mu.clone(), estimate: self.fold_phi.clone() }
    }

    /// SCDR view that trains on the union of the two nuisance folds.
    pub fn merge_training(&self) -> TwoFoldSplit {
        let mut train = self.fold_mu.clone();
        train.extend_from_slice(&self.fold_pi);
        train.sort_unstable();
        TwoFoldSplit { train, estimate: self.fold_phi.clone() }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for (name, fold) in [("fold_mu", &self.fold_mu), ("fold_pi", &self.fold_pi), ("fold_phi", &self.fold_phi)] {
            if fold.is_empty() {
                return Err(Error::EmptyFold(name));
            }
            mark(&mut seen, fold)?;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::invalid("folds do not cover every observation"));
        }
        Ok(())
    }
}

fn mark(seen: &mut [bool], fold: &[usize]) -> Result<()> {
    for &i in fold {
        if i >= seen.len() {
            return Err(Error::invalid(format!("fold index {i} out of range")));
        }
        if seen[i] {
            return Err(Error::invalid(format!("observation {i} appears in two folds")));
        }
        seen[i] = true;
    }
    Ok(())
}

impl TwoFoldSplit {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.train.is_empty() {
            return Err(Error::EmptyFold("train"));
        }
        if self.estimate.is_empty() {
            return Err(Error::EmptyFold("estimate"));
        }
        let mut seen = vec![false; n];
        mark(&mut seen, &self.train)?;
        mark(&mut seen, &self.estimate)
    }
}

/// Nuisance models and inference settings.
#[derive(Debug, Clone)]
pub struct EstimatorSetup {
    pub mu: NuisanceSpec,
    pub pi: NuisanceSpec,
    pub mu_ctx: FitContext,
    pub pi_ctx: FitContext,
    pub alpha: f64,
    pub standardization: Standardization,
}

impl EstimatorSetup {
    pub fn new(mu: NuisanceSpec, pi: NuisanceSpec, alpha: f64) -> Self {
        Self {
            mu,
            pi,
            mu_ctx: FitContext::default(),
            pi_ctx: FitContext::default(),
            alpha,
            standardization: Standardization::RootN,
        }
    }

    pub fn contexts(mut self, mu_ctx: FitContext, pi_ctx: FitContext) -> Self {
        self.mu_ctx = mu_ctx;
        self.pi_ctx = pi_ctx;
        self
    }

    pub fn standardization(mut self, mode: Standardization) -> Self {
        self.standardization = mode;
        self
    }
}

/// Resolved tuning of both nuisances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct EstimateTuning {
    pub mu: Vec<TuningRecord>,
    pub pi: Vec<TuningRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EccEstimate {
    pub psi_hat: f64,
    pub variance_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub alpha: f64,
    pub standardization: Standardization,
    pub n_phi: usize,
    /// Per-rotation point estimates when folds were cycled.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rotations: Vec<f64>,
    pub tuning: EstimateTuning,
    #[serde(skip)]
    pub eif_values: Vec<f64>,
}

/// `φ̂(Z_i) = (A_i − π̂(X_i)) (Y_i − μ̂(X_i))` over `fold`, in order.
pub fn eif_values(fold: &Dataset, mu_hat: &FittedRegressor, pi_hat: &FittedRegressor) -> Vec<f64> {
    fold.x
        .rows()
        .zip(fold.a.iter().zip(&fold.y))
        .map(|(x, (a, y))| (a - pi_hat.predict(x)) * (y - mu_hat.predict(x)))
        .collect()
}

fn summarize(
    eif: Vec<f64>,
    psi_hat: f64,
    alpha: f64,
    standardization: Standardization,
    tuning: EstimateTuning,
) -> Result<EccEstimate> {
    let n = eif.len();
    if n == 0 {
        return Err(Error::EmptyFold("estimation"));
    }
    let variance_hat = stats::sample_variance(&eif);
    let (lo, hi) = wald_interval(psi_hat, variance_hat, n, alpha)?;
    Ok(EccEstimate {
        psi_hat,
        variance_hat,
        ci_low: lo.min(psi_hat),
        ci_high: hi.max(psi_hat),
        alpha,
        standardization,
        n_phi: n,
        rotations: Vec::new(),
        tuning,
        eif_values: eif,
    })
}

/// Estimate from already-fitted nuisances.
pub fn estimate_with(
    fold: &Dataset,
    mu_hat: &FittedRegressor,
    pi_hat: &FittedRegressor,
    alpha: f64,
    standardization: Standardization,
) -> Result<EccEstimate> {
    let eif = eif_values(fold, mu_hat, pi_hat);
    let psi = stats::mean(&eif);
    summarize(eif, psi, alpha, standardization, EstimateTuning::default())
}

fn fit_on(data: &Dataset, idx: &[usize], spec: &NuisanceSpec, ctx: &FitContext, use_a: bool) -> Result<(FittedRegressor, TuningRecord)> {
    let sub = data.subset(idx);
    let response = if use_a { &sub.a } else { &sub.y };
    let f = nuisance::fit(spec, &sub.x, response, ctx)?;
    let t = f.tuning(spec, idx.len(), data.dim());
    Ok((f, t))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Double cross-fit estimate.
pub fn dcdr_estimate(data: &Dataset, split: &ThreeFoldSplit, setup: &EstimatorSetup) -> Result<EccEstimate> {
    check_alpha(setup.alpha)?;
    split.validate(data.len())?;
    let (mu_hat, tm) = fit_on(data, &split.fold_mu, &setup.mu, &setup.mu_ctx, false)?;
    let (pi_hat, tp) = fit_on(data, &split.fold_pi, &setup.pi, &setup.pi_ctx, true)?;
    let fold = data.subset(&split.fold_phi);
    let eif = eif_values(&fold, &mu_hat, &pi_hat);
    let psi = stats::mean(&eif);
    summarize(eif, psi, setup.alpha, setup.standardization, EstimateTuning { mu: vec![tm], pi: vec![tp] })
}

/// Single cross-fit estimate: both nuisances on `split.train`.
pub fn scdr_estimate(data: &Dataset, split: &TwoFoldSplit, setup: &EstimatorSetup) -> Result<EccEstimate> {
    check_alpha(setup.alpha)?;
    split.validate(data.len())?;
    let (mu_hat, tm) = fit_on(data, &split.train, &setup.mu, &setup.mu_ctx, false)?;
    let (pi_hat, tp) = fit_on(data, &split.train, &setup.pi, &setup.pi_ctx, true)?;
    let fold = data.subset(&split.estimate);
    let eif = eif_values(&fold, &mu_hat, &pi_hat);
    let psi = stats::mean(&eif);
    summarize(eif, psi, setup.alpha, setup.standardization, EstimateTuning { mu: vec![tm], pi: vec![tp] })
}

/// Plug-in estimate `mean A (Y − μ̂(X))`; `setup.pi` is ignored.
pub fn plugin_estimate(data: &Dataset, split: &TwoFoldSplit, setup: &EstimatorSetup) -> Result<EccEstimate> {
    check_alpha(setup.alpha)?;
    split.validate(data.len())?;
    let (mu_hat, tm) = fit_on(data, &split.train, &setup.mu, &setup.mu_ctx, false)?;
    let fold = data.subset(&split.estimate);
    let eif = eif_values(&fold, &mu_hat, &FittedRegressor::Constant(0.0));
    let psi = stats::mean(&eif);
    summarize(eif, psi, setup.alpha, setup.standardization, EstimateTuning { mu: vec![tm], pi: Vec::new() })
}

/// Cross-fitting scheme used within each rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossFit {
    /// `μ̂` and `π̂` on different folds.
    Double,
    /// Both nuisances on the union of the two non-estimation folds.
    Single,
}

fn rotation_context(ctx: &FitContext, r: usize, role: &str) -> FitContext {
    let mut c = ctx.clone();
    c.seed = rng::derive_seed(ctx.seed, &[rng::label(role), r as u64]);
    c
}

/// Average of the three rotations of `partition`.
///
/// `ψ̂` is the mean of the three rotation estimates; the variance is the
/// sample variance of the concatenated influence values and the interval
/// uses the total count.
pub fn cycle_folds_average(
    data: &Dataset,
    partition: &ThreeFoldSplit,
    scheme: CrossFit,
    setup: &EstimatorSetup,
) -> Result<EccEstimate> {
    check_alpha(setup.alpha)?;
    partition.validate(data.len())?;
    let rotations: Vec<EccEstimate> = (0..3)
        .into_par_iter()
        .map(|r| {
            let split = partition.rotation(r);
            let mut s = setup.clone();
            s.mu_ctx = rotation_context(&setup.mu_ctx, r, "mu");
            s.pi_ctx = rotation_context(&setup.pi_ctx, r, "pi");
            match scheme {
                CrossFit::Double => dcdr_estimate(data, &split, &s),
                CrossFit::Single => scdr_estimate(data, &split.merge_training(), &s),
            }
        })
        .collect::<Result<_>>()?;
    let psis: Vec<f64> = rotations.iter().map(|e| e.psi_hat).collect();
    let psi = stats::mean(&psis);
    let mut eif = Vec::with_capacity(data.len());
    let mut tuning = EstimateTuning::default();
    for e in rotations {
        eif.extend_from_slice(&e.eif_values);
        tuning.mu.extend(e.tuning.mu);
        tuning.pi.extend(e.tuning.pi);
    }
    let mut out = summarize(eif, psi, setup.alpha, setup.standardization, tuning)?;
    out.rotations = psis;
    Ok(out)
}
