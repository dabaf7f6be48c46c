//! Inference study over Hölder-smooth designs (and the custom study).
//!
//! Every estimator cycles the three folds, so each uses the full sample.
//! Within a cell the Hölder function is calibrated to the fold size
//! (`n_ref = fold_size`) and all estimators see the same datasets.

use std::time::Instant;

use rayon::prelude::*;

use crate::datagen::{Dgp, DgpSpec, HolderFunctionSpec};
use crate::error::{Error, Result};
use crate::estimator::{cycle_folds_average, CrossFit, EstimatorSetup, ThreeFoldSplit};
use crate::harness::config::{Cell, DgpChoice, EstimatorConfig, EstimatorKind, ExperimentConfig, Study};
use crate::harness::records::{summarize, SimRecord, Summaries, TimingRecord};
use crate::harness::seeds::seed_for;
use crate::inference::{standardize, Standardization};
use crate::kernels::KernelChoice;
use crate::nuisance::{BandwidthRule, FitContext, NuisanceSpec};
use crate::rng;

/// Level of the per-group KS test written to `ks.csv`.
pub const KS_LEVEL: f64 = 0.01;

/// Kernel for an MSE-rate CDA fit at smoothness `s`: Epanechnikov while its
/// order suffices, otherwise a Legendre kernel of order `⌊s⌋ + 1`.
pub fn mse_kernel(s: f64) -> KernelChoice {
    if s <= 2.0 {
        KernelChoice::Epanechnikov
    } else {
        KernelChoice::HigherOrder { order: s.floor() as usize + 1 }
    }
}

/// Higher-order kernel for the undersmoothed fit: order `max(2, ⌊s⌋ + 1)`.
pub fn undersmoothing_kernel(s: f64) -> KernelChoice {
    KernelChoice::HigherOrder { order: (s.floor() as usize + 1).max(2) }
}

/// Concrete nuisances and cross-fitting for one estimator in one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedEstimator {
    pub mu: NuisanceSpec,
    pub pi: NuisanceSpec,
    pub cross_fit: CrossFit,
    pub standardization: Standardization,
}

/// Resolve `kind` for a cell; `None` when it does not apply (the LPR
/// estimator is only run for `d = 1`).
pub fn resolve_estimator(kind: &EstimatorKind, cell: Option<Cell>, d: usize) -> Result<Option<ResolvedEstimator>> {
    let need_s = |what: &str| -> Result<f64> {
        cell.map(|c| c.s).ok_or_else(|| Error::Config(format!("{what} needs a Hölder design with known smoothness")))
    };
    Ok(Some(match kind {
        EstimatorKind::ScdrMse { c } => {
            let s = need_s("scdr_mse")?;
            let spec = NuisanceSpec::CdaKernel { rule: BandwidthRule::MseOptimal { s, c: *c }, kernel: mse_kernel(s) };
            ResolvedEstimator { mu: spec.clone(), pi: spec, cross_fit: CrossFit::Single, standardization: Standardization::RootN }
        }
        EstimatorKind::DcdrLpr { k } => {
            if d != 1 {
                return Ok(None);
            }
            let spec = NuisanceSpec::LocalPoly { rule: BandwidthRule::AdaptiveKnn10 { k: *k }, kernel: KernelChoice::Epanechnikov };
            ResolvedEstimator { mu: spec.clone(), pi: spec, cross_fit: CrossFit::Double, standardization: Standardization::RootN }
        }
        EstimatorKind::DcdrKnown { c, epsilon } => {
            let s = need_s("dcdr_known")?;
            let slow = s < d as f64 / 4.0;
            let rule = if slow {
                BandwidthRule::SuboptCda { alpha: s, beta: s, epsilon: *epsilon, c: *c }
            } else {
                BandwidthRule::MinimaxCda { alpha: s, beta: s, c: *c }
            };
            ResolvedEstimator {
                mu: NuisanceSpec::CdaKernel { rule, kernel: undersmoothing_kernel(s) },
                pi: NuisanceSpec::CdaKernel { rule: BandwidthRule::MseOptimal { s, c: *c }, kernel: mse_kernel(s) },
                cross_fit: CrossFit::Double,
                standardization: if slow { Standardization::ConditionalSlow } else { Standardization::RootN },
            }
        }
        EstimatorKind::Custom { mu, pi, cross_fit, standardization } => {
            ResolvedEstimator { mu: mu.clone(), pi: pi.clone(), cross_fit: *cross_fit, standardization: *standardization }
        }
        EstimatorKind::DcdrKnn | EstimatorKind::ScdrKnn | EstimatorKind::Nuisance { .. } => {
            return Err(Error::Config("estimator kind is not valid for the inference study".into()))
        }
    }))
}

#[derive(Debug, Clone, Default)]
pub struct HolderResult {
    pub records: Vec<SimRecord>,
    pub timings: Vec<TimingRecord>,
    pub summaries: Summaries,
}

impl HolderResult {
    pub fn coverage(&self, cell: &str, estimator: &str, fold_size: usize) -> Option<f64> {
        self.summaries
            .coverage
            .iter()
            .find(|r| r.cell == cell && r.estimator == estimator && r.fold_size == fold_size)
            .map(|r| r.coverage)
    }

    pub fn ks(&self, cell: &str, estimator: &str, fold_size: usize) -> Option<&crate::harness::records::KsRow> {
        self.summaries.ks.iter().find(|r| r.cell == cell && r.estimator == estimator && r.fold_size == fold_size)
    }
}

/// A design the runner iterates over.
#[derive(Debug, Clone, Copy)]
enum Design {
    Doppler,
    Holder(Cell),
}

impl Design {
    fn id(&self) -> String {
        match self {
            Self::Doppler => "doppler".into(),
            Self::Holder(c) => c.id(),
        }
    }

    fn dim(&self) -> usize {
        match self {
            Self::Doppler => 1,
            Self::Holder(c) => c.d,
        }
    }

    fn cell(&self) -> Option<Cell> {
        match self {
            Self::Doppler => None,
            Self::Holder(c) => Some(*c),
        }
    }

    fn build(&self, config: &ExperimentConfig, fold_size: usize) -> Result<Dgp> {
        match self {
            Self::Doppler => DgpSpec::doppler(config.noise_variance).build(),
            Self::Holder(c) => {
                let seed = rng::derive_seed(config.seed, &[rng::label("holder-function"), rng::label(&c.id())]);
                let spec = HolderFunctionSpec::new(c.s, c.d, fold_size).with_amplitude(config.amplitude).with_seed(seed);
                DgpSpec::holder(spec, config.noise_variance).build()
            }
        }
    }
}

fn designs(config: &ExperimentConfig) -> Vec<Design> {
    if config.study == Study::Custom && config.dgp == DgpChoice::Doppler {
        vec![Design::Doppler]
    } else {
        config.holder_cells().into_iter().map(Design::Holder).collect()
    }
}

struct Replicate {
    records: Vec<Option<SimRecord>>,
    wall_ms: Vec<f64>,
}

fn run_estimator(
    config: &ExperimentConfig,
    est: &EstimatorConfig,
    resolved: &ResolvedEstimator,
    dgp: &Dgp,
    design: &Design,
    data: &crate::data::Dataset,
    partition: &ThreeFoldSplit,
    fold_size: usize,
    sim: usize,
    hash: &str,
) -> Result<SimRecord> {
    let cell_id = format!("{}_n{fold_size}", design.id());
    let seeds = seed_for(sim, &est.id, &cell_id, config.seed);
    let ctx = FitContext::with_truth(dgp.truth());
    let setup = EstimatorSetup::new(resolved.mu.clone(), resolved.pi.clone(), config.alpha)
        .contexts(ctx.clone().seed(seeds.fit), ctx.seed(rng::derive_seed(seeds.fit, &[rng::label("pi")])))
        .standardization(resolved.standardization);
    let e = cycle_folds_average(data, partition, resolved.cross_fit, &setup)?;
    let psi_true = dgp.psi_true();
    let z = standardize(e.psi_hat, psi_true, e.variance_hat, e.n_phi, resolved.standardization).map(|s| s.value).unwrap_or(f64::NAN);
    let cell = design.cell();
    Ok(SimRecord {
        study: config.study.as_str().into(),
        cell: design.id(),
        dgp: match design {
            Design::Doppler => "doppler".into(),
            Design::Holder(_) => "holder".into(),
        },
        d: design.dim(),
        s: cell.map(|c| c.s),
        noise_variance: config.noise_variance,
        estimator: est.id.clone(),
        fold_size,
        sim,
        psi_hat: e.psi_hat,
        psi_true,
        standardized_stat: z,
        standardization: resolved.standardization.as_str().into(),
        variance_hat: e.variance_hat,
        ci_low: e.ci_low,
        ci_high: e.ci_high,
        covered: e.ci_low <= psi_true && psi_true <= e.ci_high,
        dataset_hash: hash.to_string(),
    })
}

pub fn run_holder_inference(config: &ExperimentConfig) -> Result<HolderResult> {
    config.validate()?;
    let n_sims = config.effective_sims();
    let mut out = HolderResult::default();
    for design in designs(config) {
        let d = design.dim();
        let resolved: Vec<Option<ResolvedEstimator>> =
            config.estimators.iter().map(|e| resolve_estimator(&e.kind, design.cell(), d)).collect::<Result<_>>()?;
        // [estimator] records in (fold size, sim) order
        let mut by_est: Vec<Vec<SimRecord>> = vec![Vec::new(); config.estimators.len()];
        for &fold_size in &config.fold_sizes {
            let dgp = design.build(config, fold_size)?;
            let n = 3 * fold_size;
            let partition = ThreeFoldSplit::contiguous(n)?;
            let cell_id = format!("{}_n{fold_size}", design.id());
            let reps: Vec<Replicate> = (0..n_sims)
                .into_par_iter()
                .map(|sim| -> Result<Replicate> {
                    let data = dgp.generate(n, crate::harness::seeds::dataset_seed(sim, &cell_id, config.seed))?;
                    let hash = data.digest();
                    let mut records = Vec::with_capacity(resolved.len());
                    let mut wall_ms = Vec::with_capacity(resolved.len());
                    for (est, r) in config.estimators.iter().zip(&resolved) {
                        let t0 = Instant::now();
                        records.push(match r {
                            Some(r) => Some(run_estimator(config, est, r, &dgp, &design, &data, &partition, fold_size, sim, &hash)?),
                            None => None,
                        });
                        wall_ms.push(t0.elapsed().as_secs_f64() * 1e3);
                    }
                    Ok(Replicate { records, wall_ms })
                })
                .collect::<Result<_>>()?;
            for (sim, rep) in reps.into_iter().enumerate() {
                for (e, (rec, ms)) in rep.records.into_iter().zip(rep.wall_ms).enumerate() {
                    if let Some(rec) = rec {
                        out.timings.push(TimingRecord {
                            study: config.study.as_str().into(),
                            cell: design.id(),
                            estimator: config.estimators[e].id.clone(),
                            fold_size,
                            sim,
                            wall_time_ms: ms,
                        });
                        by_est[e].push(rec);
                    }
                }
            }
        }
        out.records.extend(by_est.into_iter().flatten());
    }
    out.summaries = summarize(&out.records, KS_LEVEL)?;
    Ok(out)
}
