//! Nuisance regressors for `π(x) = E(A | X = x)` and `μ(x) = E(Y | X = x)`.
//!
//! [`NuisanceSpec`] is the declarative form used in configuration files and
//! on the command line; [`fit`] resolves its tuning rule against the
//! training-fold size and returns an immutable [`FittedRegressor`]. A fitted
//! regressor owns a copy of its training fold and never sees other rows.

pub mod bandwidth;
pub mod cda;
pub mod forest;
pub mod knn;
pub mod local_poly;
pub mod neighbors;

use serde::{Deserialize, Serialize};

use crate::data::Covariates;
use crate::datagen::TruthFn;
use crate::error::{Error, Result};
use crate::kernels::KernelChoice;
use crate::stats;

pub use bandwidth::{resolve_bandwidth, BandwidthRule, Tuning};
pub use cda::{fit_cda_kernel, uniform_density, CdaRegressor, DensityFn};
pub use forest::{fit_centered_forest, CenteredForest};
pub use knn::{fit_knn, KnnRegressor};
pub use local_poly::{fit_local_poly, LocalPolyRegressor};

fn default_trees() -> usize {
    200
}

fn default_leaf_exponent() -> f64 {
    0.5
}

/// Declarative nuisance estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum NuisanceSpec {
    Knn {
        rule: BandwidthRule,
    },
    LocalPoly {
        rule: BandwidthRule,
        #[serde(default)]
        kernel: KernelChoice,
    },
    CdaKernel {
        rule: BandwidthRule,
        #[serde(default)]
        kernel: KernelChoice,
    },
    /// `k_n` defaults to `round(n^k_n_exponent)`.
    CenteredForest {
        #[serde(default)]
        k_n: Option<usize>,
        #[serde(default = "default_leaf_exponent")]
        k_n_exponent: f64,
        #[serde(default = "default_trees")]
        n_trees: usize,
    },
    /// The true regression function plus a constant offset.
    Oracle {
        #[serde(default)]
        offset: f64,
    },
    Zero,
    TrainingMean,
}

impl NuisanceSpec {
    pub fn knn(k: usize) -> Self {
        Self::Knn { rule: BandwidthRule::fixed(k as f64) }
    }

    pub fn oracle() -> Self {
        Self::Oracle { offset: 0.0 }
    }

    pub fn centered_forest() -> Self {
        Self::CenteredForest { k_n: None, k_n_exponent: 0.5, n_trees: 200 }
    }

    pub fn method_name(&self) -> &'static str {
        match self {
            Self::Knn { .. } => "knn",
            Self::LocalPoly { .. } => "local_poly",
            Self::CdaKernel { .. } => "cda_kernel",
            Self::CenteredForest { .. } => "centered_forest",
            Self::Oracle { .. } => "oracle",
            Self::Zero => "zero",
            Self::TrainingMean => "training_mean",
        }
    }

    /// True if fitting consumes no training responses.
    pub fn ignores_training_data(&self) -> bool {
        matches!(self, Self::Oracle { .. } | Self::Zero)
    }
}

/// Side information available to a fit.
#[derive(Clone, Default)]
pub struct FitContext {
    /// True regression function, used only by [`NuisanceSpec::Oracle`].
    pub truth: Option<TruthFn>,
    /// Known covariate density for CDA kernels; uniform when absent.
    pub density: Option<DensityFn>,
    /// Seed for randomised regressors.
    pub seed: u64,
}

impl std::fmt::Debug for FitContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FitContext")
            .field("truth", &self.truth.is_some())
            .field("density", &self.density.is_some())
            .field("seed", &self.seed)
            .finish()
    }
}

impl FitContext {
    pub fn with_truth(truth: TruthFn) -> Self {
        Self { truth: Some(truth), ..Self::default() }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Resolved tuning written to manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TuningRecord {
    pub method: String,
    pub n_train: usize,
    pub d: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adaptive_k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_trees: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offset: Option<f64>,
}

/// A trained nuisance estimate.
#[derive(Clone)]
pub enum FittedRegressor {
    Knn(KnnRegressor),
    LocalPoly(LocalPolyRegressor),
    CdaKernel(CdaRegressor),
    CenteredForest(CenteredForest),
    Oracle { truth: TruthFn, offset: f64 },
    Constant(f64),
}

impl std::fmt::Debug for FittedRegressor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Knn(r) => r.fmt(f),
            Self::LocalPoly(r) => r.fmt(f),
            Self::CdaKernel(r) => r.fmt(f),
            Self::CenteredForest(r) => r.fmt(f),
            Self::Oracle { offset, .. } => write!(f, "Oracle {{ offset: {offset} }}"),
            Self::Constant(c) => write!(f, "Constant({c})"),
        }
    }
}

fn knn_count(tuning: Tuning) -> Result<usize> {
    match tuning {
        Tuning::Neighbors(k) => Ok(k),
        Tuning::Bandwidth(v) if v >= 1.0 && v.fract() == 0.0 => Ok(v as usize),
        Tuning::Bandwidth(v) => Err(Error::invalid(format!("k-NN needs an integer k >= 1, got {v}"))),
        Tuning::AdaptiveNeighbors(_) => Err(Error::invalid("adaptive bandwidths do not apply to k-NN")),
    }
}

/// Train `spec` on `(x, response)`.
pub fn fit(spec: &NuisanceSpec, x: &Covariates, response: &[f64], ctx: &FitContext) -> Result<FittedRegressor> {
    let n = x.len();
    let d = x.dim();
    if response.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: response.len() });
    }
    match spec {
        NuisanceSpec::Knn { rule } => {
            let k = knn_count(resolve_bandwidth(rule, n, d)?)?;
            Ok(FittedRegressor::Knn(fit_knn(x, response, k)?))
        }
        NuisanceSpec::LocalPoly { rule, kernel } => {
            let tuning = resolve_bandwidth(rule, n, d)?;
            Ok(FittedRegressor::LocalPoly(fit_local_poly(x, response, tuning, kernel.build(d)?)?))
        }
        NuisanceSpec::CdaKernel { rule, kernel } => {
            let h = match resolve_bandwidth(rule, n, d)? {
                Tuning::Bandwidth(h) => h,
                other => {
                    return Err(Error::invalid(format!("CDA kernel regression needs a bandwidth, got {other:?}")))
                }
            };
            let density = ctx.density.clone().unwrap_or_else(uniform_density);
            Ok(FittedRegressor::CdaKernel(fit_cda_kernel(x, response, h, kernel.build(d)?, &density)?))
        }
        NuisanceSpec::CenteredForest { k_n, k_n_exponent, n_trees } => {
            let k_n = match k_n {
                Some(k) => *k,
                None => {
                    if !(*k_n_exponent > 0.0 && *k_n_exponent <= 1.0) {
                        return Err(Error::invalid("k_n_exponent must lie in (0, 1]"));
                    }
                    ((n as f64).powf(*k_n_exponent).round() as usize).max(1)
                }
            };
            Ok(FittedRegressor::CenteredForest(fit_centered_forest(x, response, k_n, *n_trees, ctx.seed)?))
        }
        NuisanceSpec::Oracle { offset } => {
            let truth = ctx
                .truth
                .clone()
                .ok_or_else(|| Error::Unsupported("oracle nuisance needs a known regression function".into()))?;
            Ok(FittedRegressor::Oracle { truth, offset: *offset })
        }
        NuisanceSpec::Zero => Ok(FittedRegressor::Constant(0.0)),
        NuisanceSpec::TrainingMean => {
            if n == 0 {
                return Err(Error::EmptyFold("training"));
            }
            Ok(FittedRegressor::Constant(stats::mean(response)))
        }
    }
}

impl FittedRegressor {
    pub fn predict(&self, q: &[f64]) -> f64 {
        match self {
            Self::Knn(r) => r.predict(q),
            Self::LocalPoly(r) => r.predict(q),
            Self::CdaKernel(r) => r.predict(q),
            Self::CenteredForest(r) => r.predict(q),
            Self::Oracle { truth, offset } => truth(q) + offset,
            Self::Constant(c) => *c,
        }
    }

    pub fn predict_many(&self, x: &Covariates) -> Vec<f64> {
        x.rows().map(|q| self.predict(q)).collect()
    }

    pub fn method_name(&self) -> &'static str {
        match self {
            Self::Knn(_) => "knn",
            Self::LocalPoly(_) => "local_poly",
            Self::CdaKernel(_) => "cda_kernel",
            Self::CenteredForest(_) => "centered_forest",
            Self::Oracle { .. } => "oracle",
            Self::Constant(_) => "constant",
        }
    }

    pub fn as_knn(&self) -> Option<&KnnRegressor> {
        match self {
            Self::Knn(r) => Some(r),
            _ => None,
        }
    }

    pub fn as_local_poly(&self) -> Option<&LocalPolyRegressor> {
        match self {
            Self::LocalPoly(r) => Some(r),
            _ => None,
        }
    }

    /// Resolved tuning for manifests.
    pub fn tuning(&self, spec: &NuisanceSpec, n_train: usize, d: usize) -> TuningRecord {
        let mut t = TuningRecord { method: self.method_name().into(), n_train, d, ..Default::default() };
        match spec {
            NuisanceSpec::Knn { rule } | NuisanceSpec::LocalPoly { rule, .. } | NuisanceSpec::CdaKernel { rule, .. } => {
                t.rule = Some(rule.name().into());
            }
            _ => {}
        }
        match self {
            Self::Knn(r) => t.k = Some(r.k()),
            Self::LocalPoly(r) => {
                t.bandwidth = r.fixed_bandwidth();
                t.adaptive_k = r.adaptive_k();
                t.kernel = Some(r.kernel().label());
            }
            Self::CdaKernel(r) => {
                t.bandwidth = Some(r.bandwidth());
                t.kernel = Some(r.kernel().label());
            }
            Self::CenteredForest(r) => {
                t.k_n = Some(r.k_n());
                t.n_trees = Some(r.n_trees());
            }
            Self::Oracle { offset, .. } => t.offset = Some(*offset),
            Self::Constant(_) => {}
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::gen_doppler_dataset;
    use std::sync::Arc;

    #[test]
    fn specs_parse_from_toml() {
        let s: NuisanceSpec = toml::from_str(
            "method = \"cda_kernel\"\nrule = { rule = \"mse_optimal\", s = 0.35 }\nkernel = { family = \"higher_order\", order = 4 }\n",
        )
        .unwrap();
        assert_eq!(
            s,
            NuisanceSpec::CdaKernel {
                rule: BandwidthRule::mse_optimal(0.35),
                kernel: KernelChoice::HigherOrder { order: 4 }
            }
        );
        let f: NuisanceSpec = toml::from_str("method = \"centered_forest\"\n").unwrap();
        assert_eq!(f, NuisanceSpec::centered_forest());
    }

    #[test]
    fn fold_isolation() {
        let ds = gen_doppler_dataset(90, 0.1, 3).unwrap();
        let train: Vec<usize> = (0..45).collect();
        let other: Vec<usize> = (45..90).collect();
        let specs = [
            NuisanceSpec::knn(5),
            NuisanceSpec::LocalPoly { rule: BandwidthRule::adaptive_knn10(), kernel: KernelChoice::Epanechnikov },
            NuisanceSpec::CdaKernel { rule: BandwidthRule::fixed(0.1), kernel: KernelChoice::Epanechnikov },
            NuisanceSpec::centered_forest(),
            NuisanceSpec::TrainingMean,
        ];
        let mut perturbed = ds.clone();
        for &i in &other {
            perturbed.y[i] += 100.0;
        }
        let ctx = FitContext::default().seed(4);
        for spec in &specs {
            let a = ds.subset(&train);
            let b = perturbed.subset(&train);
            let fa = fit(spec, &a.x, &a.y, &ctx).unwrap();
            let fb = fit(spec, &b.x, &b.y, &ctx).unwrap();
            let q = ds.subset(&other).x;
            assert_eq!(fa.predict_many(&q), fb.predict_many(&q), "{spec:?}");
        }
    }

    #[test]
    fn oracle_needs_truth() {
        let x = Covariates::from_column(vec![0.1, 0.2, 0.3]);
        assert!(fit(&NuisanceSpec::oracle(), &x, &[0.0; 3], &FitContext::default()).is_err());
        let ctx = FitContext::with_truth(Arc::new(|q: &[f64]| 2.0 * q[0]));
        let f = fit(&NuisanceSpec::Oracle { offset: 0.5 }, &x, &[0.0; 3], &ctx).unwrap();
        assert_eq!(f.predict(&[0.25]), 1.0);
    }

    #[test]
    fn mismatched_rules_rejected() {
        let x = Covariates::from_column(vec![0.1, 0.2, 0.3, 0.4]);
        let y = [0.0; 4];
        let ctx = FitContext::default();
        assert!(fit(&NuisanceSpec::Knn { rule: BandwidthRule::fixed(2.5) }, &x, &y, &ctx).is_err());
        assert!(fit(&NuisanceSpec::Knn { rule: BandwidthRule::adaptive_knn10() }, &x, &y, &ctx).is_err());
        let cda = NuisanceSpec::CdaKernel { rule: BandwidthRule::adaptive_knn10(), kernel: KernelChoice::Box };
        assert!(fit(&cda, &x, &y, &ctx).is_err());
        let lpr = NuisanceSpec::LocalPoly { rule: BandwidthRule::knn_log_n(), kernel: KernelChoice::Box };
        assert!(fit(&lpr, &x, &y, &ctx).is_err());
    }

    #[test]
    fn tuning_records_resolved_values() {
        let ds = gen_doppler_dataset(200, 0.1, 1).unwrap();
        let spec = NuisanceSpec::Knn { rule: BandwidthRule::knn_log_n() };
        let f = fit(&spec, &ds.x, &ds.y, &FitContext::default()).unwrap();
        let t = f.tuning(&spec, 200, 1);
        assert_eq!(t.k, Some(5));
        assert_eq!(t.rule.as_deref(), Some("knn_log_n"));
        let json = serde_json::to_string(&t).unwrap();
        assert!(!json.contains("bandwidth"));
    }
}
