//! Experiment configuration.
//!
//! A config file only needs the keys it changes: the file is overlaid on the
//! preset for its study, and command-line flags are applied last
//! (flags > file > preset).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::CrossFit;
use crate::inference::Standardization;
use crate::kernels::KernelChoice;
use crate::nuisance::{BandwidthRule, NuisanceSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    DopplerSweep,
    HolderInference,
    Diagnostics,
    /// User-listed estimators over the Hölder or Doppler cells.
    Custom,
}

impl Study {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::DopplerSweep => "doppler_sweep",
            Self::HolderInference => "holder_inference",
            Self::Diagnostics => "diagnostics",
            Self::Custom => "custom",
        }
    }
}

fn one() -> f64 {
    1.0
}

fn ten() -> usize {
    10
}

/// How an estimator is built within a cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorKind {
    /// k-NN DCDR over the whole `1..=k_max` sweep.
    DcdrKnn,
    /// k-NN SCDR over the sweep; the unused third fold is discarded.
    ScdrKnn,
    /// SCDR with CDA kernels at bandwidth `c·n^{−1/(2s+d)}`.
    ScdrMse {
        #[serde(default = "one")]
        c: f64,
    },
    /// DCDR local-linear regression with a `k`-th-neighbour bandwidth (d = 1).
    DcdrLpr {
        #[serde(default = "ten")]
        k: usize,
    },
    /// DCDR with CDA kernels using the known density and smoothness: `μ̂`
    /// undersmoothed with a higher-order kernel, `π̂` at the MSE rate.
    DcdrKnown {
        #[serde(default = "one")]
        c: f64,
        #[serde(default)]
        epsilon: Option<f64>,
    },
    Custom {
        mu: NuisanceSpec,
        pi: NuisanceSpec,
        cross_fit: CrossFit,
        #[serde(default)]
        standardization: Standardization,
    },
    /// Subject of the regressor diagnostics.
    Nuisance { spec: NuisanceSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub id: String,
    #[serde(flatten)]
    pub kind: EstimatorKind,
}

impl EstimatorConfig {
    pub fn new(id: &str, kind: EstimatorKind) -> Self {
        Self { id: id.to_string(), kind }
    }
}

/// One (dimension, smoothness) design of the Hölder study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub d: usize,
    pub s: f64,
}

impl Cell {
    pub fn id(&self) -> String {
        format!("d{}_s{}", self.d, self.s)
    }
}

/// Cells of the published Hölder study.
pub fn default_holder_cells() -> Vec<Cell> {
    let mut v: Vec<Cell> = [0.1, 0.35, 0.6].iter().map(|&s| Cell { d: 1, s }).collect();
    v.extend([0.6, 1.5, 2.5].iter().map(|&s| Cell { d: 4, s }));
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DgpChoice {
    Doppler,
    #[default]
    Holder,
}

/// Grids and Monte Carlo sizes for the diagnostics study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnosticsConfig {
    pub cov_n_grid: Vec<usize>,
    pub n_pairs: usize,
    pub n_refits: usize,
    pub ratio_band: [f64; 2],
    pub nn_dims: Vec<usize>,
    pub nn_n_grid: Vec<usize>,
    pub nn_reps: usize,
    pub nn_slope_tolerance: f64,
    pub gram_n: usize,
    pub gram_h_grid: Vec<f64>,
    pub gram_reps: usize,
    pub bias_smoothness: f64,
    pub bias_n_ref: usize,
    pub bias_n_grid: Vec<usize>,
    pub bias_refits: usize,
    pub bias_grid_points: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            cov_n_grid: vec![500, 2000],
            n_pairs: 50,
            n_refits: 200,
            ratio_band: [0.25, 4.0],
            nn_dims: vec![1, 2],
            nn_n_grid: vec![250, 1000, 4000, 16000],
            nn_reps: 400,
            nn_slope_tolerance: 0.15,
            gram_n: 200,
            gram_h_grid: vec![0.0005, 0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.5, 2.0],
            gram_reps: 500,
            bias_smoothness: 0.35,
            bias_n_ref: 500,
            bias_n_grid: vec![500, 2000, 8000],
            bias_refits: 60,
            bias_grid_points: 19,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub study: Study,
    /// Size of each of the three folds; datasets have `3 × fold_size` rows.
    pub fold_sizes: Vec<usize>,
    /// Filters the Hölder cells when `cells` is empty.
    #[serde(default)]
    pub smoothness_grid: Vec<f64>,
    #[serde(default)]
    pub dims: Vec<usize>,
    /// Explicit Hölder cells; overrides `dims` × `smoothness_grid`.
    #[serde(default)]
    pub cells: Vec<Cell>,
    pub n_sims: usize,
    pub estimators: Vec<EstimatorConfig>,
    pub alpha: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Noise variance, equal to the true ECC.
    pub noise_variance: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
    /// Largest `k` in the Doppler sweep.
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    /// Multiplier on `n_sims` (and on the diagnostic replication counts).
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub jobs: Option<usize>,
    /// Design for the custom study.
    #[serde(default)]
    pub dgp: DgpChoice,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
}

fn default_k_max() -> usize {
    30
}

fn lpr_undersmoothed() -> NuisanceSpec {
    NuisanceSpec::LocalPoly { rule: BandwidthRule::undersmoothed_lpr(), kernel: KernelChoice::Epanechnikov }
}

impl ExperimentConfig {
    pub fn preset(study: Study) -> Self {
        let base = Self {
            study,
            fold_sizes: vec![100, 200, 350, 700, 1500, 3000],
            smoothness_grid: Vec::new(),
            dims: Vec::new(),
            cells: Vec::new(),
            n_sims: 100,
            estimators: Vec::new(),
            alpha: 0.05,
            seed: 20240101,
            output_dir: PathBuf::from("out").join(study.as_str()),
            noise_variance: 10.0,
            amplitude: 1.0,
            k_max: 30,
            scale: 1.0,
            jobs: None,
            dgp: DgpChoice::Holder,
            diagnostics: DiagnosticsConfig::default(),
        };
        match study {
            Study::DopplerSweep => Self {
                fold_sizes: vec![50, 100, 200, 500, 1000, 2000],
                n_sims: 500,
                noise_variance: 0.1,
                estimators: vec![
                    EstimatorConfig::new("dcdr", EstimatorKind::DcdrKnn),
                    EstimatorConfig::new("scdr", EstimatorKind::ScdrKnn),
                ],
                ..base
            },
            Study::HolderInference => Self {
                estimators: vec![
                    EstimatorConfig::new("scdr_mse", EstimatorKind::ScdrMse { c: 1.0 }),
                    EstimatorConfig::new("dcdr_lpr", EstimatorKind::DcdrLpr { k: 10 }),
                    EstimatorConfig::new("dcdr_known", EstimatorKind::DcdrKnown { c: 1.0, epsilon: None }),
                ],
                ..base
            },
            Study::Diagnostics => Self {
                fold_sizes: Vec::new(),
                n_sims: 1,
                noise_variance: 0.1,
                estimators: vec![
                    EstimatorConfig::new("knn", EstimatorKind::Nuisance { spec: NuisanceSpec::Knn { rule: BandwidthRule::knn_log_n() } }),
                    EstimatorConfig::new("lpr", EstimatorKind::Nuisance { spec: lpr_undersmoothed() }),
                    EstimatorConfig::new(
                        "cda",
                        EstimatorKind::Nuisance {
                            spec: NuisanceSpec::CdaKernel { rule: BandwidthRule::minimax_cda(1.0, 1.0), kernel: KernelChoice::Epanechnikov },
                        },
                    ),
                    EstimatorConfig::new("forest", EstimatorKind::Nuisance { spec: NuisanceSpec::centered_forest() }),
                ],
                ..base
            },
            Study::Custom => Self {
                estimators: vec![EstimatorConfig::new(
                    "dcdr_lpr",
                    EstimatorKind::Custom {
                        mu: lpr_undersmoothed(),
                        pi: lpr_undersmoothed(),
                        cross_fit: CrossFit::Double,
                        standardization: Standardization::RootN,
                    },
                )],
                ..base
            },
        }
    }

    /// Parse a TOML document, overlaying it on the preset for its study.
    /// `fallback` names the study when the file has no `study` key.
    pub fn from_toml_str(text: &str, fallback: Option<Study>) -> Result<Self> {
        let file: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let study = match file.get("study") {
            Some(v) => Study::deserialize(v.clone()).map_err(|e| Error::Config(format!("study: {e}")))?,
            None => fallback.ok_or_else(|| Error::Config("config has no `study` key".into()))?,
        };
        if let (Some(f), true) = (fallback, file.contains_key("study")) {
            if f != study {
                return Err(Error::Config(format!("config is for study `{}`, not `{}`", study.as_str(), f.as_str())));
            }
        }
        let preset = toml::Table::try_from(Self::preset(study)).map_err(|e| Error::Config(e.to_string()))?;
        let mut merged = preset;
        overlay(&mut merged, file);
        merged.insert("study".into(), toml::Value::String(study.as_str().into()));
        let cfg: Self = toml::Value::Table(merged).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path, fallback: Option<Study>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text, fallback)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// `n_sims` after applying `scale`; at least 1.
    pub fn effective_sims(&self) -> usize {
        scaled(self.n_sims, self.scale, 1)
    }

    /// Hölder cells to run.
    pub fn holder_cells(&self) -> Vec<Cell> {
        if !self.cells.is_empty() {
            return self.cells.clone();
        }
        default_holder_cells()
            .into_iter()
            .filter(|c| self.dims.is_empty() || self.dims.contains(&c.d))
            .filter(|c| self.smoothness_grid.is_empty() || self.smoothness_grid.iter().any(|s| (s - c.s).abs() < 1e-12))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_sims < 1 {
            return bad("n_sims must be at least 1".into());
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return bad(format!("scale must be positive, got {}", self.scale));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.noise_variance > 0.0 && self.noise_variance.is_finite()) {
            return bad(format!("noise_variance must be positive, got {}", self.noise_variance));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return bad(format!("amplitude must be non-negative, got {}", self.amplitude));
        }
        if let Some(0) = self.jobs {
            return bad("jobs must be at least 1".into());
        }
        if self.estimators.is_empty() {
            return bad("estimator list is empty".into());
        }
        let mut ids: Vec<&str> = self.estimators.iter().map(|e| e.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return bad("estimator ids must be unique".into());
        }
        if self.study != Study::Diagnostics {
            if self.fold_sizes.is_empty() {
                return bad("fold_sizes is empty".into());
            }
            if let Some(n) = self.fold_sizes.iter().find(|&&n| n < 10) {
                return bad(format!("fold sizes must be at least 10, got {n}"));
            }
        }
        for e in &self.estimators {
            let ok = match (&e.kind, self.study) {
                (EstimatorKind::DcdrKnn | EstimatorKind::ScdrKnn, Study::DopplerSweep) => true,
                (EstimatorKind::Nuisance { .. }, Study::Diagnostics) => true,
                (
                    EstimatorKind::ScdrMse { .. } | EstimatorKind::DcdrLpr { .. } | EstimatorKind::DcdrKnown { .. },
                    Study::HolderInference | Study::Custom,
                ) => true,
                (EstimatorKind::Custom { .. }, Study::HolderInference | Study::Custom) => true,
                _ => false,
            };
            if !ok {
                return bad(format!("estimator `{}` is not valid for study `{}`", e.id, self.study.as_str()));
            }
            match &e.kind {
                EstimatorKind::ScdrMse { c } | EstimatorKind::DcdrKnown { c, .. } if !(*c > 0.0) => {
                    return bad(format!("estimator `{}`: bandwidth constant must be positive", e.id));
                }
                EstimatorKind::DcdrLpr { k } if *k < 1 => {
                    return bad(format!("estimator `{}`: k must be at least 1", e.id));
                }
                _ => {}
            }
        }
        match self.study {
            Study::DopplerSweep => {
                if self.k_max < 1 {
                    return bad("k_max must be at least 1".into());
                }
                let smallest = *self.fold_sizes.iter().min().expect("non-empty");
                if self.k_max > smallest {
                    return bad(format!("k_max = {} exceeds the smallest fold size {smallest}", self.k_max));
                }
            }
            Study::HolderInference | Study::Custom if self.study == Study::HolderInference || self.dgp == DgpChoice::Holder => {
                let cells = self.holder_cells();
                if cells.is_empty() {
                    return bad("no Hölder cells selected".into());
                }
                for c in &cells {
                    if c.d < 1 || !(c.s > 0.0 && c.s.is_finite()) {
                        return bad(format!("invalid cell (d = {}, s = {})", c.d, c.s));
                    }
                }
            }
            Study::Diagnostics => {
                let g = &self.diagnostics;
                if g.cov_n_grid.is_empty() || g.nn_n_grid.is_empty() || g.bias_n_grid.is_empty() || g.gram_h_grid.is_empty() {
                    return bad("diagnostic grids must be non-empty".into());
                }
                if g.n_pairs < 10 || g.n_refits < 30 {
                    return bad("diagnostics need n_pairs >= 10 and n_refits >= 30".into());
                }
                if g.nn_n_grid.iter().any(|&n| n < 10) {
                    return bad("nn_n_grid sizes must be at least 10".into());
                }
                if g.gram_h_grid.iter().any(|h| !(*h > 0.0)) {
                    return bad("gram bandwidths must be positive".into());
                }
                if !(g.ratio_band[0] > 0.0 && g.ratio_band[0] < g.ratio_band[1]) {
                    return bad("ratio_band must be an increasing positive pair".into());
                }
            }
            _ => {}
        }
        Ok(())
    }
}

pub(crate) fn scaled(n: usize, scale: f64, floor: usize) -> usize {
    ((n as f64 * scale).round() as usize).max(floor)
}

fn overlay(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => overlay(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
