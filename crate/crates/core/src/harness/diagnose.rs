//! Diagnostics study: runs every regressor diagnostic over its configured
//! grid and records a pass/fail flag with the threshold that was applied.

use serde::{Deserialize, Serialize};

use crate::datagen::{DgpSpec, HolderFunctionSpec};
use crate::diagnostics::{
    bias_profile, covariance_condition_report, gram_singularity_rate, log_log_slope, nn_distance_curve,
    CovarianceConditionReport,
};
use crate::error::Result;
use crate::harness::config::{scaled, EstimatorKind, ExperimentConfig};
use crate::kernels::KernelChoice;
use crate::nuisance::{BandwidthRule, NuisanceSpec};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceRow {
    pub estimator: String,
    pub n: usize,
    pub estimate: f64,
    pub n_times_estimate: f64,
    pub scaled: f64,
    pub mc_se: f64,
    pub noise_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnDistanceRow {
    pub d: usize,
    pub n: usize,
    pub mean: f64,
    pub mc_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramRow {
    pub d: usize,
    pub n: usize,
    pub h: f64,
    pub frequency: f64,
    pub mc_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasRow {
    pub estimator: String,
    pub n: usize,
    pub x: f64,
    pub bias: f64,
    pub bias_se: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceCheck {
    pub estimator: String,
    pub ratio: f64,
    pub band: [f64; 2],
    pub pass: bool,
    pub report: CovarianceConditionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeCheck {
    pub d: usize,
    pub slope: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneCheck {
    pub name: String,
    pub values: Vec<f64>,
    pub pass: bool,
}

/// Contents of `diagnostics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    pub covariance: Vec<CovarianceCheck>,
    pub nn_distance: Vec<SlopeCheck>,
    pub gram: MonotoneCheck,
    pub bias: MonotoneCheck,
    pub all_pass: bool,
}

#[derive(Debug, Clone)]
pub struct DiagnosticsBundle {
    pub covariance: Vec<CovarianceRow>,
    pub nn_distance: Vec<NnDistanceRow>,
    pub gram: Vec<GramRow>,
    pub bias: Vec<BiasRow>,
    pub summary: DiagnosticsSummary,
}

pub fn run_diagnostics(config: &ExperimentConfig) -> Result<DiagnosticsBundle> {
    config.validate()?;
    let g = &config.diagnostics;
    let sc = config.scale;
    let seed = config.seed;
    let doppler = DgpSpec::doppler(config.noise_variance).build()?;
    let n_pairs = scaled(g.n_pairs, sc, 10);
    let n_refits = scaled(g.n_refits, sc, 30);

    let mut covariance = Vec::new();
    let mut checks = Vec::new();
    for e in &config.estimators {
        let EstimatorKind::Nuisance { spec } = &e.kind else { unreachable!("validated") };
        let s = rng::derive_seed(seed, &[rng::label("covariance"), rng::label(&e.id)]);
        let rep = covariance_condition_report(spec, &doppler, &g.cov_n_grid, n_pairs, n_refits, s)?;
        for (i, &n) in rep.n_grid.iter().enumerate() {
            covariance.push(CovarianceRow {
                estimator: e.id.clone(),
                n,
                estimate: rep.estimates[i],
                n_times_estimate: rep.n_times_estimate[i],
                scaled: rep.scaled()[i],
                mc_se: rep.mc_se[i],
                noise_floor: rep.noise_floor[i],
            });
        }
        checks.push(CovarianceCheck {
            estimator: e.id.clone(),
            ratio: rep.ratio(),
            band: g.ratio_band,
            pass: rep.passes(g.ratio_band[0], g.ratio_band[1]),
            report: rep,
        });
    }

    let nn_reps = scaled(g.nn_reps, sc, 2);
    let mut nn_distance = Vec::new();
    let mut slopes = Vec::new();
    for &d in &g.nn_dims {
        let curve = nn_distance_curve(d, &g.nn_n_grid, nn_reps, rng::derive_seed(seed, &[rng::label("nn"), d as u64]))?;
        let slope = log_log_slope(&curve);
        let target = -1.0 / d as f64;
        slopes.push(SlopeCheck { d, slope, target, tolerance: g.nn_slope_tolerance, pass: (slope - target).abs() <= g.nn_slope_tolerance });
        nn_distance.extend(curve.iter().map(|p| NnDistanceRow { d, n: p.n, mean: p.mean, mc_se: p.mc_se }));
    }

    let mut hs = g.gram_h_grid.clone();
    hs.sort_by(f64::total_cmp);
    let gram_reps = scaled(g.gram_reps, sc, 1);
    let curve = gram_singularity_rate(1, &hs, g.gram_n, gram_reps, rng::derive_seed(seed, &[rng::label("gram")]))?;
    let freqs: Vec<f64> = curve.iter().map(|p| p.frequency).collect();
    let gram_check = MonotoneCheck { name: "gram singularity nonincreasing in h".into(), pass: freqs.windows(2).all(|w| w[1] <= w[0]), values: freqs };
    let gram: Vec<GramRow> = curve.iter().map(|p| GramRow { d: 1, n: g.gram_n, h: p.h, frequency: p.frequency, mc_se: p.mc_se }).collect();

    let target = HolderFunctionSpec::new(g.bias_smoothness, 1, g.bias_n_ref).with_seed(rng::derive_seed(seed, &[rng::label("bias-target")]));
    let holder = DgpSpec::holder(target, config.noise_variance).build()?;
    let lpr = NuisanceSpec::LocalPoly { rule: BandwidthRule::undersmoothed_lpr(), kernel: KernelChoice::Epanechnikov };
    let m = g.bias_grid_points;
    let grid: Vec<Vec<f64>> = (1..=m).map(|i| vec![i as f64 / (m + 1) as f64]).collect();
    let bias_refits = scaled(g.bias_refits, sc, 2);
    let mut bias = Vec::new();
    let mut sups = Vec::new();
    for &n in &g.bias_n_grid {
        let p = bias_profile(&lpr, &holder, &holder.truth(), n, bias_refits, &grid, rng::derive_seed(seed, &[rng::label("bias"), n as u64]))?;
        sups.push(p.sup_abs_bias);
        for (i, q) in grid.iter().enumerate() {
            bias.push(BiasRow { estimator: "lpr".into(), n, x: q[0], bias: p.pointwise_bias[i], bias_se: p.bias_se[i], variance: p.pointwise_variance[i] });
        }
    }
    let bias_check = MonotoneCheck { name: "lpr sup |bias| decreasing in n".into(), pass: sups.windows(2).all(|w| w[1] < w[0]), values: sups };

    let all_pass = checks.iter().all(|c| c.pass) && slopes.iter().all(|c| c.pass) && gram_check.pass && bias_check.pass;
    Ok(DiagnosticsBundle {
        covariance,
        nn_distance,
        gram,
        bias,
        summary: DiagnosticsSummary { covariance: checks, nn_distance: slopes, gram: gram_check, bias: bias_check, all_pass },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{EstimatorConfig, Study};

    fn small() -> ExperimentConfig {
        let mut c = ExperimentConfig::preset(Study::Diagnostics);
        c.estimators = vec![EstimatorConfig::new("knn", EstimatorKind::Nuisance { spec: NuisanceSpec::Knn { rule: BandwidthRule::knn_log_n() } })];
        let g = &mut c.diagnostics;
        g.cov_n_grid = vec![100, 200];
        g.n_pairs = 10;
        g.n_refits = 30;
        g.nn_n_grid = vec![10, 40];
        g.nn_reps = 50;
        g.gram_reps = 20;
        g.bias_n_grid = vec![200, 400];
        g.bias_refits = 5;
        g.bias_grid_points = 5;
        c
    }

    #[test]
    fn bundle_shapes() {
        let b = run_diagnostics(&small()).unwrap();
        assert_eq!(b.covariance.len(), 2);
        assert_eq!(b.nn_distance.len(), 4);
        assert_eq!(b.gram.len(), small().diagnostics.gram_h_grid.len());
        assert_eq!(b.bias.len(), 10);
        assert_eq!(b.summary.covariance.len(), 1);
    }

    #[test]
    fn empty_estimators_rejected() {
        let mut c = small();
        c.estimators.clear();
        assert!(run_diagnostics(&c).is_err());
    }
}
