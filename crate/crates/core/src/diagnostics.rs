//! Monte Carlo checks of the structural conditions the estimators rely on:
//! the covariance condition, pointwise bias/variance of a regressor,
//! nearest-neighbour distance scaling and local-polynomial Gram singularity.
//!
//! Everything is deterministic given the seed; refits run in parallel but
//! are accumulated in index order.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Covariates;
use crate::datagen::{Dgp, TruthFn};
use crate::error::{Error, Result};
use crate::kernels::epanechnikov;
use crate::nuisance::{self, fit_local_poly, FitContext, FittedRegressor, NuisanceSpec, Tuning};
use crate::rng;
use crate::stats;

/// Evaluation point used by the distance and Gram diagnostics.
pub fn cube_center(d: usize) -> Vec<f64> {
    vec![0.5; d]
}

fn uniform_points(d: usize, n: usize, r: &mut rng::SimRng) -> Covariates {
    Covariates::new(d, (0..n * d).map(|_| r.random::<f64>()).collect()).expect("shape is consistent")
}

/// Result of [`estimate_covariance_condition`] at one training-set size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEstimate {
    pub n: usize,
    /// `Ê|cov{η̂(X_i), η̂(X_j) | X_i, X_j}|`.
    pub estimate: f64,
    pub mc_se: f64,
    /// Expected `|sample covariance|` of independent predictions with the
    /// observed variances: `√(2/π) · mean √(V_i V_j / (R − 1))`. Estimates
    /// near this value are indistinguishable from zero covariance.
    pub noise_floor: f64,
}

/// Estimate `E|cov{η̂(X_i), η̂(X_j) | X_i, X_j}|` for training sets of size `n`.
///
/// `n_pairs` evaluation pairs are drawn from the covariate law; the same
/// `n_refits` independent training sets are shared by all pairs, so one fit
/// serves every pair. Regressors that ignore their training data give
/// exactly zero.
pub fn estimate_covariance_condition(
    spec: &NuisanceSpec,
    dgp: &Dgp,
    n: usize,
    n_pairs: usize,
    n_refits: usize,
    seed: u64,
) -> Result<CovarianceEstimate> {
    if n_refits < 30 {
        return Err(Error::invalid(format!("n_refits must be at least 30, got {n_refits}")));
    }
    if n_pairs < 10 {
        return Err(Error::invalid(format!("n_pairs must be at least 10, got {n_pairs}")));
    }
    let d = dgp.dim();
    let mut pr = rng::stream(seed, &[rng::label("cov-pairs"), n as u64]);
    let points = uniform_points(d, 2 * n_pairs, &mut pr);
    let preds: Vec<Vec<f64>> = (0..n_refits)
        .into_par_iter()
        .map(|r| {
            let shot = rng::derive_seed(seed, &[rng::label("cov-refit"), n as u64, r as u64]);
            let data = dgp.generate(n, shot)?;
            let ctx = FitContext::with_truth(dgp.truth()).seed(rng::derive_seed(shot, &[rng::label("fit")]));
            let f = nuisance::fit(spec, &data.x, &data.y, &ctx)?;
            Ok(f.predict_many(&points))
        })
        .collect::<Result<_>>()?;
    let column = |p: usize| -> Vec<f64> { preds.iter().map(|row| row[p]).collect() };
    let mut abs_cov = Vec::with_capacity(n_pairs);
    let mut floor = Vec::with_capacity(n_pairs);
    for pair in 0..n_pairs {
        let a = column(2 * pair);
        let b = column(2 * pair + 1);
        abs_cov.push(stats::sample_covariance(&a, &b).abs());
        let va = stats::sample_variance(&a);
        let vb = stats::sample_variance(&b);
        floor.push((va * vb / (n_refits - 1) as f64).sqrt());
    }
    Ok(CovarianceEstimate {
        n,
        estimate: stats::mean(&abs_cov),
        mc_se: stats::std_error(&abs_cov),
        noise_floor: (2.0 / std::f64::consts::PI).sqrt() * stats::mean(&floor),
    })
}

/// Covariance condition over a grid of sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceConditionReport {
    pub estimator_kind: String,
    pub n_grid: Vec<usize>,
    pub estimates: Vec<f64>,
    pub n_times_estimate: Vec<f64>,
    pub mc_se: Vec<f64>,
    pub noise_floor: Vec<f64>,
    /// Divisor applied before the ratio test: `(log k_n)^{d−1}` for the
    /// centered forest, 1 otherwise.
    pub correction: Vec<f64>,
}

impl CovarianceConditionReport {
    /// `n·Ê|cov| / correction` at each grid size.
    pub fn scaled(&self) -> Vec<f64> {
        self.n_times_estimate.iter().zip(&self.correction).map(|(v, c)| v / c).collect()
    }

    /// Ratio of the scaled value at the largest size to that at the smallest.
    pub fn ratio(&self) -> f64 {
        let s = self.scaled();
        match (s.first(), s.last()) {
            (Some(a), Some(b)) if *a > 0.0 => b / a,
            (Some(_), Some(b)) if *b == 0.0 => 1.0,
            _ => f64::INFINITY,
        }
    }

    pub fn passes(&self, lo: f64, hi: f64) -> bool {
        let r = self.ratio();
        r >= lo && r <= hi
    }
}

/// Forest leaf count used when `k_n` is not fixed.
fn forest_k_n(spec: &NuisanceSpec, n: usize) -> Option<usize> {
    match spec {
        NuisanceSpec::CenteredForest { k_n, k_n_exponent, .. } => {
            Some(k_n.unwrap_or_else(|| ((n as f64).powf(*k_n_exponent).round() as usize).max(1)))
        }
        _ => None,
    }
}

pub fn covariance_condition_report(
    spec: &NuisanceSpec,
    dgp: &Dgp,
    n_grid: &[usize],
    n_pairs: usize,
    n_refits: usize,
    seed: u64,
) -> Result<CovarianceConditionReport> {
    if n_grid.is_empty() {
        return Err(Error::invalid("n_grid is empty"));
    }
    let d = dgp.dim() as i32;
    let mut rep = CovarianceConditionReport {
        estimator_kind: spec.method_name().to_string(),
        n_grid: n_grid.to_vec(),
        estimates: Vec::new(),
        n_times_estimate: Vec::new(),
        mc_se: Vec::new(),
        noise_floor: Vec::new(),
        correction: Vec::new(),
    };
    for &n in n_grid {
        let e = estimate_covariance_condition(spec, dgp, n, n_pairs, n_refits, seed)?;
        rep.estimates.push(e.estimate);
        rep.n_times_estimate.push(n as f64 * e.estimate);
        rep.mc_se.push(e.mc_se);
        rep.noise_floor.push(e.noise_floor);
        rep.correction.push(match forest_k_n(spec, n) {
            Some(k) => (k.max(2) as f64).ln().powi(d - 1),
            None => 1.0,
        });
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasProfile {
    pub grid: Vec<Vec<f64>>,
    /// `Ê{η̂(x)} − η(x)`.
    pub pointwise_bias: Vec<f64>,
    pub sup_abs_bias: f64,
    pub pointwise_variance: Vec<f64>,
    pub sup_variance: f64,
    /// MC standard error of each bias entry.
    pub bias_se: Vec<f64>,
}

/// Pointwise bias and variance of `spec` trained on `n` draws of `dgp`.
pub fn bias_profile(
    spec: &NuisanceSpec,
    dgp: &Dgp,
    truth: &TruthFn,
    n: usize,
    n_refits: usize,
    grid: &[Vec<f64>],
    seed: u64,
) -> Result<BiasProfile> {
    if n_refits < 2 {
        return Err(Error::invalid("bias_profile needs at least 2 refits"));
    }
    let d = dgp.dim();
    for q in grid {
        if q.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: q.len() });
        }
        if q.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
            return Err(Error::Domain(format!("grid point {q:?} is not interior to the unit cube")));
        }
    }
    let flat: Vec<f64> = grid.iter().flatten().copied().collect();
    let points = Covariates::new(d, flat)?;
    let preds: Vec<Vec<f64>> = (0..n_refits)
        .into_par_iter()
        .map(|r| {
            let shot = rng::derive_seed(seed, &[rng::label("bias-refit"), r as u64]);
            let data = dgp.generate(n, shot)?;
            let ctx = FitContext::with_truth(truth.clone()).seed(rng::derive_seed(shot, &[rng::label("fit")]));
            let f = nuisance::fit(spec, &data.x, &data.y, &ctx)?;
            Ok(f.predict_many(&points))
        })
        .collect::<Result<_>>()?;
    let mut bias = Vec::with_capacity(grid.len());
    let mut var = Vec::with_capacity(grid.len());
    let mut se = Vec::with_capacity(grid.len());
    for (p, q) in grid.iter().enumerate() {
        let col: Vec<f64> = preds.iter().map(|row| row[p]).collect();
        let v = stats::sample_variance(&col);
        bias.push(stats::mean(&col) - truth(q));
        se.push((v / n_refits as f64).sqrt());
        var.push(v);
    }
    let sup_abs_bias = bias.iter().fold(0.0f64, |m, b| m.max(b.abs()));
    let sup_variance = var.iter().fold(0.0f64, |m, v| m.max(*v));
    Ok(BiasProfile { grid: grid.to_vec(), pointwise_bias: bias, sup_abs_bias, pointwise_variance: var, sup_variance, bias_se: se })
}

/// Mean distance from the cube centre to its nearest of `n` uniform points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NnDistancePoint {
    pub n: usize,
    pub mean: f64,
    pub mc_se: f64,
}

pub fn nn_distance_curve(d: usize, n_grid: &[usize], n_reps: usize, seed: u64) -> Result<Vec<NnDistancePoint>> {
    if d == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    if n_reps < 2 {
        return Err(Error::invalid("n_reps must be at least 2"));
    }
    if n_grid.contains(&0) {
        return Err(Error::invalid("sizes must be at least 1"));
    }
    let x0 = cube_center(d);
    n_grid
        .iter()
        .map(|&n| {
            let dist: Vec<f64> = (0..n_reps)
                .into_par_iter()
                .map(|rep| {
                    let mut r = rng::stream(seed, &[rng::label("nn-distance"), n as u64, rep as u64]);
                    let mut best = f64::INFINITY;
                    let mut p = vec![0.0; d];
                    for _ in 0..n {
                        p.iter_mut().for_each(|v| *v = r.random());
                        let s: f64 = p.iter().zip(&x0).map(|(a, b)| (a - b) * (a - b)).sum();
                        best = best.min(s);
                    }
                    best.sqrt()
                })
                .collect();
            Ok(NnDistancePoint { n, mean: stats::mean(&dist), mc_se: stats::std_error(&dist) })
        })
        .collect()
}

/// OLS slope of `log mean` on `log n`.
pub fn log_log_slope(curve: &[NnDistancePoint]) -> f64 {
    let lx: Vec<f64> = curve.iter().map(|p| (p.n as f64).ln()).collect();
    let ly: Vec<f64> = curve.iter().map(|p| p.mean.ln()).collect();
    stats::ols_slope(&lx, &ly)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GramSingularityPoint {
    pub h: f64,
    pub frequency: f64,
    pub mc_se: f64,
}

/// Frequency with which the Epanechnikov local-polynomial Gram matrix at the
/// cube centre is numerically singular, over `n_reps` uniform designs.
pub fn gram_singularity_rate(d: usize, h_grid: &[f64], n: usize, n_reps: usize, seed: u64) -> Result<Vec<GramSingularityPoint>> {
    if d == 0 || n == 0 || n_reps == 0 {
        return Err(Error::invalid("d, n and n_reps must be positive"));
    }
    if let Some(h) = h_grid.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
        return Err(Error::invalid(format!("bandwidth must be positive, got {h}")));
    }
    let x0 = cube_center(d);
    let kernel = epanechnikov(d);
    // designs are shared across bandwidths, so the curve is monotone sample-wise
    let designs: Vec<Covariates> = (0..n_reps)
        .map(|rep| uniform_points(d, n, &mut rng::stream(seed, &[rng::label("gram-design"), rep as u64])))
        .collect();
    let zeros = vec![0.0; n];
    h_grid
        .iter()
        .map(|&h| {
            let hits: Vec<f64> = designs
                .par_iter()
                .map(|x| {
                    let f = fit_local_poly(x, &zeros, Tuning::Bandwidth(h), kernel.clone())?;
                    Ok(if f.gram_at(&x0).singular { 1.0 } else { 0.0 })
                })
                .collect::<Result<_>>()?;
            let p = stats::mean(&hits);
            Ok(GramSingularityPoint { h, frequency: p, mc_se: (p * (1.0 - p) / n_reps as f64).sqrt() })
        })
        .collect()
}

/// Mean prediction at each point of the fitted regressor; convenience for
/// checks that compare against a closed form.
pub fn mean_prediction(f: &FittedRegressor, points: &Covariates) -> f64 {
    stats::mean(&f.predict_many(points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{DgpSpec, HolderFunctionSpec};
    use crate::nuisance::BandwidthRule;
    use crate::quadrature::GaussLegendre;

    fn doppler() -> Dgp {
        DgpSpec::doppler(0.1).build().unwrap()
    }

    #[test]
    fn ignoring_regressor_has_zero_covariance() {
        let e = estimate_covariance_condition(&NuisanceSpec::Zero, &doppler(), 50, 10, 30, 1).unwrap();
        assert_eq!(e.estimate, 0.0);
        let o = estimate_covariance_condition(&NuisanceSpec::oracle(), &doppler(), 50, 10, 30, 1).unwrap();
        assert_eq!(o.estimate, 0.0);
    }

    #[test]
    fn training_mean_covariance_is_variance_of_mean() {
        // cov(Ȳ, Ȳ) = V(Y)/n for every pair; V(Y) = ∫g² − (∫g)² + σ²
        let dgp = doppler();
        let n = 100;
        let g = GaussLegendre::new(64);
        let truth = dgp.truth();
        let panels: Vec<(f64, f64)> = (0..200).map(|i| (i as f64 / 200.0, (i + 1) as f64 / 200.0)).collect();
        let m1: f64 = panels.iter().map(|&(a, b)| g.integrate_on(|x| truth(&[x]), a, b)).sum();
        let m2: f64 = panels.iter().map(|&(a, b)| g.integrate_on(|x| truth(&[x]).powi(2), a, b)).sum();
        let oracle = (m2 - m1 * m1 + 0.1) / n as f64;
        let e = estimate_covariance_condition(&NuisanceSpec::TrainingMean, &dgp, n, 10, 2000, 3).unwrap();
        // all pairs see the same refits, so the estimate is one sample variance
        let se = oracle * (2.0 / 1999.0f64).sqrt() * 1.5;
        assert!((e.estimate - oracle).abs() < 4.0 * se, "{} vs {oracle}", e.estimate);
    }

    #[test]
    fn covariance_validation() {
        assert!(estimate_covariance_condition(&NuisanceSpec::Zero, &doppler(), 50, 9, 30, 1).is_err());
        assert!(estimate_covariance_condition(&NuisanceSpec::Zero, &doppler(), 50, 10, 29, 1).is_err());
    }

    #[test]
    fn covariance_is_deterministic() {
        let a = estimate_covariance_condition(&NuisanceSpec::knn(5), &doppler(), 60, 10, 30, 9).unwrap();
        let b = estimate_covariance_condition(&NuisanceSpec::knn(5), &doppler(), 60, 10, 30, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.estimate >= 0.0);
    }

    #[test]
    fn report_ratio() {
        let r = covariance_condition_report(&NuisanceSpec::Zero, &doppler(), &[50, 100], 10, 30, 1).unwrap();
        assert_eq!(r.ratio(), 1.0);
        assert!(r.passes(0.25, 4.0));
        assert_eq!(r.n_grid.len(), r.estimates.len());
    }

    #[test]
    fn oracle_profile_is_exact() {
        let dgp = doppler();
        let grid: Vec<Vec<f64>> = (1..10).map(|i| vec![i as f64 / 10.0]).collect();
        let p = bias_profile(&NuisanceSpec::oracle(), &dgp, &dgp.truth(), 50, 5, &grid, 0).unwrap();
        assert!(p.sup_abs_bias < 1e-15, "{}", p.sup_abs_bias);
        assert!(p.sup_variance < 1e-28, "{}", p.sup_variance);
    }

    #[test]
    fn global_mean_bias() {
        // k = n averages every training response
        let dgp = doppler();
        let g = GaussLegendre::new(64);
        let truth = dgp.truth();
        let mean_g: f64 = (0..200).map(|i| g.integrate_on(|x| truth(&[x]), i as f64 / 200.0, (i + 1) as f64 / 200.0)).sum();
        let grid = vec![vec![0.3], vec![0.7]];
        let p = bias_profile(&NuisanceSpec::knn(80), &dgp, &truth, 80, 400, &grid, 4).unwrap();
        for (q, (b, se)) in grid.iter().zip(p.pointwise_bias.iter().zip(&p.bias_se)) {
            let expect = mean_g - truth(q);
            assert!((b - expect).abs() < 4.0 * se, "{b} vs {expect}");
        }
        assert_eq!(p.sup_abs_bias, p.pointwise_bias.iter().fold(0.0f64, |m, b| m.max(b.abs())));
    }

    #[test]
    fn bias_grid_must_be_interior() {
        let dgp = doppler();
        assert!(bias_profile(&NuisanceSpec::oracle(), &dgp, &dgp.truth(), 50, 5, &[vec![1.0]], 0).is_err());
    }

    #[test]
    fn nn_distance_single_point() {
        let c = nn_distance_curve(1, &[1], 20_000, 2).unwrap();
        assert!((c[0].mean - 0.25).abs() < 4.0 * c[0].mc_se);
    }

    #[test]
    fn nn_distance_slope_d1() {
        let c = nn_distance_curve(1, &[10, 40, 160, 640], 2000, 5).unwrap();
        let slope = log_log_slope(&c);
        assert!((slope + 1.0).abs() < 0.15, "{slope}");
        assert!(c.windows(2).all(|w| w[1].mean <= w[0].mean + 3.0 * w[0].mc_se));
    }

    #[test]
    fn gram_wide_window_never_singular() {
        let r = gram_singularity_rate(1, &[2.0], 200, 50, 1).unwrap();
        assert_eq!(r[0].frequency, 0.0);
    }

    #[test]
    fn gram_tiny_window_mostly_singular() {
        // n h = 0.1 → window count ≈ Poisson(0.2); a linear fit needs 2 points
        let n = 200;
        let h = 0.1 / n as f64;
        let r = gram_singularity_rate(1, &[h], n, 500, 2).unwrap();
        let lam = 2.0 * n as f64 * h;
        let p_le1 = (-lam).exp() * (1.0 + lam);
        assert!(r[0].frequency >= p_le1 - 4.0 * (p_le1 * (1.0 - p_le1) / 500.0).sqrt(), "{}", r[0].frequency);
    }

    #[test]
    fn gram_monotone_in_h() {
        let hs = [0.002, 0.005, 0.01, 0.02, 0.05];
        let r = gram_singularity_rate(1, &hs, 200, 200, 7).unwrap();
        assert!(r.windows(2).all(|w| w[1].frequency <= w[0].frequency), "{r:?}");
        assert!(gram_singularity_rate(1, &[0.0], 200, 10, 7).is_err());
    }

    #[test]
    fn lpr_bias_shrinks_on_holder_target() {
        let spec = HolderFunctionSpec::new(0.35, 1, 500).with_seed(3);
        let dgp = DgpSpec::holder(spec, 0.1).build().unwrap();
        let lpr = NuisanceSpec::LocalPoly { rule: BandwidthRule::undersmoothed_lpr(), kernel: Default::default() };
        let grid: Vec<Vec<f64>> = (1..20).map(|i| vec![i as f64 / 20.0]).collect();
        let sups: Vec<f64> = [500, 2000, 8000]
            .iter()
            .map(|&n| bias_profile(&lpr, &dgp, &dgp.truth(), n, 60, &grid, 11).unwrap().sup_abs_bias)
            .collect();
        assert!(sups[0] > sups[1] && sups[1] > sups[2], "{sups:?}");
    }
}
