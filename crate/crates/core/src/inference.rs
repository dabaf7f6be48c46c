//! Wald intervals, standardisation and normal-reference diagnostics.
//!
//! Both the root-n and the slower conditional-variance regimes standardise
//! with the sample variance of the estimated influence values; the
//! [`Standardization`] tag only records which limit theorem is invoked.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};


use crate::datagen::{self, DgpKind, DgpSpec};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Standardization {
    #[default]
    RootN,
    ConditionalSlow,
}

impl Standardization {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::RootN => "root_n",
            Self::ConditionalSlow => "conditional_slow",
        }
    }
}

fn std_normal() -> Normal {
    Normal::standard()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile, polished by a Newton step on the CDF.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("quantile level must lie in (0, 1), got {p}")));
    }
    let n = std_normal();
    let mut x = n.inverse_cdf(p);
    for _ in 0..2 {
        let dens = n.pdf(x);
        if dens > 0.0 {
            // upper-tail form keeps precision for p near 1
            let err = if p > 0.5 { (1.0 - p) - normal_sf(x) } else { normal_cdf(x) - p };
            x -= err / dens;
        }
    }
    Ok(x)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// `ψ̂ ± z_{1−α/2} √(V̂/n)`.
pub fn wald_interval(psi_hat: f64, variance_hat: f64, n: usize, alpha: f64) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    if !(variance_hat >= 0.0) {
        return Err(Error::invalid(format!("variance must be nonnegative, got {variance_hat}")));
    }
    if n == 0 {
        return Err(Error::invalid("interval needs n >= 1"));
    }
    let half = normal_quantile(1.0 - alpha / 2.0)? * (variance_hat / n as f64).sqrt();
    Ok((psi_hat - half, psi_hat + half))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandardizedStat {
    pub value: f64,
    pub mode: Standardization,
    pub psi_true: f64,
    /// `√(V̂/n)`.
    pub scale: f64,
}

pub fn standardize(
    psi_hat: f64,
    psi_true: f64,
    variance_hat: f64,
    n: usize,
    mode: Standardization,
) -> Result<StandardizedStat> {
    if !(variance_hat > 0.0) {
        return Err(Error::ZeroVariance(format!("cannot standardise with variance {variance_hat}")));
    }
    if n == 0 {
        return Err(Error::invalid("standardisation needs n >= 1"));
    }
    let scale = (variance_hat / n as f64).sqrt();
    Ok(StandardizedStat { value: (psi_hat - psi_true) / scale, mode, psi_true, scale })
}

/// Which nuisance carries the undersmoothed kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Undersmoothed {
    Mu,
    Pi,
}

/// Limit of `n h^d V̂` under undersmoothing of one nuisance.
///
/// For the built-in designs (`f ≡ 1`, `A = Y = g(X) + ε`, `V(A|X) = σ²`)
/// both choices give `σ² (∫g² + σ²) ∫K²`.
pub fn limiting_variance_oracle(dgp: &DgpSpec, kernel: &KernelSpec, which: Undersmoothed) -> Result<f64> {
    let _ = which;
    let sigma2 = dgp.noise_variance;
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::invalid("noise variance must be nonnegative"));
    }
    let g2 = match &dgp.kind {
        DgpKind::Doppler => datagen::doppler_integral_sq(),
        DgpKind::HolderSmooth(spec) => datagen::build_holder_function(*spec)?.integral_sq(),
        DgpKind::External => {
            return Err(Error::Unsupported("limiting variance needs a known design and density".into()))
        }
    };
    Ok(sigma2 * (g2 + sigma2) * kernel.l2_norm_sq())
}

/// Sorted `(Φ⁻¹((i − 0.5)/m), x_(i))` pairs.
pub fn qq_points(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    let m = values.len();
    if m < 2 {
        return Err(Error::TooFewValues { needed: 2, got: m });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, v)| Ok((normal_quantile((i as f64 + 0.5) / m as f64)?, v)))
        .collect()
}

/// One-sample Kolmogorov–Smirnov statistic against `N(0, 1)`.
pub fn ks_statistic(values: &[f64]) -> Result<f64> {
    let m = values.len();
    if m < 2 {
        return Err(Error::TooFewValues { needed: 2, got: m });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mf = m as f64;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal_cdf(x);
            (f - i as f64 / mf).max((i as f64 + 1.0) / mf - f)
        })
        .fold(0.0, f64::max))
}

/// Kolmogorov survival function `Q(λ) = 2 Σ (−1)^{k−1} e^{−2k²λ²}`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

fn stephens_factor(m: usize) -> f64 {
    let r = (m as f64).sqrt();
    r + 0.12 + 0.11 / r
}

/// Asymptotic p-value with Stephens' finite-sample correction.
pub fn ks_pvalue(statistic: f64, m: usize) -> f64 {
    kolmogorov_sf(stephens_factor(m) * statistic)
}

/// Critical value of the KS statistic at level `alpha` for sample size `m`.
pub fn ks_critical_value(m: usize, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let (mut lo, mut hi) = (0.2, 5.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_sf(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi) / stephens_factor(m))
}

/// Outcome of a KS comparison with the standard normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
    pub critical_value: f64,
    pub level: f64,
    pub m: usize,
    pub reject: bool,
}

pub fn ks_test(values: &[f64], level: f64) -> Result<KsTest> {
    let statistic = ks_statistic(values)?;
    let m = values.len();
    let critical_value = ks_critical_value(m, level)?;
    Ok(KsTest { statistic, p_value: ks_pvalue(statistic, m), critical_value, level, m, reject: statistic > critical_value })
}

/// Central binomial band `[q(τ), q(1−τ)]/n`, `τ = (1 − level)/2`, for an
/// empirical coverage proportion.
pub fn coverage_band(n_sims: usize, nominal: f64, level: f64) -> Result<(f64, f64)> {
    use statrs::distribution::{Binomial, DiscreteCDF};
    check_alpha(level)?;
    let b = Binomial::new(nominal, n_sims as u64).map_err(|e| Error::invalid(e.to_string()))?;
    let tail = (1.0 - level) / 2.0;
    let lo = b.inverse_cdf(tail);
    let hi = b.inverse_cdf(1.0 - tail);
    Ok((lo as f64 / n_sims as f64, hi as f64 / n_sims as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::HolderFunctionSpec;
    use crate::kernels::epanechnikov;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quantile_roundtrip() {
        for x in [-3.0, -1.0, 0.0, 1.0, 3.0] {
            let q = normal_quantile(normal_cdf(x)).unwrap();
            assert!((q - x).abs() < 1e-9, "{x}: {q}");
        }
        // table values
        assert_abs_diff_eq!(normal_quantile(0.975).unwrap(), 1.959_963_984_540_054, epsilon = 1e-12);
        assert_abs_diff_eq!(normal_quantile(0.84).unwrap(), 0.994_457_883_209_753, epsilon = 1e-12);
        assert!(normal_quantile(0.0).is_err());
    }

    #[test]
    fn wald_examples() {
        assert_eq!(wald_interval(2.0, 0.0, 10, 0.05).unwrap(), (2.0, 2.0));
        let (lo, hi) = wald_interval(0.0, 1.0, 100, 0.05).unwrap();
        assert_abs_diff_eq!(hi, 0.1959964, epsilon = 1e-7);
        assert_abs_diff_eq!(lo, -0.1959964, epsilon = 1e-7);
        let (lo, hi) = wald_interval(1.0, 4.0, 4, 0.32).unwrap();
        assert_abs_diff_eq!(hi - 1.0, 0.9944579, epsilon = 1e-7);
        assert_abs_diff_eq!(1.0 - lo, 0.9944579, epsilon = 1e-7);
        assert!(wald_interval(0.0, 1.0, 10, 1.5).is_err());
    }

    #[test]
    fn standardize_examples() {
        let s = standardize(1.1, 1.0, 4.0, 400, Standardization::RootN).unwrap();
        assert_abs_diff_eq!(s.value, 1.0, epsilon = 1e-12);
        assert_eq!(standardize(1.0, 1.0, 4.0, 400, Standardization::RootN).unwrap().value, 0.0);
        let t = standardize(1.1, 1.0, 16.0, 400, Standardization::ConditionalSlow).unwrap();
        assert_abs_diff_eq!(t.value, 0.5, epsilon = 1e-12);
        assert!(matches!(standardize(1.0, 1.0, 0.0, 4, Standardization::RootN), Err(Error::ZeroVariance(_))));
    }

    #[test]
    fn limiting_variance_examples() {
        let k = epanechnikov(1);
        let flat = DgpSpec::holder(HolderFunctionSpec::new(0.1, 1, 100).with_amplitude(0.0), 10.0);
        assert_abs_diff_eq!(limiting_variance_oracle(&flat, &k, Undersmoothed::Mu).unwrap(), 60.0, epsilon = 1e-12);
        let quiet = DgpSpec::doppler(0.0);
        assert_eq!(limiting_variance_oracle(&quiet, &k, Undersmoothed::Mu).unwrap(), 0.0);
        let ext = DgpSpec { kind: DgpKind::External, noise_variance: 1.0, seed: 0 };
        assert!(limiting_variance_oracle(&ext, &k, Undersmoothed::Pi).is_err());
    }

    #[test]
    fn qq_examples() {
        let pts = qq_points(&[1.0, -1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(pts[0].0, -0.967_421_566_101_701, epsilon = 1e-9);
        assert_abs_diff_eq!(pts[1].0, 0.0, epsilon = 1e-12);
        assert_eq!(pts.iter().map(|p| p.1).collect::<Vec<_>>(), vec![-1.0, 0.0, 1.0]);
        assert!(qq_points(&[1.0]).is_err());
    }

    #[test]
    fn ks_reference_values() {
        // one-point sample at 0: D = 0.5
        assert_abs_diff_eq!(ks_statistic(&[0.0, 0.0]).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(kolmogorov_sf(1.3581), 0.05, epsilon = 1e-4);
        assert_abs_diff_eq!(kolmogorov_sf(1.6276), 0.01, epsilon = 1e-4);
        let c = ks_critical_value(100, 0.01).unwrap();
        assert!((c - 0.1608).abs() < 2e-3, "{c}");
    }

    #[test]
    fn coverage_band_matches_binomial() {
        // scipy.stats.binom(1000, 0.95).ppf([0.005, 0.995]) = [931, 967]
        let (lo, hi) = coverage_band(1000, 0.95, 0.99).unwrap();
        assert_abs_diff_eq!(lo, 0.931, epsilon = 1e-12);
        assert_abs_diff_eq!(hi, 0.967, epsilon = 1e-12);
        let (lo, _) = coverage_band(100, 0.95, 0.99).unwrap();
        assert_abs_diff_eq!(lo, 0.89, epsilon = 1e-12);
    }
}
