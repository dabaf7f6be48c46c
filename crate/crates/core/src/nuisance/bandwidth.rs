//! Rate rules mapping a training size to a bandwidth or neighbour count.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn one() -> f64 {
    1.0
}

fn ten() -> usize {
    10
}

/// Tuning rule. Every constant `c` defaults to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum BandwidthRule {
    /// `h = c (n / log n)^{-1/d}`.
    UndersmoothedLpr {
        #[serde(default = "one")]
        c: f64,
    },
    /// `h = c n^{-2/(2α+2β+d)}`.
    MinimaxCda {
        alpha: f64,
        beta: f64,
        #[serde(default = "one")]
        c: f64,
    },
    /// `h = c n^{-(2+ε)/(2α+2β+d)}`, `0 < ε < 4(α+β)/d`; `ε` defaults to
    /// the midpoint `2(α+β)/d`.
    SuboptCda {
        alpha: f64,
        beta: f64,
        #[serde(default)]
        epsilon: Option<f64>,
        #[serde(default = "one")]
        c: f64,
    },
    /// `k = max(1, round(c log n))`.
    KnnLogN {
        #[serde(default = "one")]
        c: f64,
    },
    /// Per-query bandwidth equal to the distance to the k-th nearest
    /// training point (k = 10 by default).
    AdaptiveKnn10 {
        #[serde(default = "ten")]
        k: usize,
    },
    /// MSE-optimal smoothing rate `h = c n^{-1/(2s+d)}`.
    MseOptimal {
        s: f64,
        #[serde(default = "one")]
        c: f64,
    },
    /// Fixed bandwidth, or fixed neighbour count for k-NN.
    Fixed { value: f64 },
}

/// Resolved tuning parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tuning {
    Bandwidth(f64),
    Neighbors(usize),
    AdaptiveNeighbors(usize),
}

impl BandwidthRule {
    pub fn undersmoothed_lpr() -> Self {
        Self::UndersmoothedLpr { c: 1.0 }
    }

    pub fn minimax_cda(alpha: f64, beta: f64) -> Self {
        Self::MinimaxCda { alpha, beta, c: 1.0 }
    }

    pub fn subopt_cda(alpha: f64, beta: f64) -> Self {
        Self::SuboptCda { alpha, beta, epsilon: None, c: 1.0 }
    }

    pub fn knn_log_n() -> Self {
        Self::KnnLogN { c: 1.0 }
    }

    pub fn adaptive_knn10() -> Self {
        Self::AdaptiveKnn10 { k: 10 }
    }

    pub fn mse_optimal(s: f64) -> Self {
        Self::MseOptimal { s, c: 1.0 }
    }

    pub fn fixed(value: f64) -> Self {
        Self::Fixed { value }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::UndersmoothedLpr { .. } => "undersmoothed_lpr",
            Self::MinimaxCda { .. } => "minimax_cda",
            Self::SuboptCda { .. } => "subopt_cda",
            Self::KnnLogN { .. } => "knn_log_n",
            Self::AdaptiveKnn10 { .. } => "adaptive_knn10",
            Self::MseOptimal { .. } => "mse_optimal",
            Self::Fixed { .. } => "fixed",
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive, got {v}")))
    }
}

/// Admissible `ε` for the undersmoothed CDA rate, defaulting to the midpoint.
pub fn resolve_epsilon(alpha: f64, beta: f64, epsilon: Option<f64>, d: usize) -> Result<f64> {
    let upper = 4.0 * (alpha + beta) / d as f64;
    let eps = epsilon.unwrap_or(upper / 2.0);
    if !(eps > 0.0 && eps < upper) {
        return Err(Error::invalid(format!(
            "epsilon must lie in (0, {upper}) for alpha={alpha}, beta={beta}, d={d}; got {eps}"
        )));
    }
    Ok(eps)
}

/// Evaluate `rule` at training size `n` in dimension `d`.
pub fn resolve_bandwidth(rule: &BandwidthRule, n: usize, d: usize) -> Result<Tuning> {
    if n < 3 {
        return Err(Error::invalid(format!("rate rules need n >= 3, got {n}")));
    }
    if d == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    let nf = n as f64;
    let df = d as f64;
    Ok(match *rule {
        BandwidthRule::UndersmoothedLpr { c } => {
            positive("c", c)?;
            Tuning::Bandwidth(c * (nf / nf.ln()).powf(-1.0 / df))
        }
        BandwidthRule::MinimaxCda { alpha, beta, c } => {
            positive("c", c)?;
            positive("alpha", alpha)?;
            positive("beta", beta)?;
            Tuning::Bandwidth(c * nf.powf(-2.0 / (2.0 * alpha + 2.0 * beta + df)))
        }
        BandwidthRule::SuboptCda { alpha, beta, epsilon, c } => {
            positive("c", c)?;
            positive("alpha", alpha)?;
            positive("beta", beta)?;
            let eps = resolve_epsilon(alpha, beta, epsilon, d)?;
            Tuning::Bandwidth(c * nf.powf(-(2.0 + eps) / (2.0 * alpha + 2.0 * beta + df)))
        }
        BandwidthRule::KnnLogN { c } => {
            positive("c", c)?;
            Tuning::Neighbors(((c * nf.ln()).round() as usize).max(1))
        }
        BandwidthRule::AdaptiveKnn10 { k } => {
            if k == 0 {
                return Err(Error::invalid("adaptive neighbour count must be at least 1"));
            }
            Tuning::AdaptiveNeighbors(k)
        }
        BandwidthRule::MseOptimal { s, c } => {
            positive("c", c)?;
            positive("s", s)?;
            Tuning::Bandwidth(c * nf.powf(-1.0 / (2.0 * s + df)))
        }
        BandwidthRule::Fixed { value } => {
            positive("bandwidth", value)?;
            Tuning::Bandwidth(value)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(rule: BandwidthRule, n: usize, d: usize) -> f64 {
        match resolve_bandwidth(&rule, n, d).unwrap() {
            Tuning::Bandwidth(h) => h,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn documented_rate_values() {
        let v = h(BandwidthRule::undersmoothed_lpr(), 1000, 1);
        assert!((v - 1000f64.ln() / 1000.0).abs() < 1e-15);
        assert!((v - 0.006908).abs() < 5e-7);
        let v = h(BandwidthRule::minimax_cda(0.35, 0.35), 1000, 1);
        assert!((v - 1000f64.powf(-2.0 / 2.4)).abs() < 1e-15);
        assert!((v - 0.003162).abs() < 5e-6, "{v}");
    }

    #[test]
    fn knn_log_n_at_exponential() {
        let n = 5f64.exp().round() as usize;
        assert_eq!(resolve_bandwidth(&BandwidthRule::knn_log_n(), n, 1).unwrap(), Tuning::Neighbors(5));
        assert_eq!(resolve_bandwidth(&BandwidthRule::knn_log_n(), 3, 1).unwrap(), Tuning::Neighbors(1));
    }

    #[test]
    fn epsilon_range_enforced() {
        let bad = BandwidthRule::SuboptCda { alpha: 0.1, beta: 0.1, epsilon: Some(0.8), c: 1.0 };
        assert!(resolve_bandwidth(&bad, 100, 1).is_err());
        let bad = BandwidthRule::SuboptCda { alpha: 0.1, beta: 0.1, epsilon: Some(0.0), c: 1.0 };
        assert!(resolve_bandwidth(&bad, 100, 1).is_err());
        assert_eq!(resolve_epsilon(0.1, 0.1, None, 1).unwrap(), 0.4);
        let v = h(BandwidthRule::subopt_cda(0.1, 0.1), 3000, 1);
        assert!((v - 3000f64.powf(-2.4 / 1.4)).abs() < 1e-18);
    }

    #[test]
    fn rates_decrease_in_n() {
        let rules = [
            BandwidthRule::undersmoothed_lpr(),
            BandwidthRule::minimax_cda(0.6, 0.6),
            BandwidthRule::subopt_cda(1.5, 1.5),
            BandwidthRule::mse_optimal(0.35),
        ];
        for rule in rules {
            for d in [1, 4] {
                let mut last = f64::INFINITY;
                for n in [3, 10, 100, 1000, 10_000] {
                    let v = h(rule, n, d);
                    assert!(v < last, "{rule:?} d={d} n={n}");
                    last = v;
                }
            }
        }
    }

    #[test]
    fn fixed_rejects_nonpositive() {
        assert!(resolve_bandwidth(&BandwidthRule::fixed(0.0), 10, 1).is_err());
        assert!(resolve_bandwidth(&BandwidthRule::fixed(-0.1), 10, 1).is_err());
        assert!(resolve_bandwidth(&BandwidthRule::fixed(0.1), 2, 1).is_err());
    }

    #[test]
    fn rules_roundtrip_through_toml() {
        let r: BandwidthRule = toml::from_str("rule = \"subopt_cda\"\nalpha = 0.1\nbeta = 0.1\n").unwrap();
        assert_eq!(r, BandwidthRule::subopt_cda(0.1, 0.1));
        let r: BandwidthRule = toml::from_str("rule = \"adaptive_knn10\"\n").unwrap();
        assert_eq!(r, BandwidthRule::adaptive_knn10());
    }
}
