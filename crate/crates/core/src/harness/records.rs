//! Row types written by the studies, and their aggregation.
//!
//! Column order of every CSV is the field order of its row struct.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::Result;
use crate::inference::{ks_test, qq_points};
use crate::stats;

/// One estimate on one simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub study: String,
    pub cell: String,
    pub dgp: String,
    pub d: usize,
    /// Hölder smoothness; empty for the Doppler design.
    pub s: Option<f64>,
    pub noise_variance: f64,
    pub estimator: String,
    pub fold_size: usize,
    pub sim: usize,
    pub psi_hat: f64,
    pub psi_true: f64,
    pub standardized_stat: f64,
    pub standardization: String,
    pub variance_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub covered: bool,
    /// Digest of the simulated dataset; equal across estimators of a replicate.
    pub dataset_hash: String,
}

impl SimRecord {
    pub fn key(&self) -> (&str, &str, usize) {
        (&self.cell, &self.estimator, self.fold_size)
    }
}

/// Wall time of one record, kept apart so result files stay reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub study: String,
    pub cell: String,
    pub estimator: String,
    pub fold_size: usize,
    pub sim: usize,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub cell: String,
    pub estimator: String,
    pub fold_size: usize,
    pub n_sims: usize,
    pub coverage: f64,
    pub mc_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QqRow {
    pub cell: String,
    pub estimator: String,
    pub fold_size: usize,
    pub theoretical: f64,
    pub empirical: f64,
}

/// Squared bias, variance and MSE of `psi_hat` with 95% intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BvmRow {
    pub cell: String,
    pub estimator: String,
    pub fold_size: usize,
    pub n_sims: usize,
    pub bias2: f64,
    pub bias2_lo: f64,
    pub bias2_hi: f64,
    pub variance: f64,
    pub variance_lo: f64,
    pub variance_hi: f64,
    pub mse: f64,
    pub mse_lo: f64,
    pub mse_hi: f64,
}

/// Kolmogorov–Smirnov test of the standardized statistics against N(0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsRow {
    pub cell: String,
    pub estimator: String,
    pub fold_size: usize,
    pub m: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub critical_value: f64,
    pub level: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summaries {
    pub coverage: Vec<CoverageRow>,
    pub qq: Vec<QqRow>,
    pub bvm: Vec<BvmRow>,
    pub ks: Vec<KsRow>,
}

const Z975: f64 = 1.959_963_984_540_054;

/// Consecutive runs of records sharing `(cell, estimator, fold_size)`.
pub fn groups(records: &[SimRecord]) -> Vec<&[SimRecord]> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=records.len() {
        if i == records.len() || records[i].key() != records[start].key() {
            if i > start {
                out.push(&records[start..i]);
            }
            start = i;
        }
    }
    out
}

fn bvm(group: &[SimRecord]) -> BvmRow {
    let m = group.len();
    let first = &group[0];
    let err: Vec<f64> = group.iter().map(|r| r.psi_hat - r.psi_true).collect();
    let psi: Vec<f64> = group.iter().map(|r| r.psi_hat).collect();
    let sq: Vec<f64> = err.iter().map(|e| e * e).collect();
    let bias = stats::mean(&err);
    let (b_lo, b_hi) = (bias - Z975 * stats::std_error(&err), bias + Z975 * stats::std_error(&err));
    let (bias2_lo, bias2_hi) = if b_lo <= 0.0 && b_hi >= 0.0 {
        (0.0, (b_lo * b_lo).max(b_hi * b_hi))
    } else {
        ((b_lo * b_lo).min(b_hi * b_hi), (b_lo * b_lo).max(b_hi * b_hi))
    };
    let variance = stats::sample_variance(&psi);
    let (variance_lo, variance_hi) = match ChiSquared::new((m - 1) as f64) {
        Ok(chi) if m >= 2 => {
            let k = (m - 1) as f64 * variance;
            (k / chi.inverse_cdf(0.975), k / chi.inverse_cdf(0.025))
        }
        _ => (f64::NAN, f64::NAN),
    };
    let mse = stats::mean(&sq);
    let se = stats::std_error(&sq);
    BvmRow {
        cell: first.cell.clone(),
        estimator: first.estimator.clone(),
        fold_size: first.fold_size,
        n_sims: m,
        bias2: bias * bias,
        bias2_lo,
        bias2_hi,
        variance,
        variance_lo,
        variance_hi,
        mse,
        mse_lo: (mse - Z975 * se).max(0.0),
        mse_hi: mse + Z975 * se,
    }
}

/// Coverage, QQ, bias/variance/MSE and KS tables, one block per group.
pub fn summarize(records: &[SimRecord], ks_level: f64) -> Result<Summaries> {
    let mut out = Summaries::default();
    for g in groups(records) {
        let first = &g[0];
        let m = g.len();
        let covered: Vec<f64> = g.iter().map(|r| if r.covered { 1.0 } else { 0.0 }).collect();
        let p = stats::mean(&covered);
        out.coverage.push(CoverageRow {
            cell: first.cell.clone(),
            estimator: first.estimator.clone(),
            fold_size: first.fold_size,
            n_sims: m,
            coverage: p,
            mc_se: if m < 2 { f64::INFINITY } else { (p * (1.0 - p) / m as f64).sqrt() },
        });
        out.bvm.push(bvm(g));
        let z: Vec<f64> = g.iter().map(|r| r.standardized_stat).filter(|v| v.is_finite()).collect();
        // QQ and KS need at least two finite statistics
        if z.len() < 2 {
            continue;
        }
        for (t, e) in qq_points(&z)? {
            out.qq.push(QqRow { cell: first.cell.clone(), estimator: first.estimator.clone(), fold_size: first.fold_size, theoretical: t, empirical: e });
        }
        let k = ks_test(&z, ks_level)?;
        out.ks.push(KsRow {
            cell: first.cell.clone(),
            estimator: first.estimator.clone(),
            fold_size: first.fold_size,
            m: k.m,
            statistic: k.statistic,
            p_value: k.p_value,
            critical_value: k.critical_value,
            level: k.level,
            reject: k.reject,
        });
    }
    Ok(out)
}
