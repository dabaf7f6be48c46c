//! Doppler k-NN sweep: how the MSE-optimal number of neighbours differs
//! between DCDR and SCDR.
//!
//! Each replicate draws `3 × fold_size` rows and splits them into
//! contiguous folds `F1, F2, F3` (rows are iid, so contiguous blocks are a
//! uniformly random partition). DCDR fits `μ̂` on `F1` and `π̂` on `F2`;
//! SCDR fits both on `F1` and discards `F2`. Both average on `F3`. One
//! neighbour search per query serves every `k ≤ k_max`.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::DgpSpec;
use crate::error::Result;
use crate::estimator::ThreeFoldSplit;
use crate::harness::config::{EstimatorKind, ExperimentConfig};
use crate::harness::records::{SimRecord, TimingRecord};
use crate::harness::seeds::dataset_seed;
use crate::inference::{standardize, wald_interval, Standardization};
use crate::nuisance::fit_knn;
use crate::stats;

pub const CELL: &str = "doppler";
pub const MU_TARGET: &str = "mu_hat";
pub const PI_TARGET: &str = "pi_hat";

/// Average squared error of one target at one `(fold_size, k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub fold_size: usize,
    pub k: usize,
    pub target: String,
    pub n_sims: usize,
    pub mse: f64,
    pub mc_se: f64,
}

/// MSE-minimising `k` per target; ties go to the smallest `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalKRow {
    pub fold_size: usize,
    pub target: String,
    pub k_opt: usize,
    pub mse: f64,
    pub mc_se: f64,
    /// Fewer than two replicates: the MC error is unknown.
    pub low_confidence: bool,
}

#[derive(Debug, Clone, Default)]
pub struct DopplerSweepResult {
    pub records: Vec<SimRecord>,
    pub timings: Vec<TimingRecord>,
    pub sweep: Vec<SweepRow>,
    pub optimal_k: Vec<OptimalKRow>,
}

impl DopplerSweepResult {
    pub fn optimal(&self, fold_size: usize, target: &str) -> Option<&OptimalKRow> {
        self.optimal_k.iter().find(|r| r.fold_size == fold_size && r.target == target)
    }
}

/// Index of the smallest value; the first wins ties.
pub fn argmin_first(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        match best {
            Some(b) if values[b] <= *v => {}
            _ => best = Some(i),
        }
    }
    best
}

struct SimOutput {
    /// `[estimator][k]` squared errors of `psi_hat`.
    psi_sq: Vec<Vec<f64>>,
    mu_mse: Vec<f64>,
    pi_mse: Vec<f64>,
    records: Vec<Vec<SimRecord>>,
    wall_ms: f64,
}

fn mse_by_k(preds: &[Vec<f64>], truth: &[f64], k_max: usize) -> Vec<f64> {
    (0..k_max)
        .map(|j| stats::mean(&preds.iter().zip(truth).map(|(p, t)| (p[j] - t).powi(2)).collect::<Vec<_>>()))
        .collect()
}

pub fn run_doppler_sweep(config: &ExperimentConfig) -> Result<DopplerSweepResult> {
    config.validate()?;
    let dgp = DgpSpec::doppler(config.noise_variance).build()?;
    let psi_true = dgp.psi_true();
    let n_sims = config.effective_sims();
    let k_max = config.k_max;
    let estimators: Vec<(&str, bool)> = config
        .estimators
        .iter()
        .map(|e| (e.id.as_str(), matches!(e.kind, EstimatorKind::DcdrKnn)))
        .collect();
    let truth = dgp.truth();
    let mut out = DopplerSweepResult::default();
    // records[estimator][k] in (fold size, sim) order
    let mut records: Vec<Vec<Vec<SimRecord>>> = vec![vec![Vec::new(); k_max]; estimators.len()];
    for &fold_size in &config.fold_sizes {
        let n = 3 * fold_size;
        let split = ThreeFoldSplit::contiguous(n)?;
        let cell_seed_id = format!("{CELL}_n{fold_size}");
        let sims: Vec<SimOutput> = (0..n_sims)
            .into_par_iter()
            .map(|sim| -> Result<SimOutput> {
                let t0 = Instant::now();
                let data = dgp.generate(n, dataset_seed(sim, &cell_seed_id, config.seed))?;
                let hash = data.digest();
                let f1 = data.subset(&split.fold_mu);
                let f2 = data.subset(&split.fold_pi);
                let f3 = data.subset(&split.fold_phi);
                let mu = fit_knn(&f1.x, &f1.y, k_max)?;
                let pi_d = fit_knn(&f2.x, &f2.a, k_max)?;
                let pi_s = fit_knn(&f1.x, &f1.a, k_max)?;
                let mu_p: Vec<Vec<f64>> = f3.x.rows().map(|q| mu.predict_prefix(q, k_max)).collect();
                let pid_p: Vec<Vec<f64>> = f3.x.rows().map(|q| pi_d.predict_prefix(q, k_max)).collect();
                let pis_p: Vec<Vec<f64>> = f3.x.rows().map(|q| pi_s.predict_prefix(q, k_max)).collect();
                let tv: Vec<f64> = f3.x.rows().map(|q| truth(q)).collect();
                let mut psi_sq = Vec::with_capacity(estimators.len());
                let mut recs = Vec::with_capacity(estimators.len() * k_max);
                for &(id, double) in &estimators {
                    let pi_p = if double { &pid_p } else { &pis_p };
                    let mut sq = Vec::with_capacity(k_max);
                    for j in 0..k_max {
                        let eif: Vec<f64> = (0..f3.len()).map(|i| (f3.a[i] - pi_p[i][j]) * (f3.y[i] - mu_p[i][j])).collect();
                        let psi = stats::mean(&eif);
                        let var = stats::sample_variance(&eif);
                        let (lo, hi) = wald_interval(psi, var, eif.len(), config.alpha)?;
                        let z = standardize(psi, psi_true, var, eif.len(), Standardization::RootN).map(|s| s.value).unwrap_or(f64::NAN);
                        sq.push((psi - psi_true).powi(2));
                        recs.push(SimRecord {
                            study: config.study.as_str().into(),
                            cell: CELL.into(),
                            dgp: "doppler".into(),
                            d: 1,
                            s: None,
                            noise_variance: config.noise_variance,
                            estimator: format!("{id}_k{:02}", j + 1),
                            fold_size,
                            sim,
                            psi_hat: psi,
                            psi_true,
                            standardized_stat: z,
                            standardization: Standardization::RootN.as_str().into(),
                            variance_hat: var,
                            ci_low: lo,
                            ci_high: hi,
                            covered: lo <= psi_true && psi_true <= hi,
                            dataset_hash: hash.clone(),
                        });
                    }
                    psi_sq.push(sq);
                }
                let records = recs.chunks(k_max).map(|c| c.to_vec()).collect();
                Ok(SimOutput {
                    psi_sq,
                    mu_mse: mse_by_k(&mu_p, &tv, k_max),
                    pi_mse: mse_by_k(&pid_p, &tv, k_max),
                    records,
                    wall_ms: t0.elapsed().as_secs_f64() * 1e3,
                })
            })
            .collect::<Result<_>>()?;

        let mut targets: Vec<(String, Vec<Vec<f64>>)> = estimators
            .iter()
            .enumerate()
            .map(|(e, &(id, _))| (id.to_string(), (0..k_max).map(|j| sims.iter().map(|s| s.psi_sq[e][j]).collect()).collect()))
            .collect();
        targets.push((MU_TARGET.into(), (0..k_max).map(|j| sims.iter().map(|s| s.mu_mse[j]).collect()).collect()));
        targets.push((PI_TARGET.into(), (0..k_max).map(|j| sims.iter().map(|s| s.pi_mse[j]).collect()).collect()));
        for (target, by_k) in &targets {
            let mses: Vec<f64> = by_k.iter().map(|v| stats::mean(v)).collect();
            let ses: Vec<f64> = by_k.iter().map(|v| stats::std_error(v)).collect();
            for j in 0..k_max {
                out.sweep.push(SweepRow { fold_size, k: j + 1, target: target.clone(), n_sims, mse: mses[j], mc_se: ses[j] });
            }
            let best = argmin_first(&mses).unwrap_or(0);
            out.optimal_k.push(OptimalKRow {
                fold_size,
                target: target.clone(),
                k_opt: best + 1,
                mse: mses[best],
                mc_se: ses[best],
                low_confidence: n_sims < 2,
            });
        }
        for (sim, s) in sims.into_iter().enumerate() {
            out.timings.push(TimingRecord {
                study: config.study.as_str().into(),
                cell: CELL.into(),
                estimator: "all".into(),
                fold_size,
                sim,
                wall_time_ms: s.wall_ms,
            });
            for (e, per_k) in s.records.into_iter().enumerate() {
                for (j, r) in per_k.into_iter().enumerate() {
                    records[e][j].push(r);
                }
            }
        }
    }
    // order by (cell, estimator, fold size, sim)
    out.records = records.into_iter().flatten().flatten().collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::Study;

    fn small() -> ExperimentConfig {
        let mut c = ExperimentConfig::preset(Study::DopplerSweep);
        c.fold_sizes = vec![30, 60];
        c.n_sims = 4;
        c.k_max = 5;
        c
    }

    #[test]
    fn argmin_ties_take_smallest() {
        assert_eq!(argmin_first(&[3.0, 1.0, 1.0, 2.0]), Some(1));
        assert_eq!(argmin_first(&[f64::NAN, 2.0, 2.0]), Some(1));
        assert_eq!(argmin_first(&[]), None);
    }

    #[test]
    fn table_shapes_and_ordering() {
        let c = small();
        let r = run_doppler_sweep(&c).unwrap();
        assert_eq!(r.sweep.len(), 2 * 5 * 4);
        assert_eq!(r.optimal_k.len(), 2 * 4);
        assert_eq!(r.records.len(), 2 * 5 * 2 * 4);
        assert_eq!(r.records[0].estimator, "dcdr_k01");
        assert_eq!((r.records[3].fold_size, r.records[3].sim), (30, 3));
        assert_eq!((r.records[4].fold_size, r.records[4].sim), (60, 0));
        // paired: every estimator of a replicate sees the same data
        let h: Vec<&str> = r.records.iter().filter(|x| x.fold_size == 60 && x.sim == 2).map(|x| x.dataset_hash.as_str()).collect();
        assert!(h.windows(2).all(|w| w[0] == w[1]));
        for row in &r.records {
            assert_eq!(row.covered, row.ci_low <= row.psi_true && row.psi_true <= row.ci_high);
        }
    }

    #[test]
    fn scdr_pi_equals_mu_when_a_equals_y() {
        let c = small();
        let r = run_doppler_sweep(&c).unwrap();
        for fs in [30, 60] {
            for j in 1..=5 {
                let mu = r.sweep.iter().find(|x| x.fold_size == fs && x.k == j && x.target == MU_TARGET).unwrap();
                assert!(mu.mse >= 0.0);
            }
        }
        // SCDR φ̂ = (Y − μ̂)² ≥ 0 on every replicate
        assert!(r.records.iter().filter(|x| x.estimator.starts_with("scdr")).all(|x| x.psi_hat >= 0.0));
    }

    #[test]
    fn single_sim_is_low_confidence() {
        let mut c = small();
        c.n_sims = 1;
        let r = run_doppler_sweep(&c).unwrap();
        assert!(r.optimal_k.iter().all(|o| o.low_confidence && o.mc_se.is_infinite()));
    }

    #[test]
    fn deterministic() {
        let c = small();
        let a = run_doppler_sweep(&c).unwrap();
        let b = run_doppler_sweep(&c).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.sweep, b.sweep);
    }
}
