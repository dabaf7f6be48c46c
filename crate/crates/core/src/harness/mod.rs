//! Monte Carlo experiment runner.
//!
//! [`run_study`] validates a config, prepares the output directory, writes
//! `manifest.json`, runs the study on a bounded worker pool and writes the
//! result tables. Output is byte-identical across reruns of the same config
//! apart from `timings.csv`.

pub mod config;
pub mod diagnose;
pub mod doppler;
pub mod holder;
pub mod output;
pub mod records;
pub mod seeds;

use std::path::PathBuf;

pub use config::{Cell, DgpChoice, DiagnosticsConfig, EstimatorConfig, EstimatorKind, ExperimentConfig, Study};
pub use diagnose::{run_diagnostics, DiagnosticsBundle};
pub use doppler::{run_doppler_sweep, DopplerSweepResult};
pub use holder::{run_holder_inference, HolderResult};
pub use records::SimRecord;
pub use seeds::{seed_for, DerivedSeeds};

use crate::error::{Error, Result};
use output::*;

/// Run `f` on a pool of `jobs` workers (rayon's default when `None`).
pub fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        b = b.num_threads(j);
    }
    let pool = b.build().map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone, Default)]
pub struct StudyOutcome {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    /// One human-readable line per cell.
    pub summary: Vec<String>,
}

fn files_for(study: Study) -> Vec<&'static str> {
    match study {
        Study::DopplerSweep => vec![RECORDS, QQ, COVERAGE, BVM, KS, SWEEP, OPTIMAL_K, TIMINGS],
        Study::HolderInference | Study::Custom => vec![RECORDS, QQ, COVERAGE, BVM, KS, TIMINGS],
        Study::Diagnostics => vec![COVARIANCE, NN_DISTANCE, GRAM, BIAS_PROFILE, DIAGNOSTICS],
    }
}

/// Validate, run and persist a study.
pub fn run_study(config: &ExperimentConfig, force: bool) -> Result<StudyOutcome> {
    config.validate()?;
    let dir = config.output_dir.clone();
    prepare_output_dir(&dir, force)?;
    let mut w = WrittenFiles::new(&dir);
    w.json(MANIFEST, &Manifest::new(config, files_for(config.study)))?;
    let mut summary = Vec::new();
    match config.study {
        Study::DopplerSweep => {
            let r = with_pool(config.jobs, || run_doppler_sweep(config))??;
            let s = records::summarize(&r.records, holder::KS_LEVEL)?;
            w.csv(RECORDS, &r.records)?;
            w.csv(QQ, &s.qq)?;
            w.csv(COVERAGE, &s.coverage)?;
            w.csv(BVM, &s.bvm)?;
            w.csv(KS, &s.ks)?;
            w.csv(SWEEP, &r.sweep)?;
            w.csv(OPTIMAL_K, &r.optimal_k)?;
            w.csv(TIMINGS, &r.timings)?;
            for &fs in &config.fold_sizes {
                let line: Vec<String> = r
                    .optimal_k
                    .iter()
                    .filter(|o| o.fold_size == fs)
                    .map(|o| format!("{}={}", o.target, o.k_opt))
                    .collect();
                summary.push(format!("doppler fold_size={fs} optimal k: {}", line.join(" ")));
            }
        }
        Study::HolderInference | Study::Custom => {
            let r = with_pool(config.jobs, || run_holder_inference(config))??;
            w.csv(RECORDS, &r.records)?;
            w.csv(QQ, &r.summaries.qq)?;
            w.csv(COVERAGE, &r.summaries.coverage)?;
            w.csv(BVM, &r.summaries.bvm)?;
            w.csv(KS, &r.summaries.ks)?;
            w.csv(TIMINGS, &r.timings)?;
            for c in &r.summaries.coverage {
                summary.push(format!("{} n={} {}: coverage {:.3} ± {:.3}", c.cell, c.fold_size, c.estimator, c.coverage, c.mc_se));
            }
        }
        Study::Diagnostics => {
            let b = with_pool(config.jobs, || run_diagnostics(config))??;
            w.csv(COVARIANCE, &b.covariance)?;
            w.csv(NN_DISTANCE, &b.nn_distance)?;
            w.csv(GRAM, &b.gram)?;
            w.csv(BIAS_PROFILE, &b.bias)?;
            w.json(DIAGNOSTICS, &b.summary)?;
            let flag = |p: bool| if p { "pass" } else { "FAIL" };
            for c in &b.summary.covariance {
                summary.push(format!("covariance {}: ratio {:.3} in {:?}: {}", c.estimator, c.ratio, c.band, flag(c.pass)));
            }
            for c in &b.summary.nn_distance {
                summary.push(format!("nn-distance d={}: slope {:.3} (target {:.3}): {}", c.d, c.slope, c.target, flag(c.pass)));
            }
            summary.push(format!("{}: {}", b.summary.gram.name, flag(b.summary.gram.pass)));
            summary.push(format!("{}: {}", b.summary.bias.name, flag(b.summary.bias.pass)));
        }
    }
    Ok(StudyOutcome { dir, files: w.files, summary })
}
