//! Output directory handling and file writers.
//!
//! `manifest.json` is written before any result file, so a directory that
//! holds only a manifest marks a run that did not finish. Nothing written
//! here embeds a timestamp; wall times go to `timings.csv` alone.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::rng::RNG_NAME;

pub const MANIFEST: &str = "manifest.json";
pub const RECORDS: &str = "records.csv";
pub const TIMINGS: &str = "timings.csv";
pub const QQ: &str = "qq.csv";
pub const COVERAGE: &str = "coverage.csv";
pub const BVM: &str = "bvm.csv";
pub const KS: &str = "ks.csv";
pub const SWEEP: &str = "sweep.csv";
pub const OPTIMAL_K: &str = "optimal_k.csv";
pub const COVARIANCE: &str = "covariance.csv";
pub const NN_DISTANCE: &str = "nn_distance.csv";
pub const GRAM: &str = "gram.csv";
pub const BIAS_PROFILE: &str = "bias_profile.csv";
pub const DIAGNOSTICS: &str = "diagnostics.json";

/// Create `dir`, refusing a non-empty directory unless `force` is set.
pub fn prepare_output_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        if !dir.is_dir() {
            return Err(Error::OutputCollision(dir.to_path_buf()));
        }
        if !force && fs::read_dir(dir)?.next().is_some() {
            return Err(Error::OutputCollision(dir.to_path_buf()));
        }
    } else {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub rng: &'static str,
    pub study: &'static str,
    pub master_seed: u64,
    pub effective_sims: usize,
    /// Seeds are derived as `derive(master, "dataset", cell, sim)` and
    /// `derive(dataset, "fit", estimator)`.
    pub seed_scheme: &'static str,
    pub files: Vec<&'static str>,
    pub config: &'a ExperimentConfig,
}

impl<'a> Manifest<'a> {
    pub fn new(config: &'a ExperimentConfig, files: Vec<&'static str>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            rng: RNG_NAME,
            study: config.study.as_str(),
            master_seed: config.seed,
            effective_sims: config.effective_sims(),
            seed_scheme: "splitmix64 label chain",
            files,
            config,
        }
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Paths of the files a study wrote.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WrittenFiles {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
}

impl WrittenFiles {
    pub fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf(), files: Vec::new() }
    }

    pub fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let p = self.dir.join(name);
        write_csv(&p, rows)?;
        self.files.push(p);
        Ok(())
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let p = self.dir.join(name);
        write_json(&p, value)?;
        self.files.push(p);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{ExperimentConfig, Study};

    #[test]
    fn collision_rules() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("new/nested");
        prepare_output_dir(&dir, false).unwrap();
        assert!(dir.is_dir());
        prepare_output_dir(&dir, false).unwrap();
        fs::write(dir.join("x"), "1").unwrap();
        assert!(matches!(prepare_output_dir(&dir, false), Err(Error::OutputCollision(_))));
        prepare_output_dir(&dir, true).unwrap();
    }

    #[test]
    fn manifest_is_deterministic() {
        let c = ExperimentConfig::preset(Study::HolderInference);
        let a = serde_json::to_string(&Manifest::new(&c, vec![RECORDS])).unwrap();
        let b = serde_json::to_string(&Manifest::new(&c, vec![RECORDS])).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("\"version\""));
    }
}
