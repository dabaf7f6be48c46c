//! Column contracts of the harness output files, which plotting scripts read.

use std::path::Path;

use dcdr::harness::records::{BvmRow, CoverageRow, KsRow, QqRow, TimingRecord};
use dcdr::harness::{run_study, Cell, ExperimentConfig, SimRecord, Study};

const RECORDS: &[&str] = &[
    "study", "cell", "dgp", "d", "s", "noise_variance", "estimator", "fold_size", "sim", "psi_hat", "psi_true",
    "standardized_stat", "standardization", "variance_hat", "ci_low", "ci_high", "covered", "dataset_hash",
];
const TIMINGS: &[&str] = &["study", "cell", "estimator", "fold_size", "sim", "wall_time_ms"];
const QQ: &[&str] = &["cell", "estimator", "fold_size", "theoretical", "empirical"];
const COVERAGE: &[&str] = &["cell", "estimator", "fold_size", "n_sims", "coverage", "mc_se"];
const BVM: &[&str] = &[
    "cell", "estimator", "fold_size", "n_sims", "bias2", "bias2_lo", "bias2_hi", "variance", "variance_lo",
    "variance_hi", "mse", "mse_lo", "mse_hi",
];
const KS: &[&str] = &["cell", "estimator", "fold_size", "m", "statistic", "p_value", "critical_value", "level", "reject"];
const SWEEP: &[&str] = &["fold_size", "k", "target", "n_sims", "mse", "mc_se"];
const OPTIMAL_K: &[&str] = &["fold_size", "target", "k_opt", "mse", "mc_se", "low_confidence"];
const COVARIANCE: &[&str] = &["estimator", "n", "estimate", "n_times_estimate", "scaled", "mc_se", "noise_floor"];
const NN: &[&str] = &["d", "n", "mean", "mc_se"];
const GRAM: &[&str] = &["d", "n", "h", "frequency", "mc_se"];
const BIAS: &[&str] = &["estimator", "n", "x", "bias", "bias_se", "variance"];

fn header(path: &Path) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    r.headers().unwrap().iter().map(String::from).collect()
}

fn rows<T: serde::de::DeserializeOwned>(path: &Path) -> Vec<T> {
    csv::Reader::from_path(path).unwrap().deserialize().collect::<Result<_, _>>().unwrap()
}

fn check_manifest(dir: &Path, files: &[&str]) {
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    for key in ["tool", "version", "rng", "study", "master_seed", "effective_sims", "seed_scheme", "files", "config"] {
        assert!(m.get(key).is_some(), "manifest lacks `{key}`");
    }
    let listed: Vec<&str> = m["files"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    let t0 = std::fs::metadata(dir.join("manifest.json")).unwrap().modified().unwrap();
    for f in files {
        assert!(listed.contains(f), "manifest does not list {f}");
        let t = std::fs::metadata(dir.join(f)).unwrap().modified().unwrap();
        assert!(t >= t0, "{f} written before the manifest");
    }
}

#[test]
fn holder_study_files() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = ExperimentConfig::preset(Study::HolderInference);
    c.cells = vec![Cell { d: 1, s: 0.6 }, Cell { d: 4, s: 2.5 }];
    c.fold_sizes = vec![50, 80];
    c.n_sims = 4;
    c.output_dir = tmp.path().to_path_buf();
    run_study(&c, false).unwrap();
    let d = tmp.path();
    for (f, cols) in [
        ("records.csv", RECORDS),
        ("timings.csv", TIMINGS),
        ("qq.csv", QQ),
        ("coverage.csv", COVERAGE),
        ("bvm.csv", BVM),
        ("ks.csv", KS),
    ] {
        assert_eq!(header(&d.join(f)), cols, "{f}");
    }
    check_manifest(d, &["records.csv", "qq.csv", "coverage.csv", "bvm.csv", "ks.csv", "timings.csv"]);

    let recs: Vec<SimRecord> = rows(&d.join("records.csv"));
    // d = 1: three estimators; d = 4: no LPR
    assert_eq!(recs.len(), 2 * 4 * 3 + 2 * 4 * 2);
    assert!(recs.iter().all(|r| r.s.is_some() && r.psi_true == 10.0));
    assert_eq!(rows::<TimingRecord>(&d.join("timings.csv")).len(), recs.len());
    let cov: Vec<CoverageRow> = rows(&d.join("coverage.csv"));
    assert_eq!(cov.len(), 10);
    assert_eq!(rows::<BvmRow>(&d.join("bvm.csv")).len(), 10);
    assert_eq!(rows::<QqRow>(&d.join("qq.csv")).len(), 40);
    assert_eq!(rows::<KsRow>(&d.join("ks.csv")).len(), 10);
}

#[test]
fn doppler_sweep_files() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = ExperimentConfig::preset(Study::DopplerSweep);
    c.fold_sizes = vec![40, 60];
    c.n_sims = 3;
    c.k_max = 5;
    c.output_dir = tmp.path().to_path_buf();
    run_study(&c, false).unwrap();
    let d = tmp.path();
    assert_eq!(header(&d.join("records.csv")), RECORDS);
    assert_eq!(header(&d.join("sweep.csv")), SWEEP);
    assert_eq!(header(&d.join("optimal_k.csv")), OPTIMAL_K);
    check_manifest(d, &["records.csv", "sweep.csv", "optimal_k.csv", "coverage.csv"]);
    let recs: Vec<SimRecord> = rows(&d.join("records.csv"));
    assert_eq!(recs.len(), 2 * 5 * 2 * 3);
    assert!(recs.iter().all(|r| r.s.is_none() && r.dgp == "doppler"));
    let sweep: Vec<serde_json::Value> = {
        let mut r = csv::Reader::from_path(d.join("sweep.csv")).unwrap();
        r.deserialize().collect::<Result<_, _>>().unwrap()
    };
    // fold sizes × k × {dcdr, scdr, mu_hat, pi_hat}
    assert_eq!(sweep.len(), 2 * 5 * 4);
}

#[test]
fn diagnostics_files() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = ExperimentConfig::preset(Study::Diagnostics);
    let g = &mut c.diagnostics;
    g.cov_n_grid = vec![60, 120];
    g.n_pairs = 10;
    g.n_refits = 30;
    g.nn_n_grid = vec![20, 80];
    g.nn_reps = 20;
    g.gram_reps = 20;
    g.bias_n_grid = vec![100, 200];
    g.bias_refits = 3;
    g.bias_grid_points = 5;
    c.output_dir = tmp.path().to_path_buf();
    run_study(&c, false).unwrap();
    let d = tmp.path();
    assert_eq!(header(&d.join("covariance.csv")), COVARIANCE);
    assert_eq!(header(&d.join("nn_distance.csv")), NN);
    assert_eq!(header(&d.join("gram.csv")), GRAM);
    assert_eq!(header(&d.join("bias_profile.csv")), BIAS);
    check_manifest(d, &["covariance.csv", "nn_distance.csv", "gram.csv", "bias_profile.csv", "diagnostics.json"]);
    let s: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("diagnostics.json")).unwrap()).unwrap();
    for key in ["covariance", "nn_distance", "gram", "bias", "all_pass"] {
        assert!(s.get(key).is_some(), "diagnostics.json lacks `{key}`");
    }
    assert_eq!(s["covariance"].as_array().unwrap().len(), c.estimators.len());
}
