//! Command-line front end. `main.rs` only calls [`main_with_args`].
//!
//! Precedence for study settings: flags > config file > study preset.
//! Exit codes: 0 ok, 2 data error, 3 config error, 4 output collision,
//! 1 anything else.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use crate::data::Dataset;
use crate::datagen::{DgpSpec, HolderFunctionSpec};
use crate::error::{Error, Result};
use crate::estimator::{cycle_folds_average, CrossFit, EstimatorSetup, ThreeFoldSplit};
use crate::harness::{self, ExperimentConfig, Study};
use crate::kernels::KernelChoice;
use crate::nuisance::{BandwidthRule, FitContext, NuisanceSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_COLLISION: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "dcdr", version, about = "Doubly robust estimation of the expected conditional covariance")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a dataset (CSV columns x1..xd,a,y) with a JSON metadata sidecar.
    Gen(GenArgs),
    /// Estimate the ECC of a CSV dataset with three-fold cycling.
    Estimate(EstimateArgs),
    /// Doppler sweep over k for DCDR and SCDR k-NN estimators.
    DopplerSweep(StudyArgs),
    /// Coverage and CLT study on Hölder designs.
    HolderSim(StudyArgs),
    /// Regressor diagnostics (covariance condition, NN distance, Gram, bias).
    Diagnose(StudyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DgpName {
    Doppler,
    Holder,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum, default_value = "doppler")]
    pub dgp: DgpName,
    /// Number of rows.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Noise variance (equal to the true ECC).
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.1)]
    pub noise_variance: f64,
    /// Hölder smoothness.
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.35)]
    pub s: f64,
    /// Hölder dimension.
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    /// Sample size the Hölder function is calibrated to (defaults to n/3).
    #[arg(long)]
    pub n_ref: Option<usize>,
    #[arg(long, allow_negative_numbers = true, default_value_t = 1.0)]
    pub amplitude: f64,
    /// Seed of the Hölder function itself.
    #[arg(long, default_value_t = 0)]
    pub function_seed: u64,
    /// Output CSV; metadata goes to the same path with a .json extension.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Knn,
    Lpr,
    Cda,
    Forest,
    Mean,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scheme {
    Double,
    Single,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Input CSV with columns x1..xd,a,y.
    pub csv: PathBuf,
    #[arg(long, value_enum, default_value = "knn")]
    pub mu: Method,
    #[arg(long, value_enum, default_value = "knn")]
    pub pi: Method,
    /// Fixed neighbour count for k-NN nuisances (default: round(log n)).
    #[arg(long)]
    pub k: Option<usize>,
    /// Fixed bandwidth for LPR/CDA nuisances (default: each method's rate).
    #[arg(long, allow_negative_numbers = true)]
    pub bandwidth: Option<f64>,
    /// Smoothness used by the CDA MSE-optimal rate.
    #[arg(long, allow_negative_numbers = true, default_value_t = 1.0)]
    pub smoothness: f64,
    #[arg(long, value_enum, default_value = "double")]
    pub cross_fit: Scheme,
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.05)]
    pub alpha: f64,
    /// Seed of the random fold partition.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the JSON estimate here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    /// TOML file overlaid on the study preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Multiplier on the number of simulations.
    #[arg(long, allow_negative_numbers = true)]
    pub scale: Option<f64>,
    /// Worker threads.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Overwrite a non-empty output directory.
    #[arg(long)]
    pub force: bool,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Simulations per cell before scaling.
    #[arg(long)]
    pub sims: Option<usize>,
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Data { .. }
        | Error::Csv(_)
        | Error::Io(_)
        | Error::EmptyFold(_)
        | Error::TooFewValues { .. }
        | Error::DimensionMismatch { .. } => EXIT_DATA,
        Error::Config(_) | Error::InvalidParameter(_) | Error::Toml(_) => EXIT_CONFIG,
        Error::OutputCollision(_) => EXIT_COLLISION,
        _ => EXIT_OTHER,
    }
}

/// Full help text of every subcommand, used for snapshot tests.
pub fn help_text() -> String {
    let mut cmd = Cli::command();
    let mut out = cmd.render_long_help().to_string();
    for sub in cmd.get_subcommands_mut() {
        out.push_str(&format!("\n===== {} =====\n", sub.get_name()));
        out.push_str(&sub.render_long_help().to_string());
    }
    out
}

fn nuisance(m: Method, a: &EstimateArgs) -> Result<NuisanceSpec> {
    Ok(match m {
        Method::Knn => NuisanceSpec::Knn {
            rule: match a.k {
                Some(k) => BandwidthRule::fixed(k as f64),
                None => BandwidthRule::knn_log_n(),
            },
        },
        Method::Lpr => NuisanceSpec::LocalPoly {
            rule: a.bandwidth.map_or(BandwidthRule::undersmoothed_lpr(), BandwidthRule::fixed),
            kernel: KernelChoice::Epanechnikov,
        },
        Method::Cda => NuisanceSpec::CdaKernel {
            rule: a.bandwidth.map_or(BandwidthRule::mse_optimal(a.smoothness), BandwidthRule::fixed),
            kernel: KernelChoice::Epanechnikov,
        },
        Method::Forest => NuisanceSpec::centered_forest(),
        Method::Mean => NuisanceSpec::TrainingMean,
        Method::Zero => NuisanceSpec::Zero,
    })
}

fn check_estimate_flags(a: &EstimateArgs) -> Result<()> {
    let uses = |m: Method| a.mu == m || a.pi == m;
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(Error::Config(format!("--alpha must lie in (0, 1), got {}", a.alpha)));
    }
    match a.k {
        Some(0) => return Err(Error::Config("--k must be at least 1".into())),
        Some(_) if !uses(Method::Knn) => return Err(Error::Config("--k needs a knn nuisance".into())),
        _ => {}
    }
    if let Some(h) = a.bandwidth {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Config(format!("--bandwidth must be positive, got {h}")));
        }
        if !uses(Method::Lpr) && !uses(Method::Cda) {
            return Err(Error::Config("--bandwidth needs an lpr or cda nuisance".into()));
        }
    }
    if !(a.smoothness > 0.0 && a.smoothness.is_finite()) {
        return Err(Error::Config(format!("--smoothness must be positive, got {}", a.smoothness)));
    }
    Ok(())
}

fn cmd_estimate(a: &EstimateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    check_estimate_flags(a)?;
    let data = Dataset::load_csv(&a.csv)?;
    let split = ThreeFoldSplit::random(data.len(), a.seed)?;
    let setup = EstimatorSetup::new(nuisance(a.mu, a)?, nuisance(a.pi, a)?, a.alpha)
        .contexts(FitContext::default().seed(a.seed), FitContext::default().seed(a.seed ^ 1));
    let scheme = match a.cross_fit {
        Scheme::Double => CrossFit::Double,
        Scheme::Single => CrossFit::Single,
    };
    let e = cycle_folds_average(&data, &split, scheme, &setup)?;
    let json = serde_json::to_string_pretty(&e)?;
    writeln!(err, "psi_hat = {:.6}, {:.0}% CI [{:.6}, {:.6}], n = {}", e.psi_hat, 100.0 * (1.0 - a.alpha), e.ci_low, e.ci_high, e.n_phi)?;
    writeln!(out, "{json}")?;
    if let Some(p) = &a.out {
        std::fs::write(p, format!("{json}\n"))?;
    }
    Ok(())
}

fn cmd_gen(a: &GenArgs, err: &mut dyn Write) -> Result<()> {
    let spec = match a.dgp {
        DgpName::Doppler => DgpSpec::doppler(a.noise_variance),
        DgpName::Holder => {
            let n_ref = a.n_ref.unwrap_or((a.n / 3).max(1));
            let h = HolderFunctionSpec::new(a.s, a.d, n_ref).with_amplitude(a.amplitude).with_seed(a.function_seed);
            DgpSpec::holder(h, a.noise_variance)
        }
    };
    let dgp = spec.build()?;
    let data = dgp.generate(a.n, a.seed)?;
    data.save_csv(&a.out)?;
    let meta = a.out.with_extension("json");
    dgp.metadata(a.n, a.seed).save(&meta)?;
    writeln!(err, "wrote {} rows to {} (metadata {})", a.n, a.out.display(), meta.display())?;
    Ok(())
}

/// Resolve a study config: preset, then file, then flags.
pub fn study_config(study: Study, a: &StudyArgs) -> Result<ExperimentConfig> {
    let mut c = match &a.config {
        Some(p) => ExperimentConfig::load(p, Some(study))?,
        None => ExperimentConfig::preset(study),
    };
    if c.study != study {
        return Err(Error::Config(format!("config is for study `{}`, not `{}`", c.study.as_str(), study.as_str())));
    }
    if let Some(s) = a.scale {
        c.scale = s;
    }
    if let Some(j) = a.jobs {
        c.jobs = Some(j);
    }
    if let Some(o) = &a.out {
        c.output_dir = o.clone();
    }
    if let Some(s) = a.seed {
        c.seed = s;
    }
    if let Some(n) = a.sims {
        c.n_sims = n;
    }
    c.validate()?;
    Ok(c)
}

fn cmd_study(study: Study, a: &StudyArgs, out: &mut dyn Write) -> Result<()> {
    let c = study_config(study, a)?;
    let o = harness::run_study(&c, a.force)?;
    for line in &o.summary {
        writeln!(out, "{line}")?;
    }
    writeln!(out, "wrote {} files to {}", o.files.len(), display(&o.dir))?;
    Ok(())
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    let res = match &cli.command {
        Command::Gen(a) => cmd_gen(a, err),
        Command::Estimate(a) => cmd_estimate(a, out, err),
        Command::DopplerSweep(a) => cmd_study(Study::DopplerSweep, a, out),
        Command::HolderSim(a) => cmd_study(Study::HolderInference, a, out),
        Command::Diagnose(a) => cmd_study(Study::Diagnostics, a, out),
    };
    match res {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let code = main_with_args(std::iter::once("dcdr").chain(args.iter().copied()), &mut o, &mut e);
        (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
    }

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn unknown_flag_is_config_error() {
        assert_eq!(run(&["holder-sim", "--bogus"]).0, EXIT_CONFIG);
        assert_eq!(run(&[]).0, EXIT_CONFIG);
    }

    #[test]
    fn help_exits_zero() {
        let (code, out, _) = run(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("holder-sim"));
    }

    #[test]
    fn flags_override_preset() {
        let a = StudyArgs { config: None, scale: Some(0.1), jobs: Some(2), force: false, out: Some("x".into()), seed: Some(5), sims: None };
        let c = study_config(Study::HolderInference, &a).unwrap();
        assert_eq!(c.effective_sims(), 10);
        assert_eq!(c.jobs, Some(2));
        assert_eq!(c.seed, 5);
    }

    #[test]
    fn tuning_flag_checks() {
        let base = || EstimateArgs {
            csv: "x.csv".into(),
            mu: Method::Knn,
            pi: Method::Knn,
            k: None,
            bandwidth: None,
            smoothness: 1.0,
            cross_fit: Scheme::Double,
            alpha: 0.05,
            seed: 0,
            out: None,
        };
        assert!(check_estimate_flags(&base()).is_ok());
        assert!(check_estimate_flags(&EstimateArgs { alpha: 1.5, ..base() }).is_err());
        assert!(check_estimate_flags(&EstimateArgs { k: Some(0), ..base() }).is_err());
        assert!(check_estimate_flags(&EstimateArgs { bandwidth: Some(0.1), ..base() }).is_err());
        assert!(check_estimate_flags(&EstimateArgs { mu: Method::Lpr, bandwidth: Some(0.1), ..base() }).is_ok());
    }
}
