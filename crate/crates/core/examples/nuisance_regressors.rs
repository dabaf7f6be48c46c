// Fit each nuisance regressor on one training fold and compare errors.

use dcdr::datagen::DgpSpec;
use dcdr::error::Result;
use dcdr::kernels::KernelChoice;
use dcdr::nuisance::{fit, BandwidthRule, FitContext, NuisanceSpec};

pub fn run() -> Result<()> {
    let dgp = DgpSpec::doppler(0.1).build()?;
    let train = dgp.generate(2000, 1)?;
    let truth = dgp.truth();
    let grid: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
    let specs = [
        NuisanceSpec::knn(10),
        NuisanceSpec::Knn { rule: BandwidthRule::knn_log_n() },
        NuisanceSpec::LocalPoly { rule: BandwidthRule::undersmoothed_lpr(), kernel: KernelChoice::Epanechnikov },
        NuisanceSpec::LocalPoly { rule: BandwidthRule::adaptive_knn10(), kernel: KernelChoice::Epanechnikov },
        NuisanceSpec::CdaKernel { rule: BandwidthRule::mse_optimal(1.0), kernel: KernelChoice::Epanechnikov },
        NuisanceSpec::centered_forest(),
        NuisanceSpec::TrainingMean,
    ];
    let ctx = FitContext::default().seed(3);
    for spec in &specs {
        let f = fit(spec, &train.x, &train.y, &ctx)?;
        let mse = grid.iter().map(|&x| (f.predict(&[x]) - truth(&[x])).powi(2)).sum::<f64>() / grid.len() as f64;
        let t = f.tuning(spec, train.len(), 1);
        println!("{:<14} grid MSE {mse:.4}  tuning {}", f.method_name(), serde_json::to_string(&t)?);
    }
    Ok(())
}

fn main() {
    run().unwrap();
}
