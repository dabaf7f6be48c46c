// Regressor diagnostics at a small scale: covariance condition, nearest
// neighbour distances, Gram singularity and the LPR bias profile.

use dcdr::datagen::{DgpSpec, HolderFunctionSpec};
use dcdr::diagnostics::{bias_profile, covariance_condition_report, gram_singularity_rate, log_log_slope, nn_distance_curve};
use dcdr::error::Result;
use dcdr::kernels::KernelChoice;
use dcdr::nuisance::{BandwidthRule, NuisanceSpec};

pub fn run() -> Result<()> {
    let doppler = DgpSpec::doppler(0.1).build()?;
    let knn = NuisanceSpec::Knn { rule: BandwidthRule::knn_log_n() };
    let rep = covariance_condition_report(&knn, &doppler, &[200, 800], 20, 60, 1)?;
    println!("k-NN: n E|cov| = {:?}, ratio {:.2}, bounded: {}", rep.scaled(), rep.ratio(), rep.passes(0.25, 4.0));

    for d in [1, 2] {
        let c = nn_distance_curve(d, &[100, 400, 1600], 100, 2)?;
        println!("d={d}: nearest-neighbour distance slope {:.3} (expect {:.3})", log_log_slope(&c), -1.0 / d as f64);
    }

    let g = gram_singularity_rate(1, &[0.002, 0.01, 0.05, 0.2], 100, 200, 3)?;
    for p in &g {
        println!("h = {:<6} P(singular Gram) = {:.3}", p.h, p.frequency);
    }

    let holder = DgpSpec::holder(HolderFunctionSpec::new(0.35, 1, 500).with_seed(4), 10.0).build()?;
    let lpr = NuisanceSpec::LocalPoly { rule: BandwidthRule::undersmoothed_lpr(), kernel: KernelChoice::Epanechnikov };
    let grid: Vec<Vec<f64>> = (1..10).map(|i| vec![i as f64 / 10.0]).collect();
    for n in [500, 2000] {
        let b = bias_profile(&lpr, &holder, &holder.truth(), n, 20, &grid, 5)?;
        println!("LPR n={n}: sup|bias| {:.3}, sup variance {:.3}", b.sup_abs_bias, b.sup_variance);
    }
    Ok(())
}

fn main() {
    run().unwrap();
}
