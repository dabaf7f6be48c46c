// Wald intervals, standardisation, KS against N(0, 1) and the
// limiting-variance constant for an undersmoothed nuisance.

use dcdr::datagen::DgpSpec;
use dcdr::error::Result;
use dcdr::inference::{
    coverage_band, ks_test, limiting_variance_oracle, normal_quantile, qq_points, standardize, wald_interval,
    Standardization, Undersmoothed,
};
use dcdr::kernels::box_indicator;
use dcdr::rng;
use rand::Rng;

pub fn run() -> Result<()> {
    let (lo, hi) = wald_interval(0.1, 0.02, 1000, 0.05)?;
    println!("Wald 95% interval for psi_hat = 0.1, V = 0.02, n = 1000: [{lo:.4}, {hi:.4}]");
    let z = standardize(0.105, 0.1, 0.02, 1000, Standardization::RootN)?;
    println!("standardised statistic {:.3}", z.value);

    let mut r = rng::seeded(1);
    let sample: Vec<f64> = (0..200).map(|_| normal_quantile(r.random_range(1e-9..1.0)).unwrap()).collect();
    let ks = ks_test(&sample, 0.01)?;
    println!("KS on a normal sample: D = {:.4}, p = {:.3}, reject = {}", ks.statistic, ks.p_value, ks.reject);
    let shifted: Vec<f64> = sample.iter().map(|v| v + 0.5).collect();
    println!("KS after a 0.5 shift: reject = {}", ks_test(&shifted, 0.01)?.reject);
    println!("first QQ point {:?}", qq_points(&sample)?[0]);

    let (blo, bhi) = coverage_band(1000, 0.95, 0.99)?;
    println!("99% binomial band for coverage over 1000 sims: [{blo:.3}, {bhi:.3}]");
    let v = limiting_variance_oracle(&DgpSpec::doppler(0.1), &box_indicator(1), Undersmoothed::Mu)?;
    println!("limit of n h V-hat for the Doppler design with a box kernel: {v:.4}");
    Ok(())
}

fn main() {
    run().unwrap();
}
