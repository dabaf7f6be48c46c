// DCDR, SCDR and plug-in estimates of the ECC on one Doppler dataset.

use dcdr::datagen::DgpSpec;
use dcdr::error::Result;
use dcdr::estimator::{dcdr_estimate, plugin_estimate, scdr_estimate, EstimatorSetup, ThreeFoldSplit};
use dcdr::nuisance::NuisanceSpec;

pub fn run() -> Result<()> {
    let dgp = DgpSpec::doppler(0.1).build()?;
    let data = dgp.generate(3000, 11)?;
    let split = ThreeFoldSplit::contiguous(data.len())?;
    let setup = EstimatorSetup::new(NuisanceSpec::knn(6), NuisanceSpec::knn(6), 0.05);

    let d = dcdr_estimate(&data, &split, &setup)?;
    let s = scdr_estimate(&data, &split.discard_pi_fold(), &setup)?;
    let p = plugin_estimate(&data, &split.discard_pi_fold(), &setup)?;
    println!("true ECC {:.4}", dgp.psi_true());
    for (name, e) in [("dcdr", &d), ("scdr", &s), ("plug-in", &p)] {
        println!("{name:<8} {:.4}  95% CI [{:.4}, {:.4}]  n_phi={}", e.psi_hat, e.ci_low, e.ci_high, e.n_phi);
    }
    Ok(())
}

fn main() {
    run().unwrap();
}
