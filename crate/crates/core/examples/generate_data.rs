// Simulate the two built-in designs and round-trip a dataset through CSV.

use dcdr::data::Dataset;
use dcdr::datagen::{DgpSpec, HolderFunctionSpec};
use dcdr::error::Result;

pub fn run() -> Result<()> {
    let doppler = DgpSpec::doppler(0.1).build()?;
    let data = doppler.generate(300, 42)?;
    println!("doppler: n={} d={} digest={} true ECC={}", data.len(), data.dim(), data.digest(), doppler.psi_true());

    // Hölder design: smoothness 0.35, calibrated to folds of 1000 points
    let spec = HolderFunctionSpec::new(0.35, 1, 1000).with_seed(7);
    let holder = DgpSpec::holder(spec, 10.0).build()?;
    let g = holder.holder().expect("holder design");
    println!("holder: {} bumps, Hölder constant {:.3}, ∫g² = {:.4}", g.bumps(), g.holder_constant(), g.integral_sq());
    let meta = holder.metadata(3000, 1);
    println!("{}", serde_json::to_string(&meta)?);

    let dir = std::env::temp_dir().join("dcdr-example-generate");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("doppler.csv");
    data.save_csv(&path)?;
    let back = Dataset::load_csv(&path)?;
    assert_eq!(back.digest(), data.digest());
    println!("round-tripped {}", path.display());
    Ok(())
}

fn main() {
    run().unwrap();
}
