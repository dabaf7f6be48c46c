// A reduced Doppler sweep: MSE-optimal k for DCDR, SCDR and the nuisances.

use dcdr::error::Result;
use dcdr::harness::{run_doppler_sweep, ExperimentConfig, Study};

pub fn run() -> Result<()> {
    let mut cfg = ExperimentConfig::preset(Study::DopplerSweep);
    cfg.fold_sizes = vec![100, 400];
    cfg.n_sims = 40;
    cfg.k_max = 20;
    let r = run_doppler_sweep(&cfg)?;
    for o in &r.optimal_k {
        println!("fold {:>4} {:<7} k_opt {:>2}  mse {:.3e}{}", o.fold_size, o.target, o.k_opt, o.mse, if o.low_confidence { " (low confidence)" } else { "" });
    }
    Ok(())
}

fn main() {
    run().unwrap();
}
