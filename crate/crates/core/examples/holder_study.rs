// Run a small Hölder coverage study end to end and write its files.

use dcdr::error::Result;
use dcdr::harness::{run_study, Cell, ExperimentConfig, Study};

pub fn run() -> Result<()> {
    let mut cfg = ExperimentConfig::preset(Study::HolderInference);
    cfg.cells = vec![Cell { d: 1, s: 0.35 }, Cell { d: 4, s: 2.5 }];
    cfg.fold_sizes = vec![200];
    cfg.n_sims = 20;
    cfg.output_dir = std::env::temp_dir().join("dcdr-example-holder");
    let out = run_study(&cfg, true)?;
    for line in &out.summary {
        println!("{line}");
    }
    println!("files: {:?}", out.files.iter().map(|p| p.file_name().unwrap()).collect::<Vec<_>>());
    Ok(())
}

fn main() {
    run().unwrap();
}
