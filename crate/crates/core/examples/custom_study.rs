// A custom study defined in TOML: any pair of nuisances, either scheme.

use dcdr::error::Result;
use dcdr::harness::{run_holder_inference, ExperimentConfig, Study};

const CONFIG: &str = r#"
study = "custom"
fold_sizes = [150]
n_sims = 25
dgp = "doppler"
noise_variance = 0.1

[[estimators]]
id = "forest_knn"
kind = "custom"
cross_fit = "double"
mu = { method = "centered_forest" }
pi = { method = "knn", rule = { rule = "knn_log_n" } }

[[estimators]]
id = "oracle"
kind = "custom"
cross_fit = "single"
mu = { method = "oracle" }
pi = { method = "oracle" }
"#;

pub fn run() -> Result<()> {
    let cfg = ExperimentConfig::from_toml_str(CONFIG, Some(Study::Custom))?;
    let r = run_holder_inference(&cfg)?;
    for c in &r.summaries.coverage {
        println!("{} {}: coverage {:.2} over {} sims", c.cell, c.estimator, c.coverage, c.n_sims);
    }
    Ok(())
}

fn main() {
    run().unwrap();
}
