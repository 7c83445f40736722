//! Running an experiment from a configuration, as the CLI does.

use bayesmatch::harness::{tv_experiment, Context, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ExperimentConfig::from_json(
        r#"{"seed": 1, "n": [12, 24], "m": [1, 2, 4], "reps": 3, "out": "target/example-out"}"#,
    )?;
    let ctx = Context::new(cfg)?;
    println!("n,M,mean_tv,se");
    for r in tv_experiment(&ctx)? {
        println!("{},{},{:.3e},{:.1e}", r.n, r.m, r.mean_tv, r.se);
    }
    Ok(())
}
