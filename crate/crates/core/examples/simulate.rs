//! Runs a bundled scene (or a scenario file given as the first argument)
//! and prints the metrics summary.

use dynmap::sim::{evaluate, golden, run_scenario, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = match std::env::args().nth(1) {
        Some(path) => Scenario::load(path.as_ref())?,
        None => golden::field(),
    };
    let cfg = scenario.pipeline_config(None)?;
    let records = run_scenario(&scenario, &cfg)?;
    let report = evaluate(&records);
    println!("{}", scenario.name);
    print!("{}", report.summary());
    Ok(())
}
