//! Failure ratios of the Markov and straight-line predictors on the three
//! bundled scenes.

use dynmap::sim::{compare_predictors, golden};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("scene,predictions,markov_failure_ratio,linear_failure_ratio");
    for (name, scenario) in golden::all() {
        let cfg = scenario.pipeline_config(None)?;
        let c = compare_predictors(&scenario, &cfg)?;
        println!("{name},{},{:.4},{:.4}", c.markov_predictions, c.markov_failure_ratio, c.linear_failure_ratio);
    }
    Ok(())
}
