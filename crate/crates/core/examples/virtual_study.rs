//! Runs the bundled 36-participant study and prints the report tables.
//!
//! `cargo run --example virtual_study -- 7` picks a different seed.

use percept_core::study::{simulate_study, AnalysisConfig, CohortSpec, ExclusionRule};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = CohortSpec::calibrated();
    let seed = match std::env::args().nth(1) {
        Some(arg) => arg.parse()?,
        None => spec.seed,
    };
    let outcome = simulate_study(&spec, seed, &ExclusionRule::default(), &AnalysisConfig::default())?;
    println!("seed {seed}: {} measurements", outcome.run.measurements.len());
    print!("{}", outcome.report.to_text());
    Ok(())
}
