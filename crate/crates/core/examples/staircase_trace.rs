//! Step-by-step trace of one staircase against a hard-threshold observer.
//!
//! `cargo run --example staircase_trace -- 0.47` uses a different threshold.

use percept_core::observer::DeterministicObserver;
use percept_core::staircase::{init_staircase, StaircaseConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let threshold: f64 = std::env::args().nth(1).map(|a| a.parse()).transpose()?.unwrap_or(0.23);
    let observer = DeterministicObserver::new(threshold);
    let mut state = init_staircase(StaircaseConfig::default())?;

    println!("  #  level  felt  reversal");
    while state.is_running() {
        let level = state.current_level();
        let felt = observer.detects(level);
        let outcome = state.apply(felt)?;
        let reversal = outcome.reversal.map(|r| format!("{:.3}", r.value)).unwrap_or_default();
        println!("{:>3}  {level:.2}   {:<4}  {reversal}", state.history().len(), if felt { "yes" } else { "no" });
    }

    let result = state.compute_threshold()?;
    println!("status {:?}, threshold {}", state.status(), result.value);
    Ok(())
}
