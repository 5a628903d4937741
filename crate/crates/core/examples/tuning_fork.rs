//! Perception time of a decaying 128 Hz fork for a few amplitude
//! thresholds, first with identical strikes and then with strike-to-strike
//! variability averaged over three strikes.

use percept_core::clinical::{average_perception_time, simulate_tuning_fork_time, TuningForkModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let steady = TuningForkModel::default();
    let varied = TuningForkModel { strike_log_sd: 0.3, ..steady };
    let mut rng = ChaCha8Rng::seed_from_u64(5);

    println!("threshold  steady  varied strikes  mean");
    for seconds in [2.0, 4.0, 6.0, 8.0] {
        let threshold = steady.threshold_for_time(seconds);
        let one = simulate_tuning_fork_time(&steady, threshold, &mut rng)?;
        let strikes = (0..3).map(|_| simulate_tuning_fork_time(&varied, threshold, &mut rng)).collect::<Result<Vec<_>, _>>()?;
        let shown = strikes.iter().map(|s| format!("{s:>2}")).collect::<Vec<_>>().join(" ");
        println!("{threshold:>9.3}  {one:>6}  {shown:<14}  {:.2}", average_perception_time(&strikes)?);
    }
    Ok(())
}
