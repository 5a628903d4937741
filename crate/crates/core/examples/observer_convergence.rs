//! Many seeded staircases per logistic observer: the mean threshold sits
//! near the 50% point, and the spread shrinks as the slope steepens.

use percept_core::observer::{DetectionModel, PsychometricObserver};
use percept_core::staircase::{init_staircase, StaircaseConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const RUNS: u64 = 500;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("alpha   beta   50% point  mean   sd     NaN");
    for (alpha, beta) in [(0.3, 0.02), (0.3, 0.08), (0.15, 0.03), (0.6, 0.05), (0.97, 0.05)] {
        let observer = PsychometricObserver::new(alpha, beta);
        let mut values = Vec::new();
        let mut nan = 0;
        for run in 0..RUNS {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            rng.set_stream(run);
            let mut state = init_staircase(StaircaseConfig::default())?;
            while state.is_running() {
                let level = state.current_level();
                state.apply(observer.sample_response(level, &mut rng))?;
            }
            let t = state.compute_threshold()?.value;
            if t.is_nan() {
                nan += 1;
            } else {
                values.push(t);
            }
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        println!("{alpha:<6}  {beta:<5}  {:<9.3}  {mean:.3}  {sd:.3}  {nan}", observer.fifty_percent_point()?);
    }
    Ok(())
}
