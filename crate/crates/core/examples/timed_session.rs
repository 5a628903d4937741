//! One timed trial on a virtual clock: randomized intervals, response
//! windows and occasional false alarms, written out in the trial CSV format.

use percept_core::observer::PsychometricObserver;
use percept_core::session::{run_trial, LatencyModel, SessionConfig, SimulatedResponder, TrialIdentity, VirtualClock};
use percept_core::staircase::StaircaseConfig;
use percept_core::BodySite;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let observer = PsychometricObserver::new(0.3, 0.04).with_false_positive_rate(0.05);
    let mut responder = SimulatedResponder::new(observer, LatencyModel::default());
    let mut clock = VirtualClock::new();
    let mut rng = ChaCha8Rng::seed_from_u64(9);

    let record = run_trial(
        TrialIdentity::new("P01", BodySite::H1, 0)?,
        &SessionConfig::default(),
        &StaircaseConfig::default(),
        &mut responder,
        &mut clock,
        &mut rng,
    )?;

    record.write_csv(&mut std::io::stdout().lock())?;
    eprintln!(
        "{} stimuli over {:.1} s, {} false alarms, threshold {:?}",
        record.rows.len(),
        record.rows.last().map_or(0.0, |r| r.onset_s),
        record.false_positive_count,
        record.threshold.map(|t| t.value),
    );
    Ok(())
}
