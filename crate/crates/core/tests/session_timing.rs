use std::path::PathBuf;

use percept_core::observer::{DeterministicObserver, PsychometricObserver};
use percept_core::session::*;
use percept_core::staircase::{StaircaseConfig, StaircaseStatus};
use percept_core::BodySite;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn identity() -> TrialIdentity {
    TrialIdentity::new("P01", BodySite::H1, 0).unwrap()
}

fn trial(responder: &mut dyn Responder, seed: u64) -> TrialRecord {
    run_trial(
        identity(),
        &SessionConfig::default(),
        &StaircaseConfig::default(),
        responder,
        &mut VirtualClock::new(),
        &mut ChaCha8Rng::seed_from_u64(seed),
    )
    .unwrap()
}

/// Compares against a checked-in file; `PERCEPT_BLESS=1` rewrites it.
fn assert_golden(name: &str, actual: &[u8]) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("PERCEPT_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(expected == actual, "{name} differs from golden:\n{}", String::from_utf8_lossy(actual));
}

#[test]
fn ten_thousand_intervals_are_uniform_on_three_to_six() {
    let config = SessionConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let gaps: Vec<f64> = (0..10_000).map(|_| schedule_next_stimulus(&config, 0.0, &mut rng)).collect();
    assert!(gaps.iter().all(|g| (3.0..=6.0).contains(g)));
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    assert!((4.4..=4.6).contains(&mean), "{mean}");
    // each third of the interval holds about a third of the draws
    for k in 0..3 {
        let lo = 3.0 + k as f64;
        let share = gaps.iter().filter(|g| (lo..lo + 1.0).contains(*g)).count() as f64 / 1e4;
        assert!((share - 1.0 / 3.0).abs() < 0.02, "{share}");
    }
}

#[test]
fn same_seed_same_onsets() {
    let config = SessionConfig::default();
    let draw = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..20).map(|_| schedule_next_stimulus(&config, 0.0, &mut rng)).collect::<Vec<_>>()
    };
    assert_eq!(draw(9), draw(9));
    assert_ne!(draw(9), draw(10));
}

#[test]
fn response_window_edges_in_a_live_session() {
    let mut session = TrialSession::new(identity(), SessionConfig::default(), StaircaseConfig::default()).unwrap();
    session.present(10.0).unwrap();
    assert_eq!(session.respond(12.4).unwrap(), ResponseClass::TruePositive);
    session.close_window().unwrap();

    let mut session = TrialSession::new(identity(), SessionConfig::default(), StaircaseConfig::default()).unwrap();
    session.present(10.0).unwrap();
    assert_eq!(session.respond(12.6).unwrap(), ResponseClass::IgnoredLate);
    assert!(!session.rows()[0].detected);
    assert_eq!(session.false_positive_count(), 1);
}

#[test]
fn response_into_an_early_closed_window_is_late() {
    let mut session = TrialSession::new(identity(), SessionConfig::default(), StaircaseConfig::default()).unwrap();
    session.present(10.0).unwrap();
    session.close_window().unwrap();
    assert_eq!(session.respond(12.5).unwrap(), ResponseClass::IgnoredLate);
    assert!(!session.rows()[0].detected);
    assert_eq!(session.false_positive_count(), 1);
}

#[test]
fn hard_threshold_trace() {
    let record = trial(&mut SimulatedResponder::new(DeterministicObserver::new(0.23), LatencyModel::fixed(0.5)), 5);
    let expected: [(f64, bool, bool); 12] = [
        (0.05, false, false),
        (0.10, false, false),
        (0.15, false, false),
        (0.20, false, false),
        (0.25, true, true),
        (0.20, false, true),
        (0.25, true, true),
        (0.20, false, true),
        (0.25, true, true),
        (0.20, false, true),
        (0.25, true, true),
        (0.20, false, true),
    ];
    let actual: Vec<(f64, bool, bool)> = record.rows.iter().map(|r| (r.level, r.detected, r.reversal)).collect();
    assert_eq!(actual, expected);
    for row in &record.rows {
        assert_eq!(row.response_latency, row.detected.then_some(0.5));
    }
    let threshold = record.threshold.unwrap();
    assert_eq!(threshold.value, 0.225);
    assert_eq!(threshold.reversal_values, vec![0.225; 8]);
}

#[test]
fn never_responding_saturates_with_three_ceiling_rows() {
    let record = trial(&mut ScriptedResponder::never(), 1);
    let levels: Vec<f64> = record.rows.iter().map(|r| r.level).collect();
    assert_eq!(levels.len(), 22);
    assert_eq!(&levels[19..], &[1.0, 1.0, 1.0]);
    assert!(levels[18] < 1.0);
    let threshold = record.threshold.unwrap();
    assert!(threshold.saturated && threshold.value.is_nan());
}

#[test]
fn late_responder_is_indistinguishable_from_silence() {
    let late = trial(&mut ScriptedResponder { latencies: vec![Some(2.6); 100] }, 1);
    let never = trial(&mut ScriptedResponder::never(), 1);
    assert_eq!(late.rows, never.rows);
    assert!(late.threshold.unwrap().value.is_nan());
    assert_eq!(late.false_positive_count, 22);
}

#[test]
fn deterministic_trial_matches_golden_csv() {
    let record = trial(&mut SimulatedResponder::new(DeterministicObserver::new(0.23), LatencyModel::default()), 5);
    assert_golden("trial_hard_threshold_seed5.csv", &export_trial_csv(&record));
    let saturated = trial(&mut ScriptedResponder::never(), 5);
    assert_golden("trial_never_seed5.csv", &export_trial_csv(&saturated));
}

#[test]
fn event_log_rebuilds_the_session() {
    let mut responder =
        SimulatedResponder::new(PsychometricObserver::new(0.35, 0.03).with_false_positive_rate(0.2), LatencyModel::default());
    let mut session = TrialSession::new(identity(), SessionConfig::default(), StaircaseConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut quiet_since = 0.0;
    while session.is_running() {
        let onset = session.draw_next_onset(&mut rng);
        let cue = StimulusCue {
            stimulus_index: session.rows().len(),
            level: session.staircase().current_level(),
            onset,
            response_window: 2.5,
            quiet_since,
        };
        let mut times = responder.respond(&cue, &mut rng).unwrap();
        times.sort_by(f64::total_cmp);
        for t in times.iter().filter(|t| **t < onset) {
            session.respond(*t).unwrap();
        }
        let pending = session.present(onset).unwrap();
        for t in times.iter().filter(|t| **t >= onset) {
            session.respond(*t).unwrap();
        }
        session.close_window().unwrap();
        quiet_since = pending.deadline;
    }
    let rebuilt = TrialSession::from_events(identity(), SessionConfig::default(), StaircaseConfig::default(), session.events()).unwrap();
    assert_eq!(rebuilt.record(), session.record());
    let timestamps: Vec<f64> = session.events().iter().map(|e| e.timestamp).collect();
    assert!(timestamps.windows(2).all(|w| w[0] <= w[1]));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip_is_byte_identical(seed in any::<u64>(), alpha in 0.1f64..0.9, fp in 0.0f64..0.3) {
        let observer = PsychometricObserver::new(alpha, 0.04).with_false_positive_rate(fp);
        let record = trial(&mut SimulatedResponder::new(observer, LatencyModel::default()), seed);
        let bytes = export_trial_csv(&record);
        let back = TrialRecord::read_csv(&bytes[..], &StaircaseConfig::default()).unwrap();
        prop_assert_eq!(export_trial_csv(&back), bytes);
        prop_assert_eq!(&back.rows, &record.rows);
        prop_assert_eq!(back.threshold.as_ref().map(|t| t.value.to_bits()), record.threshold.as_ref().map(|t| t.value.to_bits()));
    }

    #[test]
    fn records_replay_and_respect_timing(seed in any::<u64>(), alpha in 0.1f64..0.9) {
        let observer = PsychometricObserver::new(alpha, 0.04).with_false_positive_rate(0.1);
        let record = trial(&mut SimulatedResponder::new(observer, LatencyModel { min: 0.3, max: 2.8 }), seed);
        let replayed = record.replay(&StaircaseConfig::default()).unwrap();
        let threshold = record.threshold.clone().unwrap();
        let again = replayed.compute_threshold().unwrap();
        prop_assert_eq!(threshold.value.to_bits(), again.value.to_bits());
        let flagged: Vec<usize> = record.rows.iter().filter(|r| r.reversal).map(|r| r.stimulus_index).collect();
        let reversals: Vec<usize> = replayed.reversals().iter().map(|r| r.triggering_index).collect();
        prop_assert_eq!(flagged, reversals);
        prop_assert!(matches!(replayed.status(), StaircaseStatus::Complete | StaircaseStatus::Saturated));
        let mut previous = 0.0;
        for row in &record.rows {
            let gap = row.onset_s - previous;
            prop_assert!((3.0 - 1e-6..=6.0 + 1e-6).contains(&gap), "gap {}", gap);
            if let Some(latency) = row.response_latency {
                prop_assert!(row.detected && latency <= 2.5 + 1e-9);
            }
            previous = row.onset_s;
        }
    }
}
