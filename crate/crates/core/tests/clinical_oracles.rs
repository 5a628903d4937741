use percept_core::clinical::*;
use percept_core::SiteClass;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Hand-traced: (observer threshold, touches from 0.07 start, touches from
/// 0.4 start). The recorded size always equals the observer's threshold.
///
/// From a felt start the exam descends one touch per felt size, then spends
/// three touches on the first unfelt size (every size below 0.4 is a
/// three-touch filament). From an unfelt start it climbs, spending three
/// touches per unfelt size up to 1.0 and one per unfelt size above, then one
/// touch on the first felt size.
const TRACE: [(f64, usize, usize); 20] = [
    (0.008, 4, 6),
    (0.02, 6, 8),
    (0.04, 5, 7),
    (0.07, 4, 6),
    (0.16, 4, 5),
    (0.4, 7, 4),
    (0.6, 10, 4),
    (1.0, 13, 7),
    (1.4, 16, 10),
    (2.0, 17, 11),
    (4.0, 18, 12),
    (6.0, 19, 13),
    (8.0, 20, 14),
    (10.0, 21, 15),
    (15.0, 22, 16),
    (26.0, 23, 17),
    (60.0, 24, 18),
    (100.0, 25, 19),
    (180.0, 26, 20),
    (300.0, 27, 21),
];

fn exam(threshold_gf: f64, start: f64) -> MonofilamentResult {
    let set = MonofilamentSet::standard();
    let observer = DeterministicForceObserver { threshold_gf };
    run_monofilament_exam(&set, &observer, start, &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
}

#[test]
fn deterministic_sweep_matches_hand_trace() {
    let hand = monofilament_start_size(SiteClass::Hand);
    let foot = monofilament_start_size(SiteClass::PlantarFoot);
    assert_eq!((hand, foot), (0.07, 0.4));
    for (size, hand_touches, foot_touches) in TRACE {
        for (start, touches) in [(hand, hand_touches), (foot, foot_touches)] {
            let r = exam(size, start);
            assert_eq!(r.threshold, MonofilamentThreshold::Size(size), "threshold {size} start {start}");
            assert_eq!(r.touch_log.len(), touches, "threshold {size} start {start}");
        }
    }
}

#[test]
fn nothing_felt_climbs_the_whole_set() {
    let r = exam(1000.0, 0.07);
    assert_eq!(r.threshold, MonofilamentThreshold::NoneFelt);
    assert_eq!(r.touch_log.len(), 27);
    assert_eq!(exam(1000.0, 0.4).touch_log.len(), 21);
}

#[test]
fn thresholds_between_sizes_record_the_next_size_up() {
    let r = exam(0.05, 0.07);
    assert_eq!(r.threshold, MonofilamentThreshold::Size(0.07));
    let r = exam(0.5, 0.07);
    assert_eq!(r.threshold, MonofilamentThreshold::Size(0.6));
}

#[test]
fn monotone_in_observer_threshold_for_every_pair() {
    let set = MonofilamentSet::standard();
    let mut grid: Vec<f64> = set.sizes().to_vec();
    grid.extend(set.sizes().windows(2).map(|w| (w[0] + w[1]) / 2.0));
    grid.push(0.001);
    grid.push(1000.0);
    let rank = |t: MonofilamentThreshold| t.size().unwrap_or(f64::INFINITY);
    for start in [0.07, 0.4] {
        for &a in &grid {
            for &b in &grid {
                if a <= b {
                    assert!(rank(exam(a, start).threshold) <= rank(exam(b, start).threshold), "{a} {b} {start}");
                }
            }
        }
    }
}

#[test]
fn rejects_start_size_outside_the_set() {
    let set = MonofilamentSet::standard();
    let observer = DeterministicForceObserver { threshold_gf: 1.0 };
    assert!(run_monofilament_exam(&set, &observer, 0.5, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
}

proptest! {
    #[test]
    fn touch_log_respects_counts_and_threshold_was_felt(
        threshold in 0.005f64..400.0,
        spread in 0.05f64..1.0,
        foot in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let set = MonofilamentSet::standard();
        let observer = LogisticForceObserver { threshold_gf: threshold, log10_spread: spread };
        let start = if foot { 0.4 } else { 0.07 };
        let r = run_monofilament_exam(&set, &observer, start, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        for &size in set.sizes() {
            let touches = r.touch_log.iter().filter(|t| t.size == size).count();
            prop_assert!(touches as u32 <= set.touches_for(size));
        }
        if let MonofilamentThreshold::Size(s) = r.threshold {
            prop_assert!(set.contains(s));
            prop_assert!(r.touch_log.iter().any(|t| t.size == s && t.detected));
        }
    }

    #[test]
    fn fork_time_decreases_with_threshold(a in 0.1f64..99.0, b in 0.1f64..99.0) {
        let model = TuningForkModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let t_lo = simulate_tuning_fork_time(&model, lo, &mut rng).unwrap();
        let t_hi = simulate_tuning_fork_time(&model, hi, &mut rng).unwrap();
        prop_assert!(t_lo >= t_hi);
        prop_assert_eq!(t_lo.fract(), 0.0);
    }
}
