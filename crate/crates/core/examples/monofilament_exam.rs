//! Semmes-Weinstein exams from both start sizes, with a hard-threshold
//! observer and with a noisy one.

use percept_core::clinical::{
    monofilament_start_size, run_monofilament_exam, DeterministicForceObserver, ForceDetector, LogisticForceObserver, MonofilamentResult,
    MonofilamentSet,
};
use percept_core::SiteClass;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn show(label: &str, result: &MonofilamentResult) {
    let log: Vec<String> = result.touch_log.iter().map(|t| format!("{}{}", t.size, if t.detected { "+" } else { "-" })).collect();
    println!("{label}: {:?} after {} touches", result.threshold, log.len());
    println!("    {}", log.join(" "));
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let set = MonofilamentSet::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let observers: [(&str, Box<dyn ForceDetector>); 3] = [
        ("hard 0.16 gf", Box::new(DeterministicForceObserver { threshold_gf: 0.16 })),
        ("hard 4.0 gf", Box::new(DeterministicForceObserver { threshold_gf: 4.0 })),
        ("logistic 0.4 gf", Box::new(LogisticForceObserver { threshold_gf: 0.4, log10_spread: 0.15 })),
    ];
    for class in [SiteClass::Hand, SiteClass::PlantarFoot] {
        let start = monofilament_start_size(class);
        for (name, observer) in &observers {
            let result = run_monofilament_exam(&set, observer.as_ref(), start, &mut rng)?;
            show(&format!("{class:?} start {start}, {name}"), &result);
        }
    }
    Ok(())
}
