//! Converts staircase levels to peak acceleration with the bundled
//! synthetic calibration table, or with a CSV given on the command line.

use percept_core::calibration::{load_calibration, CalibrationTable};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let table = match std::env::args().nth(1) {
        Some(path) => load_calibration(path)?,
        None => CalibrationTable::synthetic_example(),
    };
    let (lo, hi) = table.intensity_range();
    println!("{} knots over [{lo}, {hi}] at {} Hz", table.points().len(), table.carrier_frequency);

    for level in [0.05, 0.1, 0.175, 0.225, 0.3, 0.5, 1.0] {
        let accel = table.intensity_to_acceleration(level)?;
        let back = table.acceleration_to_intensity(accel)?;
        println!("level {level:<5} -> {accel:>6.3} m/s^2 -> level {back:.3}");
    }

    if let Err(e) = table.intensity_to_acceleration(1.2) {
        println!("out of range: {e}");
    }
    Ok(())
}
