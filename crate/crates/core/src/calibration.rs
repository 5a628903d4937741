//! Commanded haptic intensity to measured peak acceleration.
//!
//! Tables are two-column CSV files with the header
//! `haptic_intensity,peak_acceleration_m_s2`. Lookups interpolate linearly
//! between knots, which keeps the mapping monotone without shape constraints.

use std::io::Read;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

pub const HEADER: [&str; 2] = ["haptic_intensity", "peak_acceleration_m_s2"];
pub const CARRIER_FREQUENCY_HZ: f64 = 230.0;
pub const HAPTIC_SHARPNESS: f64 = 1.0;

/// Synthetic table for demos and tests. Not a measurement.
pub const SYNTHETIC_EXAMPLE_CSV: &str = include_str!("../data/synthetic_calibration.csv");

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("row {row}: {message}")]
    NonMonotone { row: usize, message: String },
    #[error("calibration table needs at least 2 points, found {0}")]
    TooFewPoints(usize),
    #[error("intensity {level} is outside the table range [{min}, {max}]")]
    OutOfRange { level: f64, min: f64, max: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationPoint {
    pub haptic_intensity: f64,
    pub peak_acceleration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationTable {
    points: Vec<CalibrationPoint>,
    pub carrier_frequency: f64,
    pub haptic_sharpness: f64,
}

impl CalibrationTable {
    /// Validates knots already in memory. Row numbers in errors are 1-based
    /// data rows (the header is row 0).
    pub fn from_points(points: Vec<CalibrationPoint>) -> Result<Self, CalibrationError> {
        if points.len() < 2 {
            return Err(CalibrationError::TooFewPoints(points.len()));
        }
        for (i, p) in points.iter().enumerate() {
            let row = i + 1;
            if !(0.0..=1.0).contains(&p.haptic_intensity) {
                return Err(CalibrationError::Parse { row, message: format!("haptic_intensity {} outside [0, 1]", p.haptic_intensity) });
            }
            if !p.peak_acceleration.is_finite() || p.peak_acceleration < 0.0 {
                return Err(CalibrationError::Parse {
                    row,
                    message: format!("peak acceleration {} must be finite and non-negative", p.peak_acceleration),
                });
            }
        }
        for (i, pair) in points.windows(2).enumerate() {
            let row = i + 2;
            let (prev, next) = (pair[0], pair[1]);
            if next.haptic_intensity == prev.haptic_intensity {
                return Err(CalibrationError::Parse {
                    row,
                    message: format!("duplicate haptic_intensity {} (also on row {})", next.haptic_intensity, row - 1),
                });
            }
            if next.haptic_intensity < prev.haptic_intensity {
                return Err(CalibrationError::NonMonotone {
                    row,
                    message: format!("haptic_intensity {} follows larger value {}", next.haptic_intensity, prev.haptic_intensity),
                });
            }
            if next.peak_acceleration < prev.peak_acceleration {
                return Err(CalibrationError::NonMonotone {
                    row,
                    message: format!("peak acceleration {} drops below previous {}", next.peak_acceleration, prev.peak_acceleration),
                });
            }
        }
        Ok(Self { points, carrier_frequency: CARRIER_FREQUENCY_HZ, haptic_sharpness: HAPTIC_SHARPNESS })
    }

    pub fn from_reader(reader: impl Read) -> Result<Self, CalibrationError> {
        let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = csv.headers().map_err(|e| CalibrationError::Parse { row: 0, message: e.to_string() })?;
        if headers.iter().collect::<Vec<_>>() != HEADER {
            return Err(CalibrationError::Parse { row: 0, message: format!("expected header `{}`", HEADER.join(",")) });
        }
        let mut points = Vec::new();
        for (i, record) in csv.records().enumerate() {
            let row = i + 1;
            let record = record.map_err(|e| CalibrationError::Parse { row, message: e.to_string() })?;
            let field = |idx: usize| -> Result<f64, CalibrationError> {
                let text = record.get(idx).unwrap_or_default();
                text.parse::<f64>()
                    .map_err(|_| CalibrationError::Parse { row, message: format!("`{text}` is not a number in column {}", HEADER[idx]) })
            };
            points.push(CalibrationPoint { haptic_intensity: field(0)?, peak_acceleration: field(1)? });
        }
        Self::from_points(points)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CalibrationError> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn synthetic_example() -> Self {
        Self::from_reader(SYNTHETIC_EXAMPLE_CSV.as_bytes()).expect("bundled table is valid")
    }

    pub fn points(&self) -> &[CalibrationPoint] {
        &self.points
    }

    pub fn intensity_range(&self) -> (f64, f64) {
        (self.points[0].haptic_intensity, self.points[self.points.len() - 1].haptic_intensity)
    }

    pub fn intensity_to_acceleration(&self, level: f64) -> Result<f64, CalibrationError> {
        let (min, max) = self.intensity_range();
        if !(min..=max).contains(&level) {
            return Err(CalibrationError::OutOfRange { level, min, max });
        }
        // first knot with intensity >= level
        let idx = self.points.partition_point(|p| p.haptic_intensity < level);
        let hi = self.points[idx];
        if hi.haptic_intensity == level {
            return Ok(hi.peak_acceleration);
        }
        let lo = self.points[idx - 1];
        let t = (level - lo.haptic_intensity) / (hi.haptic_intensity - lo.haptic_intensity);
        Ok(lo.peak_acceleration + t * (hi.peak_acceleration - lo.peak_acceleration))
    }

    /// Smallest intensity producing `acceleration`. On flat segments this is
    /// the left end of the segment.
    pub fn acceleration_to_intensity(&self, acceleration: f64) -> Result<f64, CalibrationError> {
        let first = self.points[0];
        let last = self.points[self.points.len() - 1];
        if !(first.peak_acceleration..=last.peak_acceleration).contains(&acceleration) {
            return Err(CalibrationError::OutOfRange { level: acceleration, min: first.peak_acceleration, max: last.peak_acceleration });
        }
        let idx = self.points.partition_point(|p| p.peak_acceleration < acceleration);
        let hi = self.points[idx];
        if hi.peak_acceleration == acceleration {
            return Ok(hi.haptic_intensity);
        }
        let lo = self.points[idx - 1];
        let t = (acceleration - lo.peak_acceleration) / (hi.peak_acceleration - lo.peak_acceleration);
        Ok(lo.haptic_intensity + t * (hi.haptic_intensity - lo.haptic_intensity))
    }
}

pub fn load_calibration(path: impl AsRef<Path>) -> Result<CalibrationTable, CalibrationError> {
    CalibrationTable::load(path)
}
