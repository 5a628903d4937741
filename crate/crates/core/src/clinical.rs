//! Models of the two clinical comparator exams.
//!
//! The tuning-fork exam records how many seconds a participant feels a
//! struck 128 Hz fork before its vibration decays below their threshold. The
//! fork is modeled as an exponential decay `A(t) = A0 * exp(-t / tau)` with
//! an optional log-normal multiplier on `A0` for strike-to-strike variation.
//!
//! The monofilament exam walks a graded filament set: down from a felt size
//! until a size is not felt, or up from an unfelt start until a size is felt.
//! Light filaments are touched three times before being declared "not felt",
//! heavier ones once.

use std::path::Path;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::site::SiteClass;

pub const TUNING_FORK_FREQUENCY_HZ: f64 = 128.0;

const STANDARD_SET_JSON: &str = include_str!("../data/monofilament_touch_test.json");
const SIZE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ClinicalError {
    #[error("invalid tuning fork model: `{field}` {reason}")]
    InvalidModel { field: &'static str, reason: String },
    #[error("amplitude threshold must be positive, got {0}")]
    InvalidThreshold(f64),
    #[error("invalid monofilament set: {0}")]
    InvalidSet(String),
    #[error("start size {0} gf is not part of the monofilament set")]
    InvalidStartSize(f64),
    #[error("no perception times to average")]
    EmptyInput,
    #[error("reading monofilament set: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing monofilament set: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningForkModel {
    pub initial_amplitude: f64,
    /// Seconds.
    pub decay_constant: f64,
    pub frequency: f64,
    /// Seconds per watch tick.
    pub time_resolution: f64,
    /// Standard deviation of `ln(multiplier)` applied to the initial
    /// amplitude on each strike. Zero disables strike variability.
    pub strike_log_sd: f64,
}

impl Default for TuningForkModel {
    fn default() -> Self {
        Self {
            initial_amplitude: 100.0,
            decay_constant: 2.0,
            frequency: TUNING_FORK_FREQUENCY_HZ,
            time_resolution: 1.0,
            strike_log_sd: 0.0,
        }
    }
}

impl TuningForkModel {
    pub fn validate(&self) -> Result<(), ClinicalError> {
        let check = |ok: bool, field, reason: &str| {
            if ok {
                Ok(())
            } else {
                Err(ClinicalError::InvalidModel { field, reason: reason.to_string() })
            }
        };
        check(self.initial_amplitude > 0.0, "initial_amplitude", "must be positive")?;
        check(self.decay_constant > 0.0, "decay_constant", "must be positive")?;
        check(self.time_resolution > 0.0, "time_resolution", "must be positive")?;
        check(self.strike_log_sd >= 0.0, "strike_log_sd", "must be non-negative")
    }

    pub fn amplitude_at(&self, seconds: f64) -> f64 {
        self.initial_amplitude * (-seconds / self.decay_constant).exp()
    }

    /// Seconds until the vibration falls to `threshold`, before quantization.
    pub fn perception_time_continuous(&self, initial_amplitude: f64, threshold: f64) -> f64 {
        (self.decay_constant * (initial_amplitude / threshold).ln()).max(0.0)
    }

    /// Amplitude threshold that yields `seconds` of perception for an
    /// unperturbed strike.
    pub fn threshold_for_time(&self, seconds: f64) -> f64 {
        self.amplitude_at(seconds.max(0.0))
    }

    fn quantize(&self, seconds: f64) -> f64 {
        (seconds / self.time_resolution).round() * self.time_resolution
    }
}

/// One strike of the fork, timed on the watch.
pub fn simulate_tuning_fork_time(model: &TuningForkModel, threshold: f64, rng: &mut dyn RngCore) -> Result<f64, ClinicalError> {
    model.validate()?;
    if threshold.is_nan() || threshold <= 0.0 {
        return Err(ClinicalError::InvalidThreshold(threshold));
    }
    let mut amplitude = model.initial_amplitude;
    if model.strike_log_sd > 0.0 {
        let normal = Normal::new(0.0, model.strike_log_sd).expect("finite sd");
        amplitude *= normal.sample(rng).exp();
    }
    Ok(model.quantize(model.perception_time_continuous(amplitude, threshold)))
}

pub fn average_perception_time(times: &[f64]) -> Result<f64, ClinicalError> {
    if times.is_empty() {
        return Err(ClinicalError::EmptyInput);
    }
    Ok(times.iter().sum::<f64>() / times.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonofilamentSet {
    #[serde(default)]
    pub name: String,
    #[serde(rename = "sizes_gf")]
    sizes: Vec<f64>,
    #[serde(rename = "multi_touch_max_gf")]
    pub multi_touch_boundary: f64,
    pub multi_touch_count: u32,
}

impl MonofilamentSet {
    pub const MIN_SIZE_GF: f64 = 0.008;
    pub const MAX_SIZE_GF: f64 = 300.0;

    pub fn new(sizes: Vec<f64>, multi_touch_boundary: f64, multi_touch_count: u32) -> Result<Self, ClinicalError> {
        let set = Self { name: String::new(), sizes, multi_touch_boundary, multi_touch_count };
        set.validate()?;
        Ok(set)
    }

    /// The 20-piece Touch Test set bundled with the crate.
    pub fn standard() -> Self {
        Self::from_json(STANDARD_SET_JSON).expect("bundled monofilament set is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, ClinicalError> {
        let set: Self = serde_json::from_str(text)?;
        set.validate()?;
        Ok(set)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ClinicalError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<(), ClinicalError> {
        let invalid = |m: String| Err(ClinicalError::InvalidSet(m));
        if self.sizes.is_empty() {
            return invalid("no sizes".into());
        }
        if self.sizes.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("sizes must be strictly increasing".into());
        }
        let (first, last) = (self.sizes[0], self.sizes[self.sizes.len() - 1]);
        if first < Self::MIN_SIZE_GF - SIZE_TOLERANCE || last > Self::MAX_SIZE_GF + SIZE_TOLERANCE {
            return invalid(format!("sizes must lie within [{}, {}] gf", Self::MIN_SIZE_GF, Self::MAX_SIZE_GF));
        }
        if self.multi_touch_count == 0 {
            return invalid("multi_touch_count must be at least 1".into());
        }
        Ok(())
    }

    pub fn sizes(&self) -> &[f64] {
        &self.sizes
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn touches_for(&self, size: f64) -> u32 {
        if size <= self.multi_touch_boundary + SIZE_TOLERANCE {
            self.multi_touch_count
        } else {
            1
        }
    }

    pub fn index_of(&self, size: f64) -> Option<usize> {
        self.sizes.iter().position(|s| (s - size).abs() <= SIZE_TOLERANCE)
    }

    pub fn contains(&self, size: f64) -> bool {
        self.index_of(size).is_some()
    }
}

/// Filament the exam starts with for each class of site.
pub fn monofilament_start_size(class: SiteClass) -> f64 {
    match class {
        SiteClass::Hand | SiteClass::DorsalFoot => 0.07,
        SiteClass::PlantarFoot => 0.4,
    }
}

/// Response model for a single filament touch.
pub trait ForceDetector {
    fn feels(&self, force_gf: f64, rng: &mut dyn RngCore) -> bool;
}

impl<F: Fn(f64) -> bool> ForceDetector for F {
    fn feels(&self, force_gf: f64, _rng: &mut dyn RngCore) -> bool {
        self(force_gf)
    }
}

/// Feels every filament at or above a fixed force.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeterministicForceObserver {
    pub threshold_gf: f64,
}

impl ForceDetector for DeterministicForceObserver {
    fn feels(&self, force_gf: f64, _rng: &mut dyn RngCore) -> bool {
        force_gf >= self.threshold_gf - SIZE_TOLERANCE
    }
}

/// Logistic detection in log10 force: 50% at `threshold_gf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticForceObserver {
    pub threshold_gf: f64,
    /// Spread in log10 units.
    pub log10_spread: f64,
}

impl ForceDetector for LogisticForceObserver {
    fn feels(&self, force_gf: f64, rng: &mut dyn RngCore) -> bool {
        let z = (force_gf.log10() - self.threshold_gf.log10()) / self.log10_spread;
        let p = 1.0 / (1.0 + (-z).exp());
        rng.random::<f64>() < p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TouchRecord {
    pub size: f64,
    /// 1-based touch count at this size.
    pub touch_index: u32,
    pub detected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonofilamentThreshold {
    Size(f64),
    /// Nothing up to the largest filament was felt.
    NoneFelt,
}

impl MonofilamentThreshold {
    pub fn size(self) -> Option<f64> {
        match self {
            Self::Size(s) => Some(s),
            Self::NoneFelt => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonofilamentResult {
    pub threshold: MonofilamentThreshold,
    pub start_size: f64,
    pub touch_log: Vec<TouchRecord>,
}

/// Touches one filament up to its touch count; any detection counts as felt.
fn present(set: &MonofilamentSet, size: f64, observer: &dyn ForceDetector, rng: &mut dyn RngCore, log: &mut Vec<TouchRecord>) -> bool {
    for touch_index in 1..=set.touches_for(size) {
        let detected = observer.feels(size, rng);
        log.push(TouchRecord { size, touch_index, detected });
        if detected {
            return true;
        }
    }
    false
}

pub fn run_monofilament_exam(
    set: &MonofilamentSet,
    observer: &dyn ForceDetector,
    start_size: f64,
    rng: &mut dyn RngCore,
) -> Result<MonofilamentResult, ClinicalError> {
    let start = set.index_of(start_size).ok_or(ClinicalError::InvalidStartSize(start_size))?;
    let sizes = set.sizes();
    let mut log = Vec::new();

    let threshold = if present(set, sizes[start], observer, rng, &mut log) {
        // Descend until a size is not felt; the last felt size stands.
        let mut last_felt = start;
        for idx in (0..start).rev() {
            if !present(set, sizes[idx], observer, rng, &mut log) {
                break;
            }
            last_felt = idx;
        }
        MonofilamentThreshold::Size(sizes[last_felt])
    } else {
        (start + 1..sizes.len())
            .find(|&idx| present(set, sizes[idx], observer, rng, &mut log))
            .map_or(MonofilamentThreshold::NoneFelt, |idx| MonofilamentThreshold::Size(sizes[idx]))
    };

    Ok(MonofilamentResult { threshold, start_size: sizes[start], touch_log: log })
}
