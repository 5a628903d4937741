//! Simulated participants with known psychometric ground truth.

use std::path::Path;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ObserverError {
    #[error("invalid observer parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("50% detection is unattainable: probability range is [{floor}, {ceiling}]")]
    UnattainableLevel { floor: f64, ceiling: f64 },
    #[error("reading observer file: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing observer file: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Anything that can answer "did you feel it?" for a stimulus level.
pub trait DetectionModel {
    fn detect_probability(&self, level: f64) -> f64;

    /// Bernoulli draw with the detection probability. Consumes exactly one
    /// uniform draw so that seeded streams stay aligned across models.
    fn sample_response(&self, level: f64, rng: &mut dyn RngCore) -> bool {
        rng.random::<f64>() < self.detect_probability(level)
    }

    /// Probability of a spurious "yes" per response opportunity.
    fn false_positive_rate(&self) -> f64 {
        0.0
    }
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Logistic psychometric function with guess and lapse asymptotes:
/// `p(I) = guess + (1 - guess - lapse) * logistic((I - alpha) / beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsychometricObserver {
    pub alpha: f64,
    pub beta: f64,
    #[serde(rename = "guess", default)]
    pub guess_rate: f64,
    #[serde(rename = "lapse", default)]
    pub lapse_rate: f64,
    #[serde(default)]
    pub false_positive_rate: f64,
}

impl PsychometricObserver {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self { alpha, beta, guess_rate: 0.0, lapse_rate: 0.0, false_positive_rate: 0.0 }
    }

    pub fn with_asymptotes(mut self, guess_rate: f64, lapse_rate: f64) -> Self {
        self.guess_rate = guess_rate;
        self.lapse_rate = lapse_rate;
        self
    }

    pub fn with_false_positive_rate(mut self, rate: f64) -> Self {
        self.false_positive_rate = rate;
        self
    }

    pub fn validate(&self) -> Result<(), ObserverError> {
        let bad = |field, reason: &str| Err(ObserverError::InvalidParameter { field, reason: reason.to_string() });
        if !self.alpha.is_finite() {
            return bad("alpha", "must be finite");
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return bad("beta", "must be positive");
        }
        if !(0.0..0.5).contains(&self.guess_rate) {
            return bad("guess", "must lie in [0, 0.5)");
        }
        if !(0.0..0.5).contains(&self.lapse_rate) {
            return bad("lapse", "must lie in [0, 0.5)");
        }
        if !(0.0..1.0).contains(&self.false_positive_rate) {
            return bad("false_positive_rate", "must lie in [0, 1)");
        }
        Ok(())
    }

    /// Level at which detection probability is exactly one half.
    pub fn fifty_percent_point(&self) -> Result<f64, ObserverError> {
        let floor = self.guess_rate;
        let ceiling = 1.0 - self.lapse_rate;
        if !(floor < 0.5 && 0.5 < ceiling) {
            return Err(ObserverError::UnattainableLevel { floor, ceiling });
        }
        // logistic(z) = (0.5 - guess) / (1 - guess - lapse) = s  =>  z = ln(s / (1 - s))
        let s = (0.5 - floor) / (ceiling - floor);
        Ok(self.alpha + self.beta * (s / (1.0 - s)).ln())
    }
}

impl DetectionModel for PsychometricObserver {
    fn detect_probability(&self, level: f64) -> f64 {
        let span = 1.0 - self.guess_rate - self.lapse_rate;
        self.guess_rate + span * logistic((level - self.alpha) / self.beta)
    }

    fn false_positive_rate(&self) -> f64 {
        self.false_positive_rate
    }
}

/// Step-function observer: detects iff `level >= hard_threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeterministicObserver {
    pub hard_threshold: f64,
}

impl DeterministicObserver {
    pub fn new(hard_threshold: f64) -> Self {
        Self { hard_threshold }
    }

    pub fn detects(&self, level: f64) -> bool {
        level >= self.hard_threshold
    }
}

impl DetectionModel for DeterministicObserver {
    fn detect_probability(&self, level: f64) -> f64 {
        if self.detects(level) {
            1.0
        } else {
            0.0
        }
    }

    fn sample_response(&self, level: f64, _rng: &mut dyn RngCore) -> bool {
        self.detects(level)
    }
}

/// Observer parameter file contents; either model is accepted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObserverModel {
    Psychometric(PsychometricObserver),
    Deterministic(DeterministicObserver),
}

impl ObserverModel {
    pub fn from_json(text: &str) -> Result<Self, ObserverError> {
        let model: Self = serde_json::from_str(text)?;
        if let Self::Psychometric(observer) = &model {
            observer.validate()?;
        }
        Ok(model)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ObserverError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl DetectionModel for ObserverModel {
    fn detect_probability(&self, level: f64) -> f64 {
        match self {
            Self::Psychometric(o) => o.detect_probability(level),
            Self::Deterministic(o) => o.detect_probability(level),
        }
    }

    fn sample_response(&self, level: f64, rng: &mut dyn RngCore) -> bool {
        match self {
            Self::Psychometric(o) => o.sample_response(level, rng),
            Self::Deterministic(o) => o.sample_response(level, rng),
        }
    }

    fn false_positive_rate(&self) -> f64 {
        match self {
            Self::Psychometric(o) => o.false_positive_rate,
            Self::Deterministic(_) => 0.0,
        }
    }
}
