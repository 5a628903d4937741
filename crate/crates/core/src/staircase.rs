//! One-up/one-down staircase for vibration perception thresholds.
//!
//! The staircase raises the stimulus by one step after every miss and lowers
//! it by one step after every detection. A reversal is logged whenever the
//! direction of travel flips; its value is the midpoint between the level
//! that triggered it and the level presented just before. The trial threshold
//! is the mean of the reversal values, or NaN when the participant misses the
//! strongest stimulus too many times in a row.
//!
//! Levels are tracked as integer multiples of the step size so that repeated
//! stepping never accumulates floating-point drift. Values handed back to
//! callers are snapped to a 1e-9 grid, which makes `0.05 * 3` print and
//! compare as `0.15`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Resolution of the output grid for intensities.
const GRID: f64 = 1e-9;

/// Rounds to the nearest double of a multiple of [`GRID`]. Dividing the
/// rounded integer (rather than multiplying by `GRID`) keeps the result equal
/// to what parsing the decimal text would give.
pub(crate) fn snap(value: f64) -> f64 {
    (value * 1e9).round() / 1e9
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StaircaseError {
    #[error("invalid staircase config: `{field}` {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("staircase already finished with status {0:?}")]
    Finished(StaircaseStatus),
    #[error("staircase is still running; threshold is not available yet")]
    Incomplete,
    #[error("no trial thresholds to aggregate")]
    EmptyInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StaircaseConfig {
    pub initial_level: f64,
    pub step_size: f64,
    pub max_level: f64,
    pub min_level: f64,
    pub target_reversals: usize,
    pub ceiling_misses_for_nan: usize,
    /// Guard against observers that never miss at the floor (or otherwise
    /// never reverse); the run ends as [`StaircaseStatus::Exhausted`].
    pub max_presentations: usize,
}

impl Default for StaircaseConfig {
    fn default() -> Self {
        Self {
            initial_level: 0.05,
            step_size: 0.05,
            max_level: 1.0,
            min_level: 0.05,
            target_reversals: 8,
            ceiling_misses_for_nan: 3,
            max_presentations: 200,
        }
    }
}

/// Levels of a validated config expressed in whole steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct StepGrid {
    initial: u32,
    min: u32,
    max: u32,
}

impl StaircaseConfig {
    pub fn validate(&self) -> Result<(), StaircaseError> {
        self.step_grid().map(|_| ())
    }

    fn step_grid(&self) -> Result<StepGrid, StaircaseError> {
        let invalid = |field, reason: &str| StaircaseError::InvalidConfig { field, reason: reason.to_string() };
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(invalid("step_size", "must be a positive finite number"));
        }
        if !(self.min_level.is_finite() && self.min_level > 0.0) {
            return Err(invalid("min_level", "must be positive"));
        }
        if !(self.max_level.is_finite() && self.max_level <= 1.0) {
            return Err(invalid("max_level", "must not exceed 1.0"));
        }
        if self.min_level > self.max_level {
            return Err(invalid("min_level", "must not exceed max_level"));
        }
        if !self.initial_level.is_finite() || self.initial_level < self.min_level {
            return Err(invalid("initial_level", "must be at least min_level"));
        }
        if self.initial_level > self.max_level {
            return Err(invalid("initial_level", "must not exceed max_level"));
        }
        if self.target_reversals < 2 {
            return Err(invalid("target_reversals", "must be at least 2"));
        }
        if self.ceiling_misses_for_nan < 1 {
            return Err(invalid("ceiling_misses_for_nan", "must be at least 1"));
        }
        if self.max_presentations < self.target_reversals {
            return Err(invalid("max_presentations", "must be at least target_reversals"));
        }
        let to_steps = |field, level: f64| {
            let steps = (level / self.step_size).round();
            if (steps * self.step_size - level).abs() > GRID {
                Err(invalid(field, "must be an integer multiple of step_size"))
            } else {
                Ok(steps as u32)
            }
        };
        Ok(StepGrid {
            initial: to_steps("initial_level", self.initial_level)?,
            min: to_steps("min_level", self.min_level)?,
            max: to_steps("max_level", self.max_level)?,
        })
    }

    fn level_of(&self, steps: u32) -> f64 {
        snap(steps as f64 * self.step_size)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Ascending,
    Descending,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StaircaseStatus {
    Running,
    Complete,
    /// Missed at the ceiling too often; the threshold is NaN.
    Saturated,
    /// Hit the presentation cap before enough reversals; also NaN.
    Exhausted,
}

/// One presentation and the participant's answer to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Presentation {
    pub level: f64,
    pub detected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReversalPoint {
    pub value: f64,
    /// Index into the history of the response that flipped the direction.
    pub triggering_index: usize,
    #[serde(skip)]
    half_steps: u32,
}

/// What a single response did to the staircase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseOutcome {
    pub reversal: Option<ReversalPoint>,
    pub next_level: f64,
    pub status: StaircaseStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaircaseState {
    config: StaircaseConfig,
    grid: StepGrid,
    level_steps: u32,
    direction: Direction,
    history: Vec<Presentation>,
    history_steps: Vec<u32>,
    reversals: Vec<ReversalPoint>,
    consecutive_ceiling_misses: usize,
    status: StaircaseStatus,
}

/// Result of one completed (or saturated) staircase run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialThreshold {
    /// NaN travels as JSON `null`.
    #[serde(with = "nan_as_null")]
    pub value: f64,
    pub reversal_values: Vec<f64>,
    pub saturated: bool,
}

pub(crate) mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &f64, s: S) -> Result<S::Ok, S::Error> {
        if value.is_nan() {
            s.serialize_none()
        } else {
            s.serialize_f64(*value)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// Per-site aggregate of repeated staircase trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteThreshold {
    #[serde(with = "nan_as_null")]
    pub value: f64,
    pub n_trials: usize,
    pub nan_count: usize,
}

pub fn init_staircase(config: StaircaseConfig) -> Result<StaircaseState, StaircaseError> {
    StaircaseState::new(config)
}

impl StaircaseState {
    pub fn new(config: StaircaseConfig) -> Result<Self, StaircaseError> {
        let grid = config.step_grid()?;
        Ok(Self {
            config,
            grid,
            level_steps: grid.initial,
            direction: Direction::Ascending,
            history: Vec::new(),
            history_steps: Vec::new(),
            reversals: Vec::new(),
            consecutive_ceiling_misses: 0,
            status: StaircaseStatus::Running,
        })
    }

    pub fn config(&self) -> &StaircaseConfig {
        &self.config
    }

    pub fn current_level(&self) -> f64 {
        self.config.level_of(self.level_steps)
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn history(&self) -> &[Presentation] {
        &self.history
    }

    pub fn reversals(&self) -> &[ReversalPoint] {
        &self.reversals
    }

    pub fn consecutive_ceiling_misses(&self) -> usize {
        self.consecutive_ceiling_misses
    }

    pub fn status(&self) -> StaircaseStatus {
        self.status
    }

    pub fn is_running(&self) -> bool {
        self.status == StaircaseStatus::Running
    }

    /// Consuming form of [`StaircaseState::apply`].
    pub fn apply_response(mut self, detected: bool) -> Result<Self, StaircaseError> {
        self.apply(detected)?;
        Ok(self)
    }

    /// Records the answer to the stimulus at the current level and moves to
    /// the next level.
    pub fn apply(&mut self, detected: bool) -> Result<ResponseOutcome, StaircaseError> {
        if self.status != StaircaseStatus::Running {
            return Err(StaircaseError::Finished(self.status));
        }
        let index = self.history.len();
        let level_steps = self.level_steps;
        self.history.push(Presentation { level: self.config.level_of(level_steps), detected });
        self.history_steps.push(level_steps);

        if detected {
            self.consecutive_ceiling_misses = 0;
        } else if level_steps == self.grid.max {
            self.consecutive_ceiling_misses += 1;
        } else {
            self.consecutive_ceiling_misses = 0;
        }

        let flips = match self.direction {
            Direction::Ascending => detected,
            Direction::Descending => !detected,
        };
        let reversal = flips.then(|| {
            // The very first presentation has no predecessor; its own level
            // stands in for the midpoint.
            let prev = if index == 0 { level_steps } else { self.history_steps[index - 1] };
            let half_steps = level_steps + prev;
            let point = ReversalPoint { value: snap(half_steps as f64 * self.config.step_size / 2.0), triggering_index: index, half_steps };
            self.reversals.push(point);
            self.direction = match self.direction {
                Direction::Ascending => Direction::Descending,
                Direction::Descending => Direction::Ascending,
            };
            point
        });

        self.level_steps = if detected { level_steps.saturating_sub(1).max(self.grid.min) } else { (level_steps + 1).min(self.grid.max) };

        if self.reversals.len() >= self.config.target_reversals {
            self.status = StaircaseStatus::Complete;
        } else if self.consecutive_ceiling_misses >= self.config.ceiling_misses_for_nan {
            self.status = StaircaseStatus::Saturated;
        } else if self.history.len() >= self.config.max_presentations {
            self.status = StaircaseStatus::Exhausted;
        }

        Ok(ResponseOutcome { reversal, next_level: self.current_level(), status: self.status })
    }

    /// Mean of the reversal values, or NaN for a saturated run.
    pub fn compute_threshold(&self) -> Result<TrialThreshold, StaircaseError> {
        let reversal_values: Vec<f64> = self.reversals.iter().map(|r| r.value).collect();
        match self.status {
            StaircaseStatus::Running => Err(StaircaseError::Incomplete),
            StaircaseStatus::Saturated => Ok(TrialThreshold { value: f64::NAN, reversal_values, saturated: true }),
            StaircaseStatus::Exhausted => Ok(TrialThreshold { value: f64::NAN, reversal_values, saturated: false }),
            StaircaseStatus::Complete => {
                // Averaged in half-step units so identical reversals give back
                // exactly their own value.
                let total: u64 = self.reversals.iter().map(|r| r.half_steps as u64).sum();
                let mean_half_steps = total as f64 / self.reversals.len() as f64;
                Ok(TrialThreshold { value: snap(mean_half_steps * self.config.step_size / 2.0), reversal_values, saturated: false })
            }
        }
    }
}

pub fn apply_response(state: StaircaseState, detected: bool) -> Result<StaircaseState, StaircaseError> {
    state.apply_response(detected)
}

pub fn compute_threshold(state: &StaircaseState) -> Result<TrialThreshold, StaircaseError> {
    state.compute_threshold()
}

/// Averages the non-NaN trial thresholds for one body site.
pub fn aggregate_site_threshold(trials: &[TrialThreshold]) -> Result<SiteThreshold, StaircaseError> {
    if trials.is_empty() {
        return Err(StaircaseError::EmptyInput);
    }
    let finite: Vec<f64> = trials.iter().map(|t| t.value).filter(|v| !v.is_nan()).collect();
    let nan_count = trials.len() - finite.len();
    let value = if finite.is_empty() { f64::NAN } else { snap(finite.iter().sum::<f64>() / finite.len() as f64) };
    Ok(SiteThreshold { value, n_trials: trials.len(), nan_count })
}

/// Runs a fresh staircase over recorded answers.
pub fn replay(config: StaircaseConfig, answers: impl IntoIterator<Item = bool>) -> Result<StaircaseState, StaircaseError> {
    let mut state = StaircaseState::new(config)?;
    for detected in answers {
        state.apply(detected)?;
    }
    Ok(state)
}
