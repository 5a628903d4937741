//! Virtual three-modality study: synthetic cohorts, the simulated exam
//! protocol, participant exclusion, and the comparison report.
//!
//! The pipeline is `generate_cohort` → `run_virtual_study` →
//! `apply_exclusions` → `analyze_study`. Each stage is deterministic given
//! its seed, and the analysis is a pure function of the measurement rows
//! (including the exclusion marks), so it can be rerun from a measurement
//! CSV alone.

mod cohort;
mod exclusion;
mod measurement;
mod report;
mod simulate;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cohort::{
    generate_cohort, ClinicalFalsePositiveSpec, CohortSpec, GroupParameters, NormalParameter, Participant, ParticipantSite, SiteParameters,
    CALIBRATED_SPEC_JSON,
};
pub use exclusion::{apply_exclusions, ExclusionEntry, ExclusionReason, ExclusionRule, Exclusions};
pub use measurement::{read_measurements, write_measurements, MeasuredValue, SiteMeasurement, MEASUREMENT_CSV_HEADER};
pub use report::{
    analyze_study, AnalysisConfig, ComparisonEntry, ComparisonKind, CorrelationEntry, PlannedTest, StudyReport, SummaryEntry, SummaryGroup,
};
pub use simulate::{run_virtual_study, simulate_study, ParticipantLog, StudyConfig, StudyOutcome, StudyRun};

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("invalid cohort spec: {0}")]
    InvalidSpec(String),
    #[error("reading cohort spec: {0}")]
    SpecParse(#[from] serde_json::Error),
    #[error("invalid study config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Session(#[from] crate::session::SessionError),
    #[error(transparent)]
    Staircase(#[from] crate::staircase::StaircaseError),
    #[error(transparent)]
    Clinical(#[from] crate::clinical::ClinicalError),
    #[error("measurement CSV line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("no retained measurements to analyze")]
    NoData,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgeGroup {
    /// 18 to 50.
    Younger,
    /// Over 50.
    Older,
}

impl AgeGroup {
    pub const ALL: [AgeGroup; 2] = [Self::Younger, Self::Older];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Younger => "younger",
            Self::Older => "older",
        }
    }
}

impl fmt::Display for AgeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for AgeGroup {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "younger" => Ok(Self::Younger),
            "older" => Ok(Self::Older),
            other => Err(format!("unknown age group `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Smartphone,
    TuningFork,
    Monofilament,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Self::Smartphone, Self::TuningFork, Self::Monofilament];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Smartphone => "smartphone",
            Self::TuningFork => "tuning_fork",
            Self::Monofilament => "monofilament",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Self::Smartphone => "haptic_intensity",
            Self::TuningFork => "s",
            Self::Monofilament => "gf",
        }
    }

    /// Smartphone and fork values are continuous; filament sizes are not.
    pub fn is_discrete(self) -> bool {
        self == Self::Monofilament
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Modality::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| format!("unknown modality `{s}`"))
    }
}
