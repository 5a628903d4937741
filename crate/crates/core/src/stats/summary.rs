use serde::{Deserialize, Serialize};

use super::{check_finite, mean, quantile_type1, variance, StatsError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryMode {
    /// Mean and standard deviation.
    Continuous,
    /// Median with 25th/75th type-1 quantiles.
    Discrete,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum GroupSummary {
    Continuous {
        mean: f64,
        std: f64,
        n: usize,
        /// Set when `n == 1`; `std` is then reported as 0.
        small_n: bool,
    },
    Discrete {
        median: f64,
        q25: f64,
        q75: f64,
        n: usize,
    },
}

impl GroupSummary {
    pub fn n(&self) -> usize {
        match self {
            Self::Continuous { n, .. } | Self::Discrete { n, .. } => *n,
        }
    }
}

pub fn group_summary(sample: &[f64], mode: SummaryMode) -> Result<GroupSummary, StatsError> {
    check_finite(sample)?;
    if sample.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let n = sample.len();
    Ok(match mode {
        SummaryMode::Continuous => {
            GroupSummary::Continuous { mean: mean(sample), std: if n > 1 { variance(sample).sqrt() } else { 0.0 }, n, small_n: n < 2 }
        }
        SummaryMode::Discrete => GroupSummary::Discrete {
            median: quantile_type1(sample, 0.5)?,
            q25: quantile_type1(sample, 0.25)?,
            q75: quantile_type1(sample, 0.75)?,
            n,
        },
    })
}
