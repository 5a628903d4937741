//! The comparison battery: one-sided t and Wilcoxon tests with Bonferroni
//! adjustment, Cohen's d and Wilcoxon r effect sizes, Pearson and Spearman
//! correlations, and R's type-1 quantile.
//!
//! Every function rejects non-finite input; dropping NaN thresholds is the
//! caller's policy (see [`crate::study`]).

mod correlation;
mod effect;
mod quantile;
pub(crate) mod ranks;
mod summary;
mod ttest;
mod wilcoxon;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use correlation::{pearson, spearman, Correlation, CorrelationMethod};
pub use effect::{bonferroni, cohens_d, wilcoxon_r, EffectSize, EffectSizeKind};
pub use quantile::quantile_type1;
pub use summary::{group_summary, GroupSummary, SummaryMode};
pub use ttest::{t_test_one_sided, t_test_one_sided_with, TTestKind};
pub use wilcoxon::{
    wilcoxon_rank_sum_one_sided, wilcoxon_rank_sum_one_sided_with, wilcoxon_signed_rank_one_sided, wilcoxon_signed_rank_one_sided_with,
    DEFAULT_RANK_SUM_EXACT_MAX_TOTAL, DEFAULT_SIGNED_RANK_EXACT_MAX_N,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
    #[error("samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("empty sample")]
    EmptySample,
    #[error("all paired differences are zero")]
    AllZeroDifferences,
    #[error("non-finite value in input")]
    NonFinite,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Direction of a one-sided alternative, stated for `x` relative to `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    Less,
    Greater,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    PairedT,
    WelchT,
    PooledT,
    SignedRankExact,
    SignedRankNormal,
    RankSumExact,
    RankSumNormal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub p_adjusted: Option<f64>,
    /// Family size used for `p_adjusted`.
    pub comparisons: Option<usize>,
    pub alternative: Alternative,
    pub method: TestMethod,
    /// Degrees of freedom for t tests.
    pub df: Option<f64>,
    /// Normal-approximation z (no continuity correction) for rank tests.
    pub z: Option<f64>,
    /// Observations entering the test (non-zero pairs for signed rank).
    pub n: usize,
}

impl TestResult {
    pub fn with_bonferroni(mut self, comparisons: usize) -> Result<Self, StatsError> {
        self.p_adjusted = Some(bonferroni(self.p_value, comparisons)?);
        self.comparisons = Some(comparisons);
        Ok(self)
    }
}

pub(crate) fn check_finite(xs: &[f64]) -> Result<(), StatsError> {
    if xs.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::NonFinite)
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with the n - 1 denominator.
pub(crate) fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}
