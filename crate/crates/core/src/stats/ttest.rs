use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{check_finite, mean, variance, Alternative, StatsError, TestMethod, TestResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TTestKind {
    Paired,
    /// Unequal variances, Welch-Satterthwaite degrees of freedom.
    Welch,
    /// Pooled variance, `n_x + n_y - 2` degrees of freedom.
    Pooled,
}

/// Paired or Welch t test, one-sided.
pub fn t_test_one_sided(x: &[f64], y: &[f64], paired: bool, alternative: Alternative) -> Result<TestResult, StatsError> {
    let kind = if paired { TTestKind::Paired } else { TTestKind::Welch };
    t_test_one_sided_with(x, y, kind, alternative)
}

pub fn t_test_one_sided_with(x: &[f64], y: &[f64], kind: TTestKind, alternative: Alternative) -> Result<TestResult, StatsError> {
    check_finite(x)?;
    check_finite(y)?;
    if x.len() < 2 || y.len() < 2 {
        return Err(StatsError::DegenerateSample("t test needs at least 2 observations per group".into()));
    }
    let (t, df, n, method) = match kind {
        TTestKind::Paired => {
            if x.len() != y.len() {
                return Err(StatsError::LengthMismatch(x.len(), y.len()));
            }
            let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
            let var = variance(&diffs);
            if var == 0.0 {
                return Err(StatsError::DegenerateSample("paired differences have zero variance".into()));
            }
            let n = diffs.len() as f64;
            (mean(&diffs) / (var / n).sqrt(), n - 1.0, diffs.len(), TestMethod::PairedT)
        }
        TTestKind::Welch => {
            let (nx, ny) = (x.len() as f64, y.len() as f64);
            let (a, b) = (variance(x) / nx, variance(y) / ny);
            if a + b == 0.0 {
                return Err(StatsError::DegenerateSample("both groups have zero variance".into()));
            }
            let df = (a + b).powi(2) / (a * a / (nx - 1.0) + b * b / (ny - 1.0));
            ((mean(x) - mean(y)) / (a + b).sqrt(), df, x.len() + y.len(), TestMethod::WelchT)
        }
        TTestKind::Pooled => {
            let (nx, ny) = (x.len() as f64, y.len() as f64);
            let df = nx + ny - 2.0;
            let pooled = ((nx - 1.0) * variance(x) + (ny - 1.0) * variance(y)) / df;
            if pooled == 0.0 {
                return Err(StatsError::DegenerateSample("pooled variance is zero".into()));
            }
            let se = (pooled * (1.0 / nx + 1.0 / ny)).sqrt();
            ((mean(x) - mean(y)) / se, df, x.len() + y.len(), TestMethod::PooledT)
        }
    };
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| StatsError::InvalidArgument(e.to_string()))?;
    let p_value = match alternative {
        Alternative::Less => dist.cdf(t),
        Alternative::Greater => dist.sf(t),
    };
    Ok(TestResult { statistic: t, p_value, p_adjusted: None, comparisons: None, alternative, method, df: Some(df), z: None, n })
}
