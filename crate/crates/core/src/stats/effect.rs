use serde::{Deserialize, Serialize};

use super::{check_finite, mean, variance, StatsError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectSizeKind {
    CohensD,
    WilcoxonR,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectSize {
    pub kind: EffectSizeKind,
    pub value: f64,
}

/// `min(1, m * p)`.
pub fn bonferroni(p: f64, comparisons: usize) -> Result<f64, StatsError> {
    if comparisons == 0 {
        return Err(StatsError::InvalidArgument("Bonferroni family size must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(StatsError::InvalidArgument(format!("p-value {p} outside [0, 1]")));
    }
    Ok((p * comparisons as f64).min(1.0))
}

/// Mean difference over the pooled standard deviation.
pub fn cohens_d(x: &[f64], y: &[f64]) -> Result<EffectSize, StatsError> {
    check_finite(x)?;
    check_finite(y)?;
    if x.len() < 2 || y.len() < 2 {
        return Err(StatsError::DegenerateSample("Cohen's d needs at least 2 observations per group".into()));
    }
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let pooled = ((nx - 1.0) * variance(x) + (ny - 1.0) * variance(y)) / (nx + ny - 2.0);
    if pooled == 0.0 {
        return Err(StatsError::DegenerateSample("pooled variance is zero".into()));
    }
    Ok(EffectSize { kind: EffectSizeKind::CohensD, value: (mean(x) - mean(y)) / pooled.sqrt() })
}

/// `z / sqrt(n)`, clamped to [-1, 1].
pub fn wilcoxon_r(z: f64, n: usize) -> Result<EffectSize, StatsError> {
    if n == 0 {
        return Err(StatsError::InvalidArgument("n must be at least 1".into()));
    }
    if !z.is_finite() {
        return Err(StatsError::NonFinite);
    }
    Ok(EffectSize { kind: EffectSizeKind::WilcoxonR, value: (z / (n as f64).sqrt()).clamp(-1.0, 1.0) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bonferroni_examples() {
        assert!((bonferroni(0.01, 3).unwrap() - 0.03).abs() < 1e-15);
        assert_eq!(bonferroni(0.5, 3).unwrap(), 1.0);
        assert_eq!(bonferroni(0.0123, 1).unwrap(), 0.0123);
        assert!(bonferroni(0.1, 0).is_err());
    }

    #[test]
    fn cohens_d_examples() {
        // means 1 and 0, each sd 1
        let x = [0.0, 1.0, 2.0];
        let y = [-1.0, 0.0, 1.0];
        assert!((cohens_d(&x, &y).unwrap().value - 1.0).abs() < 1e-12);
        assert_eq!(cohens_d(&x, &[2.0, 0.0, 1.0]).unwrap().value, 0.0);
        assert!(cohens_d(&[1.0, 1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn cohens_d_from_reported_summaries() {
        // pooled sd from 0.09 and 0.20 with n = 14 each
        let pooled = ((13.0 * 0.09f64.powi(2) + 13.0 * 0.20f64.powi(2)) / 26.0).sqrt();
        let d = (0.20 - 0.38) / pooled;
        assert!((d + 1.16).abs() < 0.005, "{d}");
    }

    #[test]
    fn wilcoxon_r_examples() {
        assert_eq!(wilcoxon_r(0.0, 10).unwrap().value, 0.0);
        assert_eq!(wilcoxon_r(2.0, 4).unwrap().value, 1.0);
        assert!((wilcoxon_r(-3.0, 25).unwrap().value + 0.6).abs() < 1e-15);
        assert_eq!(wilcoxon_r(5.0, 4).unwrap().value, 1.0);
    }
}
