//! Wilcoxon signed-rank and rank-sum tests.
//!
//! Small samples use the exact permutation distribution of the statistic
//! conditional on the observed (possibly tied) ranks. Ranks are doubled so
//! that averaged ties stay integral, and the distribution is counted with a
//! subset-sum recurrence instead of walking every sign pattern or split.
//! Larger samples fall back to the normal approximation with tie and
//! continuity corrections.

use statrs::distribution::{ContinuousCDF, Normal};

use super::ranks::{average_ranks, tie_correction};
use super::{check_finite, Alternative, StatsError, TestMethod, TestResult};

pub const DEFAULT_SIGNED_RANK_EXACT_MAX_N: usize = 25;
pub const DEFAULT_RANK_SUM_EXACT_MAX_TOTAL: usize = 14;

fn std_normal() -> Normal {
    Normal::standard()
}

fn normal_tail(z: f64, alternative: Alternative) -> f64 {
    match alternative {
        Alternative::Less => std_normal().cdf(z),
        Alternative::Greater => std_normal().sf(z),
    }
}

fn doubled(ranks: &[f64]) -> Vec<usize> {
    ranks.iter().map(|r| (r * 2.0).round() as usize).collect()
}

/// Tail probability from a table of counts indexed by doubled statistic.
fn tail_from_counts(counts: &[u64], observed: usize, total: f64, alternative: Alternative) -> f64 {
    let hits: u64 = match alternative {
        Alternative::Less => counts[..=observed].iter().sum(),
        Alternative::Greater => counts[observed..].iter().sum(),
    };
    (hits as f64 / total).min(1.0)
}

pub fn wilcoxon_signed_rank_one_sided(x: &[f64], y: &[f64], alternative: Alternative) -> Result<TestResult, StatsError> {
    wilcoxon_signed_rank_one_sided_with(x, y, alternative, DEFAULT_SIGNED_RANK_EXACT_MAX_N)
}

/// Signed-rank test on `x - y`. The statistic is the sum of ranks of the
/// positive differences; zero differences are dropped.
pub fn wilcoxon_signed_rank_one_sided_with(
    x: &[f64],
    y: &[f64],
    alternative: Alternative,
    exact_max_n: usize,
) -> Result<TestResult, StatsError> {
    check_finite(x)?;
    check_finite(y)?;
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    if diffs.is_empty() {
        return Err(StatsError::AllZeroDifferences);
    }
    let n = diffs.len();
    let magnitudes: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&magnitudes);
    let w_plus = ranks.iter().zip(&diffs).filter(|(_, d)| **d > 0.0).fold(0.0, |acc, (r, _)| acc + r);

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_correction(&magnitudes) / 48.0;
    let z = if var > 0.0 { (w_plus - mean) / var.sqrt() } else { 0.0 };

    let (p_value, method) = if n <= exact_max_n {
        let ranks2 = doubled(&ranks);
        let total: usize = ranks2.iter().sum();
        let mut counts = vec![0u64; total + 1];
        counts[0] = 1;
        for &r in &ranks2 {
            for s in (r..=total).rev() {
                counts[s] += counts[s - r];
            }
        }
        let observed = (w_plus * 2.0).round() as usize;
        let p = tail_from_counts(&counts, observed, 2f64.powi(n as i32), alternative);
        (p, TestMethod::SignedRankExact)
    } else {
        let correction = match alternative {
            Alternative::Less => -0.5,
            Alternative::Greater => 0.5,
        };
        let zc = (w_plus - mean - correction) / var.sqrt();
        (normal_tail(zc, alternative), TestMethod::SignedRankNormal)
    };

    Ok(TestResult { statistic: w_plus, p_value, p_adjusted: None, comparisons: None, alternative, method, df: None, z: Some(z), n })
}

pub fn wilcoxon_rank_sum_one_sided(x: &[f64], y: &[f64], alternative: Alternative) -> Result<TestResult, StatsError> {
    wilcoxon_rank_sum_one_sided_with(x, y, alternative, DEFAULT_RANK_SUM_EXACT_MAX_TOTAL)
}

/// Rank-sum test of `x` against `y`. The statistic follows R's convention:
/// the rank sum of `x` minus `n_x (n_x + 1) / 2`.
pub fn wilcoxon_rank_sum_one_sided_with(
    x: &[f64],
    y: &[f64],
    alternative: Alternative,
    exact_max_total: usize,
) -> Result<TestResult, StatsError> {
    check_finite(x)?;
    check_finite(y)?;
    if x.is_empty() || y.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let (nx, ny) = (x.len(), y.len());
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let total_n = pooled.len();
    let ranks = average_ranks(&pooled);
    let rank_sum_x: f64 = ranks[..nx].iter().sum();
    let statistic = rank_sum_x - (nx * (nx + 1)) as f64 / 2.0;

    let (nxf, nyf, nf) = (nx as f64, ny as f64, total_n as f64);
    let mean = nxf * (nf + 1.0) / 2.0;
    let ties = if total_n > 1 { tie_correction(&pooled) / (nf * (nf - 1.0)) } else { 0.0 };
    let var = nxf * nyf / 12.0 * ((nf + 1.0) - ties);
    if var <= 0.0 {
        return Err(StatsError::DegenerateSample("all observations are tied".into()));
    }
    let z = (rank_sum_x - mean) / var.sqrt();

    let (p_value, method) = if total_n <= exact_max_total {
        let ranks2 = doubled(&ranks);
        let total: usize = ranks2.iter().sum();
        // ways[k][s]: subsets of size k with doubled rank sum s
        let mut ways = vec![vec![0u64; total + 1]; nx + 1];
        ways[0][0] = 1;
        for &r in &ranks2 {
            for k in (1..=nx).rev() {
                for s in (r..=total).rev() {
                    ways[k][s] += ways[k - 1][s - r];
                }
            }
        }
        let splits: u64 = ways[nx].iter().sum();
        let observed = (rank_sum_x * 2.0).round() as usize;
        let p = tail_from_counts(&ways[nx], observed, splits as f64, alternative);
        (p, TestMethod::RankSumExact)
    } else {
        let correction = match alternative {
            Alternative::Less => -0.5,
            Alternative::Greater => 0.5,
        };
        let zc = (rank_sum_x - mean - correction) / var.sqrt();
        (normal_tail(zc, alternative), TestMethod::RankSumNormal)
    };

    Ok(TestResult { statistic, p_value, p_adjusted: None, comparisons: None, alternative, method, df: None, z: Some(z), n: total_n })
}
