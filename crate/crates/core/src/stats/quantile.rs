use super::{check_finite, StatsError};

/// R's type 1 quantile (inverse of the empirical CDF). Always returns an
/// element of the sample.
///
/// With `h = n p` the result is the `ceil(h)`-th order statistic, or the
/// `h`-th when `h` is an integer. Like R, `h` is compared with a small fuzz
/// so that `n p` landing a rounding error above an integer is treated as
/// that integer.
pub fn quantile_type1(sample: &[f64], p: f64) -> Result<f64, StatsError> {
    check_finite(sample)?;
    if sample.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(StatsError::InvalidArgument(format!("probability {p} outside [0, 1]")));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let fuzz = 4.0 * f64::EPSILON;
    let h = n as f64 * p;
    let j = (h + fuzz).floor();
    // 1-based order statistic
    let k = if h > j + fuzz { j as usize + 1 } else { j as usize };
    Ok(sorted[k.clamp(1, n) - 1])
}
