use percept_core::stats::*;

// Ten paired finger/toe thresholds and a tied, monofilament-like column.
const FINGER: [f64; 10] = [0.18, 0.22, 0.15, 0.31, 0.27, 0.20, 0.12, 0.35, 0.24, 0.19];
const TOE: [f64; 10] = [0.36, 0.41, 0.22, 0.55, 0.30, 0.47, 0.25, 0.62, 0.33, 0.29];
const FILAMENT: [f64; 10] = [0.07, 0.07, 0.16, 0.4, 0.07, 0.4, 0.16, 0.6, 0.4, 0.16];

fn main() -> Result<(), StatsError> {
    let t = t_test_one_sided(&FINGER, &TOE, true, Alternative::Less)?.with_bonferroni(3)?;
    let w = wilcoxon_signed_rank_one_sided(&FINGER, &TOE, Alternative::Less)?.with_bonferroni(3)?;
    let u = wilcoxon_rank_sum_one_sided(&FINGER[..5], &TOE[5..], Alternative::Less)?;
    println!("paired t      t={:.3} p={:.2e} adjusted={:.2e}", t.statistic, t.p_value, t.p_adjusted.unwrap_or(f64::NAN));
    println!("signed rank   W={} p={:.2e} ({:?})", w.statistic, w.p_value, w.method);
    println!("rank sum      U={} p={:.4} ({:?})", u.statistic, u.p_value, u.method);
    println!("cohen's d     {:.3}", cohens_d(&FINGER, &TOE)?.value);

    let r = pearson(&FINGER, &TOE)?;
    let rho = spearman(&FINGER, &FILAMENT)?;
    println!("pearson       r={:.3} p={:.4}", r.coefficient, r.p_value);
    println!("spearman      rho={:.3} p={:.4}", rho.coefficient, rho.p_value);

    for p in [0.25, 0.5, 0.75] {
        println!("q{p:<4}         finger {} filament {}", quantile_type1(&FINGER, p)?, quantile_type1(&FILAMENT, p)?);
    }
    println!("{:?}", group_summary(&FILAMENT, SummaryMode::Discrete)?);
    Ok(())
}
