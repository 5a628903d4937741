use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{AgeGroup, ExclusionEntry, Modality, SiteMeasurement, StudyError};
use crate::site::BodySite;
use crate::stats::{
    cohens_d, group_summary, pearson, spearman, t_test_one_sided_with, wilcoxon_r, wilcoxon_rank_sum_one_sided_with,
    wilcoxon_signed_rank_one_sided_with, Alternative, Correlation, CorrelationMethod, EffectSize, GroupSummary, StatsError, SummaryMode,
    TTestKind, TestResult, DEFAULT_RANK_SUM_EXACT_MAX_TOTAL, DEFAULT_SIGNED_RANK_EXACT_MAX_N,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    /// Bonferroni family for the three finger-vs-toe comparisons.
    pub site_family: usize,
    /// Bonferroni family for the age comparisons within one modality.
    pub age_family: usize,
    pub unpaired_t: TTestKind,
    pub signed_rank_exact_max_n: usize,
    pub rank_sum_exact_max_total: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            site_family: 3,
            age_family: 2,
            unpaired_t: TTestKind::Welch,
            signed_rank_exact_max_n: DEFAULT_SIGNED_RANK_EXACT_MAX_N,
            rank_sum_exact_max_total: DEFAULT_RANK_SUM_EXACT_MAX_TOTAL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannedTest {
    PairedT,
    UnpairedT,
    SignedRank,
    RankSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ComparisonKind {
    /// Index finger (x) against big toe (y), paired by participant.
    FingerVsToe,
    /// Younger (x) against older (y) at one site.
    YoungerVsOlder { site: BodySite },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonEntry {
    pub comparison: ComparisonKind,
    pub modality: Modality,
    pub test: PlannedTest,
    pub alternative: Alternative,
    pub comparisons: usize,
    pub n_x: usize,
    pub n_y: usize,
    /// Observations (or pairs) lost to NaN or none-felt values.
    pub dropped: usize,
    pub result: Option<TestResult>,
    pub effect_size: Option<EffectSize>,
    pub skipped: Option<String>,
}

impl ComparisonEntry {
    pub fn p_adjusted(&self) -> Option<f64> {
        self.result.as_ref().and_then(|r| r.p_adjusted)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEntry {
    pub x: Modality,
    pub y: Modality,
    pub method: CorrelationMethod,
    pub sites: Vec<BodySite>,
    pub n: usize,
    pub dropped: usize,
    pub result: Option<Correlation>,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryGroup {
    Younger,
    Older,
    All,
}

impl From<AgeGroup> for SummaryGroup {
    fn from(g: AgeGroup) -> Self {
        match g {
            AgeGroup::Younger => Self::Younger,
            AgeGroup::Older => Self::Older,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub site: BodySite,
    pub modality: Modality,
    pub group: SummaryGroup,
    pub dropped: usize,
    pub summary: Option<GroupSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub participants_tested: usize,
    pub participants_retained: usize,
    pub retained_younger: usize,
    pub retained_older: usize,
    pub exclusions: Vec<ExclusionEntry>,
    pub summaries: Vec<SummaryEntry>,
    pub site_comparisons: Vec<ComparisonEntry>,
    pub age_comparisons: Vec<ComparisonEntry>,
    pub correlations_all_sites: Vec<CorrelationEntry>,
    pub correlations_finger_toe: Vec<CorrelationEntry>,
}

/// Retained values keyed by participant, site and modality. `None` marks a
/// NaN or none-felt value.
struct Table {
    participants: Vec<(String, AgeGroup)>,
    values: BTreeMap<(String, BodySite, Modality), Option<f64>>,
}

impl Table {
    fn new(rows: &[SiteMeasurement]) -> Self {
        let mut seen = BTreeSet::new();
        let mut participants = Vec::new();
        let mut values = BTreeMap::new();
        for m in rows.iter().filter(|m| !m.is_excluded()) {
            if seen.insert(m.participant_id.clone()) {
                participants.push((m.participant_id.clone(), m.age_group));
            }
            values.insert((m.participant_id.clone(), m.site, m.modality), m.value.value());
        }
        Self { participants, values }
    }

    fn get(&self, id: &str, site: BodySite, modality: Modality) -> Option<f64> {
        self.values.get(&(id.to_string(), site, modality)).copied().flatten()
    }

    fn has(&self, id: &str, site: BodySite, modality: Modality) -> bool {
        self.values.contains_key(&(id.to_string(), site, modality))
    }

    /// Present values for a group (or everyone), plus the count of missing.
    fn column(&self, site: BodySite, modality: Modality, group: Option<AgeGroup>) -> (Vec<f64>, usize) {
        let mut present = Vec::new();
        let mut dropped = 0;
        for (id, age) in &self.participants {
            if group.is_some_and(|g| g != *age) || !self.has(id, site, modality) {
                continue;
            }
            match self.get(id, site, modality) {
                Some(v) => present.push(v),
                None => dropped += 1,
            }
        }
        (present, dropped)
    }
}

fn direction(modality: Modality) -> Alternative {
    // Better perception: lower smartphone and filament thresholds, longer
    // fork times. Both comparisons put the better-perceiving group first.
    match modality {
        Modality::TuningFork => Alternative::Greater,
        Modality::Smartphone | Modality::Monofilament => Alternative::Less,
    }
}

fn skip_reason(e: StatsError) -> String {
    e.to_string()
}

fn finish(entry: &mut ComparisonEntry, outcome: Result<(TestResult, EffectSize), StatsError>) {
    match outcome.and_then(|(r, e)| Ok((r.with_bonferroni(entry.comparisons)?, e))) {
        Ok((r, e)) => {
            entry.result = Some(r);
            entry.effect_size = Some(e);
        }
        Err(e) => entry.skipped = Some(skip_reason(e)),
    }
}

fn finger_vs_toe(table: &Table, modality: Modality, config: &AnalysisConfig) -> ComparisonEntry {
    let (mut x, mut y, mut dropped) = (Vec::new(), Vec::new(), 0);
    for (id, _) in &table.participants {
        if !table.has(id, BodySite::H1, modality) && !table.has(id, BodySite::F, modality) {
            continue;
        }
        match (table.get(id, BodySite::H1, modality), table.get(id, BodySite::F, modality)) {
            (Some(a), Some(b)) => {
                x.push(a);
                y.push(b);
            }
            _ => dropped += 1,
        }
    }
    let alternative = direction(modality);
    let mut entry = ComparisonEntry {
        comparison: ComparisonKind::FingerVsToe,
        modality,
        test: if modality.is_discrete() { PlannedTest::SignedRank } else { PlannedTest::PairedT },
        alternative,
        comparisons: config.site_family,
        n_x: x.len(),
        n_y: y.len(),
        dropped,
        result: None,
        effect_size: None,
        skipped: None,
    };
    if x.len() < 2 {
        entry.skipped = Some(format!("insufficient data: {} complete pairs", x.len()));
        return entry;
    }
    let outcome = if modality.is_discrete() {
        wilcoxon_signed_rank_one_sided_with(&x, &y, alternative, config.signed_rank_exact_max_n)
            .and_then(|r| Ok((wilcoxon_r(r.z.unwrap_or(0.0), r.n)?, r)))
            .map(|(e, r)| (r, e))
    } else {
        t_test_one_sided_with(&x, &y, TTestKind::Paired, alternative).and_then(|r| Ok((r, cohens_d(&x, &y)?)))
    };
    finish(&mut entry, outcome);
    entry
}

fn younger_vs_older(table: &Table, site: BodySite, modality: Modality, config: &AnalysisConfig) -> ComparisonEntry {
    let (x, dx) = table.column(site, modality, Some(AgeGroup::Younger));
    let (y, dy) = table.column(site, modality, Some(AgeGroup::Older));
    let alternative = direction(modality);
    let mut entry = ComparisonEntry {
        comparison: ComparisonKind::YoungerVsOlder { site },
        modality,
        test: if modality.is_discrete() { PlannedTest::RankSum } else { PlannedTest::UnpairedT },
        alternative,
        comparisons: config.age_family,
        n_x: x.len(),
        n_y: y.len(),
        dropped: dx + dy,
        result: None,
        effect_size: None,
        skipped: None,
    };
    if x.len() < 2 || y.len() < 2 {
        entry.skipped = Some(format!("insufficient data: {} younger, {} older", x.len(), y.len()));
        return entry;
    }
    let outcome = if modality.is_discrete() {
        wilcoxon_rank_sum_one_sided_with(&x, &y, alternative, config.rank_sum_exact_max_total)
            .and_then(|r| Ok((wilcoxon_r(r.z.unwrap_or(0.0), r.n)?, r)))
            .map(|(e, r)| (r, e))
    } else {
        t_test_one_sided_with(&x, &y, config.unpaired_t, alternative).and_then(|r| Ok((r, cohens_d(&x, &y)?)))
    };
    finish(&mut entry, outcome);
    entry
}

fn correlation(table: &Table, x_mod: Modality, y_mod: Modality, sites: &[BodySite]) -> CorrelationEntry {
    let method = if x_mod.is_discrete() || y_mod.is_discrete() { CorrelationMethod::Spearman } else { CorrelationMethod::Pearson };
    let (mut x, mut y, mut dropped) = (Vec::new(), Vec::new(), 0);
    for (id, _) in &table.participants {
        for &site in sites {
            if !table.has(id, site, x_mod) && !table.has(id, site, y_mod) {
                continue;
            }
            match (table.get(id, site, x_mod), table.get(id, site, y_mod)) {
                (Some(a), Some(b)) => {
                    x.push(a);
                    y.push(b);
                }
                _ => dropped += 1,
            }
        }
    }
    let outcome = match method {
        CorrelationMethod::Pearson => pearson(&x, &y),
        CorrelationMethod::Spearman => spearman(&x, &y),
    };
    let (result, skipped) = match outcome {
        Ok(c) => (Some(c), None),
        Err(e) => (None, Some(skip_reason(e))),
    };
    CorrelationEntry { x: x_mod, y: y_mod, method, sites: sites.to_vec(), n: x.len(), dropped, result, skipped }
}

const CORRELATION_PAIRS: [(Modality, Modality); 3] = [
    (Modality::Smartphone, Modality::TuningFork),
    (Modality::Smartphone, Modality::Monofilament),
    (Modality::Monofilament, Modality::TuningFork),
];

/// Builds the full report from measurement rows; rows marked as excluded
/// feed only the exclusion log.
pub fn analyze_study(rows: &[SiteMeasurement], config: &AnalysisConfig) -> Result<StudyReport, StudyError> {
    let table = Table::new(rows);
    if table.participants.is_empty() {
        return Err(StudyError::NoData);
    }
    let mut tested = BTreeSet::new();
    let mut exclusions = Vec::new();
    for m in rows {
        if tested.insert(m.participant_id.as_str()) {
            if let Some(reason) = m.exclusion {
                exclusions.push(ExclusionEntry { participant_id: m.participant_id.clone(), reason });
            }
        }
    }

    let mut summaries = Vec::new();
    for site in BodySite::ALL {
        for modality in Modality::ALL {
            let mode = if modality.is_discrete() { SummaryMode::Discrete } else { SummaryMode::Continuous };
            for group in [Some(AgeGroup::Younger), Some(AgeGroup::Older), None] {
                let (values, dropped) = table.column(site, modality, group);
                summaries.push(SummaryEntry {
                    site,
                    modality,
                    group: group.map_or(SummaryGroup::All, SummaryGroup::from),
                    dropped,
                    summary: group_summary(&values, mode).ok(),
                });
            }
        }
    }

    let site_comparisons = Modality::ALL.iter().map(|&m| finger_vs_toe(&table, m, config)).collect();
    let mut age_comparisons = Vec::new();
    for modality in Modality::ALL {
        for site in [BodySite::H1, BodySite::F] {
            age_comparisons.push(younger_vs_older(&table, site, modality, config));
        }
    }
    let correlations_all_sites = CORRELATION_PAIRS.iter().map(|&(a, b)| correlation(&table, a, b, &BodySite::ALL)).collect();
    let correlations_finger_toe = CORRELATION_PAIRS.iter().map(|&(a, b)| correlation(&table, a, b, &[BodySite::H1, BodySite::F])).collect();

    let retained_younger = table.participants.iter().filter(|(_, g)| *g == AgeGroup::Younger).count();
    Ok(StudyReport {
        participants_tested: tested.len(),
        participants_retained: table.participants.len(),
        retained_younger,
        retained_older: table.participants.len() - retained_younger,
        exclusions,
        summaries,
        site_comparisons,
        age_comparisons,
        correlations_all_sites,
        correlations_finger_toe,
    })
}

impl StudyReport {
    pub fn site_comparison(&self, modality: Modality) -> &ComparisonEntry {
        self.site_comparisons.iter().find(|c| c.modality == modality).expect("one entry per modality")
    }

    pub fn age_comparison(&self, site: BodySite, modality: Modality) -> Option<&ComparisonEntry> {
        self.age_comparisons.iter().find(|c| c.modality == modality && c.comparison == ComparisonKind::YoungerVsOlder { site })
    }

    pub fn correlation(&self, x: Modality, y: Modality, finger_toe_only: bool) -> Option<&CorrelationEntry> {
        let list = if finger_toe_only { &self.correlations_finger_toe } else { &self.correlations_all_sites };
        list.iter().find(|c| c.x == x && c.y == y)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    /// Plain-text tables for reading at a terminal.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "participants: {} tested, {} retained ({} younger, {} older)",
            self.participants_tested, self.participants_retained, self.retained_younger, self.retained_older
        );
        if !self.exclusions.is_empty() {
            let _ = writeln!(out, "\nexcluded");
            for e in &self.exclusions {
                let _ = writeln!(out, "  {:<8} {}", e.participant_id, e.reason);
            }
        }

        let _ = writeln!(out, "\ngroup summaries");
        let _ = writeln!(out, "  {:<4} {:<13} {:<8} {:>3}  value", "site", "modality", "group", "n");
        for s in &self.summaries {
            let group = match s.group {
                SummaryGroup::Younger => "younger",
                SummaryGroup::Older => "older",
                SummaryGroup::All => "all",
            };
            let (n, text) = match s.summary {
                Some(GroupSummary::Continuous { mean, std, n, .. }) => (n, format!("{mean:.3} ± {std:.3}")),
                Some(GroupSummary::Discrete { median, q25, q75, n }) => (n, format!("{median} [{q25}, {q75}]")),
                None => (0, "-".to_string()),
            };
            let _ = writeln!(out, "  {:<4} {:<13} {:<8} {:>3}  {}", s.site, s.modality, group, n, text);
        }

        let _ = writeln!(out, "\ncomparisons");
        let _ = writeln!(
            out,
            "  {:<24} {:<13} {:<12} {:<8} {:>2} {:>5} {:>10} {:>10} {:>10} {:>8}",
            "comparison", "modality", "test", "alt", "m", "n", "statistic", "p", "p_adj", "effect"
        );
        for c in self.site_comparisons.iter().chain(&self.age_comparisons) {
            let label = match c.comparison {
                ComparisonKind::FingerVsToe => "H1 vs F".to_string(),
                ComparisonKind::YoungerVsOlder { site } => format!("younger vs older at {site}"),
            };
            let test = match c.test {
                PlannedTest::PairedT => "paired t",
                PlannedTest::UnpairedT => "unpaired t",
                PlannedTest::SignedRank => "signed rank",
                PlannedTest::RankSum => "rank sum",
            };
            let alt = match c.alternative {
                Alternative::Less => "less",
                Alternative::Greater => "greater",
            };
            let n = format!("{}/{}", c.n_x, c.n_y);
            match (&c.result, &c.effect_size, &c.skipped) {
                (Some(r), Some(e), _) => {
                    let _ = writeln!(
                        out,
                        "  {:<24} {:<13} {:<12} {:<8} {:>2} {:>5} {:>10.4} {:>10.3e} {:>10.3e} {:>8.3}",
                        label,
                        c.modality,
                        test,
                        alt,
                        c.comparisons,
                        n,
                        r.statistic,
                        r.p_value,
                        r.p_adjusted.unwrap_or(r.p_value),
                        e.value
                    );
                }
                (_, _, reason) => {
                    let _ = writeln!(
                        out,
                        "  {:<24} {:<13} {:<12} {:<8} {:>2} {:>5} skipped: {}",
                        label,
                        c.modality,
                        test,
                        alt,
                        c.comparisons,
                        n,
                        reason.as_deref().unwrap_or("no result")
                    );
                }
            }
        }

        for (title, list) in
            [("correlations, all sites", &self.correlations_all_sites), ("correlations, H1 and F only", &self.correlations_finger_toe)]
        {
            let _ = writeln!(out, "\n{title}");
            for c in list {
                let method = match c.method {
                    CorrelationMethod::Pearson => "pearson",
                    CorrelationMethod::Spearman => "spearman",
                };
                let pair = format!("{} / {}", c.x, c.y);
                match (&c.result, &c.skipped) {
                    (Some(r), _) => {
                        let _ = writeln!(out, "  {pair:<28} {method:<9} n={:<4} r={:>7.3} p={:.3e}", c.n, r.coefficient, r.p_value);
                    }
                    (None, reason) => {
                        let _ =
                            writeln!(out, "  {pair:<28} {method:<9} n={:<4} skipped: {}", c.n, reason.as_deref().unwrap_or("no result"));
                    }
                }
            }
        }
        out
    }
}
