use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Modality, ParticipantLog, SiteMeasurement, StudyError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionRule {
    /// Largest tolerated sham-touch count in any one clinical exam; `None`
    /// disables the check.
    pub max_false_positives: Option<usize>,
    pub exclude_equipment_change: bool,
}

impl Default for ExclusionRule {
    fn default() -> Self {
        Self { max_false_positives: Some(3), exclude_equipment_change: true }
    }
}

impl ExclusionRule {
    pub fn none() -> Self {
        Self { max_false_positives: None, exclude_equipment_change: false }
    }

    pub fn reason_for(&self, log: &ParticipantLog) -> Option<ExclusionReason> {
        if let Some(limit) = self.max_false_positives {
            for (&modality, &count) in &log.clinical_false_positives {
                if count > limit {
                    return Some(ExclusionReason::TooManyFalsePositives { modality, count, limit });
                }
            }
        }
        (self.exclude_equipment_change && log.equipment_change).then_some(ExclusionReason::EquipmentChange)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ExclusionReason {
    TooManyFalsePositives {
        modality: Modality,
        count: usize,
        limit: usize,
    },
    /// A different tuning fork was used.
    EquipmentChange,
}

/// CSV spelling, e.g. `false_positives:tuning_fork:5>3` or
/// `equipment_change`.
impl fmt::Display for ExclusionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::TooManyFalsePositives { modality, count, limit } => write!(f, "false_positives:{modality}:{count}>{limit}"),
            Self::EquipmentChange => f.write_str("equipment_change"),
        }
    }
}

impl FromStr for ExclusionReason {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "equipment_change" {
            return Ok(Self::EquipmentChange);
        }
        let bad = || format!("unrecognized exclusion reason `{s}`");
        let rest = s.strip_prefix("false_positives:").ok_or_else(bad)?;
        let (modality, counts) = rest.split_once(':').ok_or_else(bad)?;
        let (count, limit) = counts.split_once('>').ok_or_else(bad)?;
        Ok(Self::TooManyFalsePositives {
            modality: modality.parse()?,
            count: count.parse().map_err(|_| bad())?,
            limit: limit.parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionEntry {
    pub participant_id: String,
    pub reason: ExclusionReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusions {
    /// Every measurement in input order, excluded ones marked with a reason.
    pub rows: Vec<SiteMeasurement>,
    pub log: Vec<ExclusionEntry>,
}

impl Exclusions {
    pub fn retained(&self) -> impl Iterator<Item = &SiteMeasurement> {
        self.rows.iter().filter(|m| !m.is_excluded())
    }

    pub fn excluded(&self) -> impl Iterator<Item = &SiteMeasurement> {
        self.rows.iter().filter(|m| m.is_excluded())
    }
}

/// Marks every measurement of an excluded participant; exclusion is
/// all-or-nothing across sites and modalities.
pub fn apply_exclusions(measurements: &[SiteMeasurement], rule: &ExclusionRule, logs: &[ParticipantLog]) -> Result<Exclusions, StudyError> {
    let by_id: BTreeMap<&str, &ParticipantLog> = logs.iter().map(|l| (l.participant_id.as_str(), l)).collect();
    let mut log = Vec::new();
    for l in logs {
        if let Some(reason) = rule.reason_for(l) {
            log.push(ExclusionEntry { participant_id: l.participant_id.clone(), reason });
        }
    }
    let reasons: BTreeMap<&str, ExclusionReason> = log.iter().map(|e| (e.participant_id.as_str(), e.reason)).collect();
    let mut rows = Vec::with_capacity(measurements.len());
    for m in measurements {
        if !by_id.contains_key(m.participant_id.as_str()) {
            return Err(StudyError::InvalidConfig(format!("no session log for participant {}", m.participant_id)));
        }
        let mut m = m.clone();
        m.exclusion = reasons.get(m.participant_id.as_str()).copied();
        rows.push(m);
    }
    Ok(Exclusions { rows, log })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reason_round_trip() {
        for reason in [
            ExclusionReason::EquipmentChange,
            ExclusionReason::TooManyFalsePositives { modality: Modality::TuningFork, count: 5, limit: 3 },
        ] {
            assert_eq!(reason.to_string().parse::<ExclusionReason>().unwrap(), reason);
        }
        assert_eq!(
            ExclusionReason::TooManyFalsePositives { modality: Modality::Monofilament, count: 4, limit: 3 }.to_string(),
            "false_positives:monofilament:4>3"
        );
        assert!("false_positives:x:1>0".parse::<ExclusionReason>().is_err());
    }
}
