use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{AgeGroup, StudyError};
use crate::site::BodySite;

pub const CALIBRATED_SPEC_JSON: &str = include_str!("../../data/calibrated_cohort.json");

/// Population mean and spread of one generator parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalParameter {
    pub mean: f64,
    pub sd: f64,
}

impl NormalParameter {
    fn at(&self, z: f64) -> f64 {
        self.mean + self.sd * z
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteParameters {
    /// 50% point of the participant's psychometric function.
    pub smartphone_alpha: NormalParameter,
    /// Noise-free fork perception time in seconds.
    pub tuning_fork_seconds: NormalParameter,
    /// log10 of the force (gf) felt half the time.
    pub monofilament_log10_gf: NormalParameter,
}

pub type GroupParameters = BTreeMap<BodySite, SiteParameters>;

/// Sham touches during the clinical exams. A small share of participants is
/// prone to reporting touches that did not happen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClinicalFalsePositiveSpec {
    pub catch_trials_per_site: u32,
    pub baseline_rate: f64,
    pub prone_fraction: f64,
    pub prone_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortSpec {
    pub n_younger: usize,
    pub n_older: usize,
    pub seed: u64,
    /// Logistic slope shared by every simulated smartphone observer.
    pub observer_beta: f64,
    /// Shared-factor correlation between the three modalities at one site.
    pub modality_correlation: f64,
    pub smartphone_false_positive_rate: f64,
    pub clinical_false_positives: ClinicalFalsePositiveSpec,
    /// Share of participants whose fork exam used a different fork.
    pub equipment_change_fraction: f64,
    pub monofilament_log10_spread: f64,
    /// Optional relative reduction of the W2 smartphone alpha, standing in
    /// for vibration leaking to the fingertips.
    #[serde(default)]
    pub w2_leakage_alpha_discount: Option<f64>,
    pub groups: BTreeMap<AgeGroup, GroupParameters>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticipantSite {
    pub smartphone_alpha: f64,
    pub tuning_fork_seconds: f64,
    pub monofilament_threshold_gf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Participant {
    pub id: String,
    pub age_group: AgeGroup,
    pub sites: BTreeMap<BodySite, ParticipantSite>,
    pub smartphone_false_positive_rate: f64,
    pub clinical_false_positive_rate: f64,
    pub equipment_change: bool,
}

/// Smallest alpha handed to an observer; keeps the logistic well inside the
/// positive intensity range.
const MIN_ALPHA: f64 = 0.01;

impl CohortSpec {
    pub fn calibrated() -> Self {
        Self::from_json(CALIBRATED_SPEC_JSON).expect("bundled spec is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, StudyError> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, StudyError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn n_participants(&self) -> usize {
        self.n_younger + self.n_older
    }

    pub fn validate(&self) -> Result<(), StudyError> {
        let fail = |msg: String| Err(StudyError::InvalidSpec(msg));
        let probability = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(StudyError::InvalidSpec(format!("`{name}` must lie in [0, 1], got {p}")))
            }
        };
        if !(self.observer_beta.is_finite() && self.observer_beta > 0.0) {
            return fail(format!("`observer_beta` must be positive, got {}", self.observer_beta));
        }
        probability("modality_correlation", self.modality_correlation)?;
        probability("smartphone_false_positive_rate", self.smartphone_false_positive_rate)?;
        probability("equipment_change_fraction", self.equipment_change_fraction)?;
        let fp = &self.clinical_false_positives;
        probability("clinical_false_positives.baseline_rate", fp.baseline_rate)?;
        probability("clinical_false_positives.prone_fraction", fp.prone_fraction)?;
        probability("clinical_false_positives.prone_rate", fp.prone_rate)?;
        if !(self.monofilament_log10_spread.is_finite() && self.monofilament_log10_spread > 0.0) {
            return fail(format!("`monofilament_log10_spread` must be positive, got {}", self.monofilament_log10_spread));
        }
        if let Some(d) = self.w2_leakage_alpha_discount {
            if !(0.0..1.0).contains(&d) {
                return fail(format!("`w2_leakage_alpha_discount` must lie in [0, 1), got {d}"));
            }
        }
        for (group, count) in [(AgeGroup::Younger, self.n_younger), (AgeGroup::Older, self.n_older)] {
            if count == 0 {
                continue;
            }
            let Some(params) = self.groups.get(&group) else {
                return fail(format!("`groups.{group}` is missing"));
            };
            for site in BodySite::ALL {
                let Some(p) = params.get(&site) else {
                    return fail(format!("`groups.{group}.{site}` is missing"));
                };
                for (name, param) in [
                    ("smartphone_alpha", p.smartphone_alpha),
                    ("tuning_fork_seconds", p.tuning_fork_seconds),
                    ("monofilament_log10_gf", p.monofilament_log10_gf),
                ] {
                    if !param.mean.is_finite() || !param.sd.is_finite() || param.sd < 0.0 {
                        return fail(format!("`groups.{group}.{site}.{name}` needs a finite mean and a non-negative sd"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Draws every participant's per-site observer parameters. Younger
/// participants come first; ids are `P001`, `P002`, ...
pub fn generate_cohort(spec: &CohortSpec, rng: &mut dyn RngCore) -> Result<Vec<Participant>, StudyError> {
    spec.validate()?;
    let groups = std::iter::repeat_n(AgeGroup::Younger, spec.n_younger).chain(std::iter::repeat_n(AgeGroup::Older, spec.n_older));
    let rho = spec.modality_correlation;
    let (shared, own) = (rho.sqrt(), (1.0 - rho).sqrt());
    let fp = &spec.clinical_false_positives;
    let mut cohort = Vec::with_capacity(spec.n_participants());
    for (index, age_group) in groups.enumerate() {
        let prone = rng.random::<f64>() < fp.prone_fraction;
        let equipment_change = rng.random::<f64>() < spec.equipment_change_fraction;
        let params = &spec.groups[&age_group];
        let mut sites = BTreeMap::new();
        for site in BodySite::ALL {
            let p = &params[&site];
            let mut normal = || -> f64 { StandardNormal.sample(rng) };
            let z0 = normal();
            let (zs, zf, zm) = (shared * z0 + own * normal(), shared * z0 + own * normal(), shared * z0 + own * normal());
            let mut alpha = p.smartphone_alpha.at(zs);
            if site == BodySite::W2 {
                alpha *= 1.0 - spec.w2_leakage_alpha_discount.unwrap_or(0.0);
            }
            sites.insert(
                site,
                ParticipantSite {
                    smartphone_alpha: alpha.max(MIN_ALPHA),
                    // worse perception means a shorter fork time
                    tuning_fork_seconds: p.tuning_fork_seconds.at(-zf).max(0.0),
                    monofilament_threshold_gf: 10f64.powf(p.monofilament_log10_gf.at(zm)),
                },
            );
        }
        cohort.push(Participant {
            id: format!("P{:03}", index + 1),
            age_group,
            sites,
            smartphone_false_positive_rate: spec.smartphone_false_positive_rate,
            clinical_false_positive_rate: if prone { fp.prone_rate } else { fp.baseline_rate },
            equipment_change,
        });
    }
    Ok(cohort)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bundled_spec_parses() {
        let spec = CohortSpec::calibrated();
        assert_eq!((spec.n_younger, spec.n_older), (18, 18));
        let f = spec.groups[&AgeGroup::Older][&BodySite::F].smartphone_alpha;
        assert_eq!((f.mean, f.sd), (0.47, 0.23));
    }

    #[test]
    fn missing_site_is_named() {
        let mut spec = CohortSpec::calibrated();
        spec.groups.get_mut(&AgeGroup::Older).unwrap().remove(&BodySite::W1);
        let err = spec.validate().unwrap_err().to_string();
        assert!(err.contains("groups.older.W1"), "{err}");
    }

    #[test]
    fn ids_and_groups_in_order() {
        let mut spec = CohortSpec::calibrated();
        spec.n_younger = 2;
        spec.n_older = 1;
        let cohort = generate_cohort(&spec, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let ids: Vec<(&str, AgeGroup)> = cohort.iter().map(|p| (p.id.as_str(), p.age_group)).collect();
        assert_eq!(ids, [("P001", AgeGroup::Younger), ("P002", AgeGroup::Younger), ("P003", AgeGroup::Older)]);
    }
}
