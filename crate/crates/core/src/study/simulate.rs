use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::{
    analyze_study, apply_exclusions, generate_cohort, AgeGroup, AnalysisConfig, CohortSpec, ExclusionRule, Exclusions, MeasuredValue,
    Modality, Participant, SiteMeasurement, StudyError, StudyReport,
};
use crate::clinical::{
    average_perception_time, monofilament_start_size, run_monofilament_exam, simulate_tuning_fork_time, LogisticForceObserver,
    MonofilamentSet, MonofilamentThreshold, TuningForkModel,
};
use crate::observer::PsychometricObserver;
use crate::session::{run_trial, LatencyModel, SessionConfig, SimulatedResponder, TrialIdentity, VirtualClock};
use crate::site::BodySite;
use crate::staircase::{aggregate_site_threshold, StaircaseConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub session: SessionConfig,
    pub staircase: StaircaseConfig,
    pub tuning_fork: TuningForkModel,
    pub tuning_fork_strikes: usize,
    pub monofilament: MonofilamentSet,
    pub latency: LatencyModel,
    /// Logistic slope of the simulated smartphone observers.
    pub observer_beta: f64,
    pub monofilament_log10_spread: f64,
    pub catch_trials_per_site: u32,
}

impl StudyConfig {
    /// Protocol defaults with the observer settings taken from a cohort spec.
    pub fn for_spec(spec: &CohortSpec) -> Self {
        Self {
            session: SessionConfig::default(),
            staircase: StaircaseConfig::default(),
            tuning_fork: TuningForkModel { strike_log_sd: 0.1, ..Default::default() },
            tuning_fork_strikes: 5,
            monofilament: MonofilamentSet::standard(),
            latency: LatencyModel::default(),
            observer_beta: spec.observer_beta,
            monofilament_log10_spread: spec.monofilament_log10_spread,
            catch_trials_per_site: spec.clinical_false_positives.catch_trials_per_site,
        }
    }

    pub fn validate(&self) -> Result<(), StudyError> {
        self.session.validate()?;
        self.staircase.validate()?;
        self.tuning_fork.validate()?;
        if self.tuning_fork_strikes == 0 {
            return Err(StudyError::InvalidConfig("`tuning_fork_strikes` must be at least 1".into()));
        }
        if !(self.observer_beta > 0.0 && self.monofilament_log10_spread > 0.0) {
            return Err(StudyError::InvalidConfig("observer spreads must be positive".into()));
        }
        Ok(())
    }
}

/// Everything about one participant's visit that is not a threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantLog {
    pub participant_id: String,
    pub age_group: AgeGroup,
    pub modality_order: Vec<Modality>,
    pub site_order: BTreeMap<Modality, Vec<BodySite>>,
    pub smartphone_false_positives: usize,
    pub smartphone_nan_trials: usize,
    /// Sham-touch responses per clinical exam.
    pub clinical_false_positives: BTreeMap<Modality, usize>,
    pub equipment_change: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRun {
    /// Participant, then site, then modality order.
    pub measurements: Vec<SiteMeasurement>,
    pub logs: Vec<ParticipantLog>,
}

const ORDER_STREAM: u64 = 3;

/// Independent stream per participant, site and modality, so that the
/// randomized exam order changes only the log.
fn stream(base: u64, participant: usize, site: usize, lane: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(((participant as u64) << 8) | ((site as u64) << 2) | lane);
    rng
}

pub fn run_virtual_study(cohort: &[Participant], config: &StudyConfig, rng: &mut dyn RngCore) -> Result<StudyRun, StudyError> {
    config.validate()?;
    let base: u64 = rng.random();
    let mut measurements = Vec::with_capacity(cohort.len() * 18);
    let mut logs = Vec::with_capacity(cohort.len());
    for (index, participant) in cohort.iter().enumerate() {
        let (rows, log) = run_participant(participant, index, config, base)?;
        measurements.extend(rows);
        logs.push(log);
    }
    Ok(StudyRun { measurements, logs })
}

/// Every stage of one seeded study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyOutcome {
    pub cohort: Vec<Participant>,
    pub run: StudyRun,
    pub exclusions: Exclusions,
    pub report: StudyReport,
}

/// Cohort generation, the exams, exclusion and analysis from one seed.
pub fn simulate_study(spec: &CohortSpec, seed: u64, rule: &ExclusionRule, analysis: &AnalysisConfig) -> Result<StudyOutcome, StudyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cohort = generate_cohort(spec, &mut rng)?;
    let run = run_virtual_study(&cohort, &StudyConfig::for_spec(spec), &mut rng)?;
    let exclusions = apply_exclusions(&run.measurements, rule, &run.logs)?;
    let report = analyze_study(&exclusions.rows, analysis)?;
    Ok(StudyOutcome { cohort, run, exclusions, report })
}

fn run_participant(
    participant: &Participant,
    index: usize,
    config: &StudyConfig,
    base: u64,
) -> Result<(Vec<SiteMeasurement>, ParticipantLog), StudyError> {
    let mut order_rng = stream(base, index, 0, ORDER_STREAM);
    let mut modality_order = Modality::ALL.to_vec();
    modality_order.shuffle(&mut order_rng);
    let mut site_order = BTreeMap::new();
    for modality in Modality::ALL {
        let mut sites = BodySite::ALL.to_vec();
        sites.shuffle(&mut order_rng);
        site_order.insert(modality, sites);
    }
    let catches = config.catch_trials_per_site as u64 * BodySite::ALL.len() as u64;
    let sham = Binomial::new(catches, participant.clinical_false_positive_rate)
        .map_err(|e| StudyError::InvalidConfig(format!("clinical false-positive rate: {e}")))?;
    let clinical_false_positives =
        [Modality::TuningFork, Modality::Monofilament].into_iter().map(|m| (m, sham.sample(&mut order_rng) as usize)).collect();

    let mut rows = Vec::with_capacity(18);
    let mut smartphone_false_positives = 0;
    let mut smartphone_nan_trials = 0;
    for (site_index, site) in BodySite::ALL.into_iter().enumerate() {
        let truth = participant.sites[&site];
        let measure = |modality, value| SiteMeasurement {
            participant_id: participant.id.clone(),
            age_group: participant.age_group,
            site,
            modality,
            value,
            exclusion: None,
        };

        let mut rng = stream(base, index, site_index, 0);
        let observer = PsychometricObserver::new(truth.smartphone_alpha, config.observer_beta)
            .with_false_positive_rate(participant.smartphone_false_positive_rate);
        let mut responder = SimulatedResponder::new(observer, config.latency);
        let mut trials = Vec::with_capacity(config.session.reps_per_site);
        for rep in 0..config.session.reps_per_site {
            let identity = TrialIdentity::new(participant.id.clone(), site, rep)?;
            let record = run_trial(identity, &config.session, &config.staircase, &mut responder, &mut VirtualClock::new(), &mut rng)?;
            smartphone_false_positives += record.false_positive_count;
            let threshold = record.threshold.expect("finished trial has a threshold");
            smartphone_nan_trials += usize::from(threshold.value.is_nan());
            trials.push(threshold);
        }
        let smartphone = aggregate_site_threshold(&trials)?.value;
        rows.push(measure(Modality::Smartphone, MeasuredValue::from_f64(smartphone)));

        let mut rng = stream(base, index, site_index, 1);
        let theta = config.tuning_fork.threshold_for_time(truth.tuning_fork_seconds);
        let times = (0..config.tuning_fork_strikes)
            .map(|_| simulate_tuning_fork_time(&config.tuning_fork, theta, &mut rng))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(measure(Modality::TuningFork, MeasuredValue::Value(average_perception_time(&times)?)));

        let mut rng = stream(base, index, site_index, 2);
        let detector =
            LogisticForceObserver { threshold_gf: truth.monofilament_threshold_gf, log10_spread: config.monofilament_log10_spread };
        let start = monofilament_start_size(site.site_class());
        let result = run_monofilament_exam(&config.monofilament, &detector, start, &mut rng)?;
        let value = match result.threshold {
            MonofilamentThreshold::Size(s) => MeasuredValue::Value(s),
            MonofilamentThreshold::NoneFelt => MeasuredValue::NoneFelt,
        };
        rows.push(measure(Modality::Monofilament, value));
    }

    let log = ParticipantLog {
        participant_id: participant.id.clone(),
        age_group: participant.age_group,
        modality_order,
        site_order,
        smartphone_false_positives,
        smartphone_nan_trials,
        clinical_false_positives,
        equipment_change: participant.equipment_change,
    };
    Ok((rows, log))
}
