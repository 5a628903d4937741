//! Timed trial runner.
//!
//! A [`TrialSession`] owns one staircase and the clock-facing rules around
//! it: stimuli are spaced by a random inter-stimulus interval, a response is
//! a detection only if it lands inside the response window that opens at
//! stimulus onset, and everything else is logged as a false alarm without
//! touching the staircase. Session times are seconds since the session
//! started, rounded to whole milliseconds so that exported CSVs re-import to
//! identical values.
//!
//! The same state machine backs both the offline simulator ([`run_trial`])
//! and the live HTTP service, so a transcript of onsets and responses yields
//! the same [`TrialRecord`] whichever way it was driven.

use std::io::{self, BufRead, Write};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::observer::DetectionModel;
use crate::site::BodySite;
use crate::staircase::{self, StaircaseConfig, StaircaseError, StaircaseState, StaircaseStatus, TrialThreshold};

pub const CSV_HEADER: &str = "participant_id,site,rep,stimulus_index,onset_s,haptic_intensity,detected,reversal,latency_s";

/// Slack for comparing millisecond-rounded times.
const TIME_EPS: f64 = 1e-9;

pub(crate) fn to_millis(seconds: f64) -> f64 {
    (seconds * 1000.0).round() / 1000.0
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("invalid session config: `{field}` {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("participant id `{0}` must be non-empty and free of commas, quotes and line breaks")]
    InvalidParticipantId(String),
    #[error(transparent)]
    Staircase(#[from] StaircaseError),
    #[error("responder disconnected")]
    ResponderDisconnected,
    #[error("no stimulus is pending")]
    NoPendingStimulus,
    #[error("stimulus {0} is still pending")]
    StimulusPending(usize),
    #[error("session is finished")]
    Finished,
    #[error("onset {onset} s precedes the previous stimulus at {previous} s")]
    OnsetOutOfOrder { onset: f64, previous: f64 },
    #[error("trial CSV line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub isi_min: f64,
    pub isi_max: f64,
    pub response_window: f64,
    pub stimulus_duration: f64,
    pub reps_per_site: usize,
    pub sites: Vec<BodySite>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self { isi_min: 3.0, isi_max: 6.0, response_window: 2.5, stimulus_duration: 0.1, reps_per_site: 5, sites: BodySite::ALL.to_vec() }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), SessionError> {
        let invalid = |field, reason: &str| Err(SessionError::InvalidConfig { field, reason: reason.to_string() });
        if !(self.isi_min.is_finite() && self.isi_min > 0.0) {
            return invalid("isi_min", "must be positive");
        }
        if !(self.isi_max.is_finite() && self.isi_max >= self.isi_min) {
            return invalid("isi_max", "must be at least isi_min");
        }
        if self.stimulus_duration.is_nan() || self.stimulus_duration <= 0.0 {
            return invalid("stimulus_duration", "must be positive");
        }
        if self.response_window.is_nan() || self.response_window <= self.stimulus_duration {
            return invalid("response_window", "must exceed stimulus_duration");
        }
        // The next onset is drawn from the previous onset, so a window may
        // only close before the earliest possible next stimulus.
        if self.isi_min < self.response_window {
            return invalid("isi_min", "must be at least response_window");
        }
        if self.reps_per_site == 0 {
            return invalid("reps_per_site", "must be at least 1");
        }
        Ok(())
    }
}

/// Onset of the next stimulus: `now` plus a uniform draw from the
/// inter-stimulus interval.
pub fn schedule_next_stimulus(config: &SessionConfig, now: f64, rng: &mut dyn RngCore) -> f64 {
    if config.isi_min == config.isi_max {
        now + config.isi_min
    } else {
        now + rng.random_range(config.isi_min..=config.isi_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseClass {
    TruePositive,
    IgnoredLate,
    FalsePositive,
}

pub fn classify_response(config: &SessionConfig, stimulus_onset: f64, response_time: f64) -> ResponseClass {
    let latency = response_time - stimulus_onset;
    if latency < -TIME_EPS {
        ResponseClass::FalsePositive
    } else if latency <= config.response_window + TIME_EPS {
        ResponseClass::TruePositive
    } else {
        ResponseClass::IgnoredLate
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    StimulusOnset {
        stimulus_index: usize,
        level: f64,
    },
    Response {
        classification: ResponseClass,
    },
    WindowClosed {
        stimulus_index: usize,
        detected: bool,
    },
    TrialComplete {
        #[serde(with = "crate::staircase::nan_as_null")]
        threshold: f64,
    },
    SessionComplete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub timestamp: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialIdentity {
    pub participant_id: String,
    pub site: BodySite,
    pub rep: usize,
}

impl TrialIdentity {
    pub fn new(participant_id: impl Into<String>, site: BodySite, rep: usize) -> Result<Self, SessionError> {
        let participant_id = participant_id.into();
        if participant_id.is_empty() || participant_id.contains([',', '"', '\n', '\r']) {
            return Err(SessionError::InvalidParticipantId(participant_id));
        }
        Ok(Self { participant_id, site, rep })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub stimulus_index: usize,
    pub onset_s: f64,
    pub level: f64,
    pub detected: bool,
    pub reversal: bool,
    pub response_latency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub participant_id: String,
    pub site: BodySite,
    pub rep: usize,
    pub rows: Vec<TrialRow>,
    /// `None` while the staircase is still running.
    pub threshold: Option<TrialThreshold>,
    pub false_positive_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PendingStimulus {
    pub stimulus_index: usize,
    pub onset: f64,
    pub level: f64,
    pub deadline: f64,
    pub response_latency: Option<f64>,
}

/// One staircase trial driven by timestamped events.
#[derive(Debug, Clone)]
pub struct TrialSession {
    identity: TrialIdentity,
    config: SessionConfig,
    staircase: StaircaseState,
    pending: Option<PendingStimulus>,
    rows: Vec<TrialRow>,
    false_positive_count: usize,
    events: Vec<SessionEvent>,
}

impl TrialSession {
    pub fn new(identity: TrialIdentity, config: SessionConfig, staircase_config: StaircaseConfig) -> Result<Self, SessionError> {
        config.validate()?;
        Ok(Self {
            identity,
            config,
            staircase: StaircaseState::new(staircase_config)?,
            pending: None,
            rows: Vec::new(),
            false_positive_count: 0,
            events: Vec::new(),
        })
    }

    pub fn identity(&self) -> &TrialIdentity {
        &self.identity
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn staircase(&self) -> &StaircaseState {
        &self.staircase
    }

    pub fn status(&self) -> StaircaseStatus {
        self.staircase.status()
    }

    pub fn is_running(&self) -> bool {
        self.staircase.is_running()
    }

    pub fn pending(&self) -> Option<&PendingStimulus> {
        self.pending.as_ref()
    }

    pub fn rows(&self) -> &[TrialRow] {
        &self.rows
    }

    pub fn events(&self) -> &[SessionEvent] {
        &self.events
    }

    pub fn false_positive_count(&self) -> usize {
        self.false_positive_count
    }

    fn last_onset(&self) -> Option<f64> {
        self.pending.map(|p| p.onset).or_else(|| self.rows.last().map(|r| r.onset_s))
    }

    /// Earliest time the next stimulus may be drawn from.
    fn anchor(&self) -> f64 {
        self.last_onset().unwrap_or(0.0)
    }

    /// Draws the onset of the next stimulus without presenting it.
    pub fn draw_next_onset(&self, rng: &mut dyn RngCore) -> f64 {
        to_millis(schedule_next_stimulus(&self.config, self.anchor(), rng))
    }

    /// Schedules the next stimulus unless one is already pending.
    pub fn schedule(&mut self, rng: &mut dyn RngCore) -> Result<Option<PendingStimulus>, SessionError> {
        if !self.is_running() {
            return Ok(None);
        }
        if let Some(p) = self.pending {
            return Ok(Some(p));
        }
        let onset = self.draw_next_onset(rng);
        self.present(onset).map(Some)
    }

    /// Presents the next stimulus at an explicit onset.
    pub fn present(&mut self, onset: f64) -> Result<PendingStimulus, SessionError> {
        if !self.is_running() {
            return Err(SessionError::Finished);
        }
        if let Some(p) = self.pending {
            return Err(SessionError::StimulusPending(p.stimulus_index));
        }
        let onset = to_millis(onset);
        if let Some(previous) = self.last_onset() {
            if onset < previous {
                return Err(SessionError::OnsetOutOfOrder { onset, previous });
            }
        }
        let level = self.staircase.current_level();
        let stimulus_index = self.rows.len();
        let pending = PendingStimulus {
            stimulus_index,
            onset,
            level,
            deadline: to_millis(onset + self.config.response_window),
            response_latency: None,
        };
        self.pending = Some(pending);
        self.events.push(SessionEvent { timestamp: onset, kind: EventKind::StimulusOnset { stimulus_index, level } });
        Ok(pending)
    }

    /// Classifies a response against the most recent stimulus whose onset is
    /// not after `time`. A response before any stimulus is a false positive.
    pub fn respond(&mut self, time: f64) -> Result<ResponseClass, SessionError> {
        let time = to_millis(time);
        if !self.is_running() {
            return Err(SessionError::Finished);
        }
        self.advance(time)?;
        if !self.is_running() {
            // the expired window was the last one; the response is late
            self.record_false_alarm(time, ResponseClass::IgnoredLate);
            return Ok(ResponseClass::IgnoredLate);
        }
        let reference = match self.pending {
            Some(p) if p.onset <= time + TIME_EPS => Some((p.onset, true)),
            _ => self.rows.last().map(|r| (r.onset_s, false)),
        };
        let class = match reference {
            // a window closed early (e.g. by the runner) no longer accepts answers
            Some((onset, open)) => match classify_response(&self.config, onset, time) {
                ResponseClass::TruePositive if !open => ResponseClass::IgnoredLate,
                class => class,
            },
            None => ResponseClass::FalsePositive,
        };
        match class {
            ResponseClass::TruePositive => {
                let pending = self.pending.as_mut().expect("open window implies a pending stimulus");
                // extra responses inside one window collapse into the first
                if pending.response_latency.is_none() {
                    pending.response_latency = Some(to_millis(time - pending.onset));
                }
                self.events.push(SessionEvent { timestamp: time, kind: EventKind::Response { classification: class } });
            }
            other => self.record_false_alarm(time, other),
        }
        Ok(class)
    }

    fn record_false_alarm(&mut self, time: f64, class: ResponseClass) {
        self.false_positive_count += 1;
        self.events.push(SessionEvent { timestamp: time, kind: EventKind::Response { classification: class } });
    }

    /// Closes the pending window if it has expired by `now`.
    pub fn advance(&mut self, now: f64) -> Result<Option<TrialRow>, SessionError> {
        match self.pending {
            Some(p) if now > p.deadline + TIME_EPS => self.close_window(),
            _ => Ok(None),
        }
    }

    /// Ends the pending window and feeds its outcome to the staircase.
    pub fn close_window(&mut self) -> Result<Option<TrialRow>, SessionError> {
        let Some(pending) = self.pending.take() else {
            return Ok(None);
        };
        let detected = pending.response_latency.is_some();
        let outcome = self.staircase.apply(detected)?;
        let row = TrialRow {
            stimulus_index: pending.stimulus_index,
            onset_s: pending.onset,
            level: pending.level,
            detected,
            reversal: outcome.reversal.is_some(),
            response_latency: pending.response_latency,
        };
        self.rows.push(row);
        self.events.push(SessionEvent {
            timestamp: pending.deadline,
            kind: EventKind::WindowClosed { stimulus_index: pending.stimulus_index, detected },
        });
        if !self.is_running() {
            let threshold = self.staircase.compute_threshold()?;
            self.events.push(SessionEvent { timestamp: pending.deadline, kind: EventKind::TrialComplete { threshold: threshold.value } });
        }
        Ok(Some(row))
    }

    pub fn threshold(&self) -> Option<TrialThreshold> {
        self.staircase.compute_threshold().ok()
    }

    pub fn record(&self) -> TrialRecord {
        TrialRecord {
            participant_id: self.identity.participant_id.clone(),
            site: self.identity.site,
            rep: self.identity.rep,
            rows: self.rows.clone(),
            threshold: self.threshold(),
            false_positive_count: self.false_positive_count,
        }
    }

    /// Rebuilds a session from its event log.
    pub fn from_events(
        identity: TrialIdentity,
        config: SessionConfig,
        staircase_config: StaircaseConfig,
        events: &[SessionEvent],
    ) -> Result<Self, SessionError> {
        let mut session = Self::new(identity, config, staircase_config)?;
        for event in events {
            match &event.kind {
                EventKind::StimulusOnset { .. } => {
                    session.close_window()?;
                    session.present(event.timestamp)?;
                }
                EventKind::Response { .. } => {
                    session.respond(event.timestamp)?;
                }
                EventKind::WindowClosed { .. } => {
                    session.close_window()?;
                }
                EventKind::TrialComplete { .. } | EventKind::SessionComplete => {}
            }
        }
        Ok(session)
    }
}

/// Source of time for the runner.
pub trait Clock {
    fn now(&self) -> f64;
    fn advance_to(&mut self, seconds: f64);
}

/// Simulated time: jumps instantly.
#[derive(Debug, Clone, Default)]
pub struct VirtualClock {
    now: f64,
}

impl VirtualClock {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> f64 {
        self.now
    }

    fn advance_to(&mut self, seconds: f64) {
        self.now = self.now.max(seconds);
    }
}

/// Real time since construction; `advance_to` sleeps.
#[derive(Debug, Clone)]
pub struct WallClock {
    start: Instant,
}

impl Default for WallClock {
    fn default() -> Self {
        Self { start: Instant::now() }
    }
}

impl Clock for WallClock {
    fn now(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    fn advance_to(&mut self, seconds: f64) {
        let wait = seconds - self.now();
        if wait > 0.0 {
            std::thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

/// What the responder is told about an upcoming stimulus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StimulusCue {
    pub stimulus_index: usize,
    pub level: f64,
    pub onset: f64,
    pub response_window: f64,
    /// End of the previous response window (or session start).
    pub quiet_since: f64,
}

/// Produces response timestamps for one stimulus. Times may fall before the
/// onset (false alarms during the quiet interval) but must not reach the
/// earliest possible next onset, `onset + isi_min`.
pub trait Responder {
    fn respond(&mut self, cue: &StimulusCue, rng: &mut dyn RngCore) -> Result<Vec<f64>, SessionError>;
}

/// Uniform response latency in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyModel {
    pub min: f64,
    pub max: f64,
}

impl LatencyModel {
    pub fn fixed(seconds: f64) -> Self {
        Self { min: seconds, max: seconds }
    }

    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        if self.min == self.max {
            self.min
        } else {
            rng.random_range(self.min..=self.max)
        }
    }
}

impl Default for LatencyModel {
    fn default() -> Self {
        Self { min: 0.6, max: 1.2 }
    }
}

/// Wraps a detection model as a responder: one "yes" after the latency when
/// the stimulus is detected, plus an occasional false alarm during the quiet
/// interval before the onset.
#[derive(Debug, Clone)]
pub struct SimulatedResponder<M> {
    pub model: M,
    pub latency: LatencyModel,
}

impl<M: DetectionModel> SimulatedResponder<M> {
    pub fn new(model: M, latency: LatencyModel) -> Self {
        Self { model, latency }
    }
}

impl<M: DetectionModel> Responder for SimulatedResponder<M> {
    fn respond(&mut self, cue: &StimulusCue, rng: &mut dyn RngCore) -> Result<Vec<f64>, SessionError> {
        let mut times = Vec::new();
        let fp_rate = self.model.false_positive_rate();
        if fp_rate > 0.0 && rng.random::<f64>() < fp_rate && cue.onset > cue.quiet_since {
            times.push(rng.random_range(cue.quiet_since..cue.onset));
        }
        if self.model.sample_response(cue.level, rng) {
            times.push(cue.onset + self.latency.sample(rng));
        }
        Ok(times)
    }
}

/// Replays fixed latencies by stimulus index; `None` (or running past the
/// script) means no response.
#[derive(Debug, Clone, Default)]
pub struct ScriptedResponder {
    pub latencies: Vec<Option<f64>>,
}

impl ScriptedResponder {
    pub fn never() -> Self {
        Self::default()
    }
}

impl Responder for ScriptedResponder {
    fn respond(&mut self, cue: &StimulusCue, _rng: &mut dyn RngCore) -> Result<Vec<f64>, SessionError> {
        Ok(self.latencies.get(cue.stimulus_index).copied().flatten().map(|latency| vec![cue.onset + latency]).unwrap_or_default())
    }
}

/// Live responder fed through a channel; each message answers one cue.
#[derive(Debug)]
pub struct ChannelResponder {
    cues: mpsc::Sender<StimulusCue>,
    answers: mpsc::Receiver<Vec<f64>>,
}

impl ChannelResponder {
    /// Returns the responder plus the far ends of its two channels.
    pub fn new() -> (Self, mpsc::Receiver<StimulusCue>, mpsc::Sender<Vec<f64>>) {
        let (cue_tx, cue_rx) = mpsc::channel();
        let (answer_tx, answer_rx) = mpsc::channel();
        (Self { cues: cue_tx, answers: answer_rx }, cue_rx, answer_tx)
    }
}

impl Responder for ChannelResponder {
    fn respond(&mut self, cue: &StimulusCue, _rng: &mut dyn RngCore) -> Result<Vec<f64>, SessionError> {
        self.cues.send(*cue).map_err(|_| SessionError::ResponderDisconnected)?;
        self.answers.recv().map_err(|_| SessionError::ResponderDisconnected)
    }
}

/// Runs one staircase trial to completion against a responder.
pub fn run_trial(
    identity: TrialIdentity,
    config: &SessionConfig,
    staircase_config: &StaircaseConfig,
    responder: &mut dyn Responder,
    clock: &mut dyn Clock,
    rng: &mut dyn RngCore,
) -> Result<TrialRecord, SessionError> {
    let mut session = TrialSession::new(identity, config.clone(), staircase_config.clone())?;
    let mut quiet_since = 0.0;
    while session.is_running() {
        let onset = session.draw_next_onset(rng);
        let cue = StimulusCue {
            stimulus_index: session.rows().len(),
            level: session.staircase().current_level(),
            onset,
            response_window: config.response_window,
            quiet_since,
        };
        let mut times = responder.respond(&cue, rng)?;
        times.sort_by(f64::total_cmp);
        let split = times.partition_point(|&t| to_millis(t) < onset);
        for &t in &times[..split] {
            clock.advance_to(t);
            session.respond(t)?;
        }
        clock.advance_to(onset);
        let pending = session.present(onset)?;
        for &t in &times[split..] {
            clock.advance_to(t);
            if session.is_running() {
                session.respond(t)?;
            }
        }
        clock.advance_to(pending.deadline);
        session.close_window()?;
        quiet_since = pending.deadline;
    }
    Ok(session.record())
}

impl TrialRecord {
    /// Feeds the recorded answers through a fresh staircase.
    pub fn replay(&self, config: &StaircaseConfig) -> Result<StaircaseState, StaircaseError> {
        staircase::replay(config.clone(), self.rows.iter().map(|r| r.detected))
    }

    pub fn write_csv(&self, out: &mut impl Write) -> io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for row in &self.rows {
            let latency = row.response_latency.map(|l| format!("{l:.3}")).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{:.3},{:.2},{},{},{}",
                self.participant_id,
                self.site,
                self.rep,
                row.stimulus_index,
                row.onset_s,
                row.level,
                u8::from(row.detected),
                u8::from(row.reversal),
                latency
            )?;
        }
        Ok(())
    }

    pub fn to_csv_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_csv(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    /// Parses a trial CSV and rebuilds the threshold by replaying the
    /// staircase. The false-positive count is not part of the per-stimulus
    /// schema and comes back as zero.
    pub fn read_csv(input: impl BufRead, staircase_config: &StaircaseConfig) -> Result<Self, SessionError> {
        let mut lines = input.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header != CSV_HEADER {
            return Err(SessionError::Csv { line: 1, message: format!("expected header `{CSV_HEADER}`") });
        }
        let mut identity: Option<TrialIdentity> = None;
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let line = line?;
            let err = |message: String| SessionError::Csv { line: line_no, message };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 9 {
                return Err(err(format!("expected 9 fields, found {}", fields.len())));
            }
            let site: BodySite = fields[1].parse().map_err(|e: crate::site::UnknownSite| err(e.to_string()))?;
            let rep: usize = fields[2].parse().map_err(|_| err(format!("bad rep `{}`", fields[2])))?;
            let row_identity = TrialIdentity::new(fields[0], site, rep).map_err(|e| err(e.to_string()))?;
            match &identity {
                None => identity = Some(row_identity),
                Some(id) if *id != row_identity => return Err(err("rows from more than one trial".into())),
                Some(_) => {}
            }
            let number = |idx: usize, name: &str| -> Result<f64, SessionError> {
                fields[idx].parse::<f64>().map_err(|_| err(format!("bad {name} `{}`", fields[idx])))
            };
            let flag = |idx: usize, name: &str| match fields[idx] {
                "1" => Ok(true),
                "0" => Ok(false),
                other => Err(err(format!("bad {name} `{other}`"))),
            };
            rows.push(TrialRow {
                stimulus_index: fields[3].parse().map_err(|_| err(format!("bad stimulus_index `{}`", fields[3])))?,
                onset_s: number(4, "onset_s")?,
                level: number(5, "haptic_intensity")?,
                detected: flag(6, "detected")?,
                reversal: flag(7, "reversal")?,
                response_latency: if fields[8].is_empty() { None } else { Some(number(8, "latency_s")?) },
            });
        }
        let identity = identity.ok_or(SessionError::Csv { line: 2, message: "no stimulus rows".into() })?;
        let mut record = TrialRecord {
            participant_id: identity.participant_id,
            site: identity.site,
            rep: identity.rep,
            rows,
            threshold: None,
            false_positive_count: 0,
        };
        let state = record.replay(staircase_config)?;
        for (i, (row, presented)) in record.rows.iter().zip(state.history()).enumerate() {
            if (row.level - presented.level).abs() > 1e-9 {
                return Err(SessionError::Csv {
                    line: i + 2,
                    message: format!("level {} disagrees with staircase replay ({})", row.level, presented.level),
                });
            }
        }
        let flagged: Vec<usize> = record.rows.iter().enumerate().filter(|(_, r)| r.reversal).map(|(i, _)| i).collect();
        let replayed: Vec<usize> = state.reversals().iter().map(|r| r.triggering_index).collect();
        if flagged != replayed {
            return Err(SessionError::Csv { line: 2, message: "reversal flags disagree with staircase replay".into() });
        }
        record.threshold = state.compute_threshold().ok();
        Ok(record)
    }
}

pub fn export_trial_csv(record: &TrialRecord) -> Vec<u8> {
    record.to_csv_bytes()
}
