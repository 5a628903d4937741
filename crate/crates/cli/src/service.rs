//! HTTP session service.
//!
//! Each session wraps one [`TrialSession`]; handlers only translate requests
//! into engine calls, so a transcript of onsets and responses produces the
//! same [`TrialRecord`] as driving the engine directly. Times are seconds
//! since the session was created, read from an injectable [`ServiceClock`].

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use percept_core::session::{
    schedule_next_stimulus, PendingStimulus, ResponseClass, SessionConfig, SessionError, SessionEvent, TrialIdentity, TrialRecord,
    TrialSession,
};
use percept_core::staircase::{StaircaseConfig, StaircaseStatus, TrialThreshold};
use percept_core::BodySite;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;

pub trait ServiceClock: Send + Sync {
    /// Seconds on a scale that persists across restarts, so that event logs
    /// can record when a session started.
    fn now(&self) -> f64;
}

/// Seconds since the Unix epoch.
#[derive(Default)]
pub struct SystemClock;

impl ServiceClock for SystemClock {
    fn now(&self) -> f64 {
        SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
    }
}

/// Clock that only moves when told to; for tests and scripted clients.
#[derive(Default)]
pub struct ManualClock(Mutex<f64>);

impl ManualClock {
    pub fn set(&self, seconds: f64) {
        *self.0.lock().unwrap() = seconds;
    }

    pub fn advance(&self, seconds: f64) {
        *self.0.lock().unwrap() += seconds;
    }
}

impl ServiceClock for ManualClock {
    fn now(&self) -> f64 {
        *self.0.lock().unwrap()
    }
}

#[derive(Debug, Clone, Default)]
pub struct ServiceOptions {
    /// Answer 409 to responses that land outside every open window.
    pub strict: bool,
    /// Directory for append-only per-session event logs.
    pub event_log_dir: Option<PathBuf>,
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimingMode {
    /// Response time is when the server received the request.
    #[default]
    Server,
    /// Response time is the client's own timestamp, shifted by the offset
    /// taken at creation. Less trustworthy: the server cannot check it.
    Client,
}

/// First line of a session's event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub session_id: String,
    pub participant_id: String,
    pub site: BodySite,
    pub rep: usize,
    pub seed: u64,
    pub timing: TimingMode,
    /// Service-clock reading at session time zero.
    pub created_at: f64,
    /// Added to client timestamps to get session time.
    pub client_offset: f64,
    pub session_config: SessionConfig,
    pub staircase_config: StaircaseConfig,
}

impl SessionHeader {
    pub fn identity(&self) -> Result<TrialIdentity, SessionError> {
        TrialIdentity::new(self.participant_id.clone(), self.site, self.rep)
    }
}

/// Reads an event log written by the service.
pub fn read_event_log(path: &Path) -> io::Result<(SessionHeader, Vec<SessionEvent>)> {
    let invalid = |line: usize, e: serde_json::Error| io::Error::new(io::ErrorKind::InvalidData, format!("{}:{line}: {e}", path.display()));
    let mut lines = BufReader::new(File::open(path)?).lines();
    let first =
        lines.next().ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, format!("{}: empty event log", path.display())))??;
    let header: SessionHeader = serde_json::from_str(&first).map_err(|e| invalid(1, e))?;
    let mut events = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if !line.trim().is_empty() {
            events.push(serde_json::from_str(&line).map_err(|e| invalid(i + 2, e))?);
        }
    }
    Ok((header, events))
}

struct LiveSession {
    header: SessionHeader,
    session: TrialSession,
    log: Option<File>,
    logged: usize,
}

impl LiveSession {
    fn session_time(&self, clock: f64) -> f64 {
        clock - self.header.created_at
    }

    fn onset_rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.header.seed);
        rng.set_stream(self.session.rows().len() as u64);
        rng
    }

    fn flush_log(&mut self) -> io::Result<()> {
        let Some(file) = self.log.as_mut() else {
            return Ok(());
        };
        for event in &self.session.events()[self.logged..] {
            serde_json::to_writer(&mut *file, event)?;
            file.write_all(b"\n")?;
        }
        file.flush()?;
        self.logged = self.session.events().len();
        Ok(())
    }
}

pub struct ServiceState {
    clock: Arc<dyn ServiceClock>,
    options: ServiceOptions,
    sessions: RwLock<HashMap<String, Arc<Mutex<LiveSession>>>>,
}

impl ServiceState {
    /// Builds the state, restoring any sessions found in the event-log
    /// directory.
    pub fn new(clock: Arc<dyn ServiceClock>, options: ServiceOptions) -> io::Result<Arc<Self>> {
        let mut sessions = HashMap::new();
        if let Some(dir) = &options.event_log_dir {
            fs::create_dir_all(dir)?;
            let mut paths: Vec<PathBuf> = fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<io::Result<_>>()?;
            paths.retain(|p| p.extension().is_some_and(|x| x == "jsonl"));
            paths.sort();
            for path in paths {
                let (header, events) = read_event_log(&path)?;
                let session = TrialSession::from_events(
                    header.identity().map_err(to_io)?,
                    header.session_config.clone(),
                    header.staircase_config.clone(),
                    &events,
                )
                .map_err(to_io)?;
                let live = LiveSession {
                    logged: session.events().len(),
                    log: Some(OpenOptions::new().append(true).open(&path)?),
                    header: header.clone(),
                    session,
                };
                sessions.insert(header.session_id, Arc::new(Mutex::new(live)));
            }
        }
        Ok(Arc::new(Self { clock, options, sessions: RwLock::new(sessions) }))
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().unwrap().len()
    }

    fn get(&self, id: &str) -> Result<Arc<Mutex<LiveSession>>, ApiError> {
        self.sessions.read().unwrap().get(id).cloned().ok_or(ApiError::UnknownSession)
    }
}

fn to_io(e: SessionError) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, e.to_string())
}

pub fn router(state: Arc<ServiceState>) -> Router {
    let static_dir = state.options.static_dir.clone();
    let api = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/next", get(next_stimulus))
        .route("/sessions/{id}/response", post(post_response))
        .route("/sessions/{id}/trace", get(trace))
        .route("/sessions/{id}/result", get(result))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

#[derive(Debug)]
enum ApiError {
    UnknownSession,
    Malformed(String),
    Conflict(serde_json::Value),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            Self::UnknownSession => (StatusCode::NOT_FOUND, json!({ "error": "unknown session" })),
            Self::Malformed(m) => (StatusCode::UNPROCESSABLE_ENTITY, json!({ "error": m })),
            Self::Conflict(body) => (StatusCode::CONFLICT, body),
            Self::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": m })),
        };
        (status, Json(body)).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Finished => Self::Conflict(json!({ "error": "session is finished" })),
            other => Self::Internal(other.to_string()),
        }
    }
}

impl From<io::Error> for ApiError {
    fn from(e: io::Error) -> Self {
        Self::Internal(format!("event log: {e}"))
    }
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload.map(|Json(v)| v).map_err(|e| ApiError::Malformed(e.body_text()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSessionRequest {
    pub participant_id: String,
    pub site: BodySite,
    #[serde(default)]
    pub rep: usize,
    pub seed: Option<u64>,
    pub session_config: Option<SessionConfig>,
    pub staircase_config: Option<StaircaseConfig>,
    #[serde(default)]
    pub timing: TimingMode,
    /// Client clock reading at creation; required for client timing.
    pub client_clock: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreateSessionResponse {
    pub session_id: String,
    pub participant_id: String,
    pub site: BodySite,
    pub rep: usize,
    pub timing: TimingMode,
    pub status: StaircaseStatus,
}

async fn create_session(
    State(state): State<Arc<ServiceState>>,
    payload: Result<Json<CreateSessionRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<CreateSessionResponse>), ApiError> {
    let req = body(payload)?;
    let client_offset = match (req.timing, req.client_clock) {
        (TimingMode::Client, Some(c)) if c.is_finite() => -c,
        (TimingMode::Client, _) => return Err(ApiError::Malformed("client timing needs a finite `client_clock`".into())),
        (TimingMode::Server, _) => 0.0,
    };
    let header = SessionHeader {
        session_id: uuid::Uuid::new_v4().to_string(),
        participant_id: req.participant_id,
        site: req.site,
        rep: req.rep,
        seed: req.seed.unwrap_or_else(rand::random),
        timing: req.timing,
        created_at: state.clock.now(),
        client_offset,
        session_config: req.session_config.unwrap_or_default(),
        staircase_config: req.staircase_config.unwrap_or_default(),
    };
    let session = TrialSession::new(
        header.identity().map_err(|e| ApiError::Malformed(e.to_string()))?,
        header.session_config.clone(),
        header.staircase_config.clone(),
    )
    .map_err(|e| ApiError::Malformed(e.to_string()))?;
    let log = match &state.options.event_log_dir {
        Some(dir) => {
            let mut file = File::create(dir.join(format!("{}.jsonl", header.session_id)))?;
            serde_json::to_writer(&mut file, &header).map_err(io::Error::from)?;
            file.write_all(b"\n")?;
            Some(file)
        }
        None => None,
    };
    let response = CreateSessionResponse {
        session_id: header.session_id.clone(),
        participant_id: header.participant_id.clone(),
        site: header.site,
        rep: header.rep,
        timing: header.timing,
        status: session.status(),
    };
    let live = LiveSession { header, session, log, logged: 0 };
    state.sessions.write().unwrap().insert(response.session_id.clone(), Arc::new(Mutex::new(live)));
    Ok((StatusCode::CREATED, Json(response)))
}

#[derive(Debug, Deserialize)]
pub struct TimestampQuery {
    pub client_timestamp: Option<f64>,
}

/// Session time of a request: the client's timestamp in client mode when
/// one is given, otherwise server receipt time.
fn request_time(state: &ServiceState, live: &LiveSession, client_timestamp: Option<f64>) -> Result<f64, ApiError> {
    match (live.header.timing, client_timestamp) {
        (TimingMode::Client, Some(t)) if t.is_finite() => Ok(t + live.header.client_offset),
        (TimingMode::Client, Some(_)) => Err(ApiError::Malformed("`client_timestamp` must be finite".into())),
        _ => Ok(live.session_time(state.clock.now())),
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NextResponse {
    Stimulus { stimulus_index: usize, level: f64, onset: f64, deadline: f64, now: f64 },
    Finished { status: StaircaseStatus, threshold: TrialThreshold },
}

async fn next_stimulus(
    State(state): State<Arc<ServiceState>>,
    UrlPath(id): UrlPath<String>,
    query: Result<Query<TimestampQuery>, QueryRejection>,
) -> Result<Json<NextResponse>, ApiError> {
    let Query(query) = query.map_err(|e| ApiError::Malformed(e.body_text()))?;
    let live = state.get(&id)?;
    let mut live = live.lock().unwrap();
    let now = request_time(&state, &live, query.client_timestamp)?;
    live.session.advance(now)?;
    let response = if live.session.is_running() {
        let pending = match live.session.pending().copied() {
            Some(p) => p,
            None => {
                let previous = live.session.rows().last().map_or(0.0, |r| r.onset_s);
                let mut onset = schedule_next_stimulus(live.session.config(), previous, &mut live.onset_rng());
                if onset < now {
                    // polled too late for the drawn onset: keep the gap, start it now
                    onset = now + (onset - previous);
                }
                live.session.present(onset)?
            }
        };
        stimulus_response(pending, now)
    } else {
        finished(&live.session)?
    };
    live.flush_log()?;
    Ok(Json(response))
}

fn stimulus_response(p: PendingStimulus, now: f64) -> NextResponse {
    NextResponse::Stimulus { stimulus_index: p.stimulus_index, level: p.level, onset: p.onset, deadline: p.deadline, now }
}

fn finished(session: &TrialSession) -> Result<NextResponse, ApiError> {
    let threshold = session.threshold().ok_or_else(|| ApiError::Internal("finished session without a threshold".into()))?;
    Ok(NextResponse::Finished { status: session.status(), threshold })
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseRequest {
    /// Used only by client-timed sessions.
    pub client_timestamp: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ResponseResult {
    pub classification: ResponseClass,
    /// Session time the response was recorded at.
    pub time: f64,
    pub stimulus_index: Option<usize>,
}

async fn post_response(
    State(state): State<Arc<ServiceState>>,
    UrlPath(id): UrlPath<String>,
    payload: Result<Json<ResponseRequest>, JsonRejection>,
) -> Result<Json<ResponseResult>, ApiError> {
    let req = body(payload)?;
    let live = state.get(&id)?;
    let mut live = live.lock().unwrap();
    let time = request_time(&state, &live, req.client_timestamp)?;
    let classification = live.session.respond(time)?;
    let stimulus_index = match classification {
        ResponseClass::TruePositive => live.session.pending().map(|p| p.stimulus_index),
        _ => None,
    };
    live.flush_log()?;
    let result = ResponseResult { classification, time: live.session.events().last().map_or(time, |e| e.timestamp), stimulus_index };
    if state.options.strict && classification != ResponseClass::TruePositive {
        return Err(ApiError::Conflict(json!({
            "error": "response outside any open window",
            "classification": result.classification,
            "time": result.time,
        })));
    }
    Ok(Json(result))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TraceResponse {
    #[serde(flatten)]
    pub record: TrialRecord,
    pub status: StaircaseStatus,
    pub reversal_count: usize,
    pub pending: Option<PendingStimulus>,
}

/// Closes an expired window on read so traces never show stale state.
/// Client-timed sessions only move on client timestamps.
fn settle(state: &ServiceState, live: &mut LiveSession) -> Result<(), ApiError> {
    if live.header.timing == TimingMode::Server {
        let now = live.session_time(state.clock.now());
        live.session.advance(now)?;
        live.flush_log()?;
    }
    Ok(())
}

async fn trace(State(state): State<Arc<ServiceState>>, UrlPath(id): UrlPath<String>) -> Result<Json<TraceResponse>, ApiError> {
    let live = state.get(&id)?;
    let mut live = live.lock().unwrap();
    settle(&state, &mut live)?;
    let record = live.session.record();
    Ok(Json(TraceResponse {
        reversal_count: record.rows.iter().filter(|r| r.reversal).count(),
        status: live.session.status(),
        pending: live.session.pending().copied(),
        record,
    }))
}

async fn result(State(state): State<Arc<ServiceState>>, UrlPath(id): UrlPath<String>) -> Result<Json<TrialThreshold>, ApiError> {
    let live = state.get(&id)?;
    let mut live = live.lock().unwrap();
    settle(&state, &mut live)?;
    match live.session.threshold() {
        Some(t) => Ok(Json(t)),
        None => Err(ApiError::Conflict(json!({ "error": "session still running" }))),
    }
}
