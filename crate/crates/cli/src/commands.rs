use std::fs;
use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use percept_core::observer::ObserverModel;
use percept_core::session::{run_trial, LatencyModel, SessionConfig, SimulatedResponder, TrialIdentity, TrialSession, VirtualClock};
use percept_core::staircase::StaircaseConfig;
use percept_core::study::{
    analyze_study, read_measurements, simulate_study, write_measurements, AnalysisConfig, CohortSpec, ExclusionRule, StudyError,
    StudyReport,
};
use percept_core::BodySite;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::service::{read_event_log, router, ServiceOptions, ServiceState, SystemClock};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or unreadable inputs; exit code 2.
    #[error("{0}")]
    Usage(String),
    /// Anything that failed after the inputs were accepted; exit code 1.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 2,
            Self::Runtime(_) => 1,
        }
    }
}

fn usage(flag: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{flag}: {e}"))
}

fn runtime(context: impl std::fmt::Display, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{context}: {e}"))
}

#[derive(Debug, Parser)]
#[command(name = "percept", version, about = "Vibrotactile threshold exams: simulation, virtual studies and a live session service")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run seeded staircase trials against a simulated observer.
    Simulate(SimulateArgs),
    /// Run the virtual three-modality study and write its report.
    Study(StudyArgs),
    /// Rebuild a study report from a measurement CSV.
    Analyze(AnalyzeArgs),
    /// Serve the session API (and optionally the exam client).
    Serve(ServeArgs),
    /// Convert a session event log into a trial CSV.
    Export(ExportArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Observer parameter file (JSON).
    #[arg(long)]
    pub observer: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    #[arg(long, env = "PERCEPT_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "SIM")]
    pub participant: String,
    #[arg(long, default_value_t = BodySite::H1)]
    pub site: BodySite,
    /// Session overrides (JSON); defaults apply to missing fields.
    #[arg(long)]
    pub session_config: Option<PathBuf>,
    /// Staircase overrides (JSON).
    #[arg(long)]
    pub staircase_config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    /// Cohort spec (JSON); the bundled calibrated spec when omitted.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Overrides the spec's seed.
    #[arg(long, env = "PERCEPT_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Largest tolerated sham-touch count per clinical exam.
    #[arg(long, default_value_t = 3)]
    pub max_false_positives: usize,
    /// Keep participants whose fork exam used different equipment.
    #[arg(long)]
    pub keep_equipment_change: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub measurements: PathBuf,
    /// Write report.json and report.txt here instead of printing.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print JSON instead of the text tables.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
    /// Directory of built client assets.
    #[arg(long = "static")]
    pub static_dir: Option<PathBuf>,
    /// Append-only event logs, one file per session; sessions found here
    /// are restored at start-up.
    #[arg(long)]
    pub event_log: Option<PathBuf>,
    /// Reject responses outside any open window with 409.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Event log written by `serve --event-log`.
    #[arg(long)]
    pub events: PathBuf,
    /// Destination CSV; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => simulate(args, stdout),
        Command::Study(args) => study(args, stdout),
        Command::Analyze(args) => analyze(args, stdout),
        Command::Serve(args) => serve(args, stdout),
        Command::Export(args) => export(args, stdout),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(flag: &str, path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| usage(flag, format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(flag, format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| runtime(path.display(), e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| runtime(path.display(), e))
}

fn pretty_json(value: &impl Serialize) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
    bytes.push(b'\n');
    bytes
}

#[derive(Debug, Serialize)]
struct SimulationSummary {
    trials: usize,
    seed: u64,
    observer: ObserverModel,
    /// Mean over trials with a finite threshold; `null` when there are none.
    mean_threshold: Option<f64>,
    nan_trials: usize,
    false_positives: usize,
    thresholds: Vec<Option<f64>>,
}

fn simulate(args: SimulateArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    if args.trials == 0 {
        return Err(usage("--trials", "must be at least 1"));
    }
    let observer = ObserverModel::load(&args.observer).map_err(|e| usage("--observer", format!("{}: {e}", args.observer.display())))?;
    let session: SessionConfig = match &args.session_config {
        Some(p) => read_json("--session-config", p)?,
        None => SessionConfig::default(),
    };
    let staircase: StaircaseConfig = match &args.staircase_config {
        Some(p) => read_json("--staircase-config", p)?,
        None => StaircaseConfig::default(),
    };
    session.validate().map_err(|e| usage("--session-config", e))?;
    staircase.validate().map_err(|e| usage("--staircase-config", e))?;
    TrialIdentity::new(args.participant.clone(), args.site, 0).map_err(|e| usage("--participant", e))?;

    create_dir(&args.out)?;
    let width = args.trials.to_string().len().max(4);
    let mut thresholds = Vec::with_capacity(args.trials);
    let mut false_positives = 0;
    for rep in 0..args.trials {
        // one stream per trial, so a longer run extends a shorter one
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        rng.set_stream(rep as u64);
        let mut responder = SimulatedResponder::new(observer, LatencyModel::default());
        let identity = TrialIdentity::new(args.participant.clone(), args.site, rep).map_err(|e| usage("--participant", e))?;
        let record = run_trial(identity, &session, &staircase, &mut responder, &mut VirtualClock::new(), &mut rng)
            .map_err(|e| runtime(format!("trial {}", rep + 1), e))?;
        write_file(&args.out.join(format!("trial_{:0width$}.csv", rep + 1)), &record.to_csv_bytes())?;
        false_positives += record.false_positive_count;
        thresholds.push(record.threshold.map(|t| t.value).filter(|v| !v.is_nan()));
    }
    let finite: Vec<f64> = thresholds.iter().flatten().copied().collect();
    let summary = SimulationSummary {
        trials: args.trials,
        seed: args.seed,
        observer,
        mean_threshold: (!finite.is_empty()).then(|| finite.iter().sum::<f64>() / finite.len() as f64),
        nan_trials: args.trials - finite.len(),
        false_positives,
        thresholds,
    };
    write_file(&args.out.join("summary.json"), &pretty_json(&summary))?;
    let mean = summary.mean_threshold.map_or("NaN".to_string(), |m| format!("{m:.4}"));
    writeln!(stdout, "{} trials, mean threshold {mean}, {} NaN", summary.trials, summary.nan_trials).map_err(|e| runtime("stdout", e))?;
    Ok(())
}

fn spec_error(path: &str, e: StudyError) -> CliError {
    match e {
        StudyError::SpecParse(e) => usage("--spec", format!("{path}: line {} column {}: {e}", e.line(), e.column())),
        StudyError::Io(e) => usage("--spec", format!("{path}: {e}")),
        other => usage("--spec", format!("{path}: {other}")),
    }
}

fn write_report(dir: &Path, report: &StudyReport) -> Result<(), CliError> {
    write_file(&dir.join("report.json"), report.to_json().as_bytes())?;
    write_file(&dir.join("report.txt"), report.to_text().as_bytes())
}

fn study(args: StudyArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let spec = match &args.spec {
        Some(path) => CohortSpec::load(path).map_err(|e| spec_error(&path.display().to_string(), e))?,
        None => CohortSpec::calibrated(),
    };
    let seed = args.seed.unwrap_or(spec.seed);
    let rule = ExclusionRule { max_false_positives: Some(args.max_false_positives), exclude_equipment_change: !args.keep_equipment_change };
    let outcome = simulate_study(&spec, seed, &rule, &AnalysisConfig::default()).map_err(|e| runtime("study", e))?;
    create_dir(&args.out)?;
    let mut csv = Vec::new();
    write_measurements(&outcome.exclusions.rows, &mut csv).map_err(|e| runtime("measurements", e))?;
    write_file(&args.out.join("measurements.csv"), &csv)?;
    write_file(&args.out.join("participants.json"), &pretty_json(&outcome.run.logs))?;
    write_report(&args.out, &outcome.report)?;
    let r = &outcome.report;
    writeln!(
        stdout,
        "seed {seed}: {} participants tested, {} retained; wrote {}",
        r.participants_tested,
        r.participants_retained,
        args.out.display()
    )
    .map_err(|e| runtime("stdout", e))?;
    Ok(())
}

fn analyze(args: AnalyzeArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let file = fs::File::open(&args.measurements).map_err(|e| usage("--measurements", format!("{}: {e}", args.measurements.display())))?;
    let rows = read_measurements(io::BufReader::new(file))
        .map_err(|e| usage("--measurements", format!("{}: {e}", args.measurements.display())))?;
    let report = analyze_study(&rows, &AnalysisConfig::default()).map_err(|e| runtime("analyze", e))?;
    match &args.out {
        Some(dir) => {
            create_dir(dir)?;
            write_report(dir, &report)
        }
        None => {
            let text = if args.json { report.to_json() } else { report.to_text() };
            stdout.write_all(text.as_bytes()).map_err(|e| runtime("stdout", e))
        }
    }
}

fn serve(args: ServeArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    if let Some(dir) = &args.static_dir {
        if !dir.is_dir() {
            return Err(usage("--static", format!("{} is not a directory", dir.display())));
        }
    }
    let options = ServiceOptions { strict: args.strict, event_log_dir: args.event_log.clone(), static_dir: args.static_dir.clone() };
    let state = ServiceState::new(Arc::new(SystemClock), options).map_err(|e| usage("--event-log", e))?;
    let restored = state.session_count();
    let addr = SocketAddr::new(args.host, args.port);
    let runtime_ = tokio::runtime::Runtime::new().map_err(|e| runtime("tokio", e))?;
    runtime_.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| runtime(addr, e))?;
        let local = listener.local_addr().map_err(|e| runtime(addr, e))?;
        writeln!(stdout, "listening on http://{local} ({restored} sessions restored)").map_err(|e| runtime("stdout", e))?;
        stdout.flush().map_err(|e| runtime("stdout", e))?;
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| runtime("server", e))
    })
}

fn export(args: ExportArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let (header, events) = read_event_log(&args.events).map_err(|e| usage("--events", e))?;
    let identity = header.identity().map_err(|e| usage("--events", e))?;
    let session = TrialSession::from_events(identity, header.session_config, header.staircase_config, &events)
        .map_err(|e| usage("--events", format!("{}: {e}", args.events.display())))?;
    let bytes = session.record().to_csv_bytes();
    match &args.out {
        Some(path) => write_file(path, &bytes),
        None => stdout.write_all(&bytes).map_err(|e| runtime("stdout", e)),
    }
}
