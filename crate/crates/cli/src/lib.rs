//! `prnu` command-line tool.
//!
//! Machine-readable results go to stdout as JSON, diagnostics to stderr.
//! Exit codes: 0 success or accept, 1 clean non-accept, 2 error, 3 when
//! `match` is given fingerprints of different sizes.

use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use prnu_authd::http::{serve, HttpOptions};
use prnu_authd::{Decision, Gateway, ServiceConfig, CONFIG_ENV};
use prnu_core::fingerprint::{read_prnufp, write_prnufp};
use prnu_core::sensor_sim::DatasetFormat;
use prnu_core::{fingerprint_quality, match_fingerprints, Estimator, FingerprintOptions, SceneSchedule};
use serde_json::{json, Value};

pub mod error;
pub mod pipeline;
pub mod simulate;

pub use error::CliError;
use pipeline::{fingerprint_path, load_frames, Pick};
use simulate::{run_experiment, write_report, SimulateParams, DEFAULT_SEED};

/// Environment variable read when `--password-stdin` is not given.
pub const PASSWORD_ENV: &str = "PRNU_PASSWORD";

#[derive(Debug, Parser)]
#[command(name = "prnu", version, about = "Camera sensor fingerprints and fingerprint-based meeting admission")]
pub struct Cli {
    /// JSON service/pipeline configuration.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Master seed for the simulator.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for frame processing.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output file (`extract`) or directory (`simulate`); for other commands
    /// the JSON result is written here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EstimatorArg {
    Average,
    MaximumLikelihood,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SceneArg {
    Smooth,
    Flat,
    Ramp,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Y4m,
    Pgm,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate a fingerprint from a Y4M file or PGM directory.
    Extract {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        select: Pick,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long, value_enum, default_value = "average")]
        estimator: EstimatorArg,
        /// Skip row/column mean removal.
        #[arg(long)]
        no_postprocess: bool,
    },
    /// Compare two PRNUFP1 fingerprints.
    Match { known: PathBuf, query: PathBuf },
    /// Register a participant. The password comes from stdin or PRNU_PASSWORD.
    Register {
        user_id: String,
        frames: PathBuf,
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        password_stdin: bool,
    },
    /// Attempt admission with a participant's first frames.
    Join {
        user_id: String,
        #[arg(required_unless_present = "fingerprint")]
        frames: Option<PathBuf>,
        /// A PRNUFP1 file computed by the participant instead of frames.
        #[arg(long, conflicts_with = "frames")]
        fingerprint: Option<PathBuf>,
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Answer a password challenge issued by `join`.
    Password {
        challenge_token: String,
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        password_stdin: bool,
    },
    /// Run the HTTP admission service until interrupted.
    Serve {
        #[arg(long)]
        listen: Option<String>,
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Run the synthetic multi-camera experiment.
    Simulate {
        #[arg(long, default_value_t = 10)]
        cameras: usize,
        #[arg(long, default_value_t = 128)]
        width: usize,
        #[arg(long, default_value_t = 128)]
        height: usize,
        #[arg(long, default_value_t = 0.02)]
        k_strength: f64,
        #[arg(long, default_value_t = 2.0)]
        noise_sigma: f64,
        #[arg(long, default_value_t = 60)]
        reg_frames: usize,
        #[arg(long, default_value_t = 100)]
        query_frames: usize,
        #[arg(long, value_enum, default_value = "smooth")]
        scene: SceneArg,
        /// Low-pass cutoff of smooth scenes, in cycles per pixel.
        #[arg(long, default_value_t = 0.05)]
        cutoff: f64,
        /// Level of flat scenes.
        #[arg(long, default_value_t = 128.0)]
        level: f64,
        #[arg(long, value_enum, default_value = "y4m")]
        format: FormatArg,
    },
}

/// Parses `args` and runs the command.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return report_error(&CliError::new("usage", e.to_string()));
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => report_error(&e),
    }
}

fn report_error(e: &CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code)
}

fn init_logging(serving: bool) {
    let default = if serving { "info" } else { "warn" };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

fn load_config(path: Option<&Path>) -> Result<ServiceConfig, CliError> {
    match path {
        Some(p) => ServiceConfig::load(p).map_err(|e| CliError::new("config", e.to_string())),
        None => Ok(ServiceConfig::default()),
    }
}

fn emit(output: Option<&Path>, value: &Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("json serializes");
    match output {
        Some(path) => std::fs::write(path, text + "\n")
            .map_err(|e| CliError::new("output", format!("{}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}")?;
            out.flush()?;
            Ok(())
        }
    }
}

fn read_password(from_stdin: bool) -> Result<String, CliError> {
    let password = if from_stdin {
        let mut line = String::new();
        std::io::stdin().lock().read_line(&mut line)?;
        line.trim_end_matches(['\r', '\n']).to_string()
    } else {
        std::env::var(PASSWORD_ENV).map_err(|_| {
            CliError::new("missing_password", format!("pass --password-stdin or set {PASSWORD_ENV}"))
        })?
    };
    if password.is_empty() {
        return Err(CliError::new("missing_password", "password is empty"));
    }
    Ok(password)
}

fn open_gateway(cfg: &ServiceConfig, store: Option<&Path>) -> Result<Gateway, CliError> {
    let store = store.unwrap_or(&cfg.store_path);
    Ok(Gateway::open(
        cfg.policy.clone(),
        cfg.denoiser.clone(),
        store,
        cfg.audit_path.as_deref(),
    )?)
}

pub fn run(cli: Cli) -> Result<u8, CliError> {
    init_logging(matches!(cli.command, Command::Serve { .. }));
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::new("usage", "--threads must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::new("internal", e.to_string()))?;
    }
    let cfg = load_config(cli.config.as_deref())?;
    let output = cli.output.as_deref();
    match cli.command {
        Command::Extract { input, select, count, estimator, no_postprocess } => {
            let out = output.ok_or_else(|| CliError::new("usage", "extract needs --output FILE.prnufp"))?;
            let options = FingerprintOptions {
                estimator: match estimator {
                    EstimatorArg::Average => Estimator::Average,
                    EstimatorArg::MaximumLikelihood => Estimator::MaximumLikelihood,
                },
                postprocess: !no_postprocess,
            };
            let fp = fingerprint_path(&input, select, count, &cfg.denoiser, options)?.to_storage_precision();
            write_prnufp(&fp, out)
                .map_err(|e| CliError::new("output", format!("{}: {e}", out.display())))?;
            emit(None, &json!({
                "output": out,
                "width": fp.width(),
                "height": fp.height(),
                "frames_used": fp.frames_used(),
                "postprocessed": fp.postprocessed(),
                "quality": fingerprint_quality(&fp),
            }))?;
            Ok(0)
        }
        Command::Match { known, query } => {
            let a = read_prnufp(&known)?;
            let b = read_prnufp(&query)?;
            let report = match_fingerprints(&a, &b, &cfg.policy.matcher_config)?;
            emit(output, &serde_json::to_value(report).expect("report serializes"))?;
            Ok(if report.accepted { 0 } else { 1 })
        }
        Command::Register { user_id, frames, store, password_stdin } => {
            let password = read_password(password_stdin)?;
            let seq = load_frames(&frames, None)?;
            let gw = open_gateway(&cfg, store.as_deref())?;
            let rec = gw.register_user(&user_id, &seq, &password)?;
            gw.flush()?;
            emit(output, &json!({
                "user_id": rec.user_id,
                "registered_at": rec.registered_at,
                "frames_used": rec.fingerprint.frames_used(),
                "width": rec.fingerprint.width(),
                "height": rec.fingerprint.height(),
            }))?;
            Ok(0)
        }
        Command::Join { user_id, frames, fingerprint, store } => {
            let gw = open_gateway(&cfg, store.as_deref())?;
            let result = match (frames, fingerprint) {
                (_, Some(fp)) => gw.request_join_fingerprint(&user_id, &read_prnufp(&fp)?)?,
                (Some(frames), None) => {
                    let seq = load_frames(&frames, Some(cfg.policy.query_frame_count))?;
                    gw.request_join(&user_id, &seq)?
                }
                (None, None) => return Err(CliError::new("usage", "join needs frames or --fingerprint")),
            };
            gw.flush()?;
            emit(output, &json!({
                "decision": result.outcome.decision,
                "pce": result.outcome.pce_report.map(|p| p.pce),
                "pce_report": result.outcome.pce_report,
                "challenge_token": result.challenge_token,
                "session_id": result.outcome.session_id,
                "user_id": result.outcome.user_id,
                "reason": result.outcome.reason,
            }))?;
            Ok(if result.outcome.decision == Decision::AdmittedPrnu { 0 } else { 1 })
        }
        Command::Password { challenge_token, store, password_stdin } => {
            let password = read_password(password_stdin)?;
            let gw = open_gateway(&cfg, store.as_deref())?;
            let result = gw.submit_password(&challenge_token, &password)?;
            gw.flush()?;
            emit(output, &json!({
                "decision": result.outcome.decision,
                "attempts_remaining": result.attempts_remaining,
                "user_id": result.outcome.user_id,
                "session_id": result.outcome.session_id,
            }))?;
            Ok(if result.outcome.decision == Decision::AdmittedPassword { 0 } else { 1 })
        }
        Command::Serve { listen, store } => {
            let gw = Arc::new(open_gateway(&cfg, store.as_deref())?);
            let addr = listen.unwrap_or_else(|| cfg.listen.clone());
            let options = HttpOptions {
                max_body_bytes: cfg.max_body_bytes,
                allow_frame_paths: cfg.allow_frame_paths,
            };
            let runtime = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind(&addr)
                    .await
                    .map_err(|e| CliError::new("bind", format!("{addr}: {e}")))?;
                let local = listener.local_addr()?;
                tracing::info!(%local, "listening");
                // A single line, so supervisors can wait for readiness.
                println!("{}", json!({ "event": "listening", "addr": local.to_string() }));
                serve(gw, listener, options, shutdown_signal()).await?;
                tracing::info!("store persisted, audit log synced");
                Ok::<_, CliError>(())
            })?;
            Ok(0)
        }
        Command::Simulate {
            cameras, width, height, k_strength, noise_sigma, reg_frames, query_frames, scene, cutoff, level, format,
        } => {
            let out = output.ok_or_else(|| CliError::new("usage", "simulate needs --output DIR"))?;
            let params = SimulateParams {
                cameras,
                width,
                height,
                k_strength,
                noise_sigma,
                reg_frames,
                query_frames,
                scene: match scene {
                    SceneArg::Smooth => SceneSchedule::SmoothRandom { cutoff },
                    SceneArg::Flat => SceneSchedule::Flat { level },
                    SceneArg::Ramp => SceneSchedule::Ramp,
                },
                format: match format {
                    FormatArg::Y4m => DatasetFormat::Y4m,
                    FormatArg::Pgm => DatasetFormat::Pgm,
                },
                seed: cli.seed.unwrap_or(DEFAULT_SEED),
            };
            std::fs::create_dir_all(out)
                .map_err(|e| CliError::new("output", format!("{}: {e}", out.display())))?;
            let report = run_experiment(&params, &cfg.denoiser, &cfg.policy.matcher_config, out)?;
            write_report(&report, out)?;
            emit(None, &json!({
                "output": out,
                "tpr": report.tpr,
                "fpr": report.fpr,
                "true_positives": report.true_positives,
                "false_positives": report.false_positives,
                "cross_comparisons": report.cross_comparisons,
                "max_cross_pce": report.max_cross_pce,
                "total_seconds": report.total_seconds,
            }))?;
            Ok(0)
        }
    }
}

async fn shutdown_signal() {
    let interrupt = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let terminate = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    tokio::select! {
        _ = interrupt => {}
        _ = terminate => {}
    }
}
