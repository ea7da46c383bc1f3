//! The `ccd` command line: `eval`, `fit`, `synth` and `serve`.

use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use ccd_core::eval::{evaluate_dataset, render_text, EvalConfig};
use ccd_core::synth::{write_dataset, SyntheticSpec};
use ccd_core::{RansacConfig, DEFAULT_CUTOFF};
use clap::{Args, Parser, Subcommand};
use tokio::io::AsyncBufReadExt;

use crate::clock::{Clock, SystemClock};
use crate::http::{router, spawn_ticker, AppState};
use crate::session::{OpenStudy, SessionConfig};

#[derive(Debug, Parser)]
#[command(name = "ccd", version, about = "Femur CCD angle measurement from keypoint heatmaps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score predicted heatmaps against synthetic ground truth.
    Eval(EvalArgs),
    /// Fit centerlines and CCD angles for one study.
    Fit(FitArgs),
    /// Generate a synthetic dataset with ground truth.
    Synth(SynthArgs),
    /// Run the measurement service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, default_value_t = DEFAULT_CUTOFF)]
    pub cutoff: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Where to write the JSON report.
    #[arg(long)]
    pub report: PathBuf,
    /// Also print the tables to stdout.
    #[arg(long)]
    pub text: bool,
    /// Line profile width used to render the truth masks.
    #[arg(long, default_value_t = 3.0)]
    pub sigma: f64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    pub manifest: PathBuf,
    #[arg(long)]
    pub json: bool,
    #[arg(long, default_value_t = DEFAULT_CUTOFF)]
    pub cutoff: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub cases: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3.0)]
    pub sigma: f64,
    /// Fraction of pixels replaced by uniform high-probability noise.
    #[arg(long, default_value_t = 0.0)]
    pub outliers: f64,
    /// Amplitude of additive uniform noise.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 512)]
    pub width: usize,
    #[arg(long, default_value_t = 512)]
    pub height: usize,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
    #[arg(long)]
    pub watch_folder: Option<PathBuf>,
    #[arg(long)]
    pub save_folder: Option<PathBuf>,
    #[arg(long, default_value = ccd_core::voice::DEFAULT_ACTIVATE_WORD)]
    pub activate_word: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_CUTOFF)]
    pub cutoff: f64,
    /// Read transcriber tokens from stdin, one or more per line, into a
    /// session named `stdin`.
    #[arg(long)]
    pub stdin_tokens: bool,
}

fn check_cutoff(cutoff: f64) -> anyhow::Result<()> {
    anyhow::ensure!((0.0..1.0).contains(&cutoff), "--cutoff must be in [0, 1), got {cutoff}");
    Ok(())
}

/// Runs `ccd eval`. Returns 0, or 2 when any case failed.
pub fn run_eval(args: &EvalArgs, out: &mut dyn Write) -> anyhow::Result<u8> {
    check_cutoff(args.cutoff)?;
    let config = EvalConfig {
        cutoff: args.cutoff,
        ransac: RansacConfig::default().with_seed(args.seed),
        sigma: args.sigma,
    };
    let report = evaluate_dataset(&args.pred, &args.truth, &config)?;
    std::fs::write(&args.report, report.to_json())
        .with_context(|| format!("writing {}", args.report.display()))?;
    if args.text {
        out.write_all(render_text(&report.aggregate).as_bytes())?;
    }
    Ok(if report.aggregate.failure_count > 0 { 2 } else { 0 })
}

/// Runs `ccd fit`. Returns 0, or 2 when a side with channels failed to fit.
pub fn run_fit(args: &FitArgs, out: &mut dyn Write) -> anyhow::Result<u8> {
    check_cutoff(args.cutoff)?;
    let config = SessionConfig {
        cutoff: args.cutoff,
        ransac: RansacConfig::default().with_seed(args.seed),
        ..SessionConfig::default()
    };
    let study = OpenStudy::prepare(&args.manifest, &config)?;
    let measurable = study.study.heatmap.measurable_sides();
    if args.json {
        let doc = serde_json::json!({
            "manifest": study.manifest_path(),
            "sides": study.results,
        });
        writeln!(out, "{}", serde_json::to_string_pretty(&doc)?)?;
    } else {
        for r in &study.results {
            match (&r.measurement, &r.error) {
                (Some(m), _) => writeln!(
                    out,
                    "{:<5}  CCD {:>7.2}°{}  neck ({:.1}, {:.1})-({:.1}, {:.1})  shaft ({:.1}, {:.1})-({:.1}, {:.1})",
                    r.side.to_string(),
                    m.ccd_degrees,
                    if m.degenerate { " (parallel lines)" } else { "" },
                    m.neck_endpoints[0].0,
                    m.neck_endpoints[0].1,
                    m.neck_endpoints[1].0,
                    m.neck_endpoints[1].1,
                    m.shaft_endpoints[0].0,
                    m.shaft_endpoints[0].1,
                    m.shaft_endpoints[1].0,
                    m.shaft_endpoints[1].1,
                )?,
                (None, err) => writeln!(
                    out,
                    "{:<5}  unavailable: {}",
                    r.side.to_string(),
                    err.as_deref().unwrap_or("unknown")
                )?,
            }
        }
    }
    let failed = study
        .results
        .iter()
        .any(|r| r.measurement.is_none() && measurable.contains(&r.side));
    Ok(if failed { 2 } else { 0 })
}

pub fn run_synth(args: &SynthArgs, out: &mut dyn Write) -> anyhow::Result<u8> {
    let spec = SyntheticSpec {
        width: args.width,
        height: args.height,
        sigma: args.sigma,
        outlier_fraction: args.outliers,
        blur_noise: args.noise,
        seed: args.seed,
        cases: args.cases,
    };
    let manifests = write_dataset(&spec, &args.out)?;
    writeln!(out, "wrote {} cases to {}", manifests.len(), args.out.display())?;
    Ok(0)
}

fn folder_arg(path: &Option<PathBuf>, what: &str) -> anyhow::Result<Option<PathBuf>> {
    if let Some(p) = path {
        anyhow::ensure!(p.is_dir(), "{what} folder {} is not a directory", p.display());
    }
    Ok(path.clone())
}

pub async fn run_serve(args: ServeArgs) -> anyhow::Result<u8> {
    check_cutoff(args.cutoff)?;
    let config = SessionConfig {
        watch_folder: folder_arg(&args.watch_folder, "watch")?,
        save_folder: folder_arg(&args.save_folder, "save")?,
        cutoff: args.cutoff,
        ransac: RansacConfig::default().with_seed(args.seed),
        activate_word: args.activate_word.clone(),
    };
    let clock: Arc<dyn Clock> = Arc::new(SystemClock::default());
    let state = AppState::new(config, clock);
    let ticker = spawn_ticker(state.clone());
    if args.stdin_tokens {
        tokio::spawn(feed_stdin(state.clone()));
    }
    let addr = SocketAddr::new(args.host, args.port);
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .with_context(|| format!("binding {addr}"))?;
    tracing::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    ticker.abort();
    Ok(0)
}

/// Keyboard stand-in for a transcriber: each stdin line is sent as voice
/// tokens and the outcome printed as one JSON line.
async fn feed_stdin(state: AppState) {
    let (_, session) = state.insert_session("stdin".into());
    let mut lines = tokio::io::BufReader::new(tokio::io::stdin()).lines();
    while let Ok(Some(line)) = lines.next_line().await {
        let session = session.clone();
        let clock = state.clock.clone();
        let outcome = tokio::task::spawn_blocking(move || {
            session.lock().process_voice_token(&line, clock.now(), clock.wall())
        })
        .await;
        match outcome {
            Ok(o) => println!("{}", serde_json::to_string(&o).expect("serializable")),
            Err(e) => tracing::error!("voice task failed: {e}"),
        }
    }
}

fn report(result: anyhow::Result<u8>) -> ExitCode {
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

pub fn main_with(cli: Cli) -> ExitCode {
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Eval(a) => report(run_eval(&a, &mut stdout)),
        Command::Fit(a) => report(run_fit(&a, &mut stdout)),
        Command::Synth(a) => report(run_synth(&a, &mut stdout)),
        Command::Serve(a) => {
            drop(stdout);
            let runtime = match tokio::runtime::Runtime::new() {
                Ok(rt) => rt,
                Err(e) => return report(Err(e.into())),
            };
            report(runtime.block_on(run_serve(a)))
        }
    }
}

