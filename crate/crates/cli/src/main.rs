use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;
use sqlia_core::alarm_queue::Decision;
use sqlia_core::pattern_store::{PatternSource, PatternStore, SEED_FILE};
use sqlia_core::{CompiledPatterns, DetectorConfig, Score};
use sqlia_server::api::{AlarmView, CheckResponse, PatternView};
use sqlia_server::{AlarmPolicy, AppState};

#[derive(Debug, Parser)]
#[command(
    name = "sqlia",
    version,
    about = "Screen SQL queries against a curated injection pattern list"
)]
struct Cli {
    /// Pattern list file.
    #[arg(
        long,
        global = true,
        env = "SQLIA_PATTERNS",
        default_value = "patterns.spl"
    )]
    patterns: PathBuf,

    /// Alarm journal. `check` only records alarms when this is set.
    #[arg(long, global = true, env = "SQLIA_ALARMS")]
    alarms: Option<PathBuf>,

    /// Anomaly score (percent) at or above which a partial match alarms.
    #[arg(long, global = true, env = "SQLIA_THRESHOLD", default_value = "50", value_parser = parse_threshold)]
    threshold: DetectorConfig,

    #[arg(
        long,
        global = true,
        env = "SQLIA_LISTEN",
        default_value = "127.0.0.1:8080"
    )]
    listen: SocketAddr,

    /// What the service answers for alarmed queries: allow (and log) or block.
    #[arg(
        long,
        global = true,
        env = "SQLIA_ALARM_POLICY",
        default_value = "allow"
    )]
    alarm_policy: AlarmPolicy,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Screen one query. Exit 0 accepted, 2 alarm, 3 rejected.
    Check { query: String },
    /// Screen a log with one query per line and print a summary report.
    ScanLog { file: PathBuf },
    #[command(subcommand)]
    Patterns(PatternsCmd),
    #[command(subcommand)]
    Alarms(AlarmsCmd),
    /// Run the HTTP detection service.
    Serve,
}

#[derive(Debug, Subcommand)]
enum PatternsCmd {
    List,
    Add {
        text: String,
    },
    /// Write the bundled seed list if the pattern file does not exist yet.
    Seed,
}

#[derive(Debug, Subcommand)]
enum AlarmsCmd {
    List {
        #[arg(long)]
        status: Option<String>,
    },
    Confirm {
        id: u64,
        text: String,
    },
    Dismiss {
        id: u64,
    },
}

fn parse_threshold(s: &str) -> Result<DetectorConfig, String> {
    let score: Score = s.parse().map_err(|e| format!("{e}"))?;
    DetectorConfig::new(score).map_err(|e| e.to_string())
}

const DEFAULT_ALARMS: &str = "alarms.jsonl";

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string(value)?);
    Ok(())
}

fn load_store(path: &Path) -> Result<PatternStore> {
    PatternStore::load(path).with_context(|| format!("loading pattern file {}", path.display()))
}

fn exit_code_for(verdict: &str) -> u8 {
    match verdict {
        "accepted" => 0,
        "alarm" => 2,
        _ => 3,
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Check { query } => {
            let response = match &cli.alarms {
                Some(alarms) => {
                    let state =
                        AppState::open(&cli.patterns, alarms, cli.threshold, cli.alarm_policy)?;
                    let outcome = state.check(&query)?;
                    CheckResponse::new(
                        &outcome.verdict,
                        outcome.alarm.map(|a| a.id),
                        cli.alarm_policy,
                    )
                }
                None => {
                    let store = load_store(&cli.patterns)?;
                    let compiled = CompiledPatterns::compile(&store.snapshot())?;
                    let verdict = compiled.check(query.as_bytes(), &cli.threshold)?;
                    CheckResponse::new(&verdict, None, cli.alarm_policy)
                }
            };
            print_json(&response)?;
            Ok(exit_code_for(&response.verdict))
        }
        Command::ScanLog { file } => {
            let store = load_store(&cli.patterns)?;
            let log =
                std::fs::read(&file).with_context(|| format!("reading {}", file.display()))?;
            let compiled = CompiledPatterns::compile(&store.snapshot())?;
            print_json(&sqlia_cli::scan_log(&log, &compiled, &cli.threshold))?;
            Ok(0)
        }
        Command::Patterns(cmd) => {
            match cmd {
                PatternsCmd::List => {
                    for p in load_store(&cli.patterns)?.snapshot().iter() {
                        print_json(&PatternView::from(p))?;
                    }
                }
                PatternsCmd::Add { text } => {
                    let store = load_store(&cli.patterns)?;
                    let outcome = store.add_pattern(&text, PatternSource::AdminConfirmed)?;
                    let created = matches!(outcome, sqlia_core::AddOutcome::Added(_));
                    let pattern = store.get(outcome.id()).expect("stored pattern");
                    print_json(
                        &serde_json::json!({ "pattern": PatternView::from(&pattern), "created": created }),
                    )?;
                }
                PatternsCmd::Seed => {
                    if cli.patterns.exists() {
                        bail!("{} already exists", cli.patterns.display());
                    }
                    std::fs::write(&cli.patterns, SEED_FILE)?;
                    let store = load_store(&cli.patterns)?;
                    print_json(&serde_json::json!({ "patterns": store.len() }))?;
                }
            }
            Ok(0)
        }
        Command::Alarms(cmd) => {
            let alarms_path = cli.alarms.clone().unwrap_or_else(|| DEFAULT_ALARMS.into());
            let state =
                AppState::open(&cli.patterns, &alarms_path, cli.threshold, cli.alarm_policy)?;
            let compiled = state.compiled();
            match cmd {
                AlarmsCmd::List { status } => {
                    if let Some(s) = status.as_deref() {
                        if !matches!(s, "pending" | "confirmed" | "dismissed") {
                            bail!("unknown status {s:?}");
                        }
                    }
                    for record in state.alarms().list(status.as_deref()) {
                        print_json(&AlarmView::new(&record, &compiled))?;
                    }
                }
                AlarmsCmd::Confirm { id, text } => {
                    let record = state.decide(id, Decision::Confirm { pattern_text: text })?;
                    print_json(&AlarmView::new(&record, &state.compiled()))?;
                }
                AlarmsCmd::Dismiss { id } => {
                    let record = state.decide(id, Decision::Dismiss)?;
                    print_json(&AlarmView::new(&record, &compiled))?;
                }
            }
            Ok(0)
        }
        Command::Serve => {
            let alarms_path = cli.alarms.clone().unwrap_or_else(|| DEFAULT_ALARMS.into());
            let state = Arc::new(AppState::open(
                &cli.patterns,
                &alarms_path,
                cli.threshold,
                cli.alarm_policy,
            )?);
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async move {
                let listener = sqlia_server::bind(cli.listen).await?;
                print_json(
                    &serde_json::json!({ "listening": listener.local_addr()?.to_string() }),
                )?;
                sqlia_server::serve(listener, state, async {
                    let _ = tokio::signal::ctrl_c().await;
                })
                .await?;
                anyhow::Ok(())
            })?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
