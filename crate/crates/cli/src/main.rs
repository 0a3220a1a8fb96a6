use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{ArgAction, Parser, Subcommand, ValueEnum};
use strider_cli::batch::{run_batch, BatchConfig, RunStatus};
use strider_cli::sweep::SweepSpec;
use strider_cli::{check_path, describe, reproducible_timestamp, Checked};
use strider_core::planner::PlannerConfig;
use strider_core::quality::QualityThresholds;
use strider_core::registry::Registry;
use strider_service::{BackendChoice, BackendServer, ServeConfig, Service};

#[derive(Debug, Parser)]
#[command(name = "strider", version, about = "Motion-primitive data generation: bridge, batch replay and package tools")]
struct Cli {
    /// Mode registry file (defaults to the built-in table).
    #[arg(long, global = true)]
    registry: Option<PathBuf>,
    /// Language bank file (defaults to the built-in banks).
    #[arg(long, global = true)]
    banks: Option<PathBuf>,
    /// Log more (repeatable).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BackendKind {
    Builtin,
    External,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the bridge, a backend and the frontend channel.
    Serve {
        #[arg(long, default_value_t = 8765)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, value_enum, default_value_t = BackendKind::Builtin)]
        backend: BackendKind,
        #[arg(long, default_value = "127.0.0.1:5555")]
        command_addr: SocketAddr,
        #[arg(long, default_value = "127.0.0.1:5556")]
        telemetry_addr: SocketAddr,
        /// Record keyboard-driven sessions as packages.
        #[arg(long, action = ArgAction::Set, default_value_t = true)]
        record_keyboard: bool,
        /// Where finished sessions are written.
        #[arg(long, default_value = "sessions")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Mode selected at startup.
        #[arg(long, default_value_t = 1)]
        mode: usize,
    },
    /// Run only the reference backend on the command and telemetry channels.
    Backend {
        #[arg(long, default_value = "127.0.0.1:5555")]
        command_addr: SocketAddr,
        #[arg(long, default_value = "127.0.0.1:5556")]
        telemetry_addr: SocketAddr,
    },
    /// Replay recipe files on the virtual clock and write packages.
    Batch {
        #[arg(long, num_args = 1.., required = true)]
        recipes: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// e.g. "Run.speed=1.5,2.0,2.5,3.0"
        #[arg(long, default_value = "")]
        sweep: String,
        /// Write every run, ignoring the transition-quality filter.
        #[arg(long)]
        no_filter: bool,
        #[arg(long, default_value_t = QualityThresholds::default().max_speed_jump)]
        max_speed_jump: f64,
        #[arg(long, default_value_t = QualityThresholds::default().max_height_rate)]
        max_height_rate: f64,
        /// Worker threads (0 = one per core).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Check a package, or every package in a batch output directory.
    Validate { path: PathBuf },
    /// Summarize a package.
    Inspect { path: PathBuf },
    /// Print the mode registry.
    Modes,
}

fn load_registry(cli: &Cli) -> Result<Arc<Registry>, String> {
    Registry::load(cli.registry.as_deref(), cli.banks.as_deref())
        .map(Arc::new)
        .map_err(|e| e.to_string())
}

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread().enable_all().build().expect("tokio runtime")
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    let registry = load_registry(&cli)?;
    match cli.command {
        Command::Serve { port, host, backend, command_addr, telemetry_addr, record_keyboard, out, seed, mode } => {
            let http_addr: SocketAddr = format!("{host}:{port}").parse().map_err(|e| format!("--host/--port: {e}"))?;
            let backend = match backend {
                BackendKind::Builtin => BackendChoice::Builtin { command_addr, telemetry_addr },
                BackendKind::External => BackendChoice::External { command_addr, telemetry_addr },
            };
            let config = ServeConfig {
                http_addr,
                backend,
                record_keyboard,
                out_dir: Some(out),
                seed,
                initial_mode: mode,
                planner: PlannerConfig::default(),
            };
            runtime().block_on(async move {
                let svc = Service::start(registry, config).await.map_err(|e| e.to_string())?;
                println!("frontend channel: {}", svc.frontend_url());
                println!("http: http://{}/", svc.http_addr);
                tokio::signal::ctrl_c().await.map_err(|e| e.to_string())?;
                svc.shutdown();
                Ok(ExitCode::SUCCESS)
            })
        }
        Command::Backend { command_addr, telemetry_addr } => runtime().block_on(async move {
            let server = BackendServer::start(registry, PlannerConfig::default(), command_addr, telemetry_addr)
                .await
                .map_err(|e| e.to_string())?;
            println!("commands: {}  telemetry: {}", server.command_addr, server.telemetry_addr);
            tokio::signal::ctrl_c().await.map_err(|e| e.to_string())?;
            Ok(ExitCode::SUCCESS)
        }),
        Command::Batch { recipes, out, seed, sweep, no_filter, max_speed_jump, max_height_rate, jobs } => {
            let sweep = SweepSpec::parse(&sweep, &registry).map_err(|e| e.to_string())?;
            let config = BatchConfig {
                recipes,
                out_dir: out,
                seed,
                sweep,
                filter: !no_filter,
                thresholds: QualityThresholds { max_speed_jump, max_height_rate },
                planner: PlannerConfig::default(),
                created_at: reproducible_timestamp(std::env::var("SOURCE_DATE_EPOCH").ok().as_deref()),
                jobs,
            };
            let report = run_batch(&config, registry).map_err(|e| e.to_string())?;
            for r in &report.runs {
                let status = match r.status {
                    RunStatus::Written => "written",
                    RunStatus::Filtered => "filtered",
                };
                println!("{:<9} {} ({} samples)", status, r.session_id, r.samples);
            }
            println!("generated {}, filtered {}", report.generated, report.filtered);
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { path } => {
            let mut clean = true;
            for c in check_path(&path, &registry) {
                clean &= c.is_clean();
                match c {
                    Checked::Clean(p) => println!("ok    {}", p.display()),
                    Checked::Violations(p, v) => {
                        println!("FAIL  {} ({} violations)", p.display(), v.len());
                        for x in v {
                            println!("  {x}");
                        }
                    }
                    Checked::Unreadable(p, e) => println!("FAIL  {}: {e}", p.display()),
                }
            }
            Ok(if clean { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Inspect { path } => {
            print!("{}", describe(&path, &registry).map_err(|e| e.to_string())?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Modes => {
            println!("{:>2}  {:<20} {:<15} spd hdg hgt  speed range", "#", "name", "group");
            for m in registry.modes() {
                let flag = |b: bool| if b { " x " } else { " . " };
                let range = m.speed_range.map_or_else(String::new, |r| format!("{}-{} m/s", r.min, r.max));
                println!(
                    "{:>2}  {:<20} {:<15} {}{}{}  {}",
                    m.index,
                    m.name,
                    m.group.label(),
                    flag(m.supports_speed),
                    flag(m.supports_heading),
                    flag(m.supports_height),
                    range
                );
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => tracing_subscriber::filter::LevelFilter::WARN,
        1 => tracing_subscriber::filter::LevelFilter::INFO,
        _ => tracing_subscriber::filter::LevelFilter::DEBUG,
    };
    tracing_subscriber::fmt().with_max_level(level).with_writer(std::io::stderr).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
