//! `vocalplan` — vocal-plan extraction and TTS training-data pipeline.
//!
//! Exit codes are a stable scripting contract: 0 success, 1 input/IO
//! error, 2 transport, 3 protocol, 4 schema. Structured output (JSON,
//! JSON-lines, CSV) goes to stdout or files; human-readable diagnostics
//! go to stderr only.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::FileConfig;

#[derive(Parser)]
#[command(name = "vocalplan", version, about = "Vocal feature extraction and controllable-TTS data pipeline")]
struct Cli {
    /// key=value config file; command-line flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for per-record stages (default 1)
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Seed for randomized behavior; outputs are byte-stable given a seed
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract a vocal plan from a WAV file plus word timestamps
    Extract(commands::extract::ExtractArgs),
    /// Render the conductor prompt and request a plan from an endpoint
    Plan(commands::plan::PlanArgs),
    /// Assemble and pack training sequences from a corpus manifest
    Build(commands::build::BuildArgs),
    /// Classify synthesis candidates and emit preference tuples
    Pref(commands::pref::PrefArgs),
    /// Train the toy policy on preference tuples with APO-down
    Apo(commands::apo::ApoArgs),
    /// Mel-cepstral distortion between WAV files
    Mcd(commands::mcd::McdArgs),
}

/// Failure carrying its exit code; messages print to stderr.
pub struct CmdError {
    pub code: i32,
    pub message: String,
}

impl CmdError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

/// Settings shared by every subcommand.
pub struct Ctx {
    pub cfg: FileConfig,
    pub jobs: usize,
    #[allow(dead_code)]
    pub seed: u64,
}

impl Ctx {
    /// Runs `task` on a rayon pool bounded by `--jobs`.
    pub fn with_pool<T: Send>(&self, task: impl FnOnce() -> T + Send) -> Result<T, CmdError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| CmdError::input(format!("failed to build thread pool: {e}")))?;
        Ok(pool.install(task))
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            let _ = e.print();
            std::process::exit(0);
        }
        Err(e) => {
            let _ = e.print();
            std::process::exit(1);
        }
    };

    let code = match run(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("vocalplan: {}", err.message);
            err.code
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<(), CmdError> {
    let cfg = FileConfig::load(cli.config.as_deref())?;
    let jobs = match cli.jobs {
        Some(j) => j,
        None => cfg.get("jobs")?.unwrap_or(1),
    };
    if jobs == 0 {
        return Err(CmdError::input("--jobs must be at least 1"));
    }
    let seed = match cli.seed {
        Some(s) => s,
        None => cfg.get("seed")?.unwrap_or(0),
    };
    let ctx = Ctx { cfg, jobs, seed };

    match cli.command {
        Command::Extract(args) => commands::extract::run(args, &ctx),
        Command::Plan(args) => commands::plan::run(args, &ctx),
        Command::Build(args) => commands::build::run(args, &ctx),
        Command::Pref(args) => commands::pref::run(args, &ctx),
        Command::Apo(args) => commands::apo::run(args, &ctx),
        Command::Mcd(args) => commands::mcd::run(args, &ctx),
    }
}
