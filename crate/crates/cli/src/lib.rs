//! Experiment harness for `dreammap`: dataset synthesis, world-model
//! training, acquisition runs against the baselines, budget and size sweeps.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod error;
pub mod pgm;

pub use config::FileConfig;
pub use error::{CliError, EXIT_DATA, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "dreammap", version, about = "Active RSSI map reconstruction experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Root seed for every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// TOML file of `key = value` defaults; flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset of empty/occupied pairs.
    Synth(commands::synth::SynthArgs),
    /// Train a world model on a dataset directory.
    Train(commands::train::TrainArgs),
    /// Run acquisition on one pair and export every method's reconstruction.
    Run(commands::run::RunArgs),
    /// Sweep scales, budgets, methods and repetitions into a results CSV.
    Sweep(commands::sweep::SweepArgs),
    /// Score reconstruction maps against a pair's occupied map.
    Eval(commands::eval::EvalArgs),
}

/// Resolved global settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Context {
    pub seed: u64,
    pub out: PathBuf,
    pub file: FileConfig,
}

impl Context {
    pub fn resolve(global: &Global) -> Result<Self, CliError> {
        let file = match &global.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        Ok(Context {
            seed: global.seed.or(file.seed).unwrap_or(0),
            out: global.out.clone().or_else(|| file.out.clone()).unwrap_or_else(|| PathBuf::from("out")),
            file,
        })
    }

    pub fn ensure_out(&self) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.out).map_err(|e| CliError::io(&self.out, e))
    }
}

/// Applies `DREAMMAP_THREADS` to the global rayon pool. `0` or unset keeps
/// rayon's automatic sizing.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("DREAMMAP_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("DREAMMAP_THREADS must be a non-negative integer, got {raw:?}")))?;
    if n > 0 {
        // A pool that already exists (repeated in-process calls) is kept.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let ctx = Context::resolve(&cli.global)?;
    match cli.command {
        Command::Synth(a) => commands::synth::cmd_synth(&ctx, &a),
        Command::Train(a) => commands::train::cmd_train(&ctx, &a),
        Command::Run(a) => commands::run::cmd_run(&ctx, &a),
        Command::Sweep(a) => commands::sweep::cmd_sweep(&ctx, &a),
        Command::Eval(a) => commands::eval::cmd_eval(&ctx, &a),
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
