use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use flipscan::commands::{cmd_blind, cmd_calibrate, cmd_fit, cmd_ingest, cmd_inject, cmd_sweep, cmd_synth, CommandOutput};
use flipscan::exit_code;
use flipscan::manifest::{LoadedManifest, Overrides};
use flipscan_core::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "flipscan", version, about = "County-level election anomaly analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run manifest (TOML).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Output directory; overrides the manifest.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Monte Carlo trials; overrides the manifest.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Replaces every seed in the manifest.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Clean and join raw tables into a dataset file.
    Ingest,
    /// Cross-validated fit on every county, with anomaly ranking.
    Fit,
    /// Fit on training states, score evaluation states.
    Blind,
    /// Flip votes in one county and rescore.
    Inject,
    /// Significance versus flipped votes for every eligible county.
    Sweep,
    /// Compare Monte Carlo and closed-form global significance.
    Calibrate,
    /// Generate a synthetic dataset.
    Synth,
}

fn run(cli: &Cli) -> Result<CommandOutput> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let path = cli
        .manifest
        .as_ref()
        .ok_or_else(|| Error::Config("--manifest is required".into()))?;
    let overrides = Overrides {
        out_dir: cli.out.clone(),
        trials: cli.trials,
        seed: cli.seed,
    };
    let lm = LoadedManifest::load(path, &overrides)?;
    log::info!("manifest {} sha256 {}", path.display(), lm.sha256);
    match cli.command {
        Command::Ingest => cmd_ingest(&lm),
        Command::Fit => cmd_fit(&lm),
        Command::Blind => cmd_blind(&lm),
        Command::Inject => cmd_inject(&lm),
        Command::Sweep => cmd_sweep(&lm),
        Command::Calibrate => cmd_calibrate(&lm),
        Command::Synth => cmd_synth(&lm),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            print!("{}", out.summary);
            for f in &out.files {
                log::info!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
