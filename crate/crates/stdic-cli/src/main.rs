use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stdic_cli::config::ExperimentConfig;
use stdic_cli::pipeline::{run_analyze, run_metrics, run_reproduce, run_synth, RunOptions};

/// Spatial-temporal digital image correlation toolkit.
#[derive(Parser)]
#[command(name = "stdic", version, about)]
struct Cli {
    /// Output directory for all artifacts.
    #[arg(long, global = true, default_value = "stdic-out")]
    out: PathBuf,

    /// Worker threads (0 = all cores). Thread count never changes numeric
    /// output.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Overrides the seed from the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Round and clip synthesized frames to 8 bits (PGM output).
    #[arg(long, global = true)]
    quantize_8bit: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render synthetic sequences with ground truth.
    Synth {
        /// Experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the configured DIC methods over synthesized frames.
    Analyze {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compute error statistics, ratio tables and plot data.
    Metrics {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a canned experiment end to end (synth, analyze, metrics).
    Reproduce {
        /// "translation" or "vibration".
        name: String,
    },
}

fn load_config(path: &PathBuf) -> Result<ExperimentConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    ExperimentConfig::from_json(&text)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own message; map every usage problem to 1
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };

    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(2);
        }
    }

    let options = RunOptions {
        out_dir: cli.out,
        seed_override: cli.seed,
        quantize_8bit: cli.quantize_8bit,
    };

    let result = match &cli.command {
        Command::Synth { config } | Command::Analyze { config } | Command::Metrics { config } => {
            let parsed = match load_config(config) {
                Ok(c) => c,
                Err(message) => {
                    eprintln!("error: {message}");
                    return ExitCode::from(1);
                }
            };
            match &cli.command {
                Command::Synth { .. } => run_synth(&parsed, &options),
                Command::Analyze { .. } => run_analyze(&parsed, &options),
                _ => run_metrics(&parsed, &options),
            }
        }
        Command::Reproduce { name } => {
            if name != "translation" && name != "vibration" {
                eprintln!("error: unknown experiment {name:?} (expected translation or vibration)");
                return ExitCode::from(1);
            }
            run_reproduce(name, &options)
        }
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
