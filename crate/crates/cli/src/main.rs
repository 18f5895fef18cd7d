mod commands;
mod config;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Train, evaluate, and ablate drift-aware malware detectors on time-stamped
/// feature datasets.
#[derive(Parser, Debug)]
#[command(name = "drmd", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// Experiment config in TOML form; omitted sections take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a single config value, e.g. --set agent.layer_size=256.
    /// May be given multiple times; later overrides win.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic drifting dataset and write it to disk.
    Gen {
        #[command(flatten)]
        config: ConfigArgs,
        /// Dataset file to write (its manifest lands next to it).
        /// Defaults to <output_dir>/dataset.jsonl.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the configured model and run the month-by-month evaluation.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Recompute the area under a metric-over-time curve from a monthly CSV.
    Aut {
        /// A months CSV produced by `run` (or anything with the same shape).
        csv: PathBuf,
        /// Which metric column to integrate.
        #[arg(long, default_value = "f1")]
        column: String,
    },
    /// Run the cumulative component ablation and write ablation.csv.
    Ablate {
        #[command(flatten)]
        config: ConfigArgs,
    },
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Gen { config, out } => {
            let cfg = config::load_config(config.config.as_deref(), &config.set)?;
            commands::gen::cmd_gen(&cfg, out.as_deref())
        }
        Command::Run { config } => {
            let cfg = config::load_config(config.config.as_deref(), &config.set)?;
            commands::run::cmd_run(&cfg)
        }
        Command::Aut { csv, column } => commands::aut::cmd_aut(&csv, &column),
        Command::Ablate { config } => {
            let cfg = config::load_config(config.config.as_deref(), &config.set)?;
            commands::ablate::cmd_ablate(&cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(u8::try_from(code).unwrap_or(1)),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
