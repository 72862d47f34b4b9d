use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use decoctl::config::{apply_seed_override, load_config};
use decoctl::{commands, CliError};

/// Dynamical control of decay and dephasing: scenario runs, figure datasets,
/// oracle cross-checks and modulation optimization.
#[derive(Parser)]
#[command(name = "decoctl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config (dispatches on its `mode`).
    Run {
        config: PathBuf,
        /// Output directory (overrides `output.dir`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the datasets of a reference figure (fig2 .. fig6).
    Figure {
        name: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Compare the engines with their reference solvers.
    Oracle {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimize modulation parameters.
    Optimize {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    let load = |p: &PathBuf| {
        let mut cfg = load_config(p)?;
        apply_seed_override(&mut cfg, std::env::var("DECOCTL_SEED").ok())?;
        Ok::<_, CliError>(cfg)
    };
    match cli.command {
        Command::Run { config, out } => commands::run(&load(&config)?, out.as_deref()),
        Command::Figure { name, out } => commands::figure(&name, &out),
        Command::Oracle { config, out } => commands::oracle(&load(&config)?, out.as_deref()),
        Command::Optimize { config, out } => commands::optimize(&load(&config)?, out.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("decoctl: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
