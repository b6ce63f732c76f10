use std::path::PathBuf;

use clap::{Parser, Subcommand};
use softfacet_cli::commands;

#[derive(Parser)]
#[command(name = "softfacet", version, about = "Soft faceted browsing engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train action models from a catalog and a session log.
    Train {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        log: PathBuf,
        /// Model hyper-parameter document (defaults when omitted).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the leave-one-out soft vs. hard comparison on a synthetic scenario.
    Evaluate {
        /// Scenario document (built-in calibrated scenario when omitted).
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Exit with status 1 when the acceptance thresholds are not met.
        #[arg(long)]
        check: bool,
        /// Write the JSON-lines report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Write a synthetic catalog, session log and relevance file.
    Simulate {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve interactive browsing sessions over HTTP.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Train {
            catalog,
            log,
            config,
            out,
        } => commands::train_cmd(&catalog, &log, config.as_deref(), &out),
        Command::Evaluate {
            scenario,
            seed,
            check,
            report,
        } => commands::evaluate_cmd(scenario.as_deref(), seed, check, report.as_deref()),
        Command::Simulate {
            scenario,
            seed,
            out,
        } => commands::simulate_cmd(scenario.as_deref(), seed, &out),
        Command::Serve { config } => commands::serve_cmd(&config),
    };
    std::process::exit(code);
}
