use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spanagree_cli::{cmd_annotate, cmd_evaluate, cmd_stats, GlobalArgs};

/// Annotate spans with LLMs and score agreement between annotation campaigns.
#[derive(Parser)]
#[command(name = "spanagree", version)]
struct Cli {
    /// Run configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Seed for gamma sampling and model decoding, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Replay canned responses from this JSONL file instead of calling a provider.
    #[arg(long, global = true)]
    mock: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Annotate the corpus with the configured model.
    Annotate,
    /// Score a candidate campaign against a reference campaign.
    Evaluate {
        #[arg(long)]
        reference: String,
        #[arg(long)]
        candidate: String,
    },
    /// Print descriptive statistics of a campaign.
    Stats {
        #[arg(long)]
        campaign: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(config) = cli.config else {
        eprintln!("error: --config is required");
        return ExitCode::from(2);
    };
    let args = GlobalArgs {
        config,
        output: cli.output,
        seed: cli.seed,
        mock: cli.mock,
    };
    let mut stdout = io::stdout().lock();
    let result = match &cli.command {
        Command::Annotate => cmd_annotate(&args, &mut stdout),
        Command::Evaluate { reference, candidate } => cmd_evaluate(&args, reference, candidate, &mut stdout),
        Command::Stats { campaign } => cmd_stats(&args, campaign, &mut stdout),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
