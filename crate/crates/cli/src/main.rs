//! `vacda`: prepare data, pretrain, train the classifier, evaluate and report.

mod commands;
mod suite;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vacda::Error;

#[derive(Parser)]
#[command(name = "vacda", version, about = "Variational contrastive multi-source domain adaptation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Configuration layers shared by every command.
#[derive(Args, Clone, Debug, Default)]
pub struct ConfigArgs {
    /// TOML experiment configuration.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Dotted-path override, e.g. `--set run.epochs=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic shifted-domain scenario as a bundle.
    Synth {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Ingest or generate every configured task into one bundle each.
    Prepare {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// VAE + contrastive pretraining on a bundle.
    Pretrain {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Train the classifier on a frozen pretrained encoder.
    TrainClassifier {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        bundle: PathBuf,
        /// Checkpoint written by `pretrain`.
        #[arg(long)]
        encoder: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Score an encoder and classifier on the target domain; JSON on stdout.
    Evaluate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        encoder: PathBuf,
        #[arg(long)]
        classifier: PathBuf,
        /// Also write the manifest and metrics here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Every task and seed of the configured suite, one process per cell.
    RunSuite(suite::SuiteArgs),
    /// Render suite reports as a table, CSV or JSON.
    Report {
        /// Suite output directories or report JSON files.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "table")]
        format: String,
    },
    #[command(hide = true)]
    RunCell(suite::CellArgs),
}

fn run(cli: Cli) -> vacda::Result<()> {
    match cli.command {
        Command::Synth { cfg, out, force } => commands::synth(&cfg, &out, force),
        Command::Prepare { cfg, out, force } => commands::prepare(&cfg, &out, force),
        Command::Pretrain { cfg, bundle, seed, out, force } => commands::pretrain(&cfg, &bundle, seed, &out, force),
        Command::TrainClassifier { cfg, bundle, encoder, seed, out, force } => {
            commands::train_classifier(&cfg, &bundle, &encoder, seed, &out, force)
        }
        Command::Evaluate { cfg, bundle, encoder, classifier, out, force } => {
            commands::evaluate(&cfg, &bundle, &encoder, &classifier, out.as_deref(), force)
        }
        Command::RunSuite(args) => suite::run_suite(&args),
        Command::Report { inputs, format } => commands::report(&inputs, &format),
        Command::RunCell(args) => suite::run_cell(&args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(exit_byte(&e))
        }
    }
}

fn exit_byte(e: &Error) -> u8 {
    u8::try_from(e.exit_code()).unwrap_or(2)
}
