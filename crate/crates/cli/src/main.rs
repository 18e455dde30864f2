mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "libu",
    version,
    about = "Memorize-then-unlearn experiments on a tiny language model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
pub struct Common {
    /// KEY = VALUE config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Wall-clock budget; training stops cleanly with a partial log.
    #[arg(long, default_value_t = 3600.0)]
    pub max_seconds: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic corpus (five JSON-lines files).
    GenCorpus {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 32)]
        forget_count: usize,
        #[arg(long, default_value_t = 32)]
        retain_count: usize,
        #[arg(long, default_value_t = 64)]
        utility_count: usize,
        #[arg(long, default_value_t = 32)]
        mia_member_count: usize,
        #[arg(long, default_value_t = 32)]
        mia_nonmember_count: usize,
        /// Overwrite a non-empty output directory.
        #[arg(long)]
        force: bool,
    },
    /// Train a fresh model until it reproduces retain and forget verbatim.
    Memorize {
        #[command(flatten)]
        common: Common,
        /// Corpus directory.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Unlearn the forget split from a memorized checkpoint.
    Unlearn {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// libu, ga, gd or kl.
        #[arg(long, default_value = "libu")]
        algorithm: String,
        /// setup1, setup2, setup3 or custom.
        #[arg(long, default_value = "setup3")]
        preset: String,
        /// Let config values replace preset values.
        #[arg(long)]
        allow_override: bool,
        #[arg(long)]
        eta_scale: Option<f64>,
    },
    /// Score a checkpoint and write the JSON report and text table.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Row label in the text table.
        #[arg(long, default_value = "model")]
        name: String,
    },
    /// Tabulate two or more reports.
    Compare {
        #[arg(required = true, num_args = 2..)]
        reports: Vec<PathBuf>,
        /// Optional output directory for the table and manifest.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenCorpus {
            common,
            forget_count,
            retain_count,
            utility_count,
            mia_member_count,
            mia_nonmember_count,
            force,
        } => commands::gen_corpus(
            &common,
            [
                forget_count,
                retain_count,
                utility_count,
                mia_member_count,
                mia_nonmember_count,
            ],
            force,
        ),
        Command::Memorize {
            common,
            data,
            epochs,
            learning_rate,
            batch_size,
        } => commands::memorize(&common, &data, epochs, learning_rate, batch_size),
        Command::Unlearn {
            common,
            data,
            checkpoint,
            algorithm,
            preset,
            allow_override,
            eta_scale,
        } => commands::unlearn(
            &common,
            &data,
            &checkpoint,
            &algorithm,
            &preset,
            allow_override,
            eta_scale,
        ),
        Command::Eval {
            common,
            data,
            checkpoint,
            name,
        } => commands::eval(&common, &data, &checkpoint, &name),
        Command::Compare { reports, out } => commands::compare(&reports, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = e
                .chain()
                .find_map(|c| c.downcast_ref::<libu::Error>())
                .map_or("cli", libu::Error::kind);
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error kind={kind} message={msg:?}");
            ExitCode::FAILURE
        }
    }
}
