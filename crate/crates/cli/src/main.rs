//! `pivotrepr` command-line interface.
//!
//! Exit status: 0 on success, 1 on usage or validation errors, 2 on I/O errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use pivotrepr::evalharness::Method;
use pivotrepr::{Error, Result};

use config::RunConfig;

const THREADS_ENV: &str = "PIVOTREPR_THREADS";

#[derive(Parser)]
#[command(
    name = "pivotrepr",
    version,
    about = "Pivot-based representation learning for cross-domain text classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; relative input paths resolve against its directory.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Global seed, overriding the config file.
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    Method::parse(s)
        .ok_or_else(|| format!("unknown method {s:?} (ae_scl, ae_scl_sr, scl_mi, no_da)"))
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic two-domain corpus.
    GenSynth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Select pivots and write the feature space.
    Pivots {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train pivot word embeddings on the unlabeled data of both domains.
    TrainEmbed {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train an AE-SCL or AE-SCL-SR network, or an SCL-MI projection.
    TrainRepr {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = parse_method)]
        method: Option<Method>,
        /// Embedding file for the frozen decoder of ae_scl_sr.
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
    /// Train the source classifier and predict the target test set.
    TrainClf {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// Output directory of `train-repr`; omit for the no-adaptation baseline.
        #[arg(long)]
        repr: Option<PathBuf>,
    },
    /// Accuracy of one prediction file, plus a McNemar test when given two.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(required = true, num_args = 1..=2)]
        predictions: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Use the exact binomial test when there are few discordant pairs.
        #[arg(long)]
        allow_exact_mcnemar: bool,
    },
    /// Run the full cross-validated protocol over every configured setup.
    Experiment {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// Run only this method instead of the configured list.
        #[arg(long, value_parser = parse_method)]
        method: Option<Method>,
        #[arg(long)]
        allow_exact_mcnemar: bool,
    },
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| {
            Error::invalid(format!(
                "{THREADS_ENV} must be a positive integer, got {value:?}"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))
}

fn run(command: Command) -> Result<()> {
    configure_threads()?;
    let load = |c: &Common| RunConfig::load(c.config.as_deref(), c.seed);
    match command {
        Command::GenSynth { common, out } => commands::gen_synth(&load(&common)?, &out),
        Command::Pivots { common, out } => commands::pivots(&load(&common)?, &out),
        Command::TrainEmbed { common, out } => commands::train_embed(&load(&common)?, &out),
        Command::TrainRepr {
            common,
            out,
            method,
            embeddings,
        } => commands::train_repr(&load(&common)?, &out, method, embeddings.as_deref()),
        Command::TrainClf { common, out, repr } => {
            commands::train_clf(&load(&common)?, &out, repr.as_deref())
        }
        Command::Eval {
            common,
            predictions,
            out,
            allow_exact_mcnemar,
        } => commands::eval(
            &load(&common)?,
            &predictions,
            out.as_deref(),
            allow_exact_mcnemar,
        ),
        Command::Experiment {
            common,
            out,
            method,
            allow_exact_mcnemar,
        } => commands::experiment(&load(&common)?, &out, method, allow_exact_mcnemar),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let ok = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}
