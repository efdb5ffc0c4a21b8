//! `latent-sculpt`: train, evaluate, and probe MMD-sculpted autoencoders
//! from JSON experiment configs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use latent_sculpt::cli;

#[derive(Parser)]
#[command(name = "latent-sculpt", version, about = "sculpt autoencoder latents toward programmable priors")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from an experiment config and evaluate it.
    Train {
        /// Experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Override the config's root seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate an existing checkpoint against a config's dataset and prior.
    Eval {
        #[arg(long)]
        config: PathBuf,
        /// Model checkpoint (.mdlp).
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a latent dump: mean held-out R-squared of predicting each
    /// dimension from the others.
    Lps {
        /// Latent dump (.ltnt).
        #[arg(long)]
        dump: PathBuf,
        /// Train fraction of the split.
        #[arg(long, default_value_t = 0.8)]
        split: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw samples from a prior config into a latent dump.
    SamplePrior {
        /// Prior config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Number of samples.
        #[arg(long)]
        n: usize,
        /// Destination dump (.ltnt).
        #[arg(long)]
        out_dump: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train a student whose aggregate posterior matches a teacher's.
    CopyLatent {
        /// Teacher checkpoint (.mdlp).
        #[arg(long)]
        teacher: PathBuf,
        /// Experiment config for the student (JSON, mmd regularizer).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Materialize a dataset spec to images.idx (+ factors.csv).
    GenData {
        /// Dataset config (JSON).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cmd: Command) -> latent_sculpt::Result<()> {
    match cmd {
        Command::Train { config, seed, out } => cli::cmd_train(&config, seed, out.as_deref()),
        Command::Eval { config, checkpoint, seed, out } => {
            cli::cmd_eval(&config, &checkpoint, seed, out.as_deref())
        }
        Command::Lps { dump, split, seed, out } => cli::cmd_lps(&dump, split, seed, out.as_deref()),
        Command::SamplePrior { config, n, out_dump, seed } => {
            cli::cmd_sample_prior(&config, n, &out_dump, seed)
        }
        Command::CopyLatent { teacher, config, seed, out } => {
            cli::cmd_copy_latent(&teacher, &config, seed, out.as_deref())
        }
        Command::GenData { config, seed, out } => cli::cmd_gen_data(&config, seed, out.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    match run(args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(cli::exit_code(&err) as u8)
        }
    }
}
