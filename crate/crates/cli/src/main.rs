use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qrobust_core::harness::{self, Command, ExperimentConfig, Overrides};
use qrobust_core::Error;

/// Train, attack and certify single-qubit re-uploading classifiers on MNIST.
#[derive(Parser)]
#[command(name = "qrobust", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Extract the configured digit subsets and fit PCA.
    Prepare(Common),
    /// Train classifier weights with the genetic algorithm.
    Train(Common),
    /// Evaluate the trained model on the test split.
    Eval(Common),
    /// Generate adversarial examples against the trained model.
    Attack(Common),
    /// Certify the shot-mode records of the last evaluation.
    Certify(Common),
    /// Evaluate accuracy across noise-channel probabilities.
    NoiseSweep(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the number of measurement shots used by `eval`.
    #[arg(long)]
    shots: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    threads: Option<usize>,
}

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 3;
const EXIT_DATA: u8 = 4;
const EXIT_EVALUATION: u8 = 5;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) => EXIT_CONFIG,
        Error::Format { .. } | Error::EmptyDataset(_) => EXIT_DATA,
        Error::Evaluation { .. } | Error::NumericDomain(_) | Error::RankDeficient { .. } => EXIT_EVALUATION,
        Error::Io(_) => EXIT_FAILURE,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Prepare(a) => (Command::Prepare, a),
        Cmd::Train(a) => (Command::Train, a),
        Cmd::Eval(a) => (Command::Eval, a),
        Cmd::Attack(a) => (Command::Attack, a),
        Cmd::Certify(a) => (Command::Certify, a),
        Cmd::NoiseSweep(a) => (Command::NoiseSweep, a),
    };
    let overrides = Overrides {
        seed: args.seed,
        out_dir: args.out,
        shots: args.shots,
        threads: args.threads,
    };
    let result = ExperimentConfig::load(&args.config, &overrides).and_then(|cfg| harness::run(command, &cfg));
    match result {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
            ExitCode::SUCCESS
        }
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
