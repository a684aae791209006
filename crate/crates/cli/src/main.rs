//! `forum-sentinel`: ingest, tag, featurize, train, evaluate and generate forum corpora.
//!
//! Exit codes: 0 success, 1 I/O error, 2 usage error, 3 bad input data,
//! 4 training or evaluation failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub const EXIT_IO: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_BAD_INPUT: u8 = 3;
pub const EXIT_FAILED: u8 = 4;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn io(error: anyhow::Error) -> Self {
        Self { code: EXIT_IO, error }
    }

    pub fn usage(error: anyhow::Error) -> Self {
        Self { code: EXIT_USAGE, error }
    }

    pub fn input(error: anyhow::Error) -> Self {
        Self { code: EXIT_BAD_INPUT, error }
    }

    pub fn failed(error: anyhow::Error) -> Self {
        Self { code: EXIT_FAILED, error }
    }
}

#[derive(Debug, Parser)]
#[command(name = "forum-sentinel", version, about = "Predict instructor intervention in course forum threads")]
struct Cli {
    #[command(flatten)]
    flags: Flags,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand. Flags override `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML run configuration
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Thread corpus, one JSON record per line
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    /// Connective lexicon TSV (defaults to the built-in English lexicon)
    #[arg(long, global = true)]
    pub lexicon: Option<PathBuf>,
    /// Imported connective tags; replaces the lexicon tagger
    #[arg(long, global = true)]
    pub tags: Option<PathBuf>,
    /// edm15, pdtb or eplusp
    #[arg(long, global = true)]
    pub features: Option<String>,
    /// in-domain or ccv
    #[arg(long, global = true)]
    pub regime: Option<String>,
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub l2: Option<f64>,
    #[arg(long, global = true)]
    pub max_iterations: Option<usize>,
    #[arg(long, global = true)]
    pub convergence_tol: Option<f64>,
    /// none or neg_over_pos
    #[arg(long, global = true)]
    pub class_weight: Option<String>,
    /// lbfgs or gd
    #[arg(long, global = true)]
    pub optimizer: Option<String>,
    #[arg(long, global = true)]
    pub standardize: bool,
    /// pooled or mean
    #[arg(long, global = true)]
    pub aggregation: Option<String>,
    /// Worker threads
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// table, csv or records
    #[arg(long, global = true)]
    pub emit: Option<String>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Filter, label and count threads per course
    Ingest,
    /// Tag discourse connectives and report the sense distribution
    Tag,
    /// Write a feature dump
    Featurize,
    /// Train a model from a corpus or a feature dump
    Train {
        /// Feature dump written by `featurize`, instead of --corpus
        #[arg(long, conflicts_with = "corpus")]
        dump: Option<PathBuf>,
    },
    /// Cross-validate in-domain or across courses
    Eval {
        /// Also evaluate this feature config and test the difference
        #[arg(long)]
        baseline: Option<String>,
        #[arg(long, default_value_t = forum_sentinel::eval::DEFAULT_ROUNDS)]
        rounds: usize,
    },
    /// Generate a synthetic corpus from a TOML spec
    Syngen {
        #[arg(long)]
        spec: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = config::RunConfig::resolve(&cli.flags)?;
    if let Some(n) = cfg.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::failed(e.into()))?;
    }
    match cli.command {
        Command::Ingest => commands::ingest(&cfg),
        Command::Tag => commands::tag(&cfg),
        Command::Featurize => commands::featurize(&cfg),
        Command::Train { dump } => commands::train(&cfg, dump.as_deref()),
        Command::Eval { baseline, rounds } => commands::eval(&cfg, baseline.as_deref(), rounds),
        Command::Syngen { spec } => commands::syngen(&cfg, &spec),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FORUM_SENTINEL_LOG", "warn"))
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
