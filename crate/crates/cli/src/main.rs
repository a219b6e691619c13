use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

#[derive(Parser)]
#[command(
    name = "causadis",
    version,
    about = "Dual-latent light-curve pipeline: simulate, train, embed, probe, report"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct GlobalArgs {
    /// Run configuration (TOML). Defaults to the built-in desk-scale setup.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the simulation, training and evaluation seeds.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Caps worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory; overrides `out_dir` in the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Build and save a simulated dataset.
    Simulate,
    /// Train the dual-latent model or the single-latent baseline.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_parser = ["dual", "baseline"], default_value = "dual")]
        model: String,
        /// Continue from a checkpoint instead of starting fresh.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Stop after this many epochs in this invocation.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Encode every observation with a trained checkpoint.
    Embed {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Baseline checkpoint whose latent is stored alongside.
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
    /// Few-shot regression of the log-period from one representation.
    Probe {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_parser = ["raw", "z_star", "z_instr", "z_baseline"])]
        representation: String,
        /// Required for every representation except raw.
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
    /// Leakage probes, PCA and the combined report bundle.
    Report {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        /// Probe CSVs to merge into the report.
        #[arg(long, num_args = 1..)]
        probe: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CAUSADIS_LOG", "info"))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.class());
            ExitCode::from(e.class().exit_code())
        }
    }
}

fn run(cli: Cli) -> causadis_core::Result<()> {
    if let Some(n) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| causadis_core::Error::Config(format!("cannot set thread count: {e}")))?;
    }
    let ctx = commands::Context::new(&cli.global)?;
    match cli.command {
        Command::Simulate => commands::simulate(&ctx),
        Command::Train {
            dataset,
            model,
            resume,
            epochs,
        } => commands::train(&ctx, &dataset, &model, resume.as_deref(), epochs),
        Command::Embed {
            checkpoint,
            dataset,
            baseline,
        } => commands::embed(&ctx, &checkpoint, &dataset, baseline.as_deref()),
        Command::Probe {
            dataset,
            representation,
            embeddings,
        } => commands::probe(&ctx, &dataset, &representation, embeddings.as_deref()),
        Command::Report {
            dataset,
            embeddings,
            probe,
        } => commands::report(&ctx, &dataset, &embeddings, &probe),
    }
}
