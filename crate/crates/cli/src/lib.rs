//! Command-line front end: run experiments, solve single allocations, evaluate
//! the divergence bound, value modalities and compare strategies.

use std::fmt;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

mod commands;
pub mod output;

pub use commands::{bound, compare, schedule, shapley, simulate};

#[derive(Debug, Parser)]
#[command(
    name = "flexmod",
    version,
    about = "Multimodal federated learning scheduling simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment and write rounds.csv, allocations.csv and summary.json.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides run.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides run.output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve one allocation for given index vectors and print it as JSON.
    Schedule {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        beta: f64,
        /// Quality vector, comma separated.
        #[arg(long)]
        omega: String,
        /// Importance vector, comma separated.
        #[arg(long)]
        gamma: String,
        /// Overrides schedule.budget.
        #[arg(long)]
        budget: Option<u32>,
    },
    /// Evaluate the divergence bound for a sequence of combination sizes.
    Bound {
        /// Combination sizes in training order, comma separated.
        #[arg(long)]
        schedule: String,
        #[arg(long)]
        eta: f64,
        #[arg(long = "L")]
        lipschitz: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long = "M")]
        modalities: usize,
        /// Also tabulate every distinct ordering (at most 7 slots).
        #[arg(long)]
        all_orders: bool,
    },
    /// Print subset losses and Shapley values for a saved model.
    Shapley {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Run every strategy under every seed and write compare.csv.
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// Comma separated, e.g. `flexmod,entire_update,single_modality:1`.
        #[arg(long)]
        strategies: String,
        /// Comma separated seeds.
        #[arg(long)]
        seeds: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A failure caused by the user's input rather than by the run itself.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// 2 for configuration and validation failures, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    let config = err.chain().any(|e| {
        e.is::<UsageError>()
            || e.downcast_ref::<flexmod::Error>()
                .is_some_and(flexmod::Error::is_config)
    });
    if config {
        2
    } else {
        1
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate { config, seed, out } => simulate::run(&config, seed, out.as_deref()).map(|_| ()),
        Command::Schedule {
            config,
            beta,
            omega,
            gamma,
            budget,
        } => {
            let report = schedule::run(&config, beta, &omega, &gamma, budget)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Bound {
            schedule,
            eta,
            lipschitz,
            delta,
            modalities,
            all_orders,
        } => {
            let report = bound::run(&schedule, eta, lipschitz, delta, modalities, all_orders)?;
            print!("{report}");
            Ok(())
        }
        Command::Shapley { config, checkpoint } => {
            let report = shapley::run(&config, &checkpoint)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Compare {
            config,
            strategies,
            seeds,
            out,
        } => {
            let report = compare::run(&config, &strategies, &seeds, out.as_deref())?;
            print!("{report}");
            Ok(())
        }
    }
}
