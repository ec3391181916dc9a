use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fedowen_cli::commands::{self, ValueArgs};

#[derive(Parser)]
#[command(
    name = "fedowen",
    version,
    about = "Contribution valuation and contribution-driven federated learning at desk scale"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full experiment from a flat config file
    Run {
        /// Path to the config document (key = value lines)
        config: PathBuf,
    },
    /// Run one estimator on a catalog game and compare with the exact values
    Value {
        /// Catalog game: additive, majority, glove, random_monotone
        #[arg(long)]
        game: String,
        /// Player count
        #[arg(long)]
        n: usize,
        /// Seed for the game (where applicable) and the estimator
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Estimator id: owen, owen-strict, mc, gtg, banzhaf, wshap
        #[arg(long)]
        estimator: String,
        /// Inclusion levels for the Owen estimators
        #[arg(long = "Q", default_value_t = 2)]
        q_levels: usize,
        /// Per-player call budget (draws per level for owen-strict)
        #[arg(long = "M", default_value_t = 4)]
        samples: usize,
        /// Truncation tolerance of the Owen walk
        #[arg(long, default_value_t = 0.05)]
        eta: f64,
        /// Walk normalization: paper or visited
        #[arg(long, default_value = "visited")]
        mode: String,
        /// Skip threshold of the gtg estimator
        #[arg(long, default_value_t = 0.05)]
        gtg_eps: f64,
        /// Beta shape α for wshap
        #[arg(long, default_value_t = 1.0)]
        wshap_alpha: f64,
        /// Beta shape β for wshap
        #[arg(long, default_value_t = 1.0)]
        wshap_beta: f64,
    },
    /// Re-run a config once per value of one parameter (epsilon or Q)
    Sweep {
        /// Path to the base config document
        config: PathBuf,
        /// Parameter to sweep: epsilon or Q
        #[arg(long)]
        param: String,
        /// Comma-separated values to sweep over
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run { config } => {
            let (report, written) = commands::run_from_file(&config)?;
            commands::print_report(&report, &written);
        }
        Command::Value {
            game,
            n,
            seed,
            estimator,
            q_levels,
            samples,
            eta,
            mode,
            gtg_eps,
            wshap_alpha,
            wshap_beta,
        } => {
            let args = ValueArgs {
                game,
                n,
                seed,
                estimator,
                q_levels,
                samples,
                eta,
                mode,
                gtg_eps,
                wshap_alpha,
                wshap_beta,
            };
            print!("{}", commands::value_command(&args)?);
        }
        Command::Sweep { config, param, values } => {
            commands::sweep_command(&config, &param, &values)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::FAILURE
        }
    }
}
