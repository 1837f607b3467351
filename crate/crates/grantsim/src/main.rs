use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use grantsim::engine::Experiment;
use grantsim::output::{bound_for, run_command, CliError, RunManifest};

#[derive(Parser)]
#[command(
    name = "grantsim",
    version,
    about = "Sleeping-bandit fast uplink grant scheduling simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment (or a figure recipe) and write CSV artifacts.
    Run {
        /// Path to the config document.
        #[arg(long)]
        config: PathBuf,
        /// Override the config's RNG seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's replication count.
        #[arg(long)]
        reps: Option<u32>,
        /// Output directory for CSVs and the summary.
        #[arg(long)]
        out: PathBuf,
        /// Named figure recipe (fig3..fig9) expanding the config into variants.
        #[arg(long)]
        recipe: Option<String>,
    },
    /// Evaluate the closed-form regret bound for a configuration.
    Bound {
        #[arg(long)]
        config: PathBuf,
    },
    /// Check a config document and report the first problem, if any.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn read_config(path: &PathBuf) -> Result<grantsim::ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(grantsim::parse_config(&text)?)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            seed,
            reps,
            out,
            recipe,
        } => {
            let manifest = RunManifest {
                config_path: config,
                out_dir: out,
                seed,
                replications: reps,
                recipe,
            };
            let summary = run_command(&manifest)?;
            print!("{summary}");
            Ok(())
        }
        Command::Bound { config } => {
            let cfg = read_config(&config)?;
            let exp = Experiment::prepare(cfg)?;
            match bound_for(&exp) {
                Some(bound) => {
                    let cfg = exp.config();
                    println!(
                        "regret bound at T={} (psi={}, f_e1={}, f_e2={}): {:.6e}",
                        cfg.horizon, cfg.psi, cfg.bound_f_e1, cfg.bound_f_e2, bound
                    );
                    Ok(())
                }
                None => Err(CliError::Config(grantsim::ConfigError::Invariant {
                    field: "bound",
                    message: "weighted arm values do not admit the bound (coincident gaps)".into(),
                })),
            }
        }
        Command::Validate { config } => {
            read_config(&config)?;
            println!("ok");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
