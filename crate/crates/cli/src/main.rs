use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use relayfl_core::experiment::{load_config, run_experiment, summarize, theorem_sweep, write_csv, ExperimentConfig};
use relayfl_core::Error;

#[derive(Parser)]
#[command(name = "relayfl", version, about = "Relay-assisted over-the-air federated learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Overrides master_seed from the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo federated training runs.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Single-relay certification: analytic construction vs the relay-free optimum.
    TheoremSweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) => 2,
        _ => 1,
    }
}

fn configure(path: &PathBuf, seed: Option<u64>) -> relayfl_core::Result<ExperimentConfig> {
    let mut config = load_config(path)?;
    if let Some(seed) = seed {
        config.master_seed = seed;
    }
    Ok(config)
}

fn execute(cli: Cli) -> relayfl_core::Result<()> {
    match cli.command {
        Command::Run { config, out } => {
            let config = configure(&config, cli.seed)?;
            let rows = run_experiment(&config)?;
            write_csv(&rows, &out)?;
            let summary = summarize(&rows);
            for s in summary.iter().filter(|s| !summary.iter().any(|t| t.sweep_value == s.sweep_value && t.round > s.round)) {
                let label = s.sweep_value.map(|v| format!("{v}: ")).unwrap_or_default();
                println!(
                    "{label}final round {} ({} blocks): nmse {:.3} dB, accuracy {:.4}",
                    s.round, s.blocks_used, s.nmse_db_mean, s.accuracy_mean
                );
            }
        }
        Command::TheoremSweep { config, out } => {
            let config = configure(&config, cli.seed)?;
            let rows = theorem_sweep(&config)?;
            write_csv(&rows, &out)?;
            let certified: Vec<_> = rows
                .iter()
                .filter(|r| r.round == 0 && r.cond40 == Some(true) && r.cond41 == Some(true))
                .collect();
            let beaten = certified
                .iter()
                .filter(|r| r.mse_predicted <= r.mse_norelay_bound)
                .count();
            println!(
                "{} of {} instances meet both conditions; construction beats the relay-free optimum in {beaten}",
                certified.len(),
                rows.len() / 2
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("relayfl: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
