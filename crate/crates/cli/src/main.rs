mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::CliError;

#[derive(Parser)]
#[command(name = "riemstat", version, about = "Fréchet means, limit-theorem diagnostics and Monte Carlo experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Common {
    /// JSON configuration file
    #[arg(long)]
    pub config: PathBuf,
    /// Root seed (overrides the configuration)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (0 = one per core)
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Empirical Fréchet mean of a points file
    Mean(Common),
    /// Condition report and Lindeberg curves for a model family
    Diagnose(Common),
    /// Monte Carlo experiment (modes: wlln, euclidean, clt)
    Experiment {
        #[command(flatten)]
        common: Common,
        /// Overrides the configuration's `mode`
        #[arg(long)]
        mode: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Mean(c) | Command::Diagnose(c) => c,
        Command::Experiment { common, .. } => common,
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(common.threads).build_global() {
        eprintln!("error: cannot start thread pool: {e}");
        return ExitCode::from(1);
    }
    let result = match &cli.command {
        Command::Mean(c) => commands::mean(c),
        Command::Diagnose(c) => commands::diagnose(c),
        Command::Experiment { common, mode } => commands::experiment(common, mode.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::UnknownMode(_) = e {
                use clap::CommandFactory;
                let mut cmd = Cli::command();
                if let Some(sub) = cmd.find_subcommand_mut("experiment") {
                    eprintln!("{}", sub.render_usage());
                }
            }
            ExitCode::from(e.exit_code())
        }
    }
}
