use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use unstretch_cli::{experiment_table, load_config, run, Overrides};

#[derive(Parser)]
#[command(name = "unstretch", version, about = "Experiments on Z^d ⋊_A Z and its suspension")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// List experiments with their inputs and outputs.
    List,
}

fn main() -> ExitCode {
    let code = match Cli::parse().command {
        Command::List => {
            print!("{}", experiment_table());
            0
        }
        Command::Run { config, seed, output_dir } => match load_config(&config, &Overrides { seed, output_dir }) {
            Ok(cfg) => run(&cfg),
            Err(e) => {
                eprintln!("error: {}", e.message());
                e.exit_code()
            }
        },
    };
    ExitCode::from(code as u8)
}
