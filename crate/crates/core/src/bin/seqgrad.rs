use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use seqgrad::cli::{self, CliResult};

#[derive(Parser)]
#[command(name = "seqgrad", version, about = "Gradient-based discrete sequence design")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize sequences against the configured oracle.
    Design {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Exhaustively find the optimum of a small oracle.
    Enumerate {
        #[arg(long)]
        oracle: PathBuf,
        #[arg(long)]
        n: usize,
    },
    /// Run the simulated-annealing or evolution baseline.
    Anneal {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Design a sequence whose predicted structure matches a target.
    Structure {
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(args: Args) -> CliResult<()> {
    if let Some(threads) = cli::threads_from_env()? {
        // only fails if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    match args.command {
        Command::Design { config, out, seed } => cli::design(&config, &out, seed),
        Command::Enumerate { oracle, n } => {
            println!("{}", cli::enumerate(&oracle, n)?);
            Ok(())
        }
        Command::Anneal { config, out } => cli::anneal(&config, &out),
        Command::Structure { target, config, out } => cli::structure(&target, &config, &out),
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { cli::EXIT_CONFIG as u8 } else { 0 });
        }
    };
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
