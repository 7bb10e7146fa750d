use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use nlfk::harness::{run_property_suite, run_scenario, suite_text, Fault};

#[derive(Parser)]
#[command(name = "nlfk", version, about = "Monte Carlo and finite-difference values of sublinear parabolic PDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum InjectFault {
    TieBreak,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write results.csv, controls.csv, summary.json, report.txt.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; results do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run the property suite and print one line per property.
    Prop {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum)]
        inject_fault: Option<InjectFault>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn init_threads(threads: Option<usize>) -> Result<(), String> {
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| format!("thread pool: {e}")),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, seed, threads } => {
            if let Err(e) = init_threads(threads) {
                eprintln!("{e}");
                return ExitCode::from(2);
            }
            let (code, text) = run_scenario(&config, &out, seed);
            if code == 0 || code == 1 {
                print!("{text}");
            } else {
                eprintln!("{text}");
            }
            ExitCode::from(code as u8)
        }
        Command::Prop { seed, inject_fault, threads } => {
            if let Err(e) = init_threads(threads) {
                eprintln!("{e}");
                return ExitCode::from(2);
            }
            let fault = inject_fault.map(|InjectFault::TieBreak| Fault::TieBreak);
            let lines = run_property_suite(seed, fault);
            print!("{}", suite_text(&lines));
            if lines.iter().all(|l| l.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    }
}
