use clap::{Parser, Subcommand};
use fieldswarm::runner::{self, ExperimentOptions};
use std::path::PathBuf;
use std::process::ExitCode;

/// Multi-UAV weed-mapping simulator.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute every run of an experiment config (JSON or TOML).
    Run {
        config: PathBuf,
        /// Runs executed in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Write one line per message delivery to runs/<id>.trace.txt.
        #[arg(long)]
        trace_messages: bool,
        /// Dump agent positions and the mapped mask every this many seconds.
        #[arg(long, value_name = "SECONDS")]
        snapshot_every: Option<f64>,
    },
    /// Write the ground-truth field generated for one seed.
    DumpField {
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Defaults to field_s<seed>.txt in the current directory.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            jobs,
            trace_messages,
            snapshot_every,
        } => {
            if let Some(s) = snapshot_every.filter(|s| !(*s > 0.0)) {
                eprintln!("error: --snapshot-every must be positive, got {s}");
                return ExitCode::from(2);
            }
            let options = ExperimentOptions {
                jobs,
                trace_messages,
                snapshot_every,
            };
            runner::run_experiment(&config, &options).map(|dir| println!("results in {}", dir.display()))
        }
        Command::DumpField { config, seed, output } => {
            let out = output.unwrap_or_else(|| PathBuf::from(format!("field_s{seed}.txt")));
            runner::dump_field(&config, seed, &out).map(|()| println!("wrote {}", out.display()))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
