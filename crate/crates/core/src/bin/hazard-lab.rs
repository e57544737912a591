use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hazard_lab::lab::{exit_code_for, read_report, run_scenario, Overrides};
use hazard_lab::scenario::{Scenario, BUNDLED};
use hazard_lab::stats::with_thread_cap;

/// Monte Carlo laboratory for random times, Azéma supermartingales and
/// hazard processes. HAZARD_LAB_THREADS caps the worker threads.
#[derive(Parser)]
#[command(name = "hazard-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file (or a bundled scenario name) and write its report.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the bundled scenarios.
    ListScenarios,
    /// Print the summary of a report directory.
    Report { dir: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let code = match cli.command {
        Command::Run { config, seed, paths, out } => {
            let overrides = Overrides { seed, paths, out };
            let result = Scenario::load(&config)
                .and_then(|s| overrides.apply(&s))
                .and_then(|s| with_thread_cap(|| run_scenario(&s)));
            match result {
                Ok(artifact) => {
                    print!("{}", artifact.summary);
                    println!("report written to {}", artifact.dir.display());
                    artifact.exit_code
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_code_for(&e)
                }
            }
        }
        Command::ListScenarios => {
            for (name, _) in BUNDLED {
                match Scenario::bundled(name) {
                    Ok(s) => println!("{s}"),
                    Err(e) => println!("{name}: {e}"),
                }
            }
            0
        }
        Command::Report { dir } => match read_report(&dir) {
            Ok(report) => {
                print!("{}", report.summary);
                report.exit_code()
            }
            Err(e) => {
                eprintln!("error: {e}");
                exit_code_for(&e)
            }
        },
    };
    ExitCode::from(code as u8)
}
