use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lattice_integrators::runner::{run_suite, RunError, RunOptions};

#[derive(Parser)]
#[command(name = "latint", version, about = "Run lattice integrator validation suites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every scenario in a suite file and write reports.
    Run {
        suite: PathBuf,
        #[arg(long, env = "LATINT_OUT_DIR", default_value = "latint-out")]
        out: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Seed used for every scenario instead of its own.
        #[arg(long)]
        seed: Option<u64>,
        /// Only run scenarios whose id matches this glob.
        #[arg(long)]
        filter: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let Command::Run { suite, out, jobs, seed, filter } = cli.command;
    let options = RunOptions { jobs, seed, filter };
    match run_suite(&suite, &out, &options) {
        Ok(report) => {
            for r in &report.reports {
                let status = if r.passed { "PASS" } else { "FAIL" };
                match &r.error {
                    Some(e) => println!("{status} {} ({e})", r.id),
                    None => println!("{status} {}", r.id),
                }
            }
            let failed = report.reports.iter().filter(|r| !r.passed).count();
            println!("{} scenarios, {failed} failed; reports in {}", report.reports.len(), out.display());
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e @ (RunError::Schema(_) | RunError::Usage(_))) => {
            eprintln!("{}: {e}", suite.display());
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
