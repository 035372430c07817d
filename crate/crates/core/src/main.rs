use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use comcheck::cli::{self, Case, ExitStatus};
use comcheck::diagnostics::DEFAULT_COM_TOLERANCE;

#[derive(Parser)]
#[command(name = "comcheck", version, about = "MCTDHB runs checked against exact center-of-mass dynamics")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one configuration file.
    Run { config: PathBuf },
    /// Recompute a figure or table and compare with its reference values.
    Reproduce {
        case: String,
        /// Include runs that take hours (fragmenton with M = 3).
        #[arg(long)]
        extended: bool,
        /// Parent directory of the case output.
        #[arg(long, default_value = "reproduce")]
        out: PathBuf,
    },
    /// COM test of run A against reference run B (directories or time-series CSV files).
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = DEFAULT_COM_TOLERANCE)]
        tol: f64,
        /// Write the full report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every configuration matching a glob, concurrently.
    Scan { pattern: String },
}

fn fail(e: &comcheck::Error) -> ExitStatus {
    error!("{e}");
    eprintln!("error: {e}");
    cli::exit_status(e)
}

fn execute(command: Command) -> ExitStatus {
    match command {
        Command::Run { config } => match cli::run_config(&config) {
            Ok(art) => {
                let s = &art.summary;
                println!("output: {}", art.directory.display());
                if let Some(e) = s.final_energy {
                    println!("final energy: {e:.10}");
                }
                for r in &s.reports {
                    let tag = if r.advisory { " (advisory)" } else { "" };
                    println!("{}: {} (metric {:.4e}, threshold {:.4e}){tag}", r.test, r.verdict, r.metric, r.threshold);
                }
                if let Some(a) = &s.abort {
                    println!("aborted: {a}");
                }
                art.exit_status()
            }
            Err(e) => fail(&e),
        },
        Command::Reproduce { case, extended, out } => {
            let case: Case = match case.parse() {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            match cli::reproduce(case, extended, &out) {
                Ok(rep) => {
                    for c in &rep.checks {
                        let tag = if c.informational {
                            "info"
                        } else if c.passed {
                            "pass"
                        } else {
                            "FAIL"
                        };
                        println!("[{tag}] {}: {:.6e}", c.name, c.value);
                    }
                    println!("output: {}", rep.directory.display());
                    rep.status
                }
                Err(e) => fail(&e),
            }
        }
        Command::Compare { a, b, tol, out } => match cli::compare(&a, &b, tol, out.as_deref()) {
            Ok(res) => {
                let r = &res.report;
                println!("{}: {} (metric {:.4e}, threshold {:.4e})", r.test, r.verdict, r.metric, r.threshold);
                if r.passed() {
                    ExitStatus::Success
                } else {
                    ExitStatus::DiagnosticFailure
                }
            }
            Err(e) => fail(&e),
        },
        Command::Scan { pattern } => match cli::scan(&pattern) {
            Ok(entries) => {
                let mut worst = ExitStatus::Success;
                for e in &entries {
                    println!("{} [{}] {}", e.config.display(), e.status.code(), e.detail);
                    worst = worst.worst(e.status);
                }
                worst
            }
            Err(e) => fail(&e),
        },
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    ExitCode::from(execute(args.command).code() as u8)
}
