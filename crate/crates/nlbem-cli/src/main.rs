mod output;
mod run;
mod scenario;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("scenario error: {0}")]
    Schema(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "nlbem", about = "Boundary-integral spectral studies for non-local interactions on closed curves", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file.
    Run {
        scenario: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker thread cap (0 = all cores).
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Write the assembled operators as CSV into this directory.
        #[arg(long)]
        dump_operators: Option<PathBuf>,
    },
    /// Run the embedded invariant checks.
    SelfTest {
        #[arg(long, default_value_t = 128)]
        nodes: usize,
    },
    /// Print the tool version.
    Version,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("NLBEM_LOG", "error")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Version => {
            println!("nlbem {}", env!("CARGO_PKG_VERSION"));
            ExitCode::SUCCESS
        }
        Command::SelfTest { nodes } => {
            let checks = nlbem::selftest::run_all(nodes);
            let mut ok = true;
            for c in &checks {
                ok &= c.passed;
                println!("{} {}: {:.3e} (tol {:.0e})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.tolerance);
            }
            let k = nlbem::special_functions::default_bessel_bound_constants();
            println!("fitted Bessel bound constants: κ₁ = {:.6}, κ̃₁ = {:.6}, κ₂ = {:.6}", k.kappa1, k.kappa1_tilde, k.kappa2);
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }
        Command::Run { scenario, out, threads, dump_operators } => {
            nlbem::parallel::set_threads(threads);
            match run::run_scenario(&scenario, &out, dump_operators.as_deref()) {
                Ok(report) => {
                    println!("{}", report.summary());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code())
                }
            }
        }
    }
}
