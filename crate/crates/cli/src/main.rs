use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod plot;

use commands::CliError;
use plot::Which;

/// Moving-target enclosing simulator.
///
/// Set RUST_LOG=debug for progress output.
#[derive(Debug, Parser)]
#[command(name = "sim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write its logs.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Seed sweep `a..b` (or `a..=b`); each seed gets its own subdirectory.
        #[arg(long)]
        seeds: Option<String>,
    },
    /// Check persistent excitation on a logged run.
    CheckPe {
        /// Run directory or trajectory CSV.
        log: PathBuf,
        #[arg(long = "T")]
        t: Option<f64>,
        #[arg(long)]
        omega: Option<f64>,
        #[arg(long)]
        omega_cap: Option<f64>,
        /// Largest setpoint radius.
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        u_bar: Option<f64>,
        /// First window start; defaults to the detected equilibrium step.
        #[arg(long)]
        from: Option<usize>,
        /// Where to write the JSON report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render SVG figures from a logged run.
    Plot {
        /// Run directory or trajectory CSV.
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Figures to draw; all four when omitted.
        #[arg(long, value_enum)]
        which: Vec<Which>,
    },
    /// Check a scenario without running it.
    Validate { scenario: PathBuf },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { scenario, out, seeds } => commands::run(&scenario, &out, seeds.as_deref()),
        Command::CheckPe {
            log,
            t,
            omega,
            omega_cap,
            rho,
            u_bar,
            from,
            out,
        } => commands::check_pe(
            &log,
            commands::PeOverrides {
                t,
                omega,
                omega_cap,
                rho,
                u_bar,
                from,
            },
            out.as_deref(),
        ),
        Command::Plot { log, out, which } => commands::plot(&log, &out, &which),
        Command::Validate { scenario } => commands::validate(&scenario),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
