use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hphdg_cli::output::format_audit;
use hphdg_cli::{audit, flux_check, read_config, run};

#[derive(Parser)]
#[command(name = "hphdg", version, about = "hp-adaptive HDG solver for Friedrichs systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the adaptive solve described by a config file.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Treat assumption violations and degenerate flux points as errors.
        #[arg(long)]
        strict: bool,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the assumption report of the configured problem.
    Audit {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare reduced and brute-force upwind fluxes at random samples.
    OracleFluxcheck {
        #[arg(long)]
        system: String,
        #[arg(long, default_value_t = 500)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

/// Relative flux mismatch accepted by `oracle-fluxcheck`.
const FLUX_TOLERANCE: f64 = 1e-11;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve { config, strict, out } => read_config(&config).and_then(|mut c| {
            c.strict |= strict;
            if let Some(o) = out {
                c.output_dir = o;
            }
            let outcome = run(&c)?;
            let last = outcome.result.history.last().expect("at least one cycle");
            println!(
                "{} after {} cycle(s): {} elements, {} trace dofs, estimate {:.4e}{}",
                outcome.result.status.name(),
                last.cycle,
                last.elements,
                last.trace_dofs,
                last.estimate,
                last.l2_error.map(|e| format!(", L2 error {e:.4e}")).unwrap_or_default()
            );
            println!("results in {}", c.output_dir.display());
            Ok(true)
        }),
        Command::Audit { config } => read_config(&config).and_then(|c| {
            let report = audit(&c)?;
            print!("{}", format_audit(&report));
            Ok(report.passed())
        }),
        Command::OracleFluxcheck { system, samples, seed } => flux_check(&system, samples, seed).map(|r| {
            println!("{} samples, {} degenerate skipped, max relative error {:.3e}", r.samples, r.degenerate, r.max_error);
            r.max_error <= FLUX_TOLERANCE
        }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
