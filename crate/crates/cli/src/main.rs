use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fdr_cli::verify::{run_instances, run_seeded, Instance, VerifyCaps, VerifyReport};
use fdr_cli::{run_generr, run_solve, run_sweep, CliError};

#[derive(Parser)]
#[command(name = "fdr", version, about = "Risk minimization with f-divergence regularization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve at one factor; writes the posterior table and a summary line.
    Solve {
        config: PathBuf,
        /// Also run the mirror-descent oracle and write its trace here.
        #[arg(long)]
        oracle_trace: Option<PathBuf>,
    },
    /// Evaluate a log-spaced grid of factors.
    Sweep { config: PathBuf },
    /// Compare the generalization-error routes on a finite law.
    Generr { config: PathBuf },
    /// Run the randomized property suite.
    Verify {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = VerifyCaps::default().instances)]
        instances: usize,
        #[arg(long, default_value_t = VerifyCaps::default().atoms)]
        max_atoms: usize,
        #[arg(long, default_value_t = VerifyCaps::default().datasets)]
        max_datasets: usize,
        /// Where failing instances are written as JSON.
        #[arg(long, default_value = "fdr-verify-failures.json")]
        failure_out: PathBuf,
        /// Re-run the instances stored in a failure file instead of drawing new ones.
        #[arg(long)]
        replay: Option<PathBuf>,
    },
}

fn verify(
    seed: u64,
    caps: VerifyCaps,
    failure_out: PathBuf,
    replay: Option<PathBuf>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    if caps.instances == 0 || caps.atoms == 0 || caps.datasets == 0 {
        return Err(CliError::Config("verify caps must be positive".into()));
    }
    let report: VerifyReport = match replay {
        Some(path) => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            let instances: Vec<Instance> = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            run_instances(&instances)
        }
        None => run_seeded(seed, &caps)?,
    };
    stdout.write_all(report.text.as_bytes()).map_err(|e| CliError::Core(e.into()))?;
    if report.failed > 0 {
        let json = serde_json::to_string_pretty(&report.failures).expect("instances serialize");
        std::fs::write(&failure_out, json)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", failure_out.display())))?;
        eprintln!("failing instances written to {}", failure_out.display());
        return Err(CliError::PropertyFailure { failed: report.failed });
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let res = match cli.command {
        Command::Solve { config, oracle_trace } => run_solve(&config, oracle_trace.as_deref(), &mut out),
        Command::Sweep { config } => run_sweep(&config, &mut out),
        Command::Generr { config } => run_generr(&config, &mut out).map(|_| ()),
        Command::Verify { seed, instances, max_atoms, max_datasets, failure_out, replay } => verify(
            seed,
            VerifyCaps { instances, atoms: max_atoms, datasets: max_datasets },
            failure_out,
            replay,
            &mut out,
        ),
    };
    let _ = out.flush();
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
