//! `solve`, `sweep` and `generr`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use fdr_core::generr::{generalization_report, ROUTE_TOLERANCE};
use fdr_core::io;
use fdr_core::oracle::{brute_force_regularized, MirrorDescentOptions};
use fdr_core::solver::n_monotone;
use fdr_core::{FdrProblem, GenErrReport, SolverOptions};

use crate::config::{AlgorithmChoice, Config};
use crate::error::CliError;

fn solver_options(cfg: &Config) -> SolverOptions {
    let mut opts = SolverOptions::default();
    if let Some(tol) = cfg.tol {
        opts.tol = tol;
    }
    opts
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", path.display())))
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Core(e.into())
}

/// Writes the posterior table to `out` (or `stdout`) and the summary to
/// `stdout`. With `oracle_trace` set, also runs mirror descent and writes its
/// per-iteration distance to the posterior.
pub fn run_solve(config: &Path, oracle_trace: Option<&Path>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = Config::load(config)?;
    let gen = cfg.require_divergence()?;
    let lambda = cfg.require_lambda()?;
    let (support, loss) = io::read_support_file(cfg.require_path(&cfg.support_csv, "support_csv")?)
        .map_err(CliError::input)?;
    let problem = FdrProblem::new(gen, &support, &loss).map_err(CliError::input)?.with_options(solver_options(&cfg));
    let post = problem.posterior(lambda).map_err(CliError::solve)?;

    match &cfg.out {
        Some(path) => {
            let mut w = create(path)?;
            io::write_solution(&mut w, &support, &loss, &post)?;
            w.flush().map_err(io_err)?;
        }
        None => io::write_solution(&mut *stdout, &support, &loss, &post)?,
    }
    io::write_summary(&mut *stdout, &post, problem.dual_value_at(&post))?;

    if let Some(path) = oracle_trace {
        let res = brute_force_regularized(
            &gen,
            &support,
            &loss,
            lambda,
            &MirrorDescentOptions::default(),
            Some(&post.weights),
        )?;
        let mut w = create(path)?;
        io::write_trace(&mut w, &res.trace)?;
        w.flush().map_err(io_err)?;
    }
    Ok(())
}

/// Writes the sweep table followed by `# N_monotone=true|false`.
pub fn run_sweep(config: &Path, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = Config::load(config)?;
    let gen = cfg.require_divergence()?;
    let grid = cfg.require_grid()?;
    let (support, loss) = io::read_support_file(cfg.require_path(&cfg.support_csv, "support_csv")?)
        .map_err(CliError::input)?;
    let problem = FdrProblem::new(gen, &support, &loss).map_err(CliError::input)?.with_options(solver_options(&cfg));
    let records = problem.sweep(grid)?;

    let mut buf = Vec::new();
    io::write_sweep(&mut buf, &records)?;
    writeln!(buf, "# N_monotone={}", n_monotone(&records)).map_err(io_err)?;
    match &cfg.out {
        Some(path) => {
            let mut w = create(path)?;
            w.write_all(&buf).map_err(io_err)?;
            w.flush().map_err(io_err)
        }
        None => stdout.write_all(&buf).map_err(io_err),
    }
}

/// Loads the law, builds the report and writes it. Route disagreement is
/// reported after the CSV is written.
pub fn run_generr(config: &Path, stdout: &mut dyn Write) -> Result<GenErrReport, CliError> {
    let cfg = Config::load(config)?;
    let gen = cfg.require_divergence()?;
    let lambda = cfg.require_lambda()?;
    let choice = cfg.algorithm_choice()?;
    let (support, _) = io::read_support_file(cfg.require_path(&cfg.support_csv, "support_csv")?)
        .map_err(CliError::input)?;
    let law = io::read_law_file(cfg.require_path(&cfg.law_csv, "law_csv")?).map_err(CliError::input)?;
    let ids: Vec<String> = law.iter().map(|(id, _)| id.clone()).collect();
    let tables = io::read_loss_table_file(cfg.require_path(&cfg.loss_table_csv, "loss_table_csv")?, &ids, &support)
        .map_err(CliError::input)?;
    let law = io::tabulated_law(law, tables).map_err(CliError::input)?;
    let alg = match choice {
        AlgorithmChoice::Fdr => None,
        AlgorithmChoice::Extensional => Some(
            io::read_algorithm_file(cfg.require_path(&cfg.algorithm_csv, "algorithm_csv")?, &ids, &support)
                .map_err(CliError::input)?,
        ),
    };
    let report = generalization_report(&gen, lambda, &support, &law, alg.as_ref()).map_err(|e| match e {
        fdr_core::FdrError::Consistency(_) => CliError::RouteDisagreement(f64::NAN),
        other => CliError::solve(other),
    })?;

    match &cfg.out {
        Some(path) => {
            let mut w = create(path)?;
            io::write_generr(&mut w, &report)?;
            w.flush().map_err(io_err)?;
        }
        None => io::write_generr(&mut *stdout, &report)?,
    }
    if !report.routes_agree(ROUTE_TOLERANCE) {
        return Err(CliError::RouteDisagreement(report.max_disagreement()));
    }
    Ok(report)
}
