use fdr_core::FdrError;
use thiserror::Error;

/// Failures of a command, each tied to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    /// Carries `λ*` printed with nine significant digits.
    #[error("infeasible: lambda={lambda} is not admissible; lambda_star={}", sig9(*.lambda_star))]
    Infeasible { lambda: f64, lambda_star: f64 },

    #[error("generalization-error routes disagree by {0:e}")]
    RouteDisagreement(f64),

    #[error("{failed} verification propert{} failed", if *.failed == 1 { "y" } else { "ies" })]
    PropertyFailure { failed: usize },

    /// A numerical failure outside the cases above.
    #[error(transparent)]
    Core(#[from] FdrError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Infeasible { .. } => 2,
            CliError::RouteDisagreement(_) => 3,
            CliError::PropertyFailure { .. } => 4,
            CliError::Core(_) => 1,
        }
    }

    /// Errors raised while reading inputs are configuration errors.
    pub fn input(e: FdrError) -> Self {
        CliError::Config(e.to_string())
    }

    /// Maps solver errors, keeping infeasibility distinct.
    pub fn solve(e: FdrError) -> Self {
        match e {
            FdrError::Infeasible { lambda, lambda_star } => CliError::Infeasible { lambda, lambda_star },
            other => CliError::Core(other),
        }
    }
}

/// `%.9g`-style formatting.
pub fn sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    let s = if (-5..9).contains(&exp) {
        format!("{x:.*}", (8 - exp).max(0) as usize)
    } else {
        format!("{x:.8e}")
    };
    if let Some((m, e)) = s.split_once('e') {
        format!("{}e{e}", trim(m))
    } else {
        trim(&s).to_string()
    }
}

fn trim(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
