//! Flat `key = value` configuration files.
//!
//! ```text
//! # chi-squared on three atoms
//! divergence  = "chi_squared"
//! lambda      = 1
//! support_csv = support.csv
//! out         = solution.csv
//! ```
//!
//! | key              | value                                              |
//! |------------------|----------------------------------------------------|
//! | `divergence`     | `kl`, `reverse_kl`, `chi_squared`, `hellinger_sq`, `alpha:<float>` |
//! | `lambda`         | positive float                                     |
//! | `lambda_grid`    | `start:stop:count`, log-spaced, `count ≥ 1`        |
//! | `support_csv`    | `atom_id,weight,loss`                              |
//! | `law_csv`        | `dataset_id,prob`                                  |
//! | `loss_table_csv` | `dataset_id,atom_id,loss`                          |
//! | `algorithm`      | `fdr` or `extensional`                             |
//! | `algorithm_csv`  | `dataset_id,atom_id,mass`                          |
//! | `out`            | output path; stdout when absent                    |
//! | `tol`            | residual tolerance of the normalization solver     |
//!
//! Values may be double-quoted. Relative paths resolve against the directory
//! of the configuration file. Unknown and repeated keys are errors.

use std::path::{Path, PathBuf};

use fdr_core::DivergenceGenerator;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgorithmChoice {
    /// The regularized posterior of every dataset.
    Fdr,
    /// Conditionals listed in `algorithm_csv`.
    Extensional,
}

#[derive(Debug, Clone, Default)]
pub struct Config {
    pub divergence: Option<DivergenceGenerator>,
    pub lambda: Option<f64>,
    pub lambda_grid: Option<Vec<f64>>,
    pub support_csv: Option<PathBuf>,
    pub law_csv: Option<PathBuf>,
    pub loss_table_csv: Option<PathBuf>,
    pub algorithm: Option<AlgorithmChoice>,
    pub algorithm_csv: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub tol: Option<f64>,
}

fn config_err(line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("line {line}: {msg}"))
}

/// Drops a trailing comment outside double quotes.
fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn unquote(v: &str) -> &str {
    v.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(v)
}

fn positive(v: &str, what: &str) -> Result<f64, String> {
    let x: f64 = v.parse().map_err(|_| format!("{what} must be a number, got `{v}`"))?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(format!("{what} must be positive and finite, got `{v}`"));
    }
    Ok(x)
}

/// Parses `start:stop:count` into a log-spaced ascending grid.
pub fn parse_lambda_grid(v: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = v.split(':').map(str::trim).collect();
    let [start, stop, count] = parts[..] else {
        return Err(format!("lambda_grid must be start:stop:count, got `{v}`"));
    };
    let start = positive(start, "lambda_grid start")?;
    let stop = positive(stop, "lambda_grid stop")?;
    let count: usize = count.parse().map_err(|_| format!("lambda_grid count must be an integer, got `{count}`"))?;
    if count == 0 {
        return Err("lambda_grid count must be at least 1".into());
    }
    if stop < start {
        return Err(format!("lambda_grid stop {stop} is below start {start}"));
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    let (a, b) = (start.ln(), stop.ln());
    let mut grid: Vec<f64> = (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect();
    grid[0] = start;
    grid[count - 1] = stop;
    Ok(grid)
}

impl Config {
    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut cfg = Config::default();
        let mut seen: Vec<String> = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| config_err(line_no, "expected `key = value`"))?;
            let key = key.trim();
            let value = unquote(value.trim()).trim();
            if seen.iter().any(|k| k == key) {
                return Err(config_err(line_no, format!("duplicate key `{key}`")));
            }
            seen.push(key.to_string());
            let path = || Some(base.join(value));
            match key {
                "divergence" => {
                    cfg.divergence = Some(value.parse().map_err(|e| config_err(line_no, e))?);
                }
                "lambda" => cfg.lambda = Some(positive(value, "lambda").map_err(|e| config_err(line_no, e))?),
                "lambda_grid" => {
                    cfg.lambda_grid = Some(parse_lambda_grid(value).map_err(|e| config_err(line_no, e))?);
                }
                "tol" => cfg.tol = Some(positive(value, "tol").map_err(|e| config_err(line_no, e))?),
                "algorithm" => {
                    cfg.algorithm = Some(match value {
                        "fdr" => AlgorithmChoice::Fdr,
                        "extensional" => AlgorithmChoice::Extensional,
                        other => {
                            return Err(config_err(
                                line_no,
                                format!("algorithm must be `fdr` or `extensional`, got `{other}`"),
                            ))
                        }
                    })
                }
                "support_csv" => cfg.support_csv = path(),
                "law_csv" => cfg.law_csv = path(),
                "loss_table_csv" => cfg.loss_table_csv = path(),
                "algorithm_csv" => cfg.algorithm_csv = path(),
                "out" => cfg.out = path(),
                other => return Err(config_err(line_no, format!("unknown key `{other}`"))),
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    fn missing(key: &str) -> CliError {
        CliError::Config(format!("missing key `{key}`"))
    }

    pub fn require_divergence(&self) -> Result<DivergenceGenerator, CliError> {
        self.divergence.ok_or_else(|| Self::missing("divergence"))
    }

    pub fn require_lambda(&self) -> Result<f64, CliError> {
        self.lambda.ok_or_else(|| Self::missing("lambda"))
    }

    pub fn require_grid(&self) -> Result<&[f64], CliError> {
        self.lambda_grid.as_deref().ok_or_else(|| Self::missing("lambda_grid"))
    }

    pub fn require_path<'a>(&self, value: &'a Option<PathBuf>, key: &str) -> Result<&'a Path, CliError> {
        value.as_deref().ok_or_else(|| Self::missing(key))
    }

    /// `algorithm` defaults to `extensional` when `algorithm_csv` is set and
    /// to `fdr` otherwise.
    pub fn algorithm_choice(&self) -> Result<AlgorithmChoice, CliError> {
        match (self.algorithm, &self.algorithm_csv) {
            (Some(AlgorithmChoice::Fdr), Some(_)) => {
                Err(CliError::Config("algorithm = fdr does not take algorithm_csv".into()))
            }
            (Some(AlgorithmChoice::Extensional), None) => Err(Self::missing("algorithm_csv")),
            (Some(a), _) => Ok(a),
            (None, Some(_)) => Ok(AlgorithmChoice::Extensional),
            (None, None) => Ok(AlgorithmChoice::Fdr),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Config, CliError> {
        Config::parse(text, Path::new("/cfg"))
    }

    #[test]
    fn full_config() {
        let cfg = parse(
            "# comment\n divergence = \"alpha:0.5\"  # trailing\nlambda=2\nsupport_csv = s.csv\nout=\"o#1.csv\"\ntol = 1e-12\n",
        )
        .unwrap();
        assert_eq!(cfg.divergence.unwrap().to_string(), DivergenceGenerator::alpha(0.5).unwrap().to_string());
        assert_eq!(cfg.lambda, Some(2.0));
        assert_eq!(cfg.support_csv.as_deref(), Some(Path::new("/cfg/s.csv")));
        assert_eq!(cfg.out.as_deref(), Some(Path::new("/cfg/o#1.csv")));
        assert_eq!(cfg.tol, Some(1e-12));
    }

    #[test]
    fn rejects_bad_lines() {
        for text in [
            "lambda\n",
            "lambda = -1\n",
            "lambda = x\n",
            "colour = red\n",
            "lambda = 1\nlambda = 2\n",
            "divergence = tsallis\n",
            "algorithm = gibbs\n",
            "lambda_grid = 1:2:0\n",
            "lambda_grid = 1:2\n",
            "lambda_grid = 2:1:3\n",
        ] {
            assert!(matches!(parse(text), Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn grid_is_log_spaced() {
        let g = parse_lambda_grid("0.5:2:3").unwrap();
        assert_eq!(g, vec![0.5, 1.0, 2.0]);
        assert_eq!(parse_lambda_grid("3:3:1").unwrap(), vec![3.0]);
        let g = parse_lambda_grid("0.1:10:5").unwrap();
        for w in g.windows(2) {
            assert!((w[1] / w[0] - 10f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn algorithm_defaults() {
        assert_eq!(parse("").unwrap().algorithm_choice().unwrap(), AlgorithmChoice::Fdr);
        assert_eq!(parse("algorithm_csv = a.csv").unwrap().algorithm_choice().unwrap(), AlgorithmChoice::Extensional);
        assert!(parse("algorithm = extensional").unwrap().algorithm_choice().is_err());
        assert!(parse("algorithm = fdr\nalgorithm_csv = a.csv").unwrap().algorithm_choice().is_err());
    }
}
