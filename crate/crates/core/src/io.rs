//! CSV schemas and float formatting shared with the command-line driver.
//!
//! Inputs (header row required, UTF-8, `.` decimal separator):
//!
//! | file        | columns                      |
//! |-------------|------------------------------|
//! | support     | `atom_id,weight,loss`        |
//! | law         | `dataset_id,prob`            |
//! | algorithm   | `dataset_id,atom_id,mass`    |
//! | loss table  | `dataset_id,atom_id,loss`    |
//!
//! Floats are written with 17 significant digits in the style of C's `%.17g`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::Deserialize;

use crate::error::{FdrError, Result};
use crate::generr::GenErrReport;
use crate::learning::{StochasticAlgorithm, TabulatedLaw};
use crate::model_space::{Atom, LossTable, ModelSupport};
use crate::oracle::TraceRow;
use crate::solver::{Posterior, SweepRecord};

pub const SWEEP_HEADER: [&str; 10] =
    ["lambda", "admissible", "N", "risk", "divergence", "eta", "primal", "dual", "gap", "dN_dlambda"];
pub const SOLUTION_HEADER: [&str; 5] = ["atom_id", "q", "loss", "rnd", "weight"];
pub const SUMMARY_HEADER: [&str; 7] = ["N", "risk", "divergence", "eta", "primal", "dual", "gap"];
pub const ROUTE_HEADER: [&str; 2] = ["route", "value"];
pub const GENERR_ROW_HEADER: [&str; 5] = ["dataset_id", "N", "risk_train", "risk_marginal", "gap"];
pub const TRACE_HEADER: [&str; 3] = ["iter", "objective", "tv_to_closed_form"];

/// Formats like `printf("%.17g")`, with `nan`, `inf` and `-inf` for
/// non-finite values and `0` for both signed zeros.
pub fn fmt_g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let fixed = format!("{x:.*}", (16 - exp) as usize);
        trim_zeros(&fixed).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn check_header<R: Read>(reader: &mut csv::Reader<R>, expected: &[&str], what: &str) -> Result<()> {
    let headers = reader.headers()?;
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != expected {
        return Err(FdrError::InvalidInput(format!(
            "{what} CSV header must be `{}`, got `{}`",
            expected.join(","),
            got.join(",")
        )));
    }
    Ok(())
}

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(r)
}

#[derive(Debug, Deserialize)]
struct SupportRow {
    atom_id: String,
    weight: f64,
    loss: f64,
}

/// Reads `atom_id,weight,loss` into a finite support and its loss table.
pub fn read_support<R: Read>(r: R) -> Result<(ModelSupport, LossTable)> {
    let mut reader = csv_reader(r);
    check_header(&mut reader, &["atom_id", "weight", "loss"], "support")?;
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    let mut losses = Vec::new();
    for row in reader.deserialize() {
        let row: SupportRow = row?;
        if atoms.iter().any(|a: &Atom| a.id == row.atom_id) {
            return Err(FdrError::InvalidInput(format!("duplicate atom `{}`", row.atom_id)));
        }
        atoms.push(Atom::named(row.atom_id));
        weights.push(row.weight);
        losses.push(row.loss);
    }
    ModelSupport::with_losses(atoms, weights, losses)
}

#[derive(Debug, Deserialize)]
struct LawRow {
    dataset_id: String,
    prob: f64,
}

/// Reads `dataset_id,prob`. Probabilities are validated when the law is
/// assembled.
pub fn read_law<R: Read>(r: R) -> Result<Vec<(String, f64)>> {
    let mut reader = csv_reader(r);
    check_header(&mut reader, &["dataset_id", "prob"], "law")?;
    let mut out: Vec<(String, f64)> = Vec::new();
    for row in reader.deserialize() {
        let row: LawRow = row?;
        if out.iter().any(|(id, _)| *id == row.dataset_id) {
            return Err(FdrError::InvalidInput(format!("duplicate dataset `{}`", row.dataset_id)));
        }
        out.push((row.dataset_id, row.prob));
    }
    if out.is_empty() {
        return Err(FdrError::InvalidInput("law CSV has no rows".into()));
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
struct CellRow {
    dataset_id: String,
    atom_id: String,
    value: f64,
}

fn read_cells<R: Read>(r: R, value_col: &str, what: &str) -> Result<Vec<CellRow>> {
    let mut reader = csv_reader(r);
    check_header(&mut reader, &["dataset_id", "atom_id", value_col], what)?;
    // rename the value column so one row type serves both schemas
    reader.set_headers(csv::StringRecord::from(vec!["dataset_id", "atom_id", "value"]));
    reader.deserialize().map(|row| row.map_err(FdrError::from)).collect()
}

/// Places cell values into a `datasets × atoms` matrix; missing cells are
/// `None`.
fn cell_matrix(
    cells: Vec<CellRow>,
    dataset_ids: &[String],
    support: &ModelSupport,
    what: &str,
) -> Result<Vec<Vec<Option<f64>>>> {
    let ds: HashMap<&str, usize> = dataset_ids.iter().enumerate().map(|(i, d)| (d.as_str(), i)).collect();
    let atoms: HashMap<&str, usize> =
        support.atoms().iter().enumerate().map(|(i, a)| (a.id.as_str(), i)).collect();
    let mut m = vec![vec![None; support.len()]; dataset_ids.len()];
    for c in cells {
        let z = *ds
            .get(c.dataset_id.as_str())
            .ok_or_else(|| FdrError::InvalidInput(format!("{what}: unknown dataset `{}`", c.dataset_id)))?;
        let i = *atoms.get(c.atom_id.as_str()).ok_or_else(|| {
            FdrError::InvalidInput(format!("{what}: atom `{}` is not in the reference support", c.atom_id))
        })?;
        if m[z][i].replace(c.value).is_some() {
            return Err(FdrError::InvalidInput(format!(
                "{what}: duplicate entry for ({}, {})",
                c.dataset_id, c.atom_id
            )));
        }
    }
    Ok(m)
}

/// Reads `dataset_id,atom_id,mass`. Cells not listed carry zero mass.
pub fn read_algorithm<R: Read>(r: R, dataset_ids: &[String], support: &ModelSupport) -> Result<StochasticAlgorithm> {
    let cells = read_cells(r, "mass", "algorithm")?;
    let m = cell_matrix(cells, dataset_ids, support, "algorithm")?;
    StochasticAlgorithm::new(m.into_iter().map(|row| row.into_iter().map(|v| v.unwrap_or(0.0)).collect()).collect())
}

/// Reads `dataset_id,atom_id,loss`. Every (dataset, atom) cell is required.
pub fn read_loss_tables<R: Read>(r: R, dataset_ids: &[String], support: &ModelSupport) -> Result<Vec<LossTable>> {
    let cells = read_cells(r, "loss", "loss table")?;
    let m = cell_matrix(cells, dataset_ids, support, "loss table")?;
    m.into_iter()
        .zip(dataset_ids)
        .map(|(row, id)| {
            let values = row
                .into_iter()
                .enumerate()
                .map(|(i, v)| {
                    v.ok_or_else(|| {
                        FdrError::InvalidInput(format!(
                            "loss table: missing entry for ({id}, {})",
                            support.atoms()[i].id
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            LossTable::for_dataset(values, id.clone())
        })
        .collect()
}

/// Assembles a tabulated law from a law file and a loss-table file.
pub fn tabulated_law(law: Vec<(String, f64)>, tables: Vec<LossTable>) -> Result<TabulatedLaw> {
    let (ids, probs): (Vec<_>, Vec<_>) = law.into_iter().unzip();
    TabulatedLaw::new(ids, probs, tables)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| {
        FdrError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

pub fn read_support_file(path: &Path) -> Result<(ModelSupport, LossTable)> {
    read_support(open(path)?)
}

pub fn read_law_file(path: &Path) -> Result<Vec<(String, f64)>> {
    read_law(open(path)?)
}

pub fn read_algorithm_file(path: &Path, dataset_ids: &[String], support: &ModelSupport) -> Result<StochasticAlgorithm> {
    read_algorithm(open(path)?, dataset_ids, support)
}

pub fn read_loss_table_file(path: &Path, dataset_ids: &[String], support: &ModelSupport) -> Result<Vec<LossTable>> {
    read_loss_tables(open(path)?, dataset_ids, support)
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().flexible(true).from_writer(w)
}

pub fn write_sweep<W: Write>(w: W, records: &[SweepRecord]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(SWEEP_HEADER)?;
    for r in records {
        out.write_record([
            fmt_g17(r.lambda),
            if r.admissible { "1".into() } else { "0".into() },
            fmt_g17(r.n),
            fmt_g17(r.risk),
            fmt_g17(r.divergence),
            fmt_g17(r.eta),
            fmt_g17(r.primal),
            fmt_g17(r.dual),
            fmt_g17(r.gap),
            fmt_g17(r.dn_dlambda),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_solution<W: Write>(w: W, support: &ModelSupport, loss: &LossTable, post: &Posterior) -> Result<()> {
    let mut out = writer(w);
    out.write_record(SOLUTION_HEADER)?;
    for i in 0..support.len() {
        out.write_record([
            support.atoms()[i].id.clone(),
            fmt_g17(support.weights()[i]),
            fmt_g17(loss.values[i]),
            fmt_g17(post.rnd[i]),
            fmt_g17(post.weights[i]),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Header plus one row: `N,risk,divergence,eta,primal,dual,gap`.
pub fn write_summary<W: Write>(w: W, post: &Posterior, dual: f64) -> Result<()> {
    let mut out = writer(w);
    out.write_record(SUMMARY_HEADER)?;
    let primal = post.primal();
    out.write_record(
        [post.n_of_lambda, post.risk, post.divergence, post.eta, primal, dual, (primal - dual).abs()].map(fmt_g17),
    )?;
    out.flush()?;
    Ok(())
}

/// Route table followed by the per-dataset table. Routes that do not apply
/// are written as `nan`.
pub fn write_generr<W: Write>(w: W, report: &GenErrReport) -> Result<()> {
    let mut out = writer(w);
    out.write_record(ROUTE_HEADER)?;
    for (name, v) in report.routes() {
        out.write_record([name.to_string(), fmt_g17(v.unwrap_or(f64::NAN))])?;
    }
    out.write_record(GENERR_ROW_HEADER)?;
    for r in &report.rows {
        out.write_record([
            r.dataset_id.clone(),
            fmt_g17(r.n),
            fmt_g17(r.risk_train),
            fmt_g17(r.risk_marginal),
            fmt_g17(r.gap),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_trace<W: Write>(w: W, rows: &[TraceRow]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(TRACE_HEADER)?;
    for r in rows {
        out.write_record([r.iter.to_string(), fmt_g17(r.objective), fmt_g17(r.tv_to_closed_form)])?;
    }
    out.flush()?;
    Ok(())
}
