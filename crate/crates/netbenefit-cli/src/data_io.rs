//! CSV ingestion and emission.
//!
//! Input convention: header row required, UTF-8, `.` decimal separator,
//! event column 1 = outcome observed (converted to the internal
//! censoring indicator), blank cost cell = censored cost. Emitted floats use
//! the shortest representation that parses back to the same value, so a
//! dataset survives a round trip bit-exactly.

use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use netbenefit::domain::{CostEffectivenessDataset, CurvePoint, Observation, ValidatedDataset};

use crate::config::ColumnMap;

pub fn read_dataset(path: &Path, columns: &ColumnMap, tau: Option<f64>) -> Result<CostEffectivenessDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open input {}", path.display()))?;
    let headers = reader.headers().context("cannot read the header row")?.clone();
    let find = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            anyhow::anyhow!("input {} has no column named `{name}`", path.display())
        })
    };
    let id_col = columns.id.as_deref().map(find).transpose()?;
    let treatment_col = find(&columns.treatment)?;
    let time_col = find(&columns.time)?;
    let event_col = find(&columns.event)?;
    let cost_col = find(&columns.cost)?;
    let covariate_cols: Vec<usize> =
        columns.covariates.iter().map(|c| find(c)).collect::<Result<_>>()?;

    let mut observations = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("cannot read data row {}", row_idx + 1))?;
        let cell = |col: usize| record.get(col).unwrap_or("");
        let parse_f64 = |col: usize, name: &str| -> Result<f64> {
            cell(col).parse::<f64>().map_err(|_| {
                anyhow::anyhow!(
                    "row {}: column `{name}` has non-numeric value `{}`",
                    row_idx + 1,
                    cell(col)
                )
            })
        };
        let id = match id_col {
            Some(c) => cell(c).to_string(),
            None => (row_idx + 1).to_string(),
        };
        // Out-of-range sentinel: dataset validation reports the row.
        let treatment = match cell(treatment_col) {
            "0" => 0u8,
            "1" => 1u8,
            _ => 2u8,
        };
        let observed_time = parse_f64(time_col, &columns.time)?;
        let event_observed = match cell(event_col) {
            "1" => true,
            "0" => false,
            other => bail!(
                "row {}: column `{}` must be 0 or 1, got `{other}`",
                row_idx + 1,
                columns.event
            ),
        };
        let cost_cell = cell(cost_col);
        let cost = if cost_cell.is_empty() {
            None
        } else {
            Some(parse_f64(cost_col, &columns.cost)?)
        };
        let covariates = covariate_cols
            .iter()
            .zip(&columns.covariates)
            .map(|(&c, name)| parse_f64(c, name))
            .collect::<Result<Vec<f64>>>()?;
        observations.push(Observation {
            id,
            treatment,
            observed_time,
            survival_censored: !event_observed,
            cost_censored: cost.is_none(),
            cost,
            covariates,
        });
    }
    Ok(CostEffectivenessDataset {
        observations,
        covariate_names: columns.covariates.clone(),
        tau: tau.unwrap_or(f64::INFINITY),
    })
}

/// Writes a dataset in the same convention `read_dataset` ingests
/// (event = 1 means outcome observed, blank cost = censored).
pub fn write_dataset<W: Write>(mut w: W, dataset: &ValidatedDataset) -> Result<()> {
    write!(w, "id,treatment,time,event,cost")?;
    for name in &dataset.covariate_names {
        write!(w, ",{name}")?;
    }
    writeln!(w)?;
    for o in &dataset.observations {
        write!(
            w,
            "{},{},{},{},",
            o.id,
            o.treatment,
            o.observed_time,
            u8::from(!o.survival_censored)
        )?;
        if let Some(cost) = o.cost {
            write!(w, "{cost}")?;
        }
        for value in &o.covariates {
            write!(w, ",{value}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Writes a curve as `lambda,estimate,ci_lower,ci_upper`; interval cells are
/// left empty when absent.
pub fn write_curve<W: Write>(mut w: W, points: &[CurvePoint]) -> Result<()> {
    writeln!(w, "lambda,estimate,ci_lower,ci_upper")?;
    for p in points {
        write!(w, "{},{},", p.lambda, p.estimate)?;
        if let Some(lo) = p.ci_lower {
            write!(w, "{lo}")?;
        }
        write!(w, ",")?;
        if let Some(hi) = p.ci_upper {
            write!(w, "{hi}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}
