//! Monte Carlo experiments over ARFIMA(1,d,0) designs: configuration,
//! parallel execution with deterministic seeding, and result tables.

mod design;
mod run;
mod tables;

use std::io::{BufRead, Write};

pub use design::{replication_stream, Cell, EstimatorEntry, McDesign};
pub use run::{
    run_design, run_design_with_threads, run_replication, summarize, CellResult, Correction, McResults, Observation,
    RowKey, RowResult, StatValue, Statistic, HPD_ALPHA,
};
pub use tables::{csv_rows, emit_tables, read_csv, write_aligned, write_csv, CsvRow, TableFormat, CSV_HEADER};

use crate::error::{Error, Result};

/// Read a series: one value per line, or the first field of each CSV
/// record. Blank lines and `#` comments are skipped, and so is a
/// non-numeric first line (a header).
pub fn read_series(r: impl BufRead) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    let mut seen_content = false;
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let first = !seen_content;
        seen_content = true;
        let field = body.split(',').next().unwrap_or("").trim();
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            Ok(_) => return Err(Error::InvalidParameter(format!("line {}: non-finite value", i + 1))),
            Err(_) if first => continue,
            Err(_) => return Err(Error::InvalidParameter(format!("line {}: cannot parse `{field}`", i + 1))),
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidParameter("input holds no values".into()));
    }
    Ok(out)
}

/// One value per line, shortest round-trip representation.
pub fn write_series(values: &[f64], mut w: impl Write) -> Result<()> {
    for v in values {
        writeln!(w, "{v:?}")?;
    }
    w.flush()?;
    Ok(())
}
