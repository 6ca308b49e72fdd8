use std::fs::File;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use super::run::{Correction, McResults, Statistic};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "T,d,phi,estimator,P,correction,K,statistic,value,R_effective,seed";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Aligned,
}

/// One line of the results CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub t: usize,
    pub d: f64,
    pub phi: f64,
    pub estimator: String,
    pub p: usize,
    pub correction: Correction,
    pub statistic: Statistic,
    pub value: f64,
    pub r_effective: usize,
    pub seed: u64,
}

impl CsvRow {
    /// Floats use the shortest representation that parses back to the same
    /// value.
    pub fn to_line(&self) -> String {
        format!(
            "{},{:?},{:?},{},{},{},{},{},{:?},{},{}",
            self.t,
            self.d,
            self.phi,
            self.estimator,
            self.p,
            self.correction.label(),
            self.correction.k(),
            self.statistic,
            self.value,
            self.r_effective,
            self.seed
        )
    }

    pub fn parse(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != 11 {
            return Err(Error::Config(format!("expected 11 fields, got {}: `{line}`", f.len())));
        }
        let num = |i: usize| -> Result<f64> {
            f[i].parse().map_err(|_| Error::Config(format!("bad number `{}` in `{line}`", f[i])))
        };
        let int = |i: usize| -> Result<u64> {
            f[i].parse().map_err(|_| Error::Config(format!("bad integer `{}` in `{line}`", f[i])))
        };
        Ok(Self {
            t: int(0)? as usize,
            d: num(1)?,
            phi: num(2)?,
            estimator: f[3].to_string(),
            p: int(4)? as usize,
            correction: Correction::from_parts(f[5], int(6)? as usize)?,
            statistic: f[7].parse()?,
            value: num(8)?,
            r_effective: int(9)? as usize,
            seed: int(10)?,
        })
    }
}

fn keep(filter: &[Statistic], s: Statistic) -> bool {
    filter.is_empty() || filter.contains(&s)
}

/// Flatten results into CSV rows, cell by cell. An empty filter keeps every
/// statistic.
pub fn csv_rows(results: &McResults, filter: &[Statistic]) -> Vec<CsvRow> {
    let mut out = Vec::new();
    for cell in &results.cells {
        for row in &cell.rows {
            for s in row.stats.iter().filter(|s| keep(filter, s.statistic)) {
                out.push(CsvRow {
                    t: cell.cell.t,
                    d: cell.cell.d,
                    phi: cell.cell.phi,
                    estimator: row.key.estimator.clone(),
                    p: row.key.p,
                    correction: row.key.correction,
                    statistic: s.statistic,
                    value: s.value,
                    r_effective: s.r_effective,
                    seed: results.seed,
                });
            }
        }
    }
    out
}

pub fn write_csv(results: &McResults, filter: &[Statistic], mut w: impl Write) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for row in csv_rows(results, filter) {
        writeln!(w, "{}", row.to_line())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(r: impl BufRead) -> Result<Vec<CsvRow>> {
    let mut lines = r.lines();
    let header = lines.next().transpose()?;
    if header.as_deref().map(str::trim_end) != Some(CSV_HEADER) {
        return Err(Error::Config("missing or unexpected CSV header".into()));
    }
    let mut rows = Vec::new();
    for line in lines {
        let line = line?;
        if !line.trim().is_empty() {
            rows.push(CsvRow::parse(&line)?);
        }
    }
    Ok(rows)
}

/// One block per `(T, d, φ)` cell: estimators down, statistics across.
pub fn write_aligned(results: &McResults, filter: &[Statistic], mut w: impl Write) -> Result<()> {
    for (n, cell) in results.cells.iter().enumerate() {
        let stats: Vec<Statistic> = Statistic::ALL
            .iter()
            .copied()
            .filter(|&s| keep(filter, s) && cell.rows.iter().any(|r| r.get(s).is_some()))
            .collect();
        let mut table: Vec<Vec<String>> = vec![std::iter::once("estimator".to_string())
            .chain(stats.iter().map(|s| s.name().to_string()))
            .collect()];
        for row in &cell.rows {
            let mut line = vec![row.key.to_string()];
            line.extend(stats.iter().map(|&s| row.get(s).map_or(String::new(), |v| format!("{v:.4}"))));
            table.push(line);
        }
        let widths: Vec<usize> =
            (0..table[0].len()).map(|c| table.iter().map(|r| r[c].chars().count()).max().unwrap_or(0)).collect();
        if n > 0 {
            writeln!(w)?;
        }
        writeln!(w, "T = {}, d = {}, phi = {}", cell.cell.t, cell.cell.d, cell.cell.phi)?;
        for (i, line) in table.iter().enumerate() {
            let cols: Vec<String> = line
                .iter()
                .enumerate()
                .map(|(c, s)| if c == 0 { format!("{s:<w$}", w = widths[c]) } else { format!("{s:>w$}", w = widths[c]) })
                .collect();
            writeln!(w, "{}", cols.join("  ").trim_end())?;
            if i == 0 {
                writeln!(w, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Write results to `path` in the given format.
pub fn emit_tables(results: &McResults, format: TableFormat, filter: &[Statistic], path: &Path) -> Result<()> {
    if results.cells.is_empty() {
        return Err(Error::InvalidParameter("no results to write".into()));
    }
    let w = BufWriter::new(File::create(path)?);
    match format {
        TableFormat::Csv => write_csv(results, filter, w),
        TableFormat::Aligned => write_aligned(results, filter, w),
    }
}
