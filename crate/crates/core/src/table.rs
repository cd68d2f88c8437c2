//! Optimal-design tables: generation and the CSV format.
//!
//! Rows are ordered by `gamma` then `mu`, both ascending. Numbers are printed
//! with two decimals; a cell that failed carries `error` in every numeric
//! column.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{GsrError, Result};
use crate::optimizer::{optimize_design, DesignResult, SearchConfig};

pub const HEADER: [&str; 8] = [
    "gamma",
    "mu",
    "r_star",
    "a_star",
    "sadd",
    "lower_bound",
    "arl_achieved",
    "gap",
];

const ERROR_MARKER: &str = "error";

/// Shifts of the published grid.
pub const PUBLISHED_MUS: [f64; 10] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
/// ARL levels of the published grid.
pub const PUBLISHED_GAMMAS: [f64; 10] = [
    100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0, 900.0, 1000.0,
];

/// The six reported numbers of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellValues {
    pub r_star: f64,
    pub a_star: f64,
    pub sadd: f64,
    pub lower_bound: f64,
    pub arl_achieved: f64,
    pub gap: f64,
}

impl From<&DesignResult> for CellValues {
    fn from(d: &DesignResult) -> Self {
        Self {
            r_star: d.r_star,
            a_star: d.a_star,
            sadd: d.sadd,
            lower_bound: d.lower_bound,
            arl_achieved: d.arl_achieved,
            gap: d.gap,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub gamma: f64,
    pub mu: f64,
    /// `None` marks a failed cell.
    pub values: Option<CellValues>,
}

/// Optimize every `(gamma, mu)` cell. Cells run concurrently; the output
/// order is fixed.
pub fn generate_table(
    mus: &[f64],
    gammas: &[f64],
    config: &SearchConfig,
) -> Vec<(TableRow, Result<DesignResult>)> {
    let mut gammas = gammas.to_vec();
    let mut mus = mus.to_vec();
    gammas.sort_by(f64::total_cmp);
    mus.sort_by(f64::total_cmp);
    let cells: Vec<(f64, f64)> = gammas
        .iter()
        .flat_map(|&g| mus.iter().map(move |&m| (g, m)))
        .collect();
    cells
        .par_iter()
        .map(|&(gamma, mu)| {
            let result = optimize_design(mu, gamma, config);
            let row = TableRow {
                gamma,
                mu,
                values: result.as_ref().ok().map(CellValues::from),
            };
            (row, result)
        })
        .collect()
}

fn fmt2(v: f64) -> String {
    format!("{v:.2}")
}

/// Write rows as CSV with the standard header and LF line endings.
pub fn write_table<W: Write>(rows: &[TableRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let io = |e: csv::Error| GsrError::Configuration(format!("writing table: {e}"));
    w.write_record(HEADER).map_err(io)?;
    for row in rows {
        let mut rec = vec![format!("{}", row.gamma), format!("{}", row.mu)];
        match &row.values {
            Some(v) => rec.extend(
                [
                    v.r_star,
                    v.a_star,
                    v.sadd,
                    v.lower_bound,
                    v.arl_achieved,
                    v.gap,
                ]
                .into_iter()
                .map(fmt2),
            ),
            None => rec.extend(std::iter::repeat_n(ERROR_MARKER.to_string(), 6)),
        }
        w.write_record(&rec).map_err(io)?;
    }
    w.flush()
        .map_err(|e| GsrError::Configuration(format!("writing table: {e}")))
}

pub fn table_to_string(rows: &[TableRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_table(rows, &mut buf)?;
    String::from_utf8(buf).map_err(|e| GsrError::Configuration(e.to_string()))
}

/// Parse a table previously written by [`write_table`].
pub fn parse_table(text: &str) -> Result<Vec<TableRow>> {
    let bad = |m: String| GsrError::Configuration(format!("malformed table: {m}"));
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")));
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != HEADER.len() {
            return Err(bad(format!("row has {} fields", rec.len())));
        }
        let gamma = num(&rec[0])?;
        let mu = num(&rec[1])?;
        let values = if rec.iter().skip(2).all(|f| f == ERROR_MARKER) {
            None
        } else {
            Some(CellValues {
                r_star: num(&rec[2])?,
                a_star: num(&rec[3])?,
                sadd: num(&rec[4])?,
                lower_bound: num(&rec[5])?,
                arl_achieved: num(&rec[6])?,
                gap: num(&rec[7])?,
            })
        };
        rows.push(TableRow { gamma, mu, values });
    }
    Ok(rows)
}
