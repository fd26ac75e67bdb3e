//! CSV emission of result rows.
//!
//! Floats use Rust's shortest round-trip formatting, so a parsed file
//! reproduces finite values bit for bit. Negative infinity is `-inf`.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::runner::ResultRow;

pub const COLUMNS: [&str; 11] = [
    "sweep_key",
    "sweep_value",
    "trial",
    "round",
    "blocks_used",
    "nmse_db",
    "test_accuracy",
    "mse_predicted",
    "mse_norelay_bound",
    "cond40",
    "cond41",
];

fn cell<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn io(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

pub fn write_rows<W: Write>(rows: &[ResultRow], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(COLUMNS).map_err(io)?;
    for r in rows {
        w.write_record([
            r.sweep_key.clone(),
            cell(r.sweep_value),
            r.trial.to_string(),
            r.round.to_string(),
            r.blocks_used.to_string(),
            cell(r.nmse_db),
            cell(r.test_accuracy),
            cell(r.mse_predicted),
            cell(r.mse_norelay_bound),
            cell(r.cond40),
            cell(r.cond41),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_rows(rows, std::io::BufWriter::new(file))
}

fn parse_opt<T: std::str::FromStr>(field: &str, column: &str) -> Result<Option<T>> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse()
        .map(Some)
        .map_err(|_| Error::Io(format!("column {column}: cannot parse {field:?}")))
}

fn parse_req<T: std::str::FromStr>(field: &str, column: &str) -> Result<T> {
    parse_opt(field, column)?.ok_or_else(|| Error::Io(format!("column {column} is empty")))
}

pub fn read_rows<R: Read>(source: R) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_reader(source);
    let header = reader.headers().map_err(io)?;
    if header.iter().ne(COLUMNS) {
        return Err(Error::Io(format!("unexpected header {header:?}")));
    }
    reader
        .records()
        .map(|record| {
            let rec = record.map_err(io)?;
            let f = |i: usize| rec.get(i).unwrap_or("");
            Ok(ResultRow {
                sweep_key: f(0).to_string(),
                sweep_value: parse_opt(f(1), COLUMNS[1])?,
                trial: parse_req(f(2), COLUMNS[2])?,
                round: parse_req(f(3), COLUMNS[3])?,
                blocks_used: parse_req(f(4), COLUMNS[4])?,
                nmse_db: parse_opt(f(5), COLUMNS[5])?,
                test_accuracy: parse_opt(f(6), COLUMNS[6])?,
                mse_predicted: parse_opt(f(7), COLUMNS[7])?,
                mse_norelay_bound: parse_opt(f(8), COLUMNS[8])?,
                cond40: parse_opt(f(9), COLUMNS[9])?,
                cond41: parse_opt(f(10), COLUMNS[10])?,
            })
        })
        .collect()
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_rows(std::io::BufReader::new(file))
}
