use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use super::experiment::{ResultRow, RESULT_COLUMNS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::InvalidArgument(format!("unknown format '{other}'"))),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

pub fn write_results<W: Write>(rows: &[ResultRow], format: Format, out: W) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
            w.write_record(RESULT_COLUMNS)
                .map_err(|e| Error::Io(e.to_string()))?;
            for r in rows {
                w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
            }
            w.flush()?;
        }
        Format::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, rows).map_err(|e| Error::Io(e.to_string()))?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

/// Writes one row per (mechanism, sweep point, iteration, seed) in a fixed
/// column order. Empty input yields a header-only CSV or an empty JSON array.
pub fn emit_results(rows: &[ResultRow], format: Format, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    write_results(rows, format, &mut w)?;
    w.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}

pub fn load_results(path: &Path, format: Format) -> Result<Vec<ResultRow>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    match format {
        Format::Csv => {
            let mut r = csv::Reader::from_reader(BufReader::new(file));
            r.deserialize()
                .enumerate()
                .map(|(i, row)| {
                    row.map_err(|e| Error::Parse {
                        row: i + 2,
                        column: 0,
                        message: e.to_string(),
                    })
                })
                .collect()
        }
        Format::Json => serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Parse {
            row: e.line(),
            column: e.column(),
            message: e.to_string(),
        }),
    }
}
