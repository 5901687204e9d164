use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::Record;

#[derive(Debug, Clone, PartialEq)]
pub struct CsvSchema {
    pub has_header: bool,
    /// Column holding a 0/1 anomaly label; excluded from attributes.
    pub label_column: Option<usize>,
    /// Column holding an integer window id; excluded from attributes.
    pub window_column: Option<usize>,
    /// Rows per window when there is no window column.
    pub rows_per_window: usize,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            has_header: false,
            label_column: None,
            window_column: None,
            rows_per_window: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub windows: Vec<Vec<Record>>,
    /// Per window, whether any of its rows carries a positive label.
    pub labels: Option<Vec<bool>>,
}

impl Dataset {
    pub fn record_count(&self) -> usize {
        self.windows.iter().map(Vec::len).sum()
    }

    pub fn arity(&self) -> usize {
        self.windows
            .iter()
            .flatten()
            .next()
            .map_or(0, Record::arity)
    }

    /// Observed `[min, max]` of each attribute.
    pub fn attribute_ranges(&self) -> Vec<(f64, f64)> {
        let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); self.arity()];
        for r in self.windows.iter().flatten() {
            for (rng, &v) in ranges.iter_mut().zip(&r.attributes) {
                rng.0 = rng.0.min(v);
                rng.1 = rng.1.max(v);
            }
        }
        ranges
    }

    /// Groups consecutive windows into batches of at least
    /// `records_per_batch` records; a trailing partial batch is kept.
    pub fn batches(&self, records_per_batch: usize) -> Vec<Vec<Vec<Record>>> {
        let mut out = Vec::new();
        let mut current = Vec::new();
        let mut n = 0;
        for w in &self.windows {
            n += w.len();
            current.push(w.clone());
            if n >= records_per_batch.max(1) {
                out.push(std::mem::take(&mut current));
                n = 0;
            }
        }
        if !current.is_empty() {
            out.push(current);
        }
        out
    }
}

fn cell_error(row: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        row,
        column,
        message: message.into(),
    }
}

/// Reads numeric rows into windows of records. Row and column numbers in
/// errors are 1-based file positions.
pub fn ingest_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;

    let mut keyed: BTreeMap<i64, (Vec<Record>, bool)> = BTreeMap::new();
    let mut arity = None;
    for (i, rec) in reader.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| cell_error(line, 0, e.to_string()))?;
        if i == 0 && schema.has_header {
            continue;
        }
        let row_no = if schema.has_header { i - 1 } else { i };
        let mut attrs = Vec::new();
        let mut label = false;
        let mut window = (row_no / schema.rows_per_window.max(1)) as i64;
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| cell_error(line, c + 1, format!("non-numeric value '{cell}'")))?;
            if !v.is_finite() {
                return Err(cell_error(line, c + 1, "non-finite value"));
            }
            if Some(c) == schema.label_column {
                label = v != 0.0;
            } else if Some(c) == schema.window_column {
                window = v as i64;
            } else {
                attrs.push(v);
            }
        }
        match arity {
            None => arity = Some(attrs.len()),
            Some(a) if a != attrs.len() => {
                return Err(cell_error(line, attrs.len() + 1, format!("expected {a} attributes")))
            }
            _ => {}
        }
        let entry = keyed.entry(window).or_default();
        entry.0.push(Record::new(attrs));
        entry.1 |= label;
    }
    let labels = schema
        .label_column
        .map(|_| keyed.values().map(|(_, l)| *l).collect());
    Ok(Dataset {
        windows: keyed.into_values().map(|(r, _)| r).collect(),
        labels,
    })
}
