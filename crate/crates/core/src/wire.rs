//! Plain-text encoding of protocol messages.
//!
//! Each message starts with a `dpoad/1 <kind>` line, continues with
//! `key=value` lines and ends with `end`. Reals use Rust's shortest
//! round-trip formatting, so decoding reproduces values bit for bit.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::protocol::{MsspReport, OwnerRelease};
use crate::types::{DiscretePdf, Phase};

pub const SCHEMA: &str = "dpoad/1";

fn join(values: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{v:?}");
    }
    s
}

pub fn release_to_text(r: &OwnerRelease) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{SCHEMA} release");
    let _ = writeln!(s, "iteration={}", r.iteration);
    let _ = writeln!(s, "phase={}", r.phase);
    let _ = writeln!(s, "epsilon={:?}", r.epsilon_used);
    let _ = writeln!(s, "layout={}", r.layout_id);
    let _ = writeln!(s, "sensitivity={:?}", r.sensitivity);
    let _ = writeln!(s, "m={}", r.m);
    let _ = writeln!(s, "k={}", r.k);
    let _ = writeln!(s, "rows={}", r.rows);
    let _ = writeln!(s, "cols={}", r.cols);
    let _ = writeln!(s, "scales={}", join(&r.noise_scales));
    let _ = writeln!(s, "payload={}", join(&r.payload));
    let _ = writeln!(s, "histogram_epsilon={:?}", r.histogram_epsilon);
    let _ = writeln!(s, "histograms={}", join(&r.histograms));
    s.push_str("end\n");
    s
}

pub fn report_to_text(r: &MsspReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{SCHEMA} report");
    let _ = writeln!(s, "iteration={}", r.iteration);
    let _ = writeln!(s, "phase={}", r.phase_recommendation);
    match r.sampled_sensitivity {
        Some(v) => {
            let _ = writeln!(s, "sensitivity={v:?}");
        }
        None => s.push_str("sensitivity=none\n"),
    }
    let _ = writeln!(s, "score_sensitivities={}", join(&r.score_sensitivities));
    let _ = writeln!(s, "m={}", r.m);
    let _ = writeln!(s, "k={}", r.k);
    let _ = writeln!(s, "scores={}", join(&r.anomaly_scores));
    let _ = writeln!(s, "pdfs={}", r.updated_pdfs.len());
    for (i, p) in r.updated_pdfs.iter().enumerate() {
        let _ = writeln!(s, "pdf.{i}={}", join(p.mass()));
    }
    s.push_str("end\n");
    s
}

struct Fields {
    map: HashMap<String, String>,
}

impl Fields {
    fn parse(text: &str, kind: &str) -> Result<Self> {
        let mut lines = text.lines();
        let head = lines.next().unwrap_or_default();
        if head != format!("{SCHEMA} {kind}") {
            return Err(bad(1, format!("expected header '{SCHEMA} {kind}', found '{head}'")));
        }
        let mut map = HashMap::new();
        let mut ended = false;
        for (i, line) in lines.enumerate() {
            if line == "end" {
                ended = true;
                break;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(i + 2, format!("missing '=' in '{line}'")))?;
            map.insert(k.to_string(), v.to_string());
        }
        if !ended {
            return Err(bad(0, "missing 'end' line".into()));
        }
        Ok(Fields { map })
    }

    fn raw(&self, key: &str) -> Result<&str> {
        self.map
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| bad(0, format!("missing field '{key}'")))
    }

    fn num<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.raw(key)?
            .parse()
            .map_err(|_| bad(0, format!("field '{key}' is not a number")))
    }

    fn reals(&self, key: &str) -> Result<Vec<f64>> {
        let raw = self.raw(key)?;
        if raw.is_empty() {
            return Ok(Vec::new());
        }
        raw.split(' ')
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| bad(0, format!("field '{key}' holds non-numeric '{t}'")))
            })
            .collect()
    }
}

fn bad(row: usize, message: String) -> Error {
    Error::Parse {
        row,
        column: 0,
        message,
    }
}

pub fn release_from_text(text: &str) -> Result<OwnerRelease> {
    let f = Fields::parse(text, "release")?;
    let rows: usize = f.num("rows")?;
    let cols: usize = f.num("cols")?;
    let payload = f.reals("payload")?;
    let noise_scales = f.reals("scales")?;
    if payload.len() != rows * cols || noise_scales.len() != rows {
        return Err(bad(0, "payload shape does not match rows x cols".into()));
    }
    Ok(OwnerRelease {
        iteration: f.num("iteration")?,
        phase: f.raw("phase")?.parse::<Phase>()?,
        epsilon_used: f.num("epsilon")?,
        layout_id: f.num("layout")?,
        sensitivity: f.num("sensitivity")?,
        m: f.num("m")?,
        k: f.num("k")?,
        rows,
        cols,
        noise_scales,
        payload,
        histogram_epsilon: f.num("histogram_epsilon")?,
        histograms: f.reals("histograms")?,
    })
}

pub fn report_from_text(text: &str) -> Result<MsspReport> {
    let f = Fields::parse(text, "report")?;
    let n: usize = f.num("pdfs")?;
    let updated_pdfs = (0..n)
        .map(|i| DiscretePdf::new(f.reals(&format!("pdf.{i}"))?))
        .collect::<Result<Vec<_>>>()?;
    let sampled_sensitivity = match f.raw("sensitivity")? {
        "none" => None,
        _ => Some(f.num("sensitivity")?),
    };
    Ok(MsspReport {
        iteration: f.num("iteration")?,
        anomaly_scores: f.reals("scores")?,
        updated_pdfs,
        sampled_sensitivity,
        score_sensitivities: f.reals("score_sensitivities")?,
        m: f.num("m")?,
        k: f.num("k")?,
        phase_recommendation: f.raw("phase")?.parse::<Phase>()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_round_trip() {
        let r = MsspReport {
            iteration: 2,
            anomaly_scores: vec![0.1, 1.0, 0.25],
            updated_pdfs: vec![DiscretePdf::new(vec![0.7, 0.2, 0.1]).unwrap()],
            sampled_sensitivity: Some(3.0),
            score_sensitivities: vec![0.25],
            m: 40,
            k: 35,
            phase_recommendation: Phase::Prediction,
        };
        let text = report_to_text(&r);
        assert!(text.starts_with("dpoad/1 report\n"));
        assert_eq!(report_from_text(&text).unwrap(), r);
    }

    #[test]
    fn rejects_wrong_schema() {
        assert!(report_from_text("dpoad/0 report\nend\n").is_err());
        assert!(release_from_text("dpoad/1 release\niteration=0\n").is_err());
    }
}
