//! KS-based anomaly scoring, thresholding and detection metrics.

use std::collections::HashSet;
use std::hash::Hash;

use crate::error::{Error, Result};
use crate::types::CountMatrix;

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable_by(f64::total_cmp);
    b.sort_unstable_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// KS statistic of `test` against an already sorted reference sample.
/// Cost is O(|test| log |reference|).
pub fn ks_against_sorted(test: &[f64], reference_sorted: &[f64]) -> Result<f64> {
    if test.is_empty() || reference_sorted.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut t = test.to_vec();
    t.sort_unstable_by(f64::total_cmp);
    let (nt, nr) = (t.len() as f64, reference_sorted.len() as f64);
    let mut d = 0.0f64;
    let mut i = 0;
    while i < t.len() {
        let x = t[i];
        let below = i as f64 / nt;
        while i < t.len() && t[i] == x {
            i += 1;
        }
        let upto = i as f64 / nt;
        let ref_below = reference_sorted.partition_point(|&r| r < x) as f64 / nr;
        let ref_upto = reference_sorted.partition_point(|&r| r <= x) as f64 / nr;
        d = d.max((ref_below - below).abs()).max((ref_upto - upto).abs());
    }
    Ok(d)
}

/// Scores every unit of `unit_len` consecutive columns in each row of
/// `test` against the pooled values of the same row in `reference`.
/// Output is row-major: `rows * (cols / unit_len)` scores. Trailing
/// columns that do not fill a unit are ignored.
pub fn score_units(reference: &[Vec<f64>], test: &[Vec<f64>], unit_len: usize) -> Result<Vec<f64>> {
    if reference.len() != test.len() {
        return Err(Error::LengthMismatch {
            left: reference.len(),
            right: test.len(),
        });
    }
    if unit_len == 0 {
        return Err(Error::InvalidArgument("unit length must be >= 1".into()));
    }
    let mut out = Vec::new();
    for (reference, row) in reference.iter().zip(test) {
        let mut sorted = reference.clone();
        sorted.sort_unstable_by(f64::total_cmp);
        for unit in row.chunks_exact(unit_len) {
            out.push(ks_against_sorted(unit, &sorted)?);
        }
    }
    Ok(out)
}

/// Count-matrix form of [`score_units`].
pub fn score_windows(reference: &CountMatrix, test: &CountMatrix, unit_len: usize) -> Result<Vec<f64>> {
    if reference.rows() != test.rows() {
        return Err(Error::LengthMismatch {
            left: reference.rows(),
            right: test.rows(),
        });
    }
    let to_rows = |m: &CountMatrix| -> Vec<Vec<f64>> {
        (0..m.rows())
            .map(|r| m.row(r).iter().map(|&v| v as f64).collect())
            .collect()
    };
    score_units(&to_rows(reference), &to_rows(test), unit_len)
}

/// Inclusive threshold.
pub fn classify(scores: &[f64], threshold: f64) -> Vec<bool> {
    scores.iter().map(|&s| s >= threshold).collect()
}

/// How per-row scores combine into one score per window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Combine {
    #[default]
    Max,
    Mean,
}

/// Collapses row-major `rows x units` scores into one score per unit.
pub fn combine_rows(scores: &[f64], rows: usize, rule: Combine) -> Result<Vec<f64>> {
    if rows == 0 || !scores.len().is_multiple_of(rows) {
        return Err(Error::InvalidArgument(format!(
            "{} scores do not split into {rows} rows",
            scores.len()
        )));
    }
    let units = scores.len() / rows;
    Ok((0..units)
        .map(|u| {
            let col = (0..rows).map(|r| scores[r * units + u]);
            match rule {
                Combine::Max => col.fold(0.0, f64::max),
                Combine::Mean => col.sum::<f64>() / rows as f64,
            }
        })
        .collect())
}

/// Precision and recall; an empty detected set has precision 1 and an
/// empty truth set has recall 1.
pub fn precision_recall<T: Eq + Hash>(detected: &HashSet<T>, truth: &HashSet<T>) -> (f64, f64) {
    let hit = detected.intersection(truth).count() as f64;
    let precision = if detected.is_empty() {
        1.0
    } else {
        hit / detected.len() as f64
    };
    let recall = if truth.is_empty() {
        1.0
    } else {
        hit / truth.len() as f64
    };
    (precision, recall)
}

/// Label-vector form of [`precision_recall`].
pub fn precision_recall_labels(detected: &[bool], truth: &[bool]) -> Result<(f64, f64)> {
    if detected.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: detected.len(),
            right: truth.len(),
        });
    }
    let d: HashSet<usize> = detected.iter().enumerate().filter(|(_, &x)| x).map(|(i, _)| i).collect();
    let t: HashSet<usize> = truth.iter().enumerate().filter(|(_, &x)| x).map(|(i, _)| i).collect();
    Ok(precision_recall(&d, &t))
}

/// Guaranteed detection-utility gain of an `(m, k)`-calibrated release
/// over the Laplace baseline.
pub fn utility_ratio_bound(epsilon: f64, m: u64, k: u64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} must be > 0")));
    }
    if k == 0 || k > m {
        return Err(Error::InvalidArgument(format!(
            "order index k = {k} must satisfy 1 <= k <= m = {m}"
        )));
    }
    if m == k {
        return Ok(1.0);
    }
    let x = m as f64 / k as f64;
    let e = |v: f64| (-epsilon * v).exp();
    let num = 2.0 + e(x + 1.0) - e(1.0) - 2.0 * e(x);
    let den = 2.0 + e(x + 1.0) - e(x) - 2.0 * e(1.0);
    Ok(num / den)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyReport {
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
    pub threshold: f64,
    pub iteration: usize,
}

impl AnomalyReport {
    pub fn new(scores: Vec<f64>, threshold: f64, iteration: usize) -> Result<Self> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "threshold {threshold} outside (0,1)"
            )));
        }
        let labels = classify(&scores, threshold);
        Ok(AnomalyReport {
            scores,
            labels,
            threshold,
            iteration,
        })
    }
}
