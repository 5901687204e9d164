//! Shared domain types: records, histograms, count matrices, pmfs over a
//! bounded count domain, and per-round privacy parameters.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// One individual's row of real-valued features.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub attributes: Vec<f64>,
}

impl Record {
    pub fn new(attributes: Vec<f64>) -> Self {
        Record { attributes }
    }

    pub fn arity(&self) -> usize {
        self.attributes.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    bin_edges: Vec<f64>,
    counts: Vec<u64>,
    window: usize,
}

impl Histogram {
    pub fn new(bin_edges: Vec<f64>, counts: Vec<u64>, window: usize) -> Result<Self> {
        check_edges(&bin_edges)?;
        if counts.len() + 1 != bin_edges.len() {
            return Err(Error::LengthMismatch {
                left: counts.len() + 1,
                right: bin_edges.len(),
            });
        }
        Ok(Histogram {
            bin_edges,
            counts,
            window,
        })
    }

    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

fn check_edges(edges: &[f64]) -> Result<()> {
    if edges.len() < 2
        || edges.iter().any(|e| !e.is_finite())
        || edges.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(Error::BadEdges);
    }
    Ok(())
}

/// Equal-width edges over `[lo, hi]`.
pub fn equal_width_edges(lo: f64, hi: f64, bins: usize) -> Result<Vec<f64>> {
    if bins == 0 || !(lo.is_finite() && hi.is_finite()) || lo >= hi {
        return Err(Error::InvalidArgument(format!(
            "cannot build {bins} equal-width bins over [{lo}, {hi}]"
        )));
    }
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|i| lo + width * i as f64).collect();
    edges.push(hi);
    Ok(edges)
}

/// Bins one attribute of `records`. Values outside the edge range are
/// clamped into the first or last bin so that tail values are never dropped.
pub fn build_histogram(
    records: &[Record],
    bin_edges: &[f64],
    attribute_index: usize,
    window: usize,
) -> Result<Histogram> {
    check_edges(bin_edges)?;
    let bins = bin_edges.len() - 1;
    let mut counts = vec![0u64; bins];
    for (r, rec) in records.iter().enumerate() {
        let v = *rec.attributes.get(attribute_index).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "attribute {attribute_index} out of range for record {r} of arity {}",
                rec.arity()
            ))
        })?;
        if !v.is_finite() {
            return Err(Error::NonFinite {
                record: r,
                attribute: attribute_index,
            });
        }
        // partition_point gives the number of edges <= v
        let idx = bin_edges.partition_point(|&e| e <= v);
        let bin = idx.saturating_sub(1).min(bins - 1);
        counts[bin] += 1;
    }
    Histogram::new(bin_edges.to_vec(), counts, window)
}

/// Rows are bins, columns are time windows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u64>,
}

impl CountMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CountMatrix {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<u64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::LengthMismatch {
                left: cols,
                right: bad.len(),
            });
        }
        let n = rows.len();
        Ok(CountMatrix {
            rows: n,
            cols,
            data: rows.into_iter().flatten().collect(),
        })
    }

    /// Stacks histograms of equal bin structure as consecutive columns.
    pub fn from_histograms(hists: &[Histogram]) -> Result<Self> {
        let rows = hists.first().map_or(0, |h| h.counts.len());
        let mut m = CountMatrix::zeros(rows, hists.len());
        for (c, h) in hists.iter().enumerate() {
            if h.counts.len() != rows {
                return Err(Error::LengthMismatch {
                    left: rows,
                    right: h.counts.len(),
                });
            }
            for (r, &v) in h.counts.iter().enumerate() {
                m.set(r, c, v);
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> u64 {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: u64) {
        self.data[row * self.cols + col] = v;
    }

    pub fn row(&self, row: usize) -> &[u64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.data
    }

    pub fn clamp_max(&mut self, c_max: u64) {
        for v in &mut self.data {
            *v = (*v).min(c_max);
        }
    }

    pub fn max(&self) -> u64 {
        self.data.iter().copied().max().unwrap_or(0)
    }
}

/// Probability mass over the count domain `{0, ..., domain_max}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePdf {
    domain_max: usize,
    mass: Vec<f64>,
}

const MASS_TOL: f64 = 1e-9;

impl DiscretePdf {
    pub fn new(mass: Vec<f64>) -> Result<Self> {
        if mass.is_empty() {
            return Err(Error::InvalidArgument("empty pmf".into()));
        }
        if mass.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::InvalidArgument(
                "pmf mass must be finite and non-negative".into(),
            ));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidArgument(format!(
                "pmf mass sums to {total}, expected 1"
            )));
        }
        Ok(DiscretePdf {
            domain_max: mass.len() - 1,
            mass,
        })
    }

    pub fn uniform(domain_max: usize) -> Self {
        let n = domain_max + 1;
        DiscretePdf {
            domain_max,
            mass: vec![1.0 / n as f64; n],
        }
    }

    pub fn point(domain_max: usize, at: usize) -> Self {
        let mut mass = vec![0.0; domain_max + 1];
        mass[at.min(domain_max)] = 1.0;
        DiscretePdf { domain_max, mass }
    }

    /// Clips negative weights, normalizes, and falls back to uniform when
    /// nothing positive remains.
    pub fn from_weights(weights: &[f64]) -> Self {
        let domain_max = weights.len().saturating_sub(1);
        let clipped: Vec<f64> = weights
            .iter()
            .map(|w| if w.is_finite() && *w > 0.0 { *w } else { 0.0 })
            .collect();
        let total: f64 = clipped.iter().sum();
        if total <= 0.0 {
            return DiscretePdf::uniform(domain_max);
        }
        DiscretePdf {
            domain_max,
            mass: clipped.into_iter().map(|w| w / total).collect(),
        }
    }

    pub fn domain_max(&self) -> usize {
        self.domain_max
    }

    pub fn domain_size(&self) -> usize {
        self.domain_max + 1
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn prob(&self, c: usize) -> f64 {
        self.mass.get(c).copied().unwrap_or(0.0)
    }

    pub fn cdf(&self) -> Vec<f64> {
        self.mass
            .iter()
            .scan(0.0, |acc, m| {
                *acc += m;
                Some(*acc)
            })
            .collect()
    }

    pub fn mean(&self) -> f64 {
        self.mass
            .iter()
            .enumerate()
            .map(|(c, m)| c as f64 * m)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.mass
            .iter()
            .enumerate()
            .map(|(c, m)| (c as f64 - mu).powi(2) * m)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Learning,
    Prediction,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Learning => "learning",
            Phase::Prediction => "prediction",
        })
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "learning" => Ok(Phase::Learning),
            "prediction" => Ok(Phase::Prediction),
            other => Err(Error::InvalidArgument(format!("unknown phase '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyParams {
    epsilon: f64,
    gamma: f64,
    rho: f64,
    phase: Phase,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, gamma: f64, rho: f64, phase: Phase) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon {epsilon} must be > 0")));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidArgument(format!("gamma {gamma} outside (0,1)")));
        }
        if !(rho > 0.0 && rho < gamma) {
            return Err(Error::InvalidArgument(format!(
                "rho {rho} must lie in (0, gamma = {gamma})"
            )));
        }
        Ok(PrivacyParams {
            epsilon,
            gamma,
            rho,
            phase,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn recs(vals: &[f64]) -> Vec<Record> {
        vals.iter().map(|&v| Record::new(vec![v])).collect()
    }

    #[test]
    fn histogram_two_bins() {
        let h = build_histogram(&recs(&[1.0, 2.5]), &[0.0, 2.0, 4.0], 0, 0).unwrap();
        assert_eq!(h.counts(), &[1, 1]);
    }

    #[test]
    fn histogram_empty_records() {
        let h = build_histogram(&[], &[0.0, 2.0, 4.0], 0, 3).unwrap();
        assert_eq!(h.counts(), &[0, 0]);
        assert_eq!(h.window(), 3);
    }

    #[test]
    fn out_of_range_values_clamp_to_boundary_bins() {
        let h = build_histogram(&recs(&[-5.0, 4.0, 99.0, 0.0]), &[0.0, 2.0, 4.0], 0, 0).unwrap();
        assert_eq!(h.counts(), &[2, 2]);
        assert_eq!(h.total(), 4);
    }

    #[test]
    fn histogram_rejects_bad_input() {
        assert_eq!(
            build_histogram(&recs(&[1.0]), &[], 0, 0).unwrap_err(),
            Error::BadEdges
        );
        assert_eq!(
            build_histogram(&recs(&[1.0]), &[0.0, 0.0], 0, 0).unwrap_err(),
            Error::BadEdges
        );
        assert!(matches!(
            build_histogram(&recs(&[f64::NAN]), &[0.0, 1.0], 0, 0),
            Err(Error::NonFinite { record: 0, .. })
        ));
    }

    #[test]
    fn pdf_validation() {
        assert!(DiscretePdf::new(vec![0.5, 0.5]).is_ok());
        assert!(DiscretePdf::new(vec![0.5, 0.6]).is_err());
        assert!(DiscretePdf::new(vec![-0.1, 1.1]).is_err());
        assert_eq!(DiscretePdf::from_weights(&[-1.0, 0.0]), DiscretePdf::uniform(1));
    }

    #[test]
    fn count_matrix_layout() {
        let m = CountMatrix::from_rows(vec![vec![1, 2, 3], vec![4, 5, 6]]).unwrap();
        assert_eq!(m.row(1), &[4, 5, 6]);
        assert_eq!(m.get(0, 2), 3);
        assert!(CountMatrix::from_rows(vec![vec![1], vec![1, 2]]).is_err());
    }

    #[test]
    fn privacy_params_invariants() {
        assert!(PrivacyParams::new(1.0, 0.2, 0.05, Phase::Learning).is_ok());
        assert!(PrivacyParams::new(0.0, 0.2, 0.05, Phase::Learning).is_err());
        assert!(PrivacyParams::new(1.0, 0.2, 0.2, Phase::Learning).is_err());
    }
}
