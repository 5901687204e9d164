use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};
use crate::types::{CountMatrix, Record};

/// Poisson benign traffic over a single binned attribute, with whole units
/// of consecutive windows shifted upward when anomalous.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    /// Benign Poisson rate of each bin.
    pub rates: Vec<f64>,
    pub anomaly_rate: f64,
    /// Upward shift in benign standard deviations.
    pub magnitude: f64,
    pub windows_per_iteration: usize,
    /// Consecutive windows that share an anomaly label.
    pub unit_len: usize,
    pub iterations: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        let bins = 11;
        SyntheticSpec {
            rates: (0..bins)
                .map(|i| 2.0 + 2.0 * i as f64 / (bins - 1) as f64)
                .collect(),
            anomaly_rate: 0.05,
            magnitude: 3.0,
            windows_per_iteration: 400,
            unit_len: 2,
            iterations: 6,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rates.is_empty() || self.rates.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(Error::InvalidArgument("rates must be positive".into()));
        }
        if !(0.0..0.5).contains(&self.anomaly_rate) {
            return Err(Error::InvalidArgument(format!(
                "anomaly rate {} must lie in [0, 0.5)",
                self.anomaly_rate
            )));
        }
        if !(self.magnitude >= 0.0) {
            return Err(Error::InvalidArgument("magnitude must be >= 0".into()));
        }
        if self.unit_len == 0 || self.windows_per_iteration < self.unit_len || self.iterations == 0 {
            return Err(Error::InvalidArgument(
                "need at least one full unit per iteration and one iteration".into(),
            ));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.rates.len()
    }

    /// Attribute range covering all bins; bin `j` holds values in `[j, j+1)`.
    pub fn attribute_range(&self) -> (f64, f64) {
        (0.0, self.bins() as f64)
    }

    /// Shift applied to bin `j` in anomalous windows.
    pub fn shift(&self, bin: usize) -> u64 {
        (self.magnitude * self.rates[bin].sqrt()).round() as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    /// Per iteration, the bin-by-window counts.
    pub counts: Vec<CountMatrix>,
    /// Per iteration, one injected-anomaly flag per unit.
    pub labels: Vec<Vec<bool>>,
}

impl SyntheticData {
    /// Materializes the records of one iteration: a count `c` in bin `j`
    /// becomes `c` records with value `j + 0.5`.
    pub fn records(&self, iteration: usize) -> Vec<Vec<Record>> {
        let m = &self.counts[iteration];
        (0..m.cols())
            .map(|w| {
                (0..m.rows())
                    .flat_map(|j| {
                        std::iter::repeat_n(Record::new(vec![j as f64 + 0.5]), m.get(j, w) as usize)
                    })
                    .collect()
            })
            .collect()
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticData> {
    spec.validate()?;
    let poissons = spec
        .rates
        .iter()
        .map(|&r| Poisson::new(r).map_err(|e| Error::InvalidArgument(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let units = spec.windows_per_iteration / spec.unit_len;
    let mut counts = Vec::with_capacity(spec.iterations);
    let mut labels = Vec::with_capacity(spec.iterations);
    for it in 0..spec.iterations {
        let mut rng = stream(seed, it as u64, Purpose::Data);
        let mut m = CountMatrix::zeros(spec.bins(), spec.windows_per_iteration);
        for (j, p) in poissons.iter().enumerate() {
            for w in 0..spec.windows_per_iteration {
                m.set(j, w, p.sample(&mut rng) as u64);
            }
        }
        let flags: Vec<bool> = (0..units)
            .map(|_| rand::Rng::random::<f64>(&mut rng) < spec.anomaly_rate)
            .collect();
        for (u, _) in flags.iter().enumerate().filter(|(_, f)| **f) {
            for w in u * spec.unit_len..(u + 1) * spec.unit_len {
                for j in 0..spec.bins() {
                    m.set(j, w, m.get(j, w) + spec.shift(j));
                }
            }
        }
        counts.push(m);
        labels.push(flags);
    }
    Ok(SyntheticData { counts, labels })
}
