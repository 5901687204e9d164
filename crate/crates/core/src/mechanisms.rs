//! Laplace noise and the Laplace mechanism.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{seeded, StreamRng};

/// One draw of standard Laplace noise (scale 1) by inverse CDF.
pub fn standard_laplace<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        // u = -0.5 would give ln(0)
        if u > -0.5 {
            let x = -(1.0 - 2.0 * u.abs()).ln();
            return if u < 0.0 { -x } else { x };
        }
    }
}

pub fn sample_laplace<R: Rng + ?Sized>(scale_b: f64, rng: &mut R) -> Result<f64> {
    if !(scale_b >= 0.0) || !scale_b.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "laplace scale {scale_b} must be finite and >= 0"
        )));
    }
    if scale_b == 0.0 {
        return Ok(0.0);
    }
    Ok(scale_b * standard_laplace(rng))
}

/// Adds independent `Lap(sensitivity / epsilon)` noise to every value.
/// Outputs are neither rounded nor clipped.
pub fn laplace_mechanism<R: Rng + ?Sized>(
    values: &[f64],
    sensitivity: f64,
    epsilon: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} must be > 0")));
    }
    if !(sensitivity >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sensitivity {sensitivity} must be >= 0"
        )));
    }
    let b = sensitivity / epsilon;
    values
        .iter()
        .map(|v| sample_laplace(b, rng).map(|z| v + z))
        .collect()
}

/// Bin-count sensitivity when one individual contributes at most
/// `max_records_per_individual` records.
pub fn global_sensitivity_count_query(max_records_per_individual: u64) -> f64 {
    max_records_per_individual as f64
}

/// L1 sensitivity of a value-frequency histogram: changing one count moves
/// one unit of mass between two cells.
pub const FREQUENCY_SENSITIVITY: f64 = 2.0;

/// How many entries of `counts` take each value in `0..=c_max`; larger
/// values land in the last cell.
pub fn value_frequencies(counts: &[u64], c_max: usize) -> Vec<f64> {
    let mut freq = vec![0.0; c_max + 1];
    for &c in counts {
        freq[(c as usize).min(c_max)] += 1.0;
    }
    freq
}

/// A reproducible Laplace noise source.
#[derive(Debug, Clone)]
pub struct LaplaceNoise {
    scale_b: f64,
    rng_seed: u64,
    rng: StreamRng,
}

impl LaplaceNoise {
    pub fn new(scale_b: f64, rng_seed: u64) -> Result<Self> {
        if !(scale_b >= 0.0) || !scale_b.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "laplace scale {scale_b} must be finite and >= 0"
            )));
        }
        Ok(LaplaceNoise {
            scale_b,
            rng_seed,
            rng: seeded(rng_seed),
        })
    }

    pub fn from_sensitivity(sensitivity: f64, epsilon: f64, rng_seed: u64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!("epsilon {epsilon} must be > 0")));
        }
        Self::new(sensitivity / epsilon, rng_seed)
    }

    pub fn scale_b(&self) -> f64 {
        self.scale_b
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn draw(&mut self) -> f64 {
        if self.scale_b == 0.0 {
            return 0.0;
        }
        self.scale_b * standard_laplace(&mut self.rng)
    }

    pub fn draws(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.draw()).collect()
    }
}
