//! Analyst-side distribution learning from privatized counts, the
//! score-weighted pmf update, and the learning-to-prediction switch rule.

use crate::error::{Error, Result};
use crate::types::DiscretePdf;

const EM_MAX_ITERS: usize = 500;
const EM_TOL: f64 = 1e-10;

/// Rounds each value to the nearest count in `[0, c_max]` and returns the
/// empirical frequency. Empty input gives the uniform pmf.
pub fn round_clamp_pdf(noisy: &[f64], c_max: usize) -> DiscretePdf {
    let mut freq = vec![0.0; c_max + 1];
    for v in noisy.iter().filter(|v| v.is_finite()) {
        let c = v.round().clamp(0.0, c_max as f64) as usize;
        freq[c] += 1.0;
    }
    DiscretePdf::from_weights(&freq)
}

/// Estimates the count pmf behind values perturbed with `Lap(noise_scale)`.
///
/// With a zero scale this is the round-and-clamp frequency. Otherwise the
/// known noise law is deconvolved by EM over the count domain, starting
/// from the round-and-clamp estimate.
pub fn estimate_pdf(noisy: &[f64], c_max: usize, noise_scale: f64) -> Result<DiscretePdf> {
    if !(noise_scale >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise scale {noise_scale} must be >= 0"
        )));
    }
    if noise_scale == 0.0 {
        return Ok(round_clamp_pdf(noisy, c_max));
    }
    let scales = vec![noise_scale; noisy.len()];
    deconvolve_pdf(noisy, &scales, c_max)
}

/// EM deconvolution where observation `i` carries `Lap(scales[i])` noise.
/// Zero-scale observations are treated as exact counts.
pub fn deconvolve_pdf(values: &[f64], scales: &[f64], c_max: usize) -> Result<DiscretePdf> {
    if values.len() != scales.len() {
        return Err(Error::LengthMismatch {
            left: values.len(),
            right: scales.len(),
        });
    }
    let obs: Vec<(f64, f64)> = values
        .iter()
        .zip(scales)
        .filter(|(v, s)| v.is_finite() && s.is_finite() && **s >= 0.0)
        .map(|(v, s)| (*v, *s))
        .collect();
    if obs.is_empty() {
        return Ok(DiscretePdf::uniform(c_max));
    }
    let n = c_max + 1;
    // Likelihood rows, each scaled by its own maximum for stability.
    let kernel: Vec<f64> = obs
        .iter()
        .flat_map(|&(y, b)| {
            let nearest = y.round().clamp(0.0, c_max as f64);
            (0..n).map(move |c| {
                if b == 0.0 {
                    if c as f64 == nearest {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    let d0 = (y - nearest).abs();
                    (-((y - c as f64).abs() - d0) / b).exp()
                }
            })
        })
        .collect();

    let start = round_clamp_pdf(values, c_max);
    let uniform = 1.0 / n as f64;
    let mut p: Vec<f64> = start
        .mass()
        .iter()
        .map(|m| 0.9 * m + 0.1 * uniform)
        .collect();
    let mut next = vec![0.0; n];
    let inv_n = 1.0 / obs.len() as f64;
    for _ in 0..EM_MAX_ITERS {
        next.iter_mut().for_each(|x| *x = 0.0);
        for row in kernel.chunks_exact(n) {
            let z: f64 = row.iter().zip(&p).map(|(k, q)| k * q).sum();
            if z <= 0.0 {
                continue;
            }
            let w = inv_n / z;
            for ((acc, k), q) in next.iter_mut().zip(row).zip(&p) {
                *acc += k * q * w;
            }
        }
        let total: f64 = next.iter().sum();
        if total <= 0.0 {
            break;
        }
        next.iter_mut().for_each(|x| *x /= total);
        let delta = next
            .iter()
            .zip(&p)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut p, &mut next);
        if delta < EM_TOL {
            break;
        }
    }
    Ok(DiscretePdf::from_weights(&p))
}

/// Samples needed for a DP pmf estimate within `alpha` with failure
/// probability `beta` over a domain of `domain_size` points.
pub fn required_samples(
    domain_size: usize,
    alpha: f64,
    beta: f64,
    epsilon: f64,
    c_const: f64,
) -> u64 {
    let nf = domain_size as f64;
    let lb = (1.0 / beta).ln();
    let v = c_const * ((nf + lb) / (alpha * alpha) + nf * lb / (epsilon * alpha));
    v.ceil() as u64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerConfig {
    pub alpha_target: f64,
    pub beta: f64,
    pub c_const: f64,
    /// Weight of the fresh score-weighted frequency in the pmf update.
    pub blend: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            alpha_target: 0.1,
            beta: 0.1,
            c_const: 1.0,
            blend: 0.5,
        }
    }
}

/// Per-row noisy observations, their noise scales, and the current pmfs.
#[derive(Debug, Clone)]
pub struct LearnerState {
    c_max: usize,
    config: LearnerConfig,
    observations: Vec<Vec<f64>>,
    scales: Vec<Vec<f64>>,
    histograms: Vec<Vec<f64>>,
    n_samples: u64,
    pdfs: Vec<DiscretePdf>,
}

impl LearnerState {
    pub fn new(rows: usize, c_max: usize, config: LearnerConfig) -> Self {
        LearnerState {
            c_max,
            config,
            observations: vec![Vec::new(); rows],
            scales: vec![Vec::new(); rows],
            histograms: vec![vec![0.0; c_max + 1]; rows],
            n_samples: 0,
            pdfs: vec![DiscretePdf::uniform(c_max); rows],
        }
    }

    pub fn rows(&self) -> usize {
        self.pdfs.len()
    }

    pub fn c_max(&self) -> usize {
        self.c_max
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn n_samples(&self) -> u64 {
        self.n_samples
    }

    pub fn pdfs(&self) -> &[DiscretePdf] {
        &self.pdfs
    }

    /// Records privatized values for one row. Values are already noised.
    pub fn absorb(&mut self, row: usize, noisy: &[f64], noise_scale: f64) -> Result<()> {
        if row >= self.rows() {
            return Err(Error::InvalidArgument(format!("row {row} out of range")));
        }
        self.observations[row].extend_from_slice(noisy);
        self.scales[row].extend(std::iter::repeat_n(noise_scale, noisy.len()));
        self.n_samples += noisy.len() as u64;
        Ok(())
    }

    /// Adds a privatized value-frequency histogram for one row.
    pub fn absorb_histogram(&mut self, row: usize, noisy: &[f64]) -> Result<()> {
        let acc = self
            .histograms
            .get_mut(row)
            .ok_or_else(|| Error::InvalidArgument(format!("row {row} out of range")))?;
        if noisy.len() != acc.len() {
            return Err(Error::DomainMismatch {
                left: acc.len() - 1,
                right: noisy.len().saturating_sub(1),
            });
        }
        acc.iter_mut().zip(noisy).for_each(|(a, v)| *a += v);
        Ok(())
    }

    /// Counts values released outside the learning buffers.
    pub fn count_released(&mut self, n: u64) {
        self.n_samples += n;
    }

    pub fn refit(&mut self) -> Result<()> {
        for row in 0..self.rows() {
            self.pdfs[row] = deconvolve_pdf(&self.observations[row], &self.scales[row], self.c_max)?;
        }
        Ok(())
    }

    /// Clipped, normalized sum of the absorbed noisy histograms.
    pub fn refit_from_histograms(&mut self) {
        for (pdf, h) in self.pdfs.iter_mut().zip(&self.histograms) {
            *pdf = DiscretePdf::from_weights(h);
        }
    }

    pub fn set_pdf(&mut self, row: usize, pdf: DiscretePdf) -> Result<()> {
        if pdf.domain_max() != self.c_max {
            return Err(Error::DomainMismatch {
                left: self.c_max,
                right: pdf.domain_max(),
            });
        }
        self.pdfs[row] = pdf;
        Ok(())
    }
}

pub fn phase_switch_ready(state: &LearnerState, epsilon: f64, c_const: f64) -> bool {
    let cfg = state.config();
    state.n_samples()
        >= required_samples(state.c_max() + 1, cfg.alpha_target, cfg.beta, epsilon, c_const)
}

/// Down-weights high-score observations: each contributes `1 - score` to
/// its count; the weighted frequency is blended into `base` with weight
/// `blend`.
pub fn update_pdf_with_scores(
    base: &DiscretePdf,
    observed_counts: &[u64],
    scores: &[f64],
    blend: f64,
) -> Result<DiscretePdf> {
    if observed_counts.len() != scores.len() {
        return Err(Error::LengthMismatch {
            left: observed_counts.len(),
            right: scores.len(),
        });
    }
    if !(0.0..=1.0).contains(&blend) {
        return Err(Error::InvalidArgument(format!("blend {blend} outside [0,1]")));
    }
    let c_max = base.domain_max();
    let mut weights = vec![0.0; c_max + 1];
    for (&c, &s) in observed_counts.iter().zip(scores) {
        let w = 1.0 - s.clamp(0.0, 1.0);
        weights[(c as usize).min(c_max)] += w;
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Ok(base.clone());
    }
    let mixed: Vec<f64> = weights
        .iter()
        .zip(base.mass())
        .map(|(w, b)| blend * w / total + (1.0 - blend) * b)
        .collect();
    Ok(DiscretePdf::from_weights(&mixed))
}

/// Score-weighted update from released values `y_i = image[c_i] + Lap(scale)`.
///
/// Each observation spreads its weight `1 - score` over the counts by its
/// posterior under `base`, instead of committing to the nearest image.
/// This is one damped EM step, so repeated updates do not absorb the
/// release noise into the pmf. A zero scale falls back to the nearest image.
pub fn update_pdf_posterior(
    base: &DiscretePdf,
    released: &[f64],
    image: &[f64],
    scale: f64,
    scores: &[f64],
    blend: f64,
) -> Result<DiscretePdf> {
    if released.len() != scores.len() {
        return Err(Error::LengthMismatch {
            left: released.len(),
            right: scores.len(),
        });
    }
    if image.len() != base.domain_size() {
        return Err(Error::DomainMismatch {
            left: base.domain_max(),
            right: image.len().saturating_sub(1),
        });
    }
    if !(0.0..=1.0).contains(&blend) {
        return Err(Error::InvalidArgument(format!("blend {blend} outside [0,1]")));
    }
    if !(scale >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise scale {scale} must be >= 0")));
    }
    let mut weights = vec![0.0; image.len()];
    let mut post = vec![0.0; image.len()];
    for (&y, &s) in released.iter().zip(scores) {
        let w = 1.0 - s.clamp(0.0, 1.0);
        if w == 0.0 || !y.is_finite() {
            continue;
        }
        let nearest = image
            .iter()
            .map(|t| (y - t).abs())
            .fold(f64::INFINITY, f64::min);
        if scale == 0.0 {
            post.iter_mut()
                .zip(image)
                .for_each(|(q, t)| *q = if (y - t).abs() == nearest { 1.0 } else { 0.0 });
        } else {
            post.iter_mut()
                .zip(image)
                .zip(base.mass())
                .for_each(|((q, t), p)| *q = p * (-((y - t).abs() - nearest) / scale).exp());
        }
        let z: f64 = post.iter().sum();
        if z > 0.0 {
            weights.iter_mut().zip(&post).for_each(|(a, q)| *a += w * q / z);
        }
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Ok(base.clone());
    }
    let mixed: Vec<f64> = weights
        .iter()
        .zip(base.mass())
        .map(|(w, b)| blend * w / total + (1.0 - blend) * b)
        .collect();
    Ok(DiscretePdf::from_weights(&mixed))
}
