//! Sensitivity sampling: the Lambert-W branch used by the learning-phase
//! calibration, closed-form (m, k) choices for both phases, and the
//! order-statistic sensitivity draw.

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::types::DiscretePdf;

const INV_E: f64 = 0.367_879_441_171_442_33;

/// Fit constants of the prediction-phase error level.
pub const RHO_FIT_SCALE: f64 = 1.426;
pub const RHO_FIT_SHIFT: f64 = 0.8389;
pub const RHO_FIT_EXPONENT: f64 = 0.4589;

const MAX_SAMPLE_SIZE: f64 = 1e12;

/// Lower real branch of the Lambert W function, `w <= -1` with `w e^w = x`.
pub fn lambert_w_minus1(x: f64) -> Result<f64> {
    if !x.is_finite() || !(-INV_E - 1e-15..0.0).contains(&x) {
        return Err(Error::LambertDomain(x));
    }
    if x <= -INV_E {
        return Ok(-1.0);
    }
    let mut w = if x < -0.25 {
        // series around the branch point
        let p = -(2.0 * (1.0 + std::f64::consts::E * x)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else {
        let l1 = (-x).ln();
        let l2 = (-l1).ln();
        l1 - l2 + l2 / l1
    };
    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1.abs() < 1e-300 {
            break;
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let step = f / denom;
        let next = (w - step).min(-1.0);
        if !next.is_finite() {
            break;
        }
        let done = (next - w).abs() <= 1e-16 * w.abs();
        w = next;
        if done {
            break;
        }
    }
    if (w * w.exp() - x).abs() < 1e-13 {
        return Ok(w);
    }
    Ok(bisect_w_minus1(x))
}

/// `w e^w` decreases from 0 to -1/e on `(-inf, -1]`.
fn bisect_w_minus1(x: f64) -> f64 {
    let (mut lo, mut hi) = (-1.0f64, -1.0f64);
    while lo * lo.exp() < x {
        lo *= 2.0;
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if mid * mid.exp() < x {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("gamma {gamma} outside (0,1)")))
    }
}

/// Error level that minimizes the learning-phase order index for a
/// given confidence `gamma`.
pub fn rho_star_learning(gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    let arg = -gamma / (2.0 * std::f64::consts::E.sqrt());
    Ok((lambert_w_minus1(arg)? + 0.5).exp())
}

pub fn rho_star_prediction(m: u64) -> f64 {
    RHO_FIT_SCALE / (m as f64 + RHO_FIT_SHIFT).powf(RHO_FIT_EXPONENT)
}

fn ceil_count(v: f64) -> Result<u64> {
    if !v.is_finite() || v > MAX_SAMPLE_SIZE {
        return Err(Error::InvalidArgument(format!(
            "sample size {v} overflows the supported range"
        )));
    }
    Ok(v.ceil().max(1.0) as u64)
}

pub fn m_learning(gamma: f64, rho: f64) -> Result<u64> {
    check_gamma(gamma)?;
    if !(rho > 0.0 && rho < gamma) {
        return Err(Error::InvalidArgument(format!(
            "rho {rho} must lie in (0, gamma = {gamma})"
        )));
    }
    ceil_count((1.0 / rho).ln() / (2.0 * (gamma - rho).powi(2)))
}

/// Unclamped learning-phase order index; may exceed `m`.
pub fn k_learning_raw(m: u64, gamma: f64, rho: f64) -> u64 {
    let mf = m as f64;
    let v = mf * (1.0 - gamma + rho + ((1.0 / rho).ln() / (2.0 * mf)).sqrt());
    v.ceil().max(1.0) as u64
}

pub fn k_learning(m: u64, gamma: f64, rho: f64) -> u64 {
    k_learning_raw(m, gamma, rho).min(m)
}

pub fn compute_t(n: u64, epsilon: f64, domain_size: usize, c_const: f64) -> f64 {
    2.0 + n as f64 * epsilon / (2.0 * domain_size as f64 * c_const)
}

/// `T - sqrt(T^2 - 4)` in a cancellation-free form.
fn t_gap(t: f64) -> f64 {
    4.0 / (t + (t * t - 4.0).sqrt())
}

fn dkw_log_term(rho: f64) -> f64 {
    -(1.0 - (1.0 - rho).sqrt()).ln()
}

pub fn m_prediction(rho: f64, t: f64) -> Result<u64> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidArgument(format!("rho {rho} outside (0,1)")));
    }
    if !(t > 2.0) {
        return Err(Error::InsufficientSamples(t));
    }
    ceil_count(2.0 * dkw_log_term(rho) / t_gap(t).powi(2))
}

pub fn k_prediction_raw(m: u64, gamma: f64, rho: f64) -> u64 {
    let mf = m as f64;
    let v = mf * (1.0 - gamma + rho + (dkw_log_term(rho) / (2.0 * mf)).sqrt());
    v.ceil().max(1.0) as u64
}

pub fn k_prediction(m: u64, gamma: f64, rho: f64) -> u64 {
    k_prediction_raw(m, gamma, rho).min(m)
}

/// Lower bound on the probability that the sampled sensitivity covers the
/// target quantile; reported for audit only.
pub fn rdp_diagnostic_bound(m: u64, t: f64) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let g = t_gap(t);
    (1.0 - (-(m as f64) * g * g / 2.0).exp()).powi(2)
}

/// Learning-phase sample size and order index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningParams {
    pub rho: f64,
    pub m: u64,
    pub k: u64,
    pub full_protection: bool,
}

pub fn learning_params(gamma: f64) -> Result<LearningParams> {
    let rho = rho_star_learning(gamma)?;
    let m = m_learning(gamma, rho)?;
    let raw = k_learning_raw(m, gamma, rho);
    Ok(LearningParams {
        rho,
        m,
        k: raw.min(m),
        full_protection: raw >= m,
    })
}

/// Prediction-phase calibration after resolving the error level against
/// its own fit in `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionParams {
    pub t: f64,
    pub rho_initial: f64,
    pub m_initial: u64,
    pub rho: f64,
    pub m: u64,
    pub k: u64,
    pub rounds: usize,
    pub full_protection: bool,
}

pub const FIXED_POINT_ROUNDS: usize = 20;
pub const FIXED_POINT_TOL: f64 = 1e-6;

/// Iterates rho -> m -> rho*(m), starting from the learning-phase optimum,
/// until rho moves by less than the tolerance. Rho is kept below `gamma`.
pub fn prediction_params(
    n: u64,
    epsilon: f64,
    domain_size: usize,
    c_const: f64,
    gamma: f64,
) -> Result<PredictionParams> {
    let t = compute_t(n, epsilon, domain_size, c_const);
    let cap = gamma * (1.0 - 1e-9);
    let rho_initial = rho_star_learning(gamma)?;
    let m_initial = m_prediction(rho_initial, t)?;
    let mut rho = rho_initial;
    let mut m = m_initial;
    let mut rounds = 0;
    while rounds < FIXED_POINT_ROUNDS {
        rounds += 1;
        let next = rho_star_prediction(m).min(cap);
        let moved = (next - rho).abs();
        rho = next;
        m = m_prediction(rho, t)?;
        if moved < FIXED_POINT_TOL {
            break;
        }
    }
    let raw = k_prediction_raw(m, gamma, rho);
    Ok(PredictionParams {
        t,
        rho_initial,
        m_initial,
        rho,
        m,
        k: raw.min(m),
        rounds,
        full_protection: raw >= m,
    })
}

/// Sorted sensitivity candidates and the chosen order statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivitySample {
    pub candidates: Vec<f64>,
    pub k: u64,
    pub chosen: f64,
}

/// How a candidate sensitivity is drawn from a count distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CandidateMode {
    /// `|c - c'|` with `c, c'` drawn independently.
    #[default]
    NeighborDifference,
    /// A single count `c`.
    DirectValue,
}

fn check_mk(m: u64, k: u64) -> Result<()> {
    if m == 0 || k == 0 || k > m {
        return Err(Error::InvalidArgument(format!(
            "order index k = {k} must satisfy 1 <= k <= m = {m}"
        )));
    }
    Ok(())
}

/// Distribution of a single sensitivity candidate: ascending support
/// values with their probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateLaw {
    values: Vec<f64>,
    probs: Vec<f64>,
}

impl CandidateLaw {
    /// Merges equal values and drops zero-probability ones.
    pub fn from_pairs(mut pairs: Vec<(f64, f64)>) -> Result<Self> {
        pairs.retain(|(_, p)| *p > 0.0);
        if pairs.is_empty() || pairs.iter().any(|(v, p)| !v.is_finite() || !p.is_finite()) {
            return Err(Error::InvalidArgument("candidate law has no finite mass".into()));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut values: Vec<f64> = Vec::new();
        let mut probs: Vec<f64> = Vec::new();
        for (v, p) in pairs {
            if values.last() == Some(&v) {
                *probs.last_mut().expect("paired with value") += p;
            } else {
                values.push(v);
                probs.push(p);
            }
        }
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        Ok(CandidateLaw { values, probs })
    }

    /// `|c - c'|` for independent `c, c'` from `dist`.
    pub fn neighbor_differences(dist: &DiscretePdf) -> Self {
        let n = dist.domain_size();
        let p = dist.mass();
        let pairs = (0..n)
            .map(|d| {
                let same: f64 = (0..n - d).map(|c| p[c] * p[c + d]).sum();
                (d as f64, if d == 0 { same } else { 2.0 * same })
            })
            .collect();
        Self::from_pairs(pairs).expect("a pmf has positive mass")
    }

    /// A single count drawn from `dist`.
    pub fn direct_values(dist: &DiscretePdf) -> Self {
        let pairs = dist.mass().iter().enumerate().map(|(c, &p)| (c as f64, p)).collect();
        Self::from_pairs(pairs).expect("a pmf has positive mass")
    }

    /// `|f(c) - f(c')|` for independent `c, c'` from `dist`, where `f` is
    /// given as a table over the count domain.
    pub fn image_differences(dist: &DiscretePdf, table: &[f64]) -> Result<Self> {
        if table.len() != dist.domain_size() {
            return Err(Error::DomainMismatch {
                left: dist.domain_size(),
                right: table.len(),
            });
        }
        let p = dist.mass();
        let mut pairs = Vec::with_capacity(table.len() * table.len());
        for a in 0..table.len() {
            for b in 0..table.len() {
                pairs.push(((table[a] - table[b]).abs(), p[a] * p[b]));
            }
        }
        Self::from_pairs(pairs)
    }

    pub fn of(dist: &DiscretePdf, mode: CandidateMode) -> Self {
        match mode {
            CandidateMode::NeighborDifference => Self::neighbor_differences(dist),
            CandidateMode::DirectValue => Self::direct_values(dist),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// How many of `m` independent candidates land on each support value,
    /// drawn as a multinomial by sequential binomials.
    pub fn draw_counts<R: Rng + ?Sized>(&self, m: u64, rng: &mut R) -> Vec<u64> {
        let mut left = m;
        let mut mass_left = 1.0f64;
        let last = self.probs.len() - 1;
        self.probs
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                if left == 0 {
                    return 0;
                }
                if i == last {
                    return std::mem::take(&mut left);
                }
                let q = (p / mass_left).clamp(0.0, 1.0);
                mass_left -= p;
                let c = if q >= 1.0 {
                    left
                } else if q <= 0.0 {
                    0
                } else {
                    Binomial::new(left, q).expect("q in (0,1)").sample(rng)
                };
                left -= c;
                c
            })
            .collect()
    }

    /// The `k`-th smallest of `m` independent candidates.
    pub fn order_statistic<R: Rng + ?Sized>(&self, m: u64, k: u64, rng: &mut R) -> Result<f64> {
        check_mk(m, k)?;
        let counts = self.draw_counts(m, rng);
        let mut seen = 0;
        for (v, c) in self.values.iter().zip(counts) {
            seen += c;
            if seen >= k {
                return Ok(*v);
            }
        }
        Ok(*self.values.last().expect("non-empty support"))
    }

    /// All `m` candidates in ascending order with the `k`-th chosen.
    pub fn sample<R: Rng + ?Sized>(&self, m: u64, k: u64, rng: &mut R) -> Result<SensitivitySample> {
        check_mk(m, k)?;
        let counts = self.draw_counts(m, rng);
        let mut candidates = Vec::with_capacity(m as usize);
        for (v, c) in self.values.iter().zip(counts) {
            candidates.extend(std::iter::repeat_n(*v, c as usize));
        }
        let chosen = candidates[(k - 1) as usize];
        Ok(SensitivitySample { candidates, k, chosen })
    }
}

/// Draws `m` candidates from `dist` under `mode`, sorts them and picks
/// the `k`-th. The sorted draw is generated directly from multinomial
/// counts, which has the same law as sorting `m` independent draws.
pub fn sample_sensitivity_with<R: Rng + ?Sized>(
    dist: &DiscretePdf,
    m: u64,
    k: u64,
    mode: CandidateMode,
    rng: &mut R,
) -> Result<SensitivitySample> {
    CandidateLaw::of(dist, mode).sample(m, k, rng)
}

pub fn sample_sensitivity<R: Rng + ?Sized>(
    dist: &DiscretePdf,
    m: u64,
    k: u64,
    rng: &mut R,
) -> Result<SensitivitySample> {
    sample_sensitivity_with(dist, m, k, CandidateMode::NeighborDifference, rng)
}

pub fn sample_sensitivity_uniform<R: Rng + ?Sized>(
    c_max: u64,
    m: u64,
    k: u64,
    rng: &mut R,
) -> Result<SensitivitySample> {
    sample_sensitivity(&DiscretePdf::uniform(c_max as usize), m, k, rng)
}
