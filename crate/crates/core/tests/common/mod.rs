//! Independent reference implementations used by the oracle and
//! acceptance tests. Nothing here calls the library's numeric code.

#![allow(dead_code)]

/// `w <= -1` with `w e^w = x`, by plain bisection.
pub fn w_minus1_bisect(x: f64) -> f64 {
    let f = |w: f64| w * w.exp() - x;
    let mut lo = -2.0f64;
    while f(lo) < 0.0 {
        lo *= 2.0;
    }
    let mut hi = -1.0f64;
    // f(lo) >= 0, f(hi) <= 0 on the lower branch
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if f(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solves `rho (1 - 2 ln rho) = gamma` on `(0, e^-1/2)`, which is the
/// stationarity condition of the learning-phase order index.
pub fn rho_star_learning_bisect(gamma: f64) -> f64 {
    let g = |r: f64| r * (1.0 - 2.0 * r.ln()) - gamma;
    // g increases on the interval; bisect in log space for tiny roots
    let (mut lo, mut hi) = ((1e-300f64).ln(), -0.5f64);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if g(mid.exp()) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}

/// Smallest integer `n >= 1` with `ok(n)`, for monotone `ok`.
pub fn least_integer(ok: impl Fn(u64) -> bool) -> u64 {
    let mut hi = 1u64;
    while !ok(hi) {
        hi *= 2;
    }
    let mut lo = hi / 2;
    // ok(hi), !ok(lo) unless lo == 0
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    if lo >= 1 && ok(lo) {
        lo
    } else {
        hi
    }
}

/// Learning phase: smallest `m` with `exp(-2 m (gamma - rho)^2) <= rho`.
pub fn m_learning_search(gamma: f64, rho: f64) -> u64 {
    let d2 = (gamma - rho) * (gamma - rho);
    let need = (1.0 / rho).ln();
    least_integer(|m| 2.0 * m as f64 * d2 >= need)
}

/// Smallest `k >= 1` with `k >= m (1 - gamma + rho) + sqrt(m L / 2)`,
/// then capped at `m`.
pub fn k_search(m: u64, gamma: f64, rho: f64, log_term: f64) -> u64 {
    let mf = m as f64;
    let base = mf * (1.0 - gamma + rho);
    let need = mf * log_term / 2.0;
    let k = least_integer(|k| {
        let over = k as f64 - base;
        over >= 0.0 && over * over >= need
    });
    k.min(m)
}

pub fn dkw_term(rho: f64) -> f64 {
    -(1.0 - (1.0 - rho).sqrt()).ln()
}

/// Prediction phase: smallest `m` with `m (T - sqrt(T^2-4))^2 / 2 >= L`.
pub fn m_prediction_search(rho: f64, t: f64) -> u64 {
    let gap = t - (t * t - 4.0).sqrt();
    let need = dkw_term(rho);
    least_integer(|m| m as f64 * gap * gap / 2.0 >= need)
}

pub fn t_direct(n: u64, eps: f64, domain: usize, c: f64) -> f64 {
    (4.0 * domain as f64 * c + n as f64 * eps) / (2.0 * domain as f64 * c)
}

pub fn rho_prediction_direct(m: u64) -> f64 {
    (1.426f64.ln() - 0.4589 * (m as f64 + 0.8389).ln()).exp()
}

pub fn utility_direct(eps: f64, ratio: f64) -> f64 {
    let num = 2.0 + (-eps * (ratio + 1.0)).exp() - (-eps).exp() - 2.0 * (-eps * ratio).exp();
    let den = 2.0 + (-eps * (ratio + 1.0)).exp() - (-eps * ratio).exp() - 2.0 * (-eps).exp();
    num / den
}

/// Sup over every breakpoint of the difference of empirical CDFs, by
/// counting at each candidate point.
pub fn ks_brute(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    a.iter()
        .chain(b)
        .map(|&x| {
            let fa = a.iter().filter(|&&v| v <= x).count() as f64 / na;
            let fb = b.iter().filter(|&&v| v <= x).count() as f64 / nb;
            (fa - fb).abs()
        })
        .fold(0.0, f64::max)
}

/// Exact `q`-quantile of `|c - c'|` for `c, c'` uniform on `{0..=c_max}`
/// by listing every outcome.
pub fn uniform_difference_quantile(c_max: usize, q: f64) -> f64 {
    let mut all: Vec<usize> = Vec::new();
    for a in 0..=c_max {
        for b in 0..=c_max {
            all.push(a.abs_diff(b));
        }
    }
    all.sort_unstable();
    let idx = ((q * all.len() as f64).ceil() as usize).max(1) - 1;
    all[idx] as f64
}

pub fn cdf_distance(p: &[f64], q: &[f64]) -> f64 {
    let (mut fp, mut fq, mut d) = (0.0, 0.0, 0.0f64);
    for (a, b) in p.iter().zip(q) {
        fp += a;
        fq += b;
        d = d.max((fp - fq).abs());
    }
    d
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    if want == 0.0 {
        got.abs()
    } else {
        ((got - want) / want).abs()
    }
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
