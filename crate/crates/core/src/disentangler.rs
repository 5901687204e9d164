//! Maps counts to normalized surprisal scores before noising, and back to
//! pseudo-counts afterwards.

use log::warn;

use crate::types::DiscretePdf;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    pdf: DiscretePdf,
    table: Vec<f64>,
}

impl ScoreMap {
    pub fn pdf(&self) -> &DiscretePdf {
        &self.pdf
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn score(&self, count: usize) -> f64 {
        self.table[count.min(self.table.len() - 1)]
    }

    pub fn c_max(&self) -> usize {
        self.table.len() - 1
    }
}

/// Probability floor used before taking logs.
pub fn score_floor(c_max: usize, n_effective: f64) -> f64 {
    1.0 / (10.0 * (c_max + 1) as f64 * n_effective.max(1.0))
}

/// Score of count `c` is `-ln(max(pdf(c), floor))` divided by the largest
/// such value over the domain.
pub fn build_score_map(pdf: &DiscretePdf, n_effective: f64) -> ScoreMap {
    let floor = score_floor(pdf.domain_max(), n_effective);
    let raw: Vec<f64> = pdf.mass().iter().map(|&p| -(p.max(floor)).ln()).collect();
    let top = raw.iter().copied().fold(0.0, f64::max);
    let table = if top > 0.0 {
        raw.iter().map(|r| r / top).collect()
    } else {
        vec![1.0; raw.len()]
    };
    ScoreMap {
        pdf: pdf.clone(),
        table,
    }
}

pub fn disentangle(counts: &[u64], map: &ScoreMap) -> Vec<f64> {
    let c_max = map.c_max();
    counts
        .iter()
        .map(|&c| {
            if c as usize > c_max {
                warn!("count {c} above domain bound {c_max}; clamped");
            }
            map.score(c as usize)
        })
        .collect()
}

/// Largest score change between two counts at most `delta_q` apart.
pub fn map_sensitivity(delta_q: f64, map: &ScoreMap) -> f64 {
    if !(delta_q > 0.0) {
        return 0.0;
    }
    let t = map.table();
    let reach = if delta_q >= t.len() as f64 {
        t.len()
    } else {
        delta_q.floor() as usize
    };
    let mut best = 0.0f64;
    for i in 0..t.len() {
        let hi = (i + reach).min(t.len() - 1);
        for j in i + 1..=hi {
            best = best.max((t[i] - t[j]).abs());
        }
    }
    best
}

/// Nearest table score wins; ties go to the lower count.
pub fn reconstruct(noisy_scores: &[f64], map: &ScoreMap) -> Vec<u64> {
    let t = map.table();
    noisy_scores
        .iter()
        .map(|&s| {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (c, &v) in t.iter().enumerate() {
                let d = (v - s).abs();
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            best as u64
        })
        .collect()
}
