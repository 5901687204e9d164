mod common;

use common::{k_search, ks_brute, m_learning_search};
use dpoad::detector::{ks_statistic, precision_recall, utility_ratio_bound};
use dpoad::disentangler::{build_score_map, disentangle, reconstruct};
use dpoad::distance::{kolmogorov_distance, tv_distance};
use dpoad::learner::{estimate_pdf, update_pdf_posterior, update_pdf_with_scores};
use dpoad::mechanisms::LaplaceNoise;
use dpoad::rng::seeded;
use dpoad::sampler::{
    k_learning, k_learning_raw, learning_params, m_learning, rho_star_learning, CandidateLaw,
};
use dpoad::types::{build_histogram, DiscretePdf, Record};
use proptest::prelude::*;
use std::collections::HashSet;

fn weights(len: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, len).prop_filter("some mass", |w| w.iter().sum::<f64>() > 1e-6)
}

fn pdf_pair() -> impl Strategy<Value = (DiscretePdf, DiscretePdf)> {
    (1usize..15).prop_flat_map(|n| {
        (weights(n..=n), weights(n..=n))
            .prop_map(|(a, b)| (DiscretePdf::from_weights(&a), DiscretePdf::from_weights(&b)))
    })
}

proptest! {
    #[test]
    fn kolmogorov_within_total_variation((p, q) in pdf_pair()) {
        let dk = kolmogorov_distance(&p, &q).unwrap();
        let dtv = tv_distance(&p, &q).unwrap();
        prop_assert!(dk >= 0.0 && dk <= dtv + 1e-12);
        prop_assert_eq!(dk, kolmogorov_distance(&q, &p).unwrap());
        prop_assert!((dtv - tv_distance(&q, &p).unwrap()).abs() < 1e-15);
        prop_assert_eq!(kolmogorov_distance(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn histogram_keeps_every_record(values in prop::collection::vec(-5.0f64..15.0, 0..200)) {
        let recs: Vec<Record> = values.iter().map(|&v| Record::new(vec![v])).collect();
        let h = build_histogram(&recs, &[0.0, 2.5, 5.0, 10.0], 0, 0).unwrap();
        prop_assert_eq!(h.total(), values.len() as u64);
    }

    #[test]
    fn noise_stream_replays(seed in any::<u64>(), scale in 0.0f64..10.0) {
        let a = LaplaceNoise::new(scale, seed).unwrap().draws(8);
        let b = LaplaceNoise::new(scale, seed).unwrap().draws(8);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn order_statistic_rank(w in weights(1..=12), m in 1u64..400, frac in 0.0f64..1.0, seed in any::<u64>()) {
        let law = CandidateLaw::neighbor_differences(&DiscretePdf::from_weights(&w));
        let k = ((frac * m as f64) as u64).clamp(1, m);
        let s = law.sample(m, k, &mut seeded(seed)).unwrap();
        prop_assert_eq!(s.candidates.len() as u64, m);
        let below = s.candidates.iter().filter(|c| **c < s.chosen).count() as u64;
        let above = s.candidates.iter().filter(|c| **c > s.chosen).count() as u64;
        prop_assert!(below < k);
        prop_assert!(above <= m - k);
        prop_assert!(s.candidates.windows(2).all(|p| p[0] <= p[1]));
        // the order statistic shortcut agrees with the materialized sample
        prop_assert_eq!(law.order_statistic(m, k, &mut seeded(seed)).unwrap(), s.chosen);
    }

    #[test]
    fn larger_order_index_never_lowers(w in weights(1..=12), m in 2u64..300, seed in any::<u64>()) {
        let law = CandidateLaw::neighbor_differences(&DiscretePdf::from_weights(&w));
        let s = law.sample(m, m, &mut seeded(seed)).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for k in 1..=m {
            let v = s.candidates[(k - 1) as usize];
            prop_assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn learning_sizes_match_search(gamma in 0.05f64..0.9, frac in 0.05f64..0.95) {
        let rho = gamma * frac;
        let m = m_learning(gamma, rho).unwrap();
        prop_assert_eq!(m, m_learning_search(gamma, rho));
        let k = k_learning(m, gamma, rho);
        prop_assert!(k <= m);
        prop_assert_eq!(k, k_search(m, gamma, rho, (1.0 / rho).ln()));
        let spread = ((1.0 / rho).ln() / (2.0 * m as f64)).sqrt();
        if gamma <= rho + spread {
            prop_assert!(k_learning_raw(m, gamma, rho) >= m);
        }
        if gamma > rho + spread + 1.0 / m as f64 {
            prop_assert!(k_learning_raw(m, gamma, rho) < m);
        }
    }

    #[test]
    fn optimum_is_no_worse_than_grid(gamma in 0.02f64..0.6) {
        let best = learning_params(gamma).unwrap();
        let rho_star = rho_star_learning(gamma).unwrap();
        let step = gamma / 400.0;
        let grid: Vec<(f64, u64)> = (1..400)
            .map(|i| i as f64 * step)
            .map(|r| {
                let m = m_learning(gamma, r).unwrap();
                (r, k_learning(m, gamma, r))
            })
            .collect();
        let grid_best = grid.iter().map(|g| g.1).min().unwrap();
        prop_assert!(best.k <= grid_best);
        // continuous sample size is minimized within one grid step
        let cont = |r: f64| (1.0 / r).ln() / (2.0 * (gamma - r).powi(2));
        let arg = grid.iter().map(|g| g.0).min_by(|a, b| cont(*a).total_cmp(&cont(*b))).unwrap();
        prop_assert!((arg - rho_star).abs() <= step);
    }

    #[test]
    fn estimate_is_a_pmf(noisy in prop::collection::vec(-20.0f64..40.0, 0..60), scale in 0.0f64..3.0) {
        let p = estimate_pdf(&noisy, 12, scale).unwrap();
        prop_assert!(p.mass().iter().all(|m| *m >= 0.0));
        prop_assert!((p.mass().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn score_update_ignores_order(
        obs in prop::collection::vec((0u64..10, 0.0f64..1.0, -2.0f64..12.0), 1..40),
        rot in 0usize..40,
    ) {
        let base = DiscretePdf::uniform(9);
        let (counts, scores): (Vec<u64>, Vec<f64>) = obs.iter().map(|o| (o.0, o.1)).unzip();
        let mut shuffled = obs.clone();
        shuffled.rotate_left(rot % obs.len());
        shuffled.reverse();
        let (c2, s2): (Vec<u64>, Vec<f64>) = shuffled.iter().map(|o| (o.0, o.1)).unzip();
        let a = update_pdf_with_scores(&base, &counts, &scores, 0.5).unwrap();
        let b = update_pdf_with_scores(&base, &c2, &s2, 0.5).unwrap();
        for (x, y) in a.mass().iter().zip(b.mass()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        let image: Vec<f64> = (0..10).map(|c| c as f64).collect();
        let y1: Vec<f64> = obs.iter().map(|o| o.2).collect();
        let y2: Vec<f64> = shuffled.iter().map(|o| o.2).collect();
        let a = update_pdf_posterior(&base, &y1, &image, 1.5, &scores, 0.5).unwrap();
        let b = update_pdf_posterior(&base, &y2, &image, 1.5, &s2, 0.5).unwrap();
        for (x, y) in a.mass().iter().zip(b.mass()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn scores_rise_as_mass_falls(w in weights(2..=16)) {
        let pdf = DiscretePdf::from_weights(&w);
        let map = build_score_map(&pdf, 1.0);
        for a in 0..w.len() {
            for b in 0..w.len() {
                if pdf.prob(a) <= pdf.prob(b) {
                    prop_assert!(map.score(a) >= map.score(b));
                }
            }
            prop_assert!((0.0..=1.0).contains(&map.score(a)));
        }
    }

    #[test]
    fn distinct_masses_round_trip(w in prop::collection::vec(0.1f64..1.0, 2..=20)) {
        let distinct: HashSet<u64> = w.iter().map(|v| v.to_bits()).collect();
        prop_assume!(distinct.len() == w.len());
        let map = build_score_map(&DiscretePdf::from_weights(&w), 1.0);
        let counts: Vec<u64> = (0..w.len() as u64).collect();
        prop_assert_eq!(reconstruct(&disentangle(&counts, &map), &map), counts);
    }

    #[test]
    fn ks_properties(
        a in prop::collection::vec(-50i32..50, 1..40),
        b in prop::collection::vec(-50i32..50, 1..40),
    ) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let d = ks_statistic(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d, ks_statistic(&b, &a).unwrap());
        prop_assert_eq!(d, ks_brute(&a, &b));
        let f = |v: &f64| (v / 10.0).exp() - 3.0;
        let fa: Vec<f64> = a.iter().map(f).collect();
        let fb: Vec<f64> = b.iter().map(f).collect();
        prop_assert_eq!(d, ks_statistic(&fa, &fb).unwrap());
    }

    #[test]
    fn utility_ratio_grows_with_ratio(eps in 0.05f64..4.0, k in 1u64..50, extra in 1u64..200) {
        // beyond this the e^{-eps m/k} terms fall below f64 resolution
        prop_assume!(eps * (k + extra + 1) as f64 / k as f64 <= 25.0);
        let lo = utility_ratio_bound(eps, k + extra, k).unwrap();
        let hi = utility_ratio_bound(eps, k + extra + 1, k).unwrap();
        prop_assert!(lo >= 1.0);
        prop_assert!(hi > lo);
    }

    #[test]
    fn more_overlap_never_hurts(n_det in 1usize..20, n_truth in 1usize..20, hits in 0usize..20) {
        let hits = hits.min(n_det).min(n_truth);
        let det: HashSet<usize> = (0..n_det).collect();
        let truth: HashSet<usize> = (n_det - hits..n_det - hits + n_truth).collect();
        let (p, r) = precision_recall(&det, &truth);
        prop_assert!((0.0..=1.0).contains(&p) && (0.0..=1.0).contains(&r));
        if hits < n_det.min(n_truth) {
            let truth2: HashSet<usize> = (n_det - hits - 1..n_det - hits - 1 + n_truth).collect();
            let (p2, r2) = precision_recall(&det, &truth2);
            prop_assert!(p2 >= p && r2 >= r);
        }
    }
}
