//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Red criteria are reported, not hidden. The process exits non-zero on a
//! red criterion only when `DPOAD_ACCEPTANCE_STRICT` is set, so the rest of
//! the workspace suite still runs under a plain `cargo test`.

mod common;

use std::time::Instant;

use common::*;
use dpoad::bench::{run_experiment, ExperimentConfig, ResultRow, SyntheticSpec};
use dpoad::detector::{ks_statistic, utility_ratio_bound};
use dpoad::disentangler::{build_score_map, disentangle, reconstruct};
use dpoad::distance::kolmogorov_distance;
use dpoad::learner::estimate_pdf;
use dpoad::mechanisms::{laplace_mechanism, sample_laplace, standard_laplace};
use dpoad::protocol::{run_session, Mechanism, SessionConfig};
use dpoad::rng::seeded;
use dpoad::sampler::*;
use dpoad::wire::release_to_text;
use dpoad::DiscretePdf;
use rand::Rng;

type Outcome = (bool, String);

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut note = |got: f64, want: f64| worst = worst.max(rel_err(got, want));

    for i in 0..100 {
        let gamma = 0.01 + 0.97 * i as f64 / 99.0;
        note(rho_star_learning(gamma).unwrap(), rho_star_learning_bisect(gamma));
    }
    for gi in 0..10 {
        for fi in 0..10 {
            let gamma = 0.05 + 0.09 * gi as f64;
            let rho = gamma * (0.05 + 0.09 * fi as f64);
            let m = m_learning(gamma, rho).unwrap();
            note(m as f64, m_learning_search(gamma, rho) as f64);
            note(
                k_learning(m, gamma, rho) as f64,
                k_search(m, gamma, rho, (1.0 / rho).ln()) as f64,
            );
        }
    }
    for i in 0..100u64 {
        let n = 50 + 997 * i;
        let eps = 0.1 + 0.04 * i as f64;
        note(compute_t(n, eps, 14, 1.0), t_direct(n, eps, 14, 1.0));
    }
    for ri in 0..10 {
        for ti in 0..10 {
            let rho = 0.01 + 0.018 * ri as f64;
            let t = 2.05 + 6.0 * ti as f64;
            let m = m_prediction(rho, t).unwrap();
            note(m as f64, m_prediction_search(rho, t) as f64);
            note(
                k_prediction(m, 0.2, rho) as f64,
                k_search(m, 0.2, rho, dkw_term(rho)) as f64,
            );
        }
    }
    for i in 0..100u64 {
        let m = 1 + i * i * 37;
        note(rho_star_prediction(m), rho_prediction_direct(m));
    }
    for i in 0..100u64 {
        let eps = 0.1 + 0.05 * i as f64;
        let k = 1 + i % 7;
        let m = k + i % 13;
        note(
            utility_ratio_bound(eps, m, k).unwrap(),
            utility_direct(eps, m as f64 / k as f64),
        );
    }
    let secs = start.elapsed().as_secs_f64();
    (
        worst <= 1e-9 && secs < 1.0,
        format!("max rel err {worst:.2e}, {secs:.3} s"),
    )
}

fn criterion_2() -> Outcome {
    let at_branch = lambert_w_minus1(-(-1.0f64).exp()).unwrap();
    let mut rng = seeded(2);
    let bound = (-1.0f64).exp();
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let x = loop {
            let x = -bound * rng.random::<f64>();
            if x < 0.0 && x > -bound {
                break x;
            }
        };
        let w = lambert_w_minus1(x).unwrap();
        worst = worst.max((w * w.exp() - x).abs());
    }
    (
        (at_branch + 1.0).abs() <= 1e-10 && worst < 1e-12,
        format!("W(-1/e) = {at_branch}, max residual {worst:.2e}"),
    )
}

fn criterion_3() -> Outcome {
    let runs = 100_000;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut parts = Vec::new();
    for (i, eps) in [0.5, 1.0, 2.0].into_iter().enumerate() {
        let mut rng = seeded(30 + i as u64);
        let mut a: Vec<f64> = (0..runs)
            .map(|_| laplace_mechanism(&[5.0], 1.0, eps, &mut rng).unwrap()[0])
            .collect();
        let mut b: Vec<f64> = (0..runs)
            .map(|_| laplace_mechanism(&[6.0], 1.0, eps, &mut rng).unwrap()[0])
            .collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let mut worst = 0.0f64;
        for step in 0..=60 {
            let t = 3.0 + 0.1 * step as f64;
            let (la, lb) = (a.partition_point(|v| *v <= t), b.partition_point(|v| *v <= t));
            // both half-lines, only where each side has enough mass
            for (x, y) in [(la, lb), (runs - la, runs - lb)] {
                if x >= 5000 && y >= 5000 {
                    worst = worst.max((x as f64 / y as f64).ln().abs());
                }
            }
        }
        worst_excess = worst_excess.max(worst - eps);
        parts.push(format!("eps {eps}: {worst:.3}"));
    }
    let mut rng = seeded(33);
    let b = 1.5;
    let draws: Vec<f64> = (0..runs).map(|_| sample_laplace(b, &mut rng).unwrap()).collect();
    let mean = draws.iter().sum::<f64>() / runs as f64;
    let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (runs - 1) as f64;
    let var_err = rel_err(var, 2.0 * b * b);
    (
        worst_excess <= 0.1 && var_err < 0.05,
        format!("max log ratio {}; var rel err {var_err:.4}", parts.join(", ")),
    )
}

fn criterion_4() -> Outcome {
    let exact = uniform_difference_quantile(10, 0.95);
    let pdf = DiscretePdf::uniform(10);
    let chosen: Vec<f64> = (0..20)
        .map(|s| sample_sensitivity(&pdf, 1000, 950, &mut seeded(400 + s)).unwrap().chosen)
        .collect();
    let ok = chosen.iter().all(|c| (c - exact).abs() <= 1.0);
    let lo = chosen.iter().copied().fold(f64::MAX, f64::min);
    let hi = chosen.iter().copied().fold(f64::MIN, f64::max);
    (ok, format!("exact {exact}, chosen range [{lo}, {hi}] over 20 seeds"))
}

fn criterion_5() -> Outcome {
    let truth = DiscretePdf::new(vec![
        0.05, 0.1, 0.2, 0.2, 0.15, 0.1, 0.08, 0.06, 0.03, 0.02, 0.01,
    ])
    .unwrap();
    let cdf = truth.cdf();
    let mut slowest = 0.0f64;
    let mut medians = Vec::new();
    for n in [250usize, 1000, 4000] {
        let errs: Vec<f64> = (0..20)
            .map(|seed| {
                let mut rng = seeded(500 + seed);
                let noisy: Vec<f64> = (0..n)
                    .map(|_| {
                        let u: f64 = rng.random();
                        let c = cdf.partition_point(|&f| f < u).min(10);
                        c as f64 + standard_laplace(&mut rng)
                    })
                    .collect();
                let start = Instant::now();
                let est = estimate_pdf(&noisy, 10, 1.0).unwrap();
                slowest = slowest.max(start.elapsed().as_secs_f64());
                kolmogorov_distance(&est, &truth).unwrap()
            })
            .collect();
        medians.push(median(errs));
    }
    (
        medians[0] > medians[1] && medians[1] > medians[2] && slowest < 1.0,
        format!(
            "median d_K {:.4} > {:.4} > {:.4}; slowest run {slowest:.3} s",
            medians[0], medians[1], medians[2]
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = seeded(6);
    let mut round_trip = true;
    let mut made = 0;
    while made < 100 {
        let c_max = rng.random_range(1..=20usize);
        let w: Vec<f64> = (0..=c_max).map(|_| rng.random_range(0.1..1.0)).collect();
        let pdf = DiscretePdf::from_weights(&w);
        let mut m = pdf.mass().to_vec();
        m.sort_by(f64::total_cmp);
        if m.windows(2).any(|p| p[0] == p[1]) {
            continue;
        }
        made += 1;
        let map = build_score_map(&pdf, 1.0);
        let counts: Vec<u64> = (0..=c_max as u64).collect();
        round_trip &= reconstruct(&disentangle(&counts, &map), &map) == counts;
    }
    let mut monotone = true;
    for _ in 0..1000 {
        let c_max = rng.random_range(1..=20usize);
        let w: Vec<f64> = (0..=c_max).map(|_| rng.random::<f64>()).collect();
        let pdf = DiscretePdf::from_weights(&w);
        let map = build_score_map(&pdf, 1.0);
        for a in 0..=c_max {
            for b in 0..=c_max {
                if pdf.prob(a) <= pdf.prob(b) && map.score(a) < map.score(b) {
                    monotone = false;
                }
            }
        }
    }
    (
        round_trip && monotone,
        format!("round trip on 100 pmfs: {round_trip}; monotone on 1000 pmfs: {monotone}"),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = seeded(7);
    let mut mismatches = 0;
    for i in 0..500 {
        let na = rng.random_range(1..=50);
        let nb = rng.random_range(1..=50);
        let draw = |rng: &mut dpoad::rng::StreamRng| -> f64 {
            // half the pairs are tie-heavy integers
            if i % 2 == 0 {
                rng.random_range(0..8) as f64
            } else {
                rng.random::<f64>()
            }
        };
        let a: Vec<f64> = (0..na).map(|_| draw(&mut rng)).collect();
        let b: Vec<f64> = (0..nb).map(|_| draw(&mut rng)).collect();
        if ks_statistic(&a, &b).unwrap() != ks_brute(&a, &b) {
            mismatches += 1;
        }
    }
    (mismatches == 0, format!("{mismatches} mismatches over 500 pairs"))
}

fn criterion_8() -> Outcome {
    let unit = [0.1, 0.5, 1.0, 2.0, 5.0]
        .iter()
        .all(|&e| (1..20).all(|k| utility_ratio_bound(e, k, k).unwrap() == 1.0));
    let mut increasing = true;
    for eps in [0.5, 1.0, 2.0] {
        let k = 4;
        let vals: Vec<f64> = (4..=40).map(|m| utility_ratio_bound(eps, m, k).unwrap()).collect();
        increasing &= vals.windows(2).all(|p| p[1] > p[0]);
    }
    let v = utility_ratio_bound(1.0, 2, 1).unwrap();
    let ok = unit && increasing && (v - 1.197).abs() <= 1e-3 && (v - utility_direct(1.0, 2.0)).abs() < 1e-12;
    (
        ok,
        format!("unit at m=k: {unit}; increasing: {increasing}; (1, 2) -> {v:.6}"),
    )
}

fn medians_at(rows: &[ResultRow], mech: &str, eps: f64, iteration: usize) -> (f64, f64) {
    let sel: Vec<&ResultRow> = rows
        .iter()
        .filter(|r| r.mechanism == mech && r.epsilon == eps && r.iteration == iteration)
        .collect();
    (
        median(sel.iter().map(|r| r.precision).collect()),
        median(sel.iter().map(|r| r.recall).collect()),
    )
}

fn benchmark() -> ExperimentConfig {
    let spec = SyntheticSpec::default();
    ExperimentConfig {
        epsilons: vec![1.0],
        gammas: vec![0.2],
        thresholds: vec![0.9],
        iterations: 6,
        seeds: 20,
        dataset: dpoad::bench::DatasetSource::Synthetic(spec),
        ..ExperimentConfig::default()
    }
}

fn criterion_9(rows: &[ResultRow], secs: f64) -> Outcome {
    let (dp, dr) = medians_at(rows, "dpoad", 1.0, 6);
    let (pp, pr) = medians_at(rows, "painfree", 1.0, 6);
    let (lp, lr) = medians_at(rows, "laplace", 1.0, 6);
    let ok = dp > pp && pp > lp && dr > pr && pr > lr && secs < 120.0;
    (
        ok,
        format!(
            "precision D {dp:.4} / PF {pp:.4} / L {lp:.4}; recall D {dr:.4} / PF {pr:.4} / L {lr:.4}; {secs:.1} s"
        ),
    )
}

fn criterion_10(rows: &[ResultRow]) -> Outcome {
    let by_iter: Vec<f64> = (1..=6).map(|i| medians_at(rows, "dpoad", 1.0, i).0).collect();
    let by_eps: Vec<f64> = [0.1, 0.5, 1.0, 2.0]
        .iter()
        .map(|&e| medians_at(rows, "dpoad", e, 6).0)
        .collect();
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
    let ok = by_iter.windows(2).all(|p| p[1] >= p[0]) && by_eps.windows(2).all(|p| p[1] >= p[0]);
    (
        ok,
        format!("by iteration {}; by eps {}", fmt(&by_iter), fmt(&by_eps)),
    )
}

fn criterion_11() -> Outcome {
    let spec = SyntheticSpec {
        windows_per_iteration: 200,
        ..SyntheticSpec::default()
    };
    let data = dpoad::bench::generate_synthetic(&spec, 11).unwrap();
    let batches: Vec<_> = (0..spec.iterations).map(|i| data.records(i)).collect();
    let allowed = [
        "iteration", "phase", "epsilon", "layout", "sensitivity", "m", "k", "rows", "cols",
        "scales", "payload", "histogram_epsilon", "histograms",
    ];
    let mut identical = true;
    let mut sealed = true;
    for mechanism in Mechanism::ALL {
        let cfg = SessionConfig {
            mechanism,
            seed: 77,
            ..SessionConfig::default()
        };
        let a = run_session(&batches, vec![spec.attribute_range()], &cfg).unwrap();
        let b = run_session(&batches, vec![spec.attribute_range()], &cfg).unwrap();
        identical &= a.to_text() == b.to_text();
        for e in &a.entries {
            let text = release_to_text(&e.release);
            for line in text.lines().skip(1).filter(|l| *l != "end") {
                let key = line.split('=').next().unwrap_or_default();
                sealed &= allowed.contains(&key);
            }
            sealed &= e.release.payload().iter().all(|v| v.fract() != 0.0);
            sealed &= e.release.histograms().iter().all(|v| v.fract() != 0.0);
        }
    }
    (
        identical && sealed,
        format!("byte-identical traces: {identical}; releases carry only noised fields: {sealed}"),
    )
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = vec![
        (1, "formula suite vs oracles", criterion_1()),
        (2, "Lambert W lower branch", criterion_2()),
        (3, "Laplace DP ratio and variance", criterion_3()),
        (4, "order-statistic sampler", criterion_4()),
        (5, "distribution learning convergence", criterion_5()),
        (6, "disentangler round trip and monotonicity", criterion_6()),
        (7, "KS against breakpoint scan", criterion_7()),
        (8, "utility ratio bound", criterion_8()),
    ];

    let start = Instant::now();
    let main_rows = run_experiment(&benchmark()).expect("benchmark runs");
    let secs = start.elapsed().as_secs_f64();
    results.push((9, "end-to-end ordering D > PF > L", criterion_9(&main_rows, secs)));

    let sweep = ExperimentConfig {
        mechanisms: vec![Mechanism::Dpoad],
        epsilons: vec![0.1, 0.5, 2.0],
        ..benchmark()
    };
    let mut rows = run_experiment(&sweep).expect("sweep runs");
    rows.extend(main_rows);
    results.push((10, "precision trends in iteration and eps", criterion_10(&rows)));
    results.push((11, "determinism and sealing", criterion_11()));

    let mut failed = 0;
    for (id, name, (ok, detail)) in &results {
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {}: {name}: {detail}",
            if *ok { "PASS" } else { "FAIL" }
        );
    }
    println!("acceptance: {}/{} criteria pass", results.len() - failed, results.len());
    if failed > 0 && std::env::var_os("DPOAD_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
