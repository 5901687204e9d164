use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ingest::{ingest_csv, CsvSchema};
use super::synthetic::{generate_synthetic, SyntheticSpec};
use crate::detector::{classify, precision_recall_labels};
use crate::error::{Error, Result};
use crate::learner::LearnerConfig;
use crate::protocol::{
    cumulative_scores, session_round, BinLayout, Mechanism, Mssp, NoiseSpace, Owner, SessionConfig,
    LearningSource, ScoreSensitivity,
};
use crate::sampler::CandidateMode;
use crate::types::CountMatrix;

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Synthetic(SyntheticSpec),
    Csv {
        path: PathBuf,
        schema: CsvSchema,
        records_per_iteration: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mechanisms: Vec<Mechanism>,
    pub epsilons: Vec<f64>,
    pub gammas: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub iterations: usize,
    pub seeds: usize,
    pub first_seed: u64,
    pub dataset: DatasetSource,
    pub bins: usize,
    pub c_max: u64,
    pub unit_len: usize,
    pub learner: LearnerConfig,
    pub n_effective: f64,
    pub noise_space: NoiseSpace,
    pub score_sensitivity: ScoreSensitivity,
    pub learning_source: LearningSource,
    pub histogram_share: f64,
    pub candidate_mode: CandidateMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let spec = SyntheticSpec::default();
        ExperimentConfig {
            mechanisms: Mechanism::ALL.to_vec(),
            epsilons: vec![1.0],
            gammas: vec![0.2],
            thresholds: vec![0.9],
            iterations: spec.iterations,
            seeds: 20,
            first_seed: 0,
            bins: spec.bins(),
            unit_len: spec.unit_len,
            dataset: DatasetSource::Synthetic(spec),
            c_max: 13,
            learner: LearnerConfig::default(),
            n_effective: 1.0,
            noise_space: NoiseSpace::Score,
            score_sensitivity: ScoreSensitivity::Sampled,
            learning_source: LearningSource::FrequencyHistogram,
            histogram_share: 0.5,
            candidate_mode: CandidateMode::NeighborDifference,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let empty = |what: &str| Err(Error::InvalidArgument(format!("{what} sweep is empty")));
        if self.mechanisms.is_empty() {
            return empty("mechanism");
        }
        if self.epsilons.is_empty() {
            return empty("epsilon");
        }
        if self.gammas.is_empty() {
            return empty("gamma");
        }
        if self.thresholds.is_empty() {
            return empty("threshold");
        }
        if self.seeds == 0 || self.iterations == 0 {
            return Err(Error::InvalidArgument("seeds and iterations must be >= 1".into()));
        }
        if let DatasetSource::Synthetic(spec) = &self.dataset {
            spec.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub mechanism: String,
    pub epsilon: f64,
    pub gamma: f64,
    pub threshold: f64,
    pub iteration: usize,
    pub seed: u64,
    pub precision: f64,
    pub recall: f64,
    pub runtime_ms: f64,
    pub sensitivity_used: f64,
    pub k: u64,
    pub m: u64,
    pub phase_switch_iter: usize,
}

pub const RESULT_COLUMNS: [&str; 13] = [
    "mechanism",
    "epsilon",
    "gamma",
    "threshold",
    "iteration",
    "seed",
    "precision",
    "recall",
    "runtime_ms",
    "sensitivity_used",
    "k",
    "m",
    "phase_switch_iter",
];

/// Raw batches for one seed plus the attribute ranges the owner discloses.
struct Corpus {
    batches: Vec<CountMatrix>,
    layout: BinLayout,
}

fn load_corpus(cfg: &ExperimentConfig, seed: u64) -> Result<Corpus> {
    match &cfg.dataset {
        DatasetSource::Synthetic(spec) => {
            let spec = SyntheticSpec {
                iterations: cfg.iterations,
                unit_len: cfg.unit_len,
                ..spec.clone()
            };
            let data = generate_synthetic(&spec, seed)?;
            let layout = BinLayout::equal_width(&[spec.attribute_range()], cfg.bins)?;
            let batches = (0..spec.iterations)
                .map(|i| layout.bin_windows(&data.records(i)))
                .collect::<Result<Vec<_>>>()?;
            Ok(Corpus { batches, layout })
        }
        DatasetSource::Csv {
            path,
            schema,
            records_per_iteration,
        } => {
            let ds = ingest_csv(path, schema)?;
            let layout = BinLayout::equal_width(&ds.attribute_ranges(), cfg.bins)?;
            let batches = ds
                .batches(*records_per_iteration)
                .iter()
                .take(cfg.iterations)
                .map(|b| layout.bin_windows(b))
                .collect::<Result<Vec<_>>>()?;
            Ok(Corpus { batches, layout })
        }
    }
}

/// Noise-free detector labels over all units up to each iteration.
fn ground_truth(batches: &[CountMatrix], c_max: u64, unit_len: usize, threshold: f64) -> Result<Vec<Vec<bool>>> {
    let blocks: Vec<Vec<Vec<f64>>> = batches
        .iter()
        .map(|m| {
            (0..m.rows())
                .map(|r| m.row(r).iter().map(|&c| c.min(c_max) as f64).collect())
                .collect()
        })
        .collect();
    (1..=blocks.len())
        .map(|i| {
            let scores = cumulative_scores(&blocks[..i], &vec![0; i], unit_len)?;
            Ok(classify(&scores, threshold))
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct Trial {
    mechanism: Mechanism,
    epsilon: f64,
    gamma: f64,
    threshold: f64,
    seed: u64,
}

fn run_trial(cfg: &ExperimentConfig, corpus: &Corpus, truth: &[Vec<bool>], t: Trial) -> Result<Vec<ResultRow>> {
    let session = SessionConfig {
        mechanism: t.mechanism,
        epsilon: t.epsilon,
        gamma: t.gamma,
        threshold: t.threshold,
        c_max: cfg.c_max,
        bins: cfg.bins,
        unit_len: cfg.unit_len,
        learner: cfg.learner,
        n_effective: cfg.n_effective,
        noise_space: cfg.noise_space,
        score_sensitivity: cfg.score_sensitivity,
        learning_source: cfg.learning_source,
        histogram_share: cfg.histogram_share,
        candidate_mode: cfg.candidate_mode,
        seed: t.seed,
    };
    let mut owner = Owner::new(session.clone())?;
    let mut mssp = Mssp::new(session)?;
    owner.accept_layout(corpus.layout.clone());
    mssp.install_layout(corpus.layout.clone());
    let mut rows = Vec::with_capacity(corpus.batches.len());
    for (i, counts) in corpus.batches.iter().enumerate() {
        let start = Instant::now();
        let entry = session_round(&mut owner, &mut mssp, counts.clone()).map_err(|e| e.at_iteration(i + 1))?;
        let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
        let (precision, recall) = precision_recall_labels(&entry.anomaly.labels, &truth[i])?;
        rows.push(ResultRow {
            mechanism: t.mechanism.to_string(),
            epsilon: t.epsilon,
            gamma: t.gamma,
            threshold: t.threshold,
            iteration: i + 1,
            seed: t.seed,
            precision,
            recall,
            runtime_ms,
            sensitivity_used: entry.release.sensitivity(),
            k: entry.release.k(),
            m: entry.release.m(),
            phase_switch_iter: 0,
        });
    }
    let switch = mssp.switched_after().unwrap_or(0);
    for r in &mut rows {
        r.phase_switch_iter = switch;
    }
    Ok(rows)
}

/// Runs every (epsilon, gamma, threshold, seed, mechanism) trial. Trials run
/// in parallel; rows come back in sweep order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let seeds: Vec<u64> = (0..cfg.seeds as u64).map(|s| cfg.first_seed + s).collect();
    let per_seed: Vec<Vec<ResultRow>> = seeds
        .par_iter()
        .map(|&seed| -> Result<Vec<ResultRow>> {
            let corpus = load_corpus(cfg, seed).map_err(|e| e.context(format!("seed {seed}")))?;
            let mut rows = Vec::new();
            for &threshold in &cfg.thresholds {
                let truth = ground_truth(&corpus.batches, cfg.c_max, cfg.unit_len, threshold)?;
                for &epsilon in &cfg.epsilons {
                    for &gamma in &cfg.gammas {
                        for &mechanism in &cfg.mechanisms {
                            let t = Trial {
                                mechanism,
                                epsilon,
                                gamma,
                                threshold,
                                seed,
                            };
                            rows.extend(run_trial(cfg, &corpus, &truth, t).map_err(|e| {
                                e.context(format!(
                                    "{mechanism} eps={epsilon} gamma={gamma} threshold={threshold} seed={seed}"
                                ))
                            })?);
                        }
                    }
                }
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows: Vec<ResultRow> = per_seed.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        a.threshold
            .total_cmp(&b.threshold)
            .then(a.epsilon.total_cmp(&b.epsilon))
            .then(a.gamma.total_cmp(&b.gamma))
            .then(mech_order(&a.mechanism).cmp(&mech_order(&b.mechanism)))
            .then(a.seed.cmp(&b.seed))
            .then(a.iteration.cmp(&b.iteration))
    });
    Ok(rows)
}

fn mech_order(name: &str) -> usize {
    name.parse::<Mechanism>()
        .map(|m| Mechanism::ALL.iter().position(|x| *x == m).unwrap_or(usize::MAX))
        .unwrap_or(usize::MAX)
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median precision and recall over seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub mechanism: String,
    pub epsilon: f64,
    pub gamma: f64,
    pub threshold: f64,
    pub iteration: usize,
    pub seeds: usize,
    pub median_precision: f64,
    pub median_recall: f64,
}

pub fn summarize(rows: &[ResultRow]) -> Vec<Summary> {
    let mut out: Vec<Summary> = Vec::new();
    let mut i = 0;
    let key = |r: &ResultRow| (r.mechanism.clone(), r.epsilon, r.gamma, r.threshold, r.iteration);
    let mut sorted: Vec<&ResultRow> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        a.threshold
            .total_cmp(&b.threshold)
            .then(a.epsilon.total_cmp(&b.epsilon))
            .then(a.gamma.total_cmp(&b.gamma))
            .then(mech_order(&a.mechanism).cmp(&mech_order(&b.mechanism)))
            .then(a.iteration.cmp(&b.iteration))
    });
    while i < sorted.len() {
        let k = key(sorted[i]);
        let mut j = i;
        while j < sorted.len() && key(sorted[j]) == k {
            j += 1;
        }
        let mut p: Vec<f64> = sorted[i..j].iter().map(|r| r.precision).collect();
        let mut r: Vec<f64> = sorted[i..j].iter().map(|r| r.recall).collect();
        out.push(Summary {
            mechanism: k.0,
            epsilon: k.1,
            gamma: k.2,
            threshold: k.3,
            iteration: k.4,
            seeds: j - i,
            median_precision: median(&mut p),
            median_recall: median(&mut r),
        });
        i = j;
    }
    out
}
