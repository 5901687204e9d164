//! The iterative owner/analyst session.
//!
//! The owner bins each batch of time windows, privatizes it and sends an
//! [`OwnerRelease`]. The analyst reconstructs pseudo-counts, scores every
//! unit received so far, refines its per-row count distributions and sends
//! back an [`MsspReport`] carrying the next round's sensitivity.

use std::fmt;
use std::str::FromStr;

use crate::detector::{score_units, AnomalyReport};
use crate::disentangler::{build_score_map, disentangle, map_sensitivity, reconstruct, ScoreMap};
use crate::error::{Error, Result};
use crate::learner::{phase_switch_ready, update_pdf_posterior, LearnerConfig, LearnerState};
use crate::mechanisms::{standard_laplace, value_frequencies, FREQUENCY_SENSITIVITY};
use crate::rng::{stream, Purpose};
use crate::sampler::{
    learning_params, prediction_params, sample_sensitivity_uniform, CandidateLaw, CandidateMode,
    LearningParams,
};
use crate::types::{build_histogram, equal_width_edges, CountMatrix, DiscretePdf, Phase, Record};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mechanism {
    Laplace,
    PainFree,
    Dpoad,
}

impl Mechanism {
    pub const ALL: [Mechanism; 3] = [Mechanism::Laplace, Mechanism::PainFree, Mechanism::Dpoad];
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mechanism::Laplace => "laplace",
            Mechanism::PainFree => "painfree",
            Mechanism::Dpoad => "dpoad",
        })
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "laplace" => Ok(Mechanism::Laplace),
            "painfree" => Ok(Mechanism::PainFree),
            "dpoad" => Ok(Mechanism::Dpoad),
            other => Err(Error::InvalidArgument(format!("unknown mechanism '{other}'"))),
        }
    }
}

/// Where prediction-phase noise is added.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseSpace {
    /// Noise on disentangled scores, scaled by the mapped sensitivity.
    #[default]
    Score,
    /// Noise on counts, scaled by the sampled sensitivity directly.
    Count,
}

/// What the analyst learns the count distribution from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LearningSource {
    /// Per-row value-frequency histograms released with a share of the
    /// budget during learning, summed, clipped and normalized.
    #[default]
    FrequencyHistogram,
    /// The noisy counts themselves, deconvolved against their known noise.
    NoisyCounts,
}

/// How the score-space sensitivity of a prediction release is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreSensitivity {
    /// Order statistic of sampled score differences `|s(c) - s(c')|` with
    /// `c, c'` from the learnt pmf, using the same (m, k) as the count draw.
    #[default]
    Sampled,
    /// Largest score change between counts at most the sampled count
    /// sensitivity apart.
    Lipschitz,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub mechanism: Mechanism,
    pub epsilon: f64,
    pub gamma: f64,
    pub threshold: f64,
    pub c_max: u64,
    pub bins: usize,
    /// Consecutive time windows per scored unit.
    pub unit_len: usize,
    pub learner: LearnerConfig,
    /// Scales the probability floor of the score map.
    pub n_effective: f64,
    pub noise_space: NoiseSpace,
    pub score_sensitivity: ScoreSensitivity,
    pub learning_source: LearningSource,
    /// Budget share spent on frequency histograms in learning releases.
    pub histogram_share: f64,
    pub candidate_mode: CandidateMode,
    pub seed: u64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            mechanism: Mechanism::Dpoad,
            epsilon: 1.0,
            gamma: 0.2,
            threshold: 0.9,
            c_max: 13,
            bins: 11,
            unit_len: 2,
            learner: LearnerConfig::default(),
            n_effective: 1.0,
            noise_space: NoiseSpace::Score,
            score_sensitivity: ScoreSensitivity::Sampled,
            learning_source: LearningSource::FrequencyHistogram,
            histogram_share: 0.5,
            candidate_mode: CandidateMode::NeighborDifference,
            seed: 0,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon {} must be > 0", self.epsilon));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma {} outside (0,1)", self.gamma));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad(format!("threshold {} outside (0,1)", self.threshold));
        }
        if self.bins == 0 || self.unit_len == 0 {
            return bad("bins and unit length must be >= 1".into());
        }
        if self.learning_source == LearningSource::FrequencyHistogram
            && !(self.histogram_share > 0.0 && self.histogram_share < 1.0)
        {
            return bad(format!("histogram share {} outside (0,1)", self.histogram_share));
        }
        if !(self.learner.blend >= 0.0 && self.learner.blend <= 1.0) {
            return bad(format!("blend {} outside [0,1]", self.learner.blend));
        }
        Ok(())
    }
}

/// Non-private metadata the owner discloses when the session opens.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionMetadata {
    pub epsilon: f64,
    pub c_max: u64,
    pub attribute_ranges: Vec<(f64, f64)>,
}

/// Bin edges per attribute, chosen by the analyst.
#[derive(Debug, Clone, PartialEq)]
pub struct BinLayout {
    edges: Vec<Vec<f64>>,
}

impl BinLayout {
    pub fn new(edges: Vec<Vec<f64>>) -> Result<Self> {
        for e in &edges {
            if e.len() < 2 || e.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::BadEdges);
            }
        }
        if edges.is_empty() {
            return Err(Error::BadEdges);
        }
        Ok(BinLayout { edges })
    }

    pub fn equal_width(ranges: &[(f64, f64)], bins: usize) -> Result<Self> {
        let edges = ranges
            .iter()
            .map(|&(lo, hi)| {
                let hi = if hi > lo { hi } else { lo + 1.0 };
                equal_width_edges(lo, hi, bins)
            })
            .collect::<Result<Vec<_>>>()?;
        BinLayout::new(edges)
    }

    pub fn edges(&self) -> &[Vec<f64>] {
        &self.edges
    }

    /// Rows of the released matrix: all bins of attribute 0, then 1, ...
    pub fn rows(&self) -> usize {
        self.edges.iter().map(|e| e.len() - 1).sum()
    }

    /// Stable FNV-1a digest used to acknowledge the layout in releases.
    pub fn id(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for e in &self.edges {
            for v in e.iter().chain(std::iter::once(&f64::NAN)) {
                for b in v.to_bits().to_le_bytes() {
                    h ^= b as u64;
                    h = h.wrapping_mul(0x0000_0100_0000_01b3);
                }
            }
        }
        h
    }

    /// Bins a batch of time windows into a `rows x windows` matrix.
    pub fn bin_windows(&self, windows: &[Vec<Record>]) -> Result<CountMatrix> {
        let mut m = CountMatrix::zeros(self.rows(), windows.len());
        for (w, records) in windows.iter().enumerate() {
            let mut row = 0;
            for (a, edges) in self.edges.iter().enumerate() {
                let h = build_histogram(records, edges, a, w)?;
                for &c in h.counts() {
                    m.set(row, w, c);
                    row += 1;
                }
            }
        }
        Ok(m)
    }
}

/// One privatized batch. Only the owner's step constructs releases, and it
/// only ever fills the payload with noised values.
///
/// ```compile_fail
/// use dpoad::protocol::OwnerRelease;
/// let leak = OwnerRelease { payload: vec![3.0, 4.0], ..todo!() };
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct OwnerRelease {
    pub(crate) iteration: usize,
    pub(crate) phase: Phase,
    pub(crate) epsilon_used: f64,
    pub(crate) layout_id: u64,
    pub(crate) sensitivity: f64,
    pub(crate) m: u64,
    pub(crate) k: u64,
    pub(crate) rows: usize,
    pub(crate) cols: usize,
    pub(crate) noise_scales: Vec<f64>,
    pub(crate) payload: Vec<f64>,
    pub(crate) histogram_epsilon: f64,
    pub(crate) histograms: Vec<f64>,
}

impl OwnerRelease {
    pub fn iteration(&self) -> usize {
        self.iteration
    }
    pub fn phase(&self) -> Phase {
        self.phase
    }
    pub fn epsilon_used(&self) -> f64 {
        self.epsilon_used
    }
    pub fn layout_id(&self) -> u64 {
        self.layout_id
    }
    /// Count-space sensitivity behind this release.
    pub fn sensitivity(&self) -> f64 {
        self.sensitivity
    }
    pub fn m(&self) -> u64 {
        self.m
    }
    pub fn k(&self) -> u64 {
        self.k
    }
    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    /// Laplace scale applied to each row.
    pub fn noise_scales(&self) -> &[f64] {
        &self.noise_scales
    }
    pub fn payload(&self) -> &[f64] {
        &self.payload
    }
    pub fn payload_row(&self, row: usize) -> &[f64] {
        &self.payload[row * self.cols..(row + 1) * self.cols]
    }
    /// Budget spent on the frequency histograms; 0 when none were sent.
    pub fn histogram_epsilon(&self) -> f64 {
        self.histogram_epsilon
    }
    /// Noisy value-frequency histograms, `rows x (C_max + 1)`, row-major.
    pub fn histograms(&self) -> &[f64] {
        &self.histograms
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MsspReport {
    pub iteration: usize,
    /// Scores of every unit received so far, ordered by iteration, then
    /// row, then unit.
    pub anomaly_scores: Vec<f64>,
    pub updated_pdfs: Vec<DiscretePdf>,
    pub sampled_sensitivity: Option<f64>,
    /// Per-row score-space sensitivity when it is sampled by the analyst.
    pub score_sensitivities: Vec<f64>,
    pub m: u64,
    pub k: u64,
    pub phase_recommendation: Phase,
}

/// Owner-side state.
#[derive(Debug, Clone)]
pub struct Owner {
    config: SessionConfig,
    learning: LearningParams,
    layout: Option<BinLayout>,
    phase: Phase,
    iteration: usize,
    guidance: Option<Guidance>,
}

#[derive(Debug, Clone)]
struct Guidance {
    maps: Vec<ScoreMap>,
    score_sensitivities: Vec<f64>,
    sensitivity: f64,
    m: u64,
    k: u64,
}

impl Owner {
    pub fn new(config: SessionConfig) -> Result<Self> {
        config.validate()?;
        let learning = learning_params(config.gamma)?;
        Ok(Owner {
            config,
            learning,
            layout: None,
            phase: Phase::Learning,
            iteration: 0,
            guidance: None,
        })
    }

    pub fn metadata(&self, attribute_ranges: Vec<(f64, f64)>) -> SessionMetadata {
        SessionMetadata {
            epsilon: self.config.epsilon,
            c_max: self.config.c_max,
            attribute_ranges,
        }
    }

    pub fn accept_layout(&mut self, layout: BinLayout) {
        self.layout = Some(layout);
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Bins and privatizes one batch of time windows.
    pub fn step(&mut self, windows: &[Vec<Record>]) -> Result<OwnerRelease> {
        let layout = self
            .layout
            .as_ref()
            .ok_or_else(|| Error::Protocol("no bin layout received".into()))?;
        let counts = layout.bin_windows(windows)?;
        self.step_counts(counts)
    }

    /// Privatizes an already binned batch.
    pub fn step_counts(&mut self, mut counts: CountMatrix) -> Result<OwnerRelease> {
        let layout_id = match &self.layout {
            Some(l) if l.rows() == counts.rows() => l.id(),
            Some(l) => {
                return Err(Error::LengthMismatch {
                    left: l.rows(),
                    right: counts.rows(),
                })
            }
            None => return Err(Error::Protocol("no bin layout received".into())),
        };
        counts.clamp_max(self.config.c_max);
        let cfg = &self.config;
        let it = self.iteration as u64;
        let eps = cfg.epsilon;
        let rows = counts.rows();
        let mut noise = stream(cfg.seed, it, Purpose::OwnerNoise);

        let prediction = cfg.mechanism == Mechanism::Dpoad && self.phase == Phase::Prediction;
        let (sensitivity, m, k, values, scales) = if prediction {
            let g = self
                .guidance
                .as_ref()
                .ok_or_else(|| Error::Protocol("prediction requested before any report".into()))?;
            let (values, scales) = match cfg.noise_space {
                NoiseSpace::Score => {
                    let mut values = Vec::with_capacity(rows * counts.cols());
                    let mut scales = Vec::with_capacity(rows);
                    for r in 0..rows {
                        values.extend(disentangle(counts.row(r), &g.maps[r]));
                        scales.push(g.score_sensitivities[r] / eps);
                    }
                    (values, scales)
                }
                NoiseSpace::Count => (
                    counts.as_slice().iter().map(|&c| c as f64).collect(),
                    vec![g.sensitivity / eps; rows],
                ),
            };
            (g.sensitivity, g.m, g.k, values, scales)
        } else {
            let (sens, m, k) = match cfg.mechanism {
                Mechanism::Laplace => (cfg.c_max as f64, 0, 0),
                _ => {
                    let mut srng = stream(cfg.seed, it, Purpose::OwnerSensitivity);
                    let s = sample_sensitivity_uniform(
                        cfg.c_max,
                        self.learning.m,
                        self.learning.k,
                        &mut srng,
                    )?;
                    (s.chosen, self.learning.m, self.learning.k)
                }
            };
            let values = counts.as_slice().iter().map(|&c| c as f64).collect();
            (sens, m, k, values, vec![sens / self.count_budget(); rows])
        };

        let cols = counts.cols();
        let mut payload = values;
        for (r, chunk) in payload.chunks_mut(cols.max(1)).enumerate().take(rows) {
            let b = scales[r];
            for v in chunk {
                *v += b * standard_laplace(&mut noise);
            }
        }
        let (histogram_epsilon, histograms) = if self.sends_histograms() {
            let he = eps * cfg.histogram_share;
            let b = FREQUENCY_SENSITIVITY / he;
            let mut h = Vec::with_capacity(rows * (cfg.c_max as usize + 1));
            for r in 0..rows {
                for f in value_frequencies(counts.row(r), cfg.c_max as usize) {
                    h.push(f + b * standard_laplace(&mut noise));
                }
            }
            (he, h)
        } else {
            (0.0, Vec::new())
        };
        let release = OwnerRelease {
            iteration: self.iteration,
            phase: if prediction { Phase::Prediction } else { Phase::Learning },
            epsilon_used: eps,
            layout_id,
            sensitivity,
            m,
            k,
            rows,
            cols,
            noise_scales: scales,
            payload,
            histogram_epsilon,
            histograms,
        };
        self.iteration += 1;
        Ok(release)
    }

    fn sends_histograms(&self) -> bool {
        self.config.mechanism == Mechanism::Dpoad
            && self.phase == Phase::Learning
            && self.config.learning_source == LearningSource::FrequencyHistogram
    }

    /// Budget left for the counts of a non-prediction release.
    fn count_budget(&self) -> f64 {
        if self.sends_histograms() {
            self.config.epsilon * (1.0 - self.config.histogram_share)
        } else {
            self.config.epsilon
        }
    }

    pub fn receive(&mut self, report: &MsspReport) -> Result<()> {
        if report.iteration + 1 != self.iteration {
            return Err(Error::Protocol(format!(
                "report for iteration {} received after release {}",
                report.iteration,
                self.iteration.saturating_sub(1)
            )));
        }
        if self.config.mechanism != Mechanism::Dpoad {
            return Ok(());
        }
        if report.phase_recommendation == Phase::Prediction {
            let sensitivity = report.sampled_sensitivity.ok_or_else(|| {
                Error::Protocol("prediction recommended without a sensitivity".into())
            })?;
            let maps: Vec<ScoreMap> = report
                .updated_pdfs
                .iter()
                .map(|p| build_score_map(p, self.config.n_effective))
                .collect();
            let score_sensitivities = match self.config.score_sensitivity {
                ScoreSensitivity::Sampled => {
                    if report.score_sensitivities.len() != maps.len() {
                        return Err(Error::Protocol(
                            "report lacks per-row score sensitivities".into(),
                        ));
                    }
                    report.score_sensitivities.clone()
                }
                ScoreSensitivity::Lipschitz => {
                    maps.iter().map(|m| map_sensitivity(sensitivity, m)).collect()
                }
            };
            self.guidance = Some(Guidance {
                maps,
                score_sensitivities,
                sensitivity,
                m: report.m,
                k: report.k,
            });
            self.phase = Phase::Prediction;
        }
        Ok(())
    }
}

/// Analyst-side state.
#[derive(Debug, Clone)]
pub struct Mssp {
    config: SessionConfig,
    layout: Option<BinLayout>,
    learner: Option<LearnerState>,
    phase: Phase,
    iteration: usize,
    maps: Vec<ScoreMap>,
    blocks: Vec<Vec<Vec<f64>>>,
    block_phase: Vec<Phase>,
    switched_after: Option<usize>,
}

impl Mssp {
    pub fn new(config: SessionConfig) -> Result<Self> {
        config.validate()?;
        Ok(Mssp {
            config,
            layout: None,
            learner: None,
            phase: Phase::Learning,
            iteration: 0,
            maps: Vec::new(),
            blocks: Vec::new(),
            block_phase: Vec::new(),
            switched_after: None,
        })
    }

    /// Chooses equal-width bins over the disclosed attribute ranges.
    pub fn define_layout(&mut self, meta: &SessionMetadata) -> Result<BinLayout> {
        if meta.c_max != self.config.c_max {
            return Err(Error::Protocol(format!(
                "owner declared C_max {} but session expects {}",
                meta.c_max, self.config.c_max
            )));
        }
        let layout = BinLayout::equal_width(&meta.attribute_ranges, self.config.bins)?;
        self.install_layout(layout.clone());
        Ok(layout)
    }

    pub fn install_layout(&mut self, layout: BinLayout) {
        self.learner = Some(LearnerState::new(
            layout.rows(),
            self.config.c_max as usize,
            self.config.learner,
        ));
        self.layout = Some(layout);
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// 1-based iteration after whose report the session moved to prediction.
    pub fn switched_after(&self) -> Option<usize> {
        self.switched_after
    }

    pub fn pseudo_counts(&self) -> &[Vec<Vec<f64>>] {
        &self.blocks
    }

    /// Released values the learner has counted so far (DPOAD only).
    pub fn samples_seen(&self) -> u64 {
        self.learner.as_ref().map_or(0, |l| l.n_samples())
    }

    pub fn step(&mut self, release: &OwnerRelease) -> Result<MsspReport> {
        let layout = self
            .layout
            .as_ref()
            .ok_or_else(|| Error::Protocol("layout not defined".into()))?;
        if release.iteration != self.iteration {
            return Err(Error::Protocol(format!(
                "release iteration {} but analyst is at {}",
                release.iteration, self.iteration
            )));
        }
        if release.layout_id != layout.id() || release.rows != layout.rows() {
            return Err(Error::Protocol("release does not match the bin layout".into()));
        }
        if release.phase == Phase::Prediction && self.maps.len() != release.rows {
            return Err(Error::Protocol("prediction release before any score map".into()));
        }
        let cfg = self.config.clone();
        let rows = release.rows;
        let c_max = cfg.c_max as usize;

        let pseudo: Vec<Vec<f64>> = (0..rows)
            .map(|r| {
                let row = release.payload_row(r);
                match (release.phase, cfg.noise_space) {
                    (Phase::Prediction, NoiseSpace::Score) => reconstruct(row, &self.maps[r])
                        .into_iter()
                        .map(|c| c as f64)
                        .collect(),
                    _ => row.to_vec(),
                }
            })
            .collect();
        self.blocks.push(pseudo);
        self.block_phase.push(release.phase);

        let groups: Vec<usize> = self
            .block_phase
            .iter()
            .map(|p| if *p == Phase::Learning { 0 } else { 1 })
            .collect();
        let scores = cumulative_scores(&self.blocks, &groups, cfg.unit_len)?;

        let mut report = MsspReport {
            iteration: self.iteration,
            anomaly_scores: scores,
            updated_pdfs: Vec::new(),
            sampled_sensitivity: None,
            score_sensitivities: Vec::new(),
            m: 0,
            k: 0,
            phase_recommendation: Phase::Learning,
        };

        let learner = self.learner.as_mut().expect("layout installs learner");
        if cfg.mechanism == Mechanism::Dpoad {
            let last = self.blocks.last().expect("just pushed");
            match release.phase {
                Phase::Learning => match cfg.learning_source {
                    LearningSource::FrequencyHistogram => {
                        let width = c_max + 1;
                        if release.histograms.len() != rows * width {
                            return Err(Error::Protocol(
                                "learning release lacks frequency histograms".into(),
                            ));
                        }
                        for (r, h) in release.histograms.chunks_exact(width).enumerate() {
                            learner.absorb_histogram(r, h)?;
                        }
                        learner.count_released(release.payload.len() as u64);
                        learner.refit_from_histograms();
                    }
                    LearningSource::NoisyCounts => {
                        for (r, row) in last.iter().enumerate().take(rows) {
                            learner.absorb(r, row, release.noise_scales[r])?;
                        }
                        learner.refit()?;
                    }
                },
                Phase::Prediction => {
                    learner.count_released(release.payload.len() as u64);
                    let units = release.cols / cfg.unit_len;
                    let tail = &report.anomaly_scores[report.anomaly_scores.len() - rows * units..];
                    let identity: Vec<f64> = (0..=c_max).map(|c| c as f64).collect();
                    for r in 0..rows {
                        let slot_scores: Vec<f64> = (0..release.cols)
                            .map(|c| {
                                let u = c / cfg.unit_len;
                                if u < units {
                                    tail[r * units + u]
                                } else {
                                    0.0
                                }
                            })
                            .collect();
                        let image = match cfg.noise_space {
                            NoiseSpace::Score => self.maps[r].table(),
                            NoiseSpace::Count => &identity[..],
                        };
                        let next = update_pdf_posterior(
                            &learner.pdfs()[r],
                            release.payload_row(r),
                            image,
                            release.noise_scales[r],
                            &slot_scores,
                            cfg.learner.blend,
                        )?;
                        learner.set_pdf(r, next)?;
                    }
                }
            }
            if self.phase == Phase::Learning
                && phase_switch_ready(learner, cfg.epsilon, cfg.learner.c_const)
            {
                self.phase = Phase::Prediction;
                self.switched_after = Some(self.iteration + 1);
            }
            if self.phase == Phase::Prediction {
                let params = prediction_params(
                    learner.n_samples(),
                    cfg.epsilon,
                    c_max + 1,
                    cfg.learner.c_const,
                    cfg.gamma,
                )?;
                let widest = learner
                    .pdfs()
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.variance().total_cmp(&b.1.variance()).then(b.0.cmp(&a.0)))
                    .map(|(i, _)| i)
                    .unwrap_or(0);
                let mut srng = stream(cfg.seed, self.iteration as u64, Purpose::AnalystSensitivity);
                let chosen = CandidateLaw::of(&learner.pdfs()[widest], cfg.candidate_mode)
                    .order_statistic(params.m, params.k, &mut srng)?;
                self.maps = learner
                    .pdfs()
                    .iter()
                    .map(|p| build_score_map(p, cfg.n_effective))
                    .collect();
                if cfg.score_sensitivity == ScoreSensitivity::Sampled {
                    report.score_sensitivities = learner
                        .pdfs()
                        .iter()
                        .zip(&self.maps)
                        .map(|(p, map)| {
                            CandidateLaw::image_differences(p, map.table())?
                                .order_statistic(params.m, params.k, &mut srng)
                        })
                        .collect::<Result<Vec<_>>>()?;
                }
                report.sampled_sensitivity = Some(chosen);
                report.m = params.m;
                report.k = params.k;
                report.phase_recommendation = Phase::Prediction;
            }
        }
        report.updated_pdfs = learner.pdfs().to_vec();
        self.iteration += 1;
        Ok(report)
    }
}

/// Scores units of every block. Blocks sharing a group id pool their rows
/// into one reference per row.
pub fn cumulative_scores(blocks: &[Vec<Vec<f64>>], groups: &[usize], unit_len: usize) -> Result<Vec<f64>> {
    if blocks.len() != groups.len() {
        return Err(Error::LengthMismatch {
            left: blocks.len(),
            right: groups.len(),
        });
    }
    let rows = blocks.first().map_or(0, Vec::len);
    let mut refs: std::collections::BTreeMap<usize, Vec<Vec<f64>>> = Default::default();
    for (b, g) in blocks.iter().zip(groups) {
        let entry = refs.entry(*g).or_insert_with(|| vec![Vec::new(); rows]);
        for (r, row) in b.iter().enumerate() {
            entry[r].extend_from_slice(row);
        }
    }
    let mut out = Vec::new();
    for (b, g) in blocks.iter().zip(groups) {
        out.extend(score_units(&refs[g], b, unit_len)?);
    }
    Ok(out)
}

/// Per-iteration record of a session.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub release: OwnerRelease,
    pub report: MsspReport,
    pub anomaly: AnomalyReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionTrace {
    pub entries: Vec<TraceEntry>,
    pub phase_switch_iter: Option<usize>,
}

impl SessionTrace {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            s.push_str(&crate::wire::release_to_text(&e.release));
            s.push_str(&crate::wire::report_to_text(&e.report));
        }
        s
    }
}

/// Runs a full session: metadata exchange, then one owner/analyst round
/// per batch of time windows.
pub fn run_session(
    batches: &[Vec<Vec<Record>>],
    attribute_ranges: Vec<(f64, f64)>,
    config: &SessionConfig,
) -> Result<SessionTrace> {
    if batches.is_empty() {
        return Err(Error::InvalidArgument("session needs at least one batch".into()));
    }
    let mut owner = Owner::new(config.clone())?;
    let mut mssp = Mssp::new(config.clone())?;
    let layout = mssp.define_layout(&owner.metadata(attribute_ranges))?;
    owner.accept_layout(layout.clone());
    let counts = batches
        .iter()
        .map(|b| layout.bin_windows(b))
        .collect::<Result<Vec<_>>>()?;
    run_counts(&mut owner, &mut mssp, counts)
}

/// Runs a session over pre-binned batches on an owner and analyst that
/// already share a layout.
pub fn run_counts(owner: &mut Owner, mssp: &mut Mssp, batches: Vec<CountMatrix>) -> Result<SessionTrace> {
    let mut entries = Vec::with_capacity(batches.len());
    for (i, counts) in batches.into_iter().enumerate() {
        let entry = session_round(owner, mssp, counts).map_err(|e| e.at_iteration(i + 1))?;
        entries.push(entry);
    }
    Ok(SessionTrace {
        entries,
        phase_switch_iter: mssp.switched_after(),
    })
}

pub fn session_round(owner: &mut Owner, mssp: &mut Mssp, counts: CountMatrix) -> Result<TraceEntry> {
    let release = owner.step_counts(counts)?;
    let report = mssp.step(&release)?;
    owner.receive(&report)?;
    let anomaly = AnomalyReport::new(
        report.anomaly_scores.clone(),
        owner.config.threshold,
        release.iteration + 1,
    )?;
    Ok(TraceEntry {
        release,
        report,
        anomaly,
    })
}
